import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kgeaffine import geometry as g
from kgeaffine.errors import ParameterError, SingularOperatorError

angles = st.floats(-np.pi, np.pi, allow_nan=False)


class TestElementary2D:
    def test_zero_translation_is_identity(self):
        op = g.make_operator_2d("T", (0.0, 0.0))
        assert np.array_equal(op.matrix, np.eye(3))
        assert op.group == "SE"

    def test_quarter_turn(self):
        op = g.make_operator_2d("R", (np.pi / 2,))
        expect = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        assert np.allclose(op.matrix, expect, atol=1e-15)
        assert op.group == "SE"

    def test_scaling_matrix(self):
        op = g.make_operator_2d("S", (2.0, 3.0))
        assert np.array_equal(op.matrix, np.diag([2.0, 3.0, 1.0]))
        assert op.group == "Aff"

    def test_nonfinite_params_rejected(self):
        with pytest.raises(ParameterError):
            g.make_operator_2d("T", (np.nan, 0.0))


class TestElementary3D:
    def test_zero_rotation_is_identity(self):
        op = g.make_operator_3d("R", (0.0, 0.0, 0.0))
        assert np.array_equal(op.matrix, np.eye(4))

    def test_yaw_quarter_turn(self):
        op = g.make_operator_3d("R", (np.pi / 2, 0.0, 0.0))
        expect = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        assert np.allclose(op.matrix[:3, :3], expect, atol=1e-15)
        assert op.group == "SO"

    @staticmethod
    def closed_form(alpha, beta, gamma):
        """Independent oracle: the expanded yaw-pitch-roll entries."""
        ca, sa = np.cos(alpha), np.sin(alpha)
        cb, sb = np.cos(beta), np.sin(beta)
        cg, sg = np.cos(gamma), np.sin(gamma)
        return np.array([
            [ca * cb, ca * sb * sg - sa * cg, ca * sb * cg + sa * sg],
            [sa * cb, sa * sb * sg + ca * cg, sa * sb * cg - ca * sg],
            [-sb, cb * sg, cb * cg],
        ])

    def test_rotation_matches_closed_form(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            a, b, c = rng.uniform(-np.pi, np.pi, 3)
            op = g.make_operator_3d("R", (a, b, c))
            assert np.abs(op.matrix[:3, :3] - self.closed_form(a, b, c)).max() < 1e-12

    def test_rotation_equals_factor_composition_bitwise(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            a, b, c = rng.uniform(-np.pi, np.pi, 3)
            combined = g.make_operator_3d("R", (a, b, c))
            factored = g.compose([
                g.make_operator_3d("R", (a, 0.0, 0.0)),
                g.make_operator_3d("R", (0.0, b, 0.0)),
                g.make_operator_3d("R", (0.0, 0.0, c)),
            ])
            assert np.array_equal(combined.matrix, factored.matrix)

    def test_axis_reflection(self):
        op = g.make_operator_3d("F", (1.0, 0.0, 0.0))
        assert np.array_equal(op.matrix, np.diag([-1.0, 1.0, 1.0, 1.0]))

    def test_diagonal_reflection(self):
        n = (1 / np.sqrt(2), 1 / np.sqrt(2), 0.0)
        op = g.make_operator_3d("F", n)
        expect = np.eye(3) - 2 * np.outer(n, n)  # independent oracle
        assert np.abs(op.matrix[:3, :3] - expect).max() < 1e-15
        assert np.allclose(op.matrix[:3, :3], [[0, -1, 0], [-1, 0, 0], [0, 0, 1]], atol=1e-12)

    def test_non_unit_normal_rejected(self):
        with pytest.raises(ParameterError):
            g.make_operator_3d("F", (1.0, 1.0, 0.0))

    def test_shear_product_vs_displayed(self):
        sh = np.array([0.3, -0.2, 0.5, 0.1, -0.4, 0.25])
        prod = g.make_operator_3d("H", sh, shear_form="product").matrix
        disp = g.make_operator_3d("H", sh, shear_form="displayed").matrix
        # displayed: unit diagonal with the six coefficients off it
        assert np.array_equal(np.diag(disp), np.ones(4))
        assert disp[0, 1] == sh[0] and disp[2, 1] == sh[5]
        # the literal factor product picks up cross terms, e.g. (1,1)
        assert prod[1, 1] == pytest.approx(1.0 + sh[2] * sh[0], abs=1e-15)
        h_yz = np.eye(4); h_yz[1, 0] = sh[2]; h_yz[2, 0] = sh[4]
        h_xz = np.eye(4); h_xz[0, 1] = sh[0]; h_xz[2, 1] = sh[5]
        h_xy = np.eye(4); h_xy[0, 2] = sh[1]; h_xy[1, 2] = sh[3]
        assert np.allclose(prod, h_yz @ h_xz @ h_xy, atol=1e-15)


def random_compound_2d(rng):
    return g.compose([
        g.make_operator_2d("T", rng.uniform(-2, 2, 2)),
        g.make_operator_2d("R", rng.uniform(-np.pi, np.pi, 1)),
        g.make_operator_2d("S", rng.uniform(0.2, 3.0, 2) * rng.choice([-1, 1], 2)),
    ])


class TestComposeInvert:
    def test_trs_example(self):
        op = g.compose([
            g.make_operator_2d("T", (1.0, -1.0)),
            g.make_operator_2d("R", (np.pi / 2,)),
            g.make_operator_2d("S", (2.0, 3.0)),
        ])
        expect = np.array([[0.0, -3.0, 1.0], [2.0, 0.0, -1.0], [0.0, 0.0, 1.0]])
        assert np.abs(op.matrix - expect).max() < 1e-15
        assert op.group == "Aff"

    def test_translation_rotation_stays_se(self):
        op = g.compose([
            g.make_operator_2d("T", (0.5, 0.7)),
            g.make_operator_2d("R", (1.1,)),
        ])
        assert op.group == "SE"
        a = op.linear
        assert np.abs(a.T @ a - np.eye(2)).max() < 1e-12

    def test_compose_identity(self):
        ident = g.make_operator_2d("T", (0.0, 0.0))
        assert np.array_equal(g.compose([ident]).matrix, np.eye(3))

    def test_dimension_mismatch(self):
        with pytest.raises(ParameterError):
            g.compose([g.make_operator_2d("T", (0, 0)), g.make_operator_3d("T", (0, 0, 0))])

    def test_invert_identity_and_diagonal(self):
        ident = g.make_operator_2d("T", (0.0, 0.0))
        assert np.array_equal(g.invert(ident).matrix, np.eye(3))
        inv = g.invert(g.make_operator_2d("S", (2.0, 4.0)))
        assert np.array_equal(inv.matrix, np.diag([0.5, 0.25, 1.0]))

    def test_invert_random_compounds(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            op = random_compound_2d(rng)
            inv = g.invert(op)
            assert np.abs(op.matrix @ inv.matrix - np.eye(3)).max() < 1e-9
            assert np.abs(inv.matrix @ op.matrix - np.eye(3)).max() < 1e-9

    def test_singular_names_scale_axis(self):
        op = g.make_operator_2d("S", (0.0, 2.0))
        with pytest.raises(SingularOperatorError, match="along x"):
            g.invert(op)


class TestGroupLaws:
    def test_se_closure(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            a = g.compose([g.make_operator_2d("T", rng.uniform(-1, 1, 2)),
                           g.make_operator_2d("R", rng.uniform(-np.pi, np.pi, 1))])
            b = g.compose([g.make_operator_2d("T", rng.uniform(-1, 1, 2)),
                           g.make_operator_2d("R", rng.uniform(-np.pi, np.pi, 1))])
            ab = g.compose([a, b])
            assert ab.group == "SE"
            lin = ab.linear
            assert np.abs(lin.T @ lin - np.eye(2)).max() < 1e-9
            assert abs(np.linalg.det(lin) - 1) < 1e-9

    @given(angles, angles, angles)
    @settings(max_examples=80, deadline=None)
    def test_rotation_orthonormality(self, a, b, c):
        lin = g.make_operator_3d("R", (a, b, c)).linear
        assert np.abs(lin.T @ lin - np.eye(3)).max() < 1e-9
        assert abs(np.linalg.det(lin) - 1.0) < 1e-9

    def test_householder_involution_and_det(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            n = rng.standard_normal(3)
            n /= np.linalg.norm(n)
            f = g.make_operator_3d("F", n)
            assert np.abs(f.matrix @ f.matrix - np.eye(4)).max() < 1e-9
            assert abs(np.linalg.det(f.linear) + 1.0) < 1e-9


class TestBlockDiagonal:
    def test_identity_params(self):
        params = g.CompoundParams.identity(2, 3, ops=("T", "S", "R"))
        v = np.arange(6.0)
        assert np.allclose(g.apply_block_diagonal(params, v), v, atol=1e-15)

    def test_single_translation_block(self):
        params = g.CompoundParams(block_dim=2, ops=("T",), translation=np.array([[1.0, 1.0]]))
        assert np.array_equal(g.apply_block_diagonal(params, np.zeros(2)), [1.0, 1.0])

    def test_two_3d_blocks_match_dense_oracle(self):
        rng = np.random.default_rng(9)
        nb = 2
        params = g.CompoundParams(
            block_dim=3,
            ops=("T", "S", "R", "F", "H"),
            translation=rng.uniform(-1, 1, (nb, 3)),
            scale=rng.uniform(0.5, 2.0, (nb, 3)),
            angles=rng.uniform(-np.pi, np.pi, (nb, 3)),
            normal=(lambda x: x / np.linalg.norm(x, axis=1, keepdims=True))(rng.standard_normal((nb, 3))),
            shear=rng.uniform(-0.5, 0.5, (nb, 6)),
        )
        v = rng.standard_normal(6)
        # dense oracle: explicit block matrix plus offset vector
        dense = np.zeros((6, 6))
        offset = np.zeros(6)
        for i in range(nb):
            single = g.CompoundParams(
                block_dim=3, ops=params.ops,
                translation=params.translation[i:i + 1], scale=params.scale[i:i + 1],
                angles=params.angles[i:i + 1], normal=params.normal[i:i + 1],
                shear=params.shear[i:i + 1],
            )
            hom = g.compound_matrices(single.ops, {k: single.param_array(k) for k in single.ops}, 3)[0]
            dense[3 * i: 3 * i + 3, 3 * i: 3 * i + 3] = hom[:3, :3]
            offset[3 * i: 3 * i + 3] = hom[:3, 3]
        assert np.abs(g.apply_block_diagonal(params, v) - (dense @ v + offset)).max() < 1e-9

    def test_length_mismatch(self):
        params = g.CompoundParams.identity(2, 3, ops=("T",))
        with pytest.raises(ParameterError):
            g.apply_block_diagonal(params, np.zeros(5))

    def test_compound_params_validation(self):
        with pytest.raises(ParameterError):
            g.CompoundParams(block_dim=3, ops=("F",), normal=np.array([[1.0, 1.0, 0.0]]))
        with pytest.raises(ParameterError):
            g.CompoundParams(block_dim=2, ops=("T",), translation=np.zeros((2, 3)))


class TestOperatorMatrixValidation:
    def test_so_tag_requires_det_one(self):
        with pytest.raises(ParameterError):
            g.OperatorMatrix(np.diag([-1.0, 1.0, 1.0, 1.0]), "SO")

    def test_last_row_enforced(self):
        m = np.eye(3)
        m[2, 0] = 0.5
        with pytest.raises(ParameterError):
            g.OperatorMatrix(m, "Aff")

    def test_printing_six_significant_digits(self):
        text = str(g.make_operator_2d("R", (np.pi / 3,)))
        assert "0.866025" in text and "SE" in text
