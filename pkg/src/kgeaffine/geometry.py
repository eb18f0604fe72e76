"""Homogeneous-coordinate geometric operators in 2D and 3D.

Operators are square matrices with last row ``[0, ..., 0, 1]``: 3x3 for
2D, 4x4 for 3D. Elementary kinds are translation ``T``, scaling ``S``,
rotation ``R``, Householder reflection ``F`` (3D), and shear ``H`` (3D).
Cascading elementary operators yields compound operators; block-diagonal
stacks of compounds act on high-dimensional vectors two or three
coordinates at a time.

All builders accept parameter arrays with arbitrary leading dimensions
and return matrices with matching leading dimensions, so the same code
constructs a single operator or a whole batch of per-block operators.
Application to vectors is done in Cartesian form (``A x + v``), not by
carrying a homogeneous 1.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, SingularOperatorError

GROUP_RANK = {"SO": 0, "SE": 1, "Aff": 2}

# parameter count per operator kind, by block dimension
OP_PARAM_COUNTS = {
    2: {"T": 2, "S": 2, "R": 1},
    3: {"T": 3, "S": 3, "R": 3, "F": 3, "H": 6},
}

_ORTHO_TOL = 1e-9
_UNIT_NORMAL_TOL = 1e-6
_SINGULAR_TOL = 1e-12


@dataclass(frozen=True)
class OperatorMatrix:
    """A homogeneous operator matrix tagged with its group membership."""

    matrix: np.ndarray
    group: str

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        object.__setattr__(self, "matrix", m)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] not in (3, 4):
            raise ParameterError(f"operator matrix must be 3x3 or 4x4, got {m.shape}")
        if self.group not in GROUP_RANK:
            raise ParameterError(f"unknown group tag {self.group!r}")
        last = np.zeros(m.shape[0])
        last[-1] = 1.0
        if not np.array_equal(m[-1], last):
            raise ParameterError("last row must be [0, ..., 0, 1]")
        a = self.linear
        if self.group == "SO":
            if not _is_special_orthogonal(a) or np.any(self.translation != 0.0):
                raise ParameterError("SO tag requires an orthogonal det-1 block and no translation")
        elif self.group == "SE":
            if not _is_special_orthogonal(a):
                raise ParameterError("SE tag requires the linear block in SO")

    @property
    def dim(self):
        """Cartesian dimension (2 or 3)."""
        return self.matrix.shape[0] - 1

    @property
    def linear(self):
        return self.matrix[:-1, :-1]

    @property
    def translation(self):
        return self.matrix[:-1, -1]

    def apply(self, x):
        """Transform a Cartesian point: ``A x + v``."""
        x = np.asarray(x, dtype=np.float64)
        return self.linear @ x + self.translation

    def __str__(self):
        rows = [
            "[" + ", ".join(f"{v:.6g}" for v in row) + "]" for row in self.matrix
        ]
        return f"OperatorMatrix<{self.group}>[" + ", ".join(rows) + "]"


def _is_special_orthogonal(a, tol=_ORTHO_TOL):
    eye = np.eye(a.shape[0])
    return (
        np.abs(a.T @ a - eye).max() <= tol
        and abs(np.linalg.det(a) - 1.0) <= tol
    )


def _as_float(params):
    """Keep float32/float64 as-is; promote anything else to float64."""
    params = np.asarray(params)
    if params.dtype not in (np.float32, np.float64):
        params = params.astype(np.float64)
    return params


def _eye_like(params, dim):
    shape = params.shape[:-1] + (dim + 1, dim + 1)
    m = np.zeros(shape, dtype=params.dtype)
    idx = np.arange(dim + 1)
    m[..., idx, idx] = 1.0
    return m


def _basis(dim, i, j, dtype=np.float64):
    e = np.zeros((dim + 1, dim + 1), dtype=dtype)
    e[i, j] = 1.0
    return e


def op_matrix_2d(kind, params):
    """Elementary 2D operator matrices, vectorized over leading dims.

    ``params`` has trailing length 2 for T (vx, vy) and S (sx, sy), 1 for
    R (theta).
    """
    params = _as_float(params)
    if kind == "T":
        m = _eye_like(params, 2)
        m[..., 0, 2] = params[..., 0]
        m[..., 1, 2] = params[..., 1]
    elif kind == "S":
        m = _eye_like(params, 2)
        m[..., 0, 0] = params[..., 0]
        m[..., 1, 1] = params[..., 1]
    elif kind == "R":
        c, s = np.cos(params[..., 0]), np.sin(params[..., 0])
        m = _eye_like(params, 2)
        m[..., 0, 0] = c
        m[..., 0, 1] = -s
        m[..., 1, 0] = s
        m[..., 1, 1] = c
    else:
        raise ParameterError(f"unknown 2D operator kind {kind!r}")
    return m


def op_matrix_2d_grads(kind, params):
    """d(matrix)/d(param) for each scalar parameter, in parameter order.

    Constant derivatives are returned as plain (3, 3) arrays; they
    broadcast against batched matrices.
    """
    params = _as_float(params)
    if kind == "T":
        return [_basis(2, 0, 2), _basis(2, 1, 2)]
    if kind == "S":
        return [_basis(2, 0, 0), _basis(2, 1, 1)]
    if kind == "R":
        c, s = np.cos(params[..., 0]), np.sin(params[..., 0])
        g = np.zeros(params.shape[:-1] + (3, 3), dtype=params.dtype)
        g[..., 0, 0] = -s
        g[..., 0, 1] = -c
        g[..., 1, 0] = c
        g[..., 1, 1] = -s
        return [g]
    raise ParameterError(f"unknown 2D operator kind {kind!r}")


def _rot3_factors(angles):
    """Yaw/pitch/roll factor matrices for angles (..., 3) = (alpha, beta, gamma)."""
    a, b, g = angles[..., 0], angles[..., 1], angles[..., 2]
    ca, sa = np.cos(a), np.sin(a)
    cb, sb = np.cos(b), np.sin(b)
    cg, sg = np.cos(g), np.sin(g)
    rz = _eye_like(angles, 3)
    rz[..., 0, 0] = ca
    rz[..., 0, 1] = -sa
    rz[..., 1, 0] = sa
    rz[..., 1, 1] = ca
    ry = _eye_like(angles, 3)
    ry[..., 0, 0] = cb
    ry[..., 0, 2] = sb
    ry[..., 2, 0] = -sb
    ry[..., 2, 2] = cb
    rx = _eye_like(angles, 3)
    rx[..., 1, 1] = cg
    rx[..., 1, 2] = -sg
    rx[..., 2, 1] = sg
    rx[..., 2, 2] = cg
    return rz, ry, rx


def _rot3_factor_grads(angles):
    a, b, g = angles[..., 0], angles[..., 1], angles[..., 2]
    ca, sa = np.cos(a), np.sin(a)
    cb, sb = np.cos(b), np.sin(b)
    cg, sg = np.cos(g), np.sin(g)
    shape = angles.shape[:-1] + (4, 4)
    drz = np.zeros(shape, dtype=angles.dtype)
    drz[..., 0, 0] = -sa
    drz[..., 0, 1] = -ca
    drz[..., 1, 0] = ca
    drz[..., 1, 1] = -sa
    dry = np.zeros(shape, dtype=angles.dtype)
    dry[..., 0, 0] = -sb
    dry[..., 0, 2] = cb
    dry[..., 2, 0] = -cb
    dry[..., 2, 2] = -sb
    drx = np.zeros(shape, dtype=angles.dtype)
    drx[..., 1, 1] = -sg
    drx[..., 1, 2] = -cg
    drx[..., 2, 1] = cg
    drx[..., 2, 2] = -sg
    return drz, dry, drx


def _shear_factors(sh):
    """The three shear factor matrices for coefficients
    (sh_yx, sh_zx, sh_xy, sh_zy, sh_xz, sh_yz): H_yz shifts y and z by a
    factor of x, H_xz shifts x and z by y, H_xy shifts x and y by z."""
    h_yz = _eye_like(sh, 3)
    h_yz[..., 1, 0] = sh[..., 2]  # sh_xy
    h_yz[..., 2, 0] = sh[..., 4]  # sh_xz
    h_xz = _eye_like(sh, 3)
    h_xz[..., 0, 1] = sh[..., 0]  # sh_yx
    h_xz[..., 2, 1] = sh[..., 5]  # sh_yz
    h_xy = _eye_like(sh, 3)
    h_xy[..., 0, 2] = sh[..., 1]  # sh_zx
    h_xy[..., 1, 2] = sh[..., 3]  # sh_zy
    return h_yz, h_xz, h_xy


# (factor index, row, col) of each shear coefficient in parameter order
_SHEAR_SLOTS = [(1, 0, 1), (2, 0, 2), (0, 1, 0), (2, 1, 2), (0, 2, 0), (1, 2, 1)]


def op_matrix_3d(kind, params, shear_form="product"):
    """Elementary 3D operator matrices, vectorized over leading dims.

    Trailing parameter length: T and S take 3, R takes the yaw/pitch/roll
    angles (alpha, beta, gamma), F takes a unit normal, H takes the six
    shear coefficients. The rotation is constructed as the matrix product
    Rz(alpha) @ Ry(beta) @ Rx(gamma). The shear is the literal factor
    product H_yz @ H_xz @ H_xy by default; ``shear_form="displayed"``
    instead places the six coefficients directly off the unit diagonal.
    """
    params = _as_float(params)
    if kind == "T":
        m = _eye_like(params, 3)
        m[..., 0, 3] = params[..., 0]
        m[..., 1, 3] = params[..., 1]
        m[..., 2, 3] = params[..., 2]
        return m
    if kind == "S":
        m = _eye_like(params, 3)
        m[..., 0, 0] = params[..., 0]
        m[..., 1, 1] = params[..., 1]
        m[..., 2, 2] = params[..., 2]
        return m
    if kind == "R":
        rz, ry, rx = _rot3_factors(params)
        return rz @ ry @ rx
    if kind == "F":
        n = params
        m = _eye_like(params, 3)
        m[..., :3, :3] -= 2.0 * n[..., :, None] * n[..., None, :]
        return m
    if kind == "H":
        if shear_form == "displayed":
            m = _eye_like(params, 3)
            for p, (_, i, j) in enumerate(_SHEAR_SLOTS):
                m[..., i, j] = params[..., p]
            return m
        if shear_form == "product":
            h_yz, h_xz, h_xy = _shear_factors(params)
            return h_yz @ h_xz @ h_xy
        raise ParameterError(f"unknown shear_form {shear_form!r}")
    raise ParameterError(f"unknown 3D operator kind {kind!r}")


def op_matrix_3d_grads(kind, params, shear_form="product"):
    """d(matrix)/d(param) per scalar parameter, in parameter order."""
    params = _as_float(params)
    if kind == "T":
        return [_basis(3, 0, 3), _basis(3, 1, 3), _basis(3, 2, 3)]
    if kind == "S":
        return [_basis(3, 0, 0), _basis(3, 1, 1), _basis(3, 2, 2)]
    if kind == "R":
        rz, ry, rx = _rot3_factors(params)
        drz, dry, drx = _rot3_factor_grads(params)
        return [drz @ ry @ rx, rz @ dry @ rx, rz @ ry @ drx]
    if kind == "F":
        n = params
        grads = []
        for j in range(3):
            g = np.zeros(params.shape[:-1] + (4, 4), dtype=params.dtype)
            g[..., j, :3] -= 2.0 * n
            g[..., :3, j] -= 2.0 * n
            grads.append(g)
        return grads
    if kind == "H":
        if shear_form == "displayed":
            return [_basis(3, i, j) for _, i, j in _SHEAR_SLOTS]
        factors = _shear_factors(params)
        grads = []
        for fi, i, j in _SHEAR_SLOTS:
            parts = list(factors)
            parts[fi] = _basis(3, i, j)
            grads.append(parts[0] @ parts[1] @ parts[2])
        return grads
    raise ParameterError(f"unknown 3D operator kind {kind!r}")


def make_operator_2d(kind, params):
    """Build a single tagged 2D operator: T (SE), R (SE), or S (Aff)."""
    params = np.atleast_1d(np.asarray(params, dtype=np.float64))
    expected = OP_PARAM_COUNTS[2].get(kind)
    if expected is None:
        raise ParameterError(f"unknown 2D operator kind {kind!r}")
    if params.shape != (expected,):
        raise ParameterError(f"{kind} takes {expected} parameters, got {params.shape}")
    if not np.all(np.isfinite(params)):
        raise ParameterError(f"{kind} parameters must be finite")
    group = "SE" if kind in ("T", "R") else "Aff"
    return OperatorMatrix(op_matrix_2d(kind, params), group)


def make_operator_3d(kind, params, shear_form="product"):
    """Build a single tagged 3D operator.

    Tags: T is SE, R is SO, S and H are Aff. The reflection F has an
    orthogonal block of determinant -1, so despite being built from an
    orthonormal normal it is tagged Aff. F requires a unit normal (within
    1e-6).
    """
    params = np.atleast_1d(np.asarray(params, dtype=np.float64))
    expected = OP_PARAM_COUNTS[3].get(kind)
    if expected is None:
        raise ParameterError(f"unknown 3D operator kind {kind!r}")
    if params.shape != (expected,):
        raise ParameterError(f"{kind} takes {expected} parameters, got {params.shape}")
    if not np.all(np.isfinite(params)):
        raise ParameterError(f"{kind} parameters must be finite")
    if kind == "F":
        norm = float(np.linalg.norm(params))
        if abs(norm - 1.0) > _UNIT_NORMAL_TOL:
            raise ParameterError(f"reflection normal must be unit length, |n| = {norm:.9f}")
    group = {"T": "SE", "R": "SO", "S": "Aff", "F": "Aff", "H": "Aff"}[kind]
    return OperatorMatrix(op_matrix_3d(kind, params, shear_form), group)


def compose(ops):
    """Left-to-right product of operators; tag is the weakest group."""
    ops = list(ops)
    if not ops:
        raise ParameterError("compose needs at least one operator")
    dim = ops[0].dim
    if any(op.dim != dim for op in ops):
        raise ParameterError("operators of mixed dimension cannot be composed")
    m = ops[0].matrix
    for op in ops[1:]:
        m = m @ op.matrix
    group = max((op.group for op in ops), key=GROUP_RANK.get)
    return OperatorMatrix(m, group)


def invert(op):
    """Inverse operator: [[A^-1, -A^-1 v], [0, 1]].

    Raises SingularOperatorError when |det A| <= 1e-12, naming the axis
    whose scale collapsed.
    """
    a = op.linear
    det = float(np.linalg.det(a))
    if abs(det) <= _SINGULAR_TOL:
        col_norms = np.linalg.norm(a, axis=0)
        axis = "xyz"[int(np.argmin(col_norms))]
        raise SingularOperatorError(
            f"operator is singular (det = {det:.3e}); scale along {axis} is near zero"
        )
    a_inv = np.linalg.inv(a)
    m = np.eye(op.dim + 1)
    m[:-1, :-1] = a_inv
    m[:-1, -1] = -a_inv @ op.translation
    return OperatorMatrix(m, op.group)


@dataclass
class CompoundParams:
    """Per-block parameters of a block-diagonal compound operator.

    Arrays are indexed by block: ``translation`` and ``scale`` have shape
    (n_blocks, block_dim); ``angles`` has trailing length 1 in 2D (theta)
    and 3 in 3D (alpha, beta, gamma); ``normal`` (3D, unit rows) and
    ``shear`` (3D, six coefficients) complete the set. ``ops`` is the
    ordered tuple of enabled operator kinds: the compound matrix is the
    product in that order, so the last listed operator acts first.
    """

    block_dim: int
    ops: tuple
    translation: np.ndarray = None
    scale: np.ndarray = None
    angles: np.ndarray = None
    normal: np.ndarray = None
    shear: np.ndarray = None
    shear_form: str = "product"

    _BY_KIND = {"T": "translation", "S": "scale", "R": "angles", "F": "normal", "H": "shear"}

    def __post_init__(self):
        if self.block_dim not in (2, 3):
            raise ParameterError(f"block_dim must be 2 or 3, got {self.block_dim}")
        self.ops = tuple(self.ops)
        counts = OP_PARAM_COUNTS[self.block_dim]
        n_blocks = None
        for kind in self.ops:
            if kind not in counts:
                raise ParameterError(f"operator {kind!r} is not available in {self.block_dim}D")
            arr = np.asarray(self.param_array(kind), dtype=np.float64)
            if arr.ndim != 2 or arr.shape[1] != counts[kind]:
                raise ParameterError(
                    f"{kind} parameters must have shape (n_blocks, {counts[kind]}), got {arr.shape}"
                )
            setattr(self, self._BY_KIND[kind], arr)
            if n_blocks is None:
                n_blocks = arr.shape[0]
            elif arr.shape[0] != n_blocks:
                raise ParameterError("per-operator parameter arrays disagree on block count")
        if n_blocks is None:
            raise ParameterError("at least one operator kind must be enabled")
        self.n_blocks = n_blocks
        if "F" in self.ops:
            norms = np.linalg.norm(self.normal, axis=1)
            if np.abs(norms - 1.0).max() > _UNIT_NORMAL_TOL:
                raise ParameterError("reflection normals must be unit length (within 1e-6)")

    def param_array(self, kind):
        arr = getattr(self, self._BY_KIND[kind])
        if arr is None:
            raise ParameterError(f"operator {kind!r} enabled but its parameters are missing")
        return arr

    @classmethod
    def identity(cls, block_dim, n_blocks, ops=None):
        """Identity compound: zero translations, unit scales, zero angles."""
        ops = tuple(ops) if ops is not None else (("T", "S", "R") if block_dim == 2 else ("T", "S", "R", "F", "H"))
        kw = {}
        for kind in ops:
            c = OP_PARAM_COUNTS[block_dim][kind]
            if kind == "S":
                arr = np.ones((n_blocks, c))
            elif kind == "F":
                arr = np.zeros((n_blocks, 3))
                arr[:, 0] = 1.0  # unit normal; F(+x) is not the identity map
            else:
                arr = np.zeros((n_blocks, c))
            kw[cls._BY_KIND[kind]] = arr
        return cls(block_dim=block_dim, ops=ops, **kw)


def compound_matrices(ops, param_arrays, block_dim, shear_form="product", want_grads=False):
    """Compound operator matrices from per-kind parameter arrays.

    ``param_arrays`` maps each kind in ``ops`` to an array with trailing
    length equal to the kind's parameter count; leading dimensions are
    shared. Returns the homogeneous product matrix, plus, when
    ``want_grads``, a list of (kind, component_index, d(matrix)/d(param))
    obtained by the product rule over the cascade.
    """
    builder = op_matrix_2d if block_dim == 2 else op_matrix_3d
    grad_builder = op_matrix_2d_grads if block_dim == 2 else op_matrix_3d_grads
    kw = {} if block_dim == 2 else {"shear_form": shear_form}

    mats = [builder(kind, param_arrays[kind], **kw) for kind in ops]
    m = mats[0]
    for factor in mats[1:]:
        m = m @ factor
    if not want_grads:
        return m

    n = len(ops)
    prefixes = [None] * n  # product of mats[:k]
    suffixes = [None] * n  # product of mats[k+1:]
    acc = None
    for k in range(n):
        prefixes[k] = acc
        acc = mats[k] if acc is None else acc @ mats[k]
    acc = None
    for k in range(n - 1, -1, -1):
        suffixes[k] = acc
        acc = mats[k] if acc is None else mats[k] @ acc

    grads = []
    for k, kind in enumerate(ops):
        for j, dop in enumerate(grad_builder(kind, param_arrays[kind], **kw)):
            g = dop
            if prefixes[k] is not None:
                g = prefixes[k] @ g
            if suffixes[k] is not None:
                g = g @ suffixes[k]
            grads.append((kind, j, g))
    return m, grads


def apply_block_diagonal(params, v):
    """Apply a block-diagonal compound operator to a flat vector.

    The vector is split into consecutive slices of ``block_dim``
    coordinates; slice ``i`` is transformed by block ``i``'s compound in
    Cartesian form. Equals the dense block-diagonal matrix product.
    """
    v = np.asarray(v, dtype=np.float64)
    bd = params.block_dim
    if v.ndim != 1 or v.size != params.n_blocks * bd:
        raise ParameterError(
            f"vector length {v.size} does not match {params.n_blocks} blocks of dim {bd}"
        )
    arrays = {kind: params.param_array(kind) for kind in params.ops}
    m = compound_matrices(params.ops, arrays, bd, shear_form=params.shear_form)
    x = v.reshape(params.n_blocks, bd)
    z = np.einsum("bij,bj->bi", m[:, :bd, :bd], x) + m[:, :bd, bd]
    return z.reshape(-1)
