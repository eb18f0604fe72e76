"""Knowledge-graph embedding toolkit.

Trains and evaluates link-prediction models: translation/rotation/scaling
distance families, bilinear and tensor-factorization families, and
compound affine relation operators applied block-diagonally in 2D or 3D
subspaces.
"""

__version__ = "0.1.0"

from . import datasets, evaluation, geometry, models, objectives, trainer

__all__ = ["datasets", "evaluation", "geometry", "models", "objectives", "trainer"]
