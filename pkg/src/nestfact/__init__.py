"""Nest-relative triangular factorization of positive operators."""
from .diagonal import Partition, finite_diagonal, partition_diagonal, refinement_sweep
from .factor import corrected_factor, factor_continual, factor_finite, volterra_demo
from .nest import Nest, coordinate_nest, image_nest

__all__ = [
    "Nest",
    "Partition",
    "coordinate_nest",
    "corrected_factor",
    "factor_continual",
    "factor_finite",
    "finite_diagonal",
    "image_nest",
    "partition_diagonal",
    "refinement_sweep",
    "volterra_demo",
]
__version__ = "0.1.0"
