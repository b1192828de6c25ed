"""Numerical laboratory for spectral observability inequalities.

Modules:
    grids          periodic grids, fields, band projections, tube norms
    thick          thick observation sets and exact thickness verification
    kernels        hot loops with a compiled core and a numpy fallback
    spectral       Schrodinger operators, eigensolves, functional calculus
    observability  compressed Gram constants, sweeps, the end-to-end pipeline
    carleman       weighted inequalities for the dbar operator in the plane
    interpolation  certificate checks bounding observed-vs-global norms
    config         INI experiment configs with line-anchored validation
    cli            experiment runner writing deterministic artifacts
"""

from uncplab import (
    carleman,
    config,
    grids,
    interpolation,
    kernels,
    observability,
    spectral,
    thick,
)

__version__ = "0.1.0"

__all__ = [
    "carleman",
    "config",
    "grids",
    "interpolation",
    "kernels",
    "observability",
    "spectral",
    "thick",
    "__version__",
]
