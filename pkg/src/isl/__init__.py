"""Numerical laboratory for fractal invariant-set constructions.

Subpackages:

- ``dynamics``: reference flows, RK4 integration, Lyapunov analysis
- ``geometry``: fractal dimensions, sparseness probes, delay embedding
- ``cantor``: exact base-3 Cantor arithmetic and counterfactual experiments
- ``symbolic``: bivalent partitions, shift map, neighborhood sample spaces
- ``qstrings``: quaternion algebra of signed permutations on {A,B} strings
- ``liouville``: donor-cell density transport and volume tracking
- ``cli``: seeded, manifest-writing experiment runner (``isl ...``)
"""

__version__ = "0.1.0"

from . import cantor, dynamics, geometry, liouville, qstrings, rng, symbolic

__all__ = [
    "__version__",
    "cantor",
    "dynamics",
    "geometry",
    "liouville",
    "qstrings",
    "rng",
    "symbolic",
]
