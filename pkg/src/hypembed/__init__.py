"""Equivariant embeddings of free groups and the hyperbolic plane into L_p.

Modules:

- ``group``: reduced words, spheres, translate covers, four-point δ.
- ``boundary``: boundary points, the visual metric, shadows.
- ``cocycle``: boundary cocycles, certified ℓ_p norms, exponent fits.
- ``treeembed``: tree embeddings with prescribed compression.
- ``walls``: wall measures in the Poincaré disk and the CND check.
- ``conformal``: Ahlfors regularity, separated covers, the p-versus-Q experiment.
- ``cli``: the ``hypembed`` experiment runner.
"""

from .boundary import BoundaryPoint, Cylinder, ShadowConfig, VisualMetric, ray_to, shadow
from .cocycle import (
    NormEstimate,
    Observable,
    ObservableFamily,
    cocycle_eval,
    compression_fit,
    family_norm,
    lp_norm,
    observable_cover,
    properness_lower,
    summability_threshold,
)
from .group import FiniteGraph, FreeGroup, ResourceCapError, delta_estimate, format_word, parse_word

__all__ = [
    "BoundaryPoint",
    "Cylinder",
    "FiniteGraph",
    "FreeGroup",
    "NormEstimate",
    "Observable",
    "ObservableFamily",
    "ResourceCapError",
    "ShadowConfig",
    "VisualMetric",
    "cocycle_eval",
    "compression_fit",
    "delta_estimate",
    "family_norm",
    "format_word",
    "lp_norm",
    "observable_cover",
    "parse_word",
    "properness_lower",
    "ray_to",
    "shadow",
    "summability_threshold",
]
