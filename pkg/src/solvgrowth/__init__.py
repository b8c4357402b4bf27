"""Growth certificates for solvable matrix groups over small finite fields.

Exact product-set calculus, unipotent exp/log structure, torus weight data,
the pivoting dichotomy, descent capture, and a driver that returns a
machine-checkable growth-or-structure certificate.
"""

from .field import FieldCtx, FieldElement, default_modulus, is_irreducible
from .matrix import GroupElement
from .sets import ElementSet, pairwise_product, product_set, product_set_depths
from .groups import (
    QuotientGroup,
    centralizer,
    group_closure,
    is_nilpotent,
    is_solvable,
    lower_central_series,
    quotient_group,
)

__all__ = [
    "FieldCtx",
    "FieldElement",
    "GroupElement",
    "ElementSet",
    "QuotientGroup",
    "default_modulus",
    "is_irreducible",
    "pairwise_product",
    "product_set",
    "product_set_depths",
    "centralizer",
    "group_closure",
    "is_nilpotent",
    "is_solvable",
    "lower_central_series",
    "quotient_group",
]
