"""Finite-truncation constructions for tuples of commuting isometries.

Coefficient-space models of truncated Hardy spaces, Berger-Coburn-Lebow model
tuples and their canonical extraction via the Wold-von Neumann map,
Beurling-Lax-Halmos factorization of joint invariant subspaces, and the
explicit unitary equivalences between the C*-algebras attached to
finite-codimension invariant subspaces of H^2(D^n) and to H^2(D^n) itself.
Every theorem-level identity is realized as a checkable residual or rank
assertion with an explicit validity window.
"""

from .bcl import BCLTuple, find_intertwiner, tuple_symbols, validate_tuple
from .blhfactor import (FactorResult, InvariantSubspaceSpec, blh_theta,
                        factor_subspace, psi_from_theta, uniqueness_tau)
from .canon import (ExtractedModel, IsometryOracle, WanderingData, WoldMap,
                    coordinate_shift_oracle, extract_model, matpoly_oracle,
                    product_oracle, projection_conjugation_check,
                    wandering_subspace, wold_map)
from .coeffspace import (DegreeGrid, PolyVec, SubspaceBasis, canonical_basis,
                         inner_product, project, shift_adjoint_apply,
                         shift_apply, subspace_from_span)
from .cstar import (CoDoublyCommutingSpec, DecompositionLayout,
                    EquivalenceResult, FiniteRankResidual, codouble_equivalence,
                    codouble_subspace, commutator_check, find_monomial_codouble,
                    full_equivalence, nested_equivalence, permuted_spec,
                    word_compression_check)
from .errors import (GridMismatchError, GridOverflowError, GridTooSmallError,
                     IsoshiftError, LayoutError, NotAShiftError,
                     NotCommutingError, NotInvariantError, PreconditionError,
                     SchemaError)
from .matpoly import (FiniteBlaschke, MatPoly, blaschke_taylor, is_inner,
                      matpoly_adjoint_apply, matpoly_apply, model_space_basis,
                      toeplitz_matrix)
from .report import Check, VerificationReport

__version__ = "0.1.0"

__all__ = [
    "BCLTuple", "Check", "CoDoublyCommutingSpec", "DecompositionLayout",
    "DegreeGrid", "EquivalenceResult", "ExtractedModel", "FactorResult",
    "FiniteBlaschke", "FiniteRankResidual", "GridMismatchError",
    "GridOverflowError", "GridTooSmallError", "InvariantSubspaceSpec",
    "IsometryOracle", "IsoshiftError", "LayoutError", "MatPoly",
    "NotAShiftError", "NotCommutingError", "NotInvariantError", "PolyVec",
    "PreconditionError", "SchemaError", "SubspaceBasis", "VerificationReport",
    "WanderingData", "WoldMap", "blaschke_taylor", "blh_theta",
    "canonical_basis", "codouble_equivalence", "codouble_subspace",
    "commutator_check", "coordinate_shift_oracle", "extract_model",
    "factor_subspace", "find_intertwiner", "find_monomial_codouble",
    "full_equivalence", "inner_product", "is_inner", "matpoly_adjoint_apply",
    "matpoly_apply", "matpoly_oracle", "model_space_basis",
    "nested_equivalence", "permuted_spec", "product_oracle", "project",
    "projection_conjugation_check", "psi_from_theta", "shift_adjoint_apply",
    "shift_apply", "subspace_from_span", "toeplitz_matrix", "tuple_symbols",
    "uniqueness_tau", "validate_tuple", "wandering_subspace", "wold_map",
    "word_compression_check",
]
