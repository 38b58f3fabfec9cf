"""Series-corrected observables: free-energy density, cut-bond transfer
matrix, and two-site density matrix.

All three consume a normalized unit-cell fixed point and an excitation
catalog.  The free energy returned by the series functions is the correction
on top of the (normalized) belief-propagation background; add
`bp_free_energy` for the absolute per-site value.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .bp import CellFixedPoint
from .loops import ExcitationCatalog, anchored_placements, placement_value

__all__ = [
    "SeriesNotConverged",
    "FreeEnergySeries",
    "free_energy_single",
    "free_energy_multi",
    "bp_free_energy",
    "TransferMatrixResult",
    "transfer_matrix_series",
    "DensityMatrixResult",
    "density_matrix_series",
]

IMAG_WARN = 1e-10


class SeriesNotConverged(RuntimeError):
    """The counting fixed-point iteration did not settle; expansion broke down."""


@dataclass(frozen=True)
class FreeEnergySeries:
    """Per-site series correction to the free energy.

    per_degree maps degree to that degree's total contribution, evaluated at
    the converged f, so the values sum to f.  For the single-excitation
    method the suppression factors are absent and iterations is 1.
    """

    f: float
    per_degree: dict[int, float]
    method: str
    iterations: int
    self_consistency_residual: float


def bp_free_energy(cfp: CellFixedPoint) -> float:
    """Per-site free energy of the pure BP background."""
    if not cfp.normalized:
        raise ValueError("needs a normalized fixed point")
    return -float(cfp.log_scale.real) / cfp.spec.num_sites


def _terms(catalog: ExcitationCatalog):
    out = []
    for e in catalog.entries:
        if e.weight is None:
            raise ValueError("catalog weights not evaluated")
        out.append((e.degree, float(e.multiplicity), e.num_sites, complex(e.weight)))
    return out


def _warn_imag(value: float, context: str) -> None:
    if abs(value) > IMAG_WARN:
        warnings.warn(
            f"imaginary part {value:.2e} in {context}; using the real part",
            stacklevel=3,
        )


def free_energy_single(catalog: ExcitationCatalog) -> FreeEnergySeries:
    """First-order counting: every placement weighted once, no suppression."""
    per_degree: dict[int, float] = {}
    imag = 0.0
    for degree, mult, _, w in _terms(catalog):
        per_degree[degree] = per_degree.get(degree, 0.0) - mult * w.real
        imag = max(imag, abs(mult * w.imag))
    _warn_imag(imag, "single-excitation free energy")
    return FreeEnergySeries(
        f=sum(per_degree.values()),
        per_degree=per_degree,
        method="single",
        iterations=1,
        self_consistency_residual=0.0,
    )


def free_energy_multi(
    catalog: ExcitationCatalog, tol: float = 1e-14, max_iter: int = 100
) -> FreeEnergySeries:
    """Self-consistent counting: f = -sum L W e^{S f}, iterated from f = 0.

    Only the real part of f enters the suppression factors; an imaginary
    residue above 1e-10 triggers a warning.
    """
    terms = _terms(catalog)
    f = 0.0
    delta = 0.0
    for it in range(1, max_iter + 1):
        new = complex(sum(-mult * w * np.exp(s * f) for _, mult, s, w in terms))
        _warn_imag(new.imag, "counting iteration")
        delta = abs(new.real - f)
        f = new.real
        if delta < tol:
            break
    else:
        raise SeriesNotConverged(
            f"counting iteration change still {delta:.2e} after {max_iter} rounds"
        )
    per_degree: dict[int, float] = {}
    for degree, mult, s, w in terms:
        per_degree[degree] = per_degree.get(degree, 0.0) - float(
            (mult * w * np.exp(s * f)).real
        )
    residual = abs(f - sum(per_degree.values()))
    return FreeEnergySeries(
        f=f,
        per_degree=per_degree,
        method="multi",
        iterations=it,
        self_consistency_residual=residual,
    )


# ------------------------------------------------------------------ #
# Cut-bond series                                                     #
# ------------------------------------------------------------------ #


@dataclass(frozen=True)
class TransferMatrixResult:
    """Raw series for the cut-bond transfer matrix.

    per_degree[0] is the vacuum outer product of the two cut-bond messages;
    matrix is the sum of all per-degree contributions, unnormalized.
    """

    matrix: np.ndarray
    per_degree: dict[int, np.ndarray]
    bond: int


@dataclass(frozen=True)
class DensityMatrixResult:
    """Unit-trace two-site density matrix across a bond, plus its raw trace."""

    rho: np.ndarray
    per_degree: dict[int, np.ndarray]
    trace_before_normalization: complex
    bond: int


def _cut_contributions(
    cfp: CellFixedPoint,
    f: float,
    catalog: ExcitationCatalog,
    bond: int,
    impurities: bool,
) -> dict[int, np.ndarray]:
    spec = cfp.spec
    if not 0 <= bond < len(spec.bonds):
        raise ValueError(f"bond {bond} not in the unit cell")
    e0 = (0, 0, bond)
    anchors = spec.edge_endpoints(e0)
    kwargs: dict = {"include_sites": anchors}
    if impurities:
        kwargs["identity_edge"] = e0
        kwargs["impurity_sites"] = anchors
    else:
        kwargs["open_edge"] = e0
    placements = anchored_placements(spec, catalog, anchors)
    placed = {edges for _, edges in placements}
    per_degree = {0: placement_value(cfp, (), **kwargs)}
    for exc, edges in placements:
        # the cut bond is opened (or carries the identity), so a placement
        # through it reduces to its cut-free core; when that core is itself
        # a placement the term is already in the sum once
        if e0 in edges and (edges - {e0}) in placed:
            continue
        term = placement_value(cfp, edges, **kwargs) * np.exp(exc.num_sites * f)
        if exc.degree in per_degree:
            per_degree[exc.degree] = per_degree[exc.degree] + term
        else:
            per_degree[exc.degree] = term
    return per_degree


def transfer_matrix_series(
    cfp: CellFixedPoint,
    f: float,
    catalog: ExcitationCatalog,
    bond: int = 0,
) -> TransferMatrixResult:
    """Sum the open-bond contractions of every excitation touching the cut.

    Placements are all translates of catalog entries whose support contains a
    tensor adjacent to the cut bond, each weighted by e^{S f}; anything not
    touching the cut is excluded (its effect lives in the suppression
    factors).  The free energy correction f must be computed first.
    """
    per_degree = _cut_contributions(cfp, f, catalog, bond, impurities=False)
    matrix = sum(per_degree.values())
    return TransferMatrixResult(matrix=matrix, per_degree=per_degree, bond=bond)


def density_matrix_series(
    cfp: CellFixedPoint,
    f: float,
    catalog: ExcitationCatalog,
    bond: int = 0,
) -> DensityMatrixResult:
    """Two-site density matrix across `bond` from the impurity-pair series.

    Works like the transfer series with impurity tensors at the bond's two
    endpoints; the cut bond itself always carries the identity, never a
    projector.  Output is reshaped to a (d*d) by (d*d) matrix with the ket
    pair grouped row-side, then normalized to unit trace.
    """
    if cfp.cell.impurity is None:
        raise ValueError("cell carries no impurity tensors")
    per_degree = _cut_contributions(cfp, f, catalog, bond, impurities=True)
    raw = sum(per_degree.values())
    # raw axes: (p_ket_a, p_bra_a, p_ket_b, p_bra_b)
    da, db = raw.shape[0], raw.shape[2]
    rho = np.transpose(raw, [0, 2, 1, 3]).reshape(da * db, da * db)
    trace = complex(np.trace(rho))
    if trace == 0:
        raise ValueError("density series has zero trace")
    return DensityMatrixResult(
        rho=rho / trace,
        per_degree=per_degree,
        trace_before_normalization=trace,
        bond=bond,
    )
