"""Series observables against scalar-equation and product-state oracles."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from scipy.optimize import brentq

from tnloop import (
    aklt_peps,
    build_double_layer,
    enumerate_excitations,
    evaluate_catalog,
    find_fixed_point_unitcell,
    hexagonal_lattice,
    spin_matrices,
    total_spin_projector,
)
from tnloop.loops import Excitation, ExcitationCatalog
from tnloop.network import PEPSUnitCell
from tnloop.observables import (
    SeriesNotConverged,
    bp_free_energy,
    density_matrix_series,
    free_energy_multi,
    free_energy_single,
    transfer_matrix_series,
)
from tnloop.reference import boundary_environment


def _toy_catalog(*terms):
    """(degree, num_sites, multiplicity, weight) tuples onto a square cell."""
    spec = hexagonal_lattice()
    entries = []
    for k, (degree, num_sites, mult, w) in enumerate(terms):
        entries.append(
            Excitation(
                edges=frozenset({(k, 0, 0)}),
                degree=degree,
                sites=frozenset({(k, 0, 0)}),
                num_sites=num_sites,
                multiplicity=Fraction(mult),
                weight=w,
            )
        )
    return ExcitationCatalog(
        spec=spec, max_degree=max(t[0] for t in terms), entries=tuple(entries)
    )


# ------------------------------------------------------------ counting


def test_multi_counting_solves_scalar_equation():
    w = 1e-3
    cat = _toy_catalog((4, 4, 1, w))
    res = free_energy_multi(cat)
    # independent root of f + w e^{4f} = 0
    root = brentq(lambda f: f + w * np.exp(4 * f), -1.0, 0.0, xtol=1e-16)
    assert res.f == pytest.approx(root, abs=1e-14)
    assert res.method == "multi"
    assert res.iterations > 1
    assert res.self_consistency_residual < 1e-13
    assert sum(res.per_degree.values()) == pytest.approx(res.f, abs=1e-14)


def test_multi_counting_two_terms():
    terms = [(4, 4, Fraction(1), 2e-3), (6, 6, Fraction(3, 2), -5e-4)]
    cat = _toy_catalog(*terms)
    res = free_energy_multi(cat)

    def g(f):
        return f + sum(
            float(m) * w * np.exp(s * f) for _, s, m, w in terms
        )

    root = brentq(g, -1.0, 1.0, xtol=1e-16)
    assert res.f == pytest.approx(root, abs=1e-13)


def test_single_counting_is_the_plain_sum():
    cat = _toy_catalog((4, 4, 2, 1e-3), (6, 6, 1, -2e-4))
    res = free_energy_single(cat)
    assert res.f == pytest.approx(-(2 * 1e-3 - 2e-4), abs=1e-16)
    assert res.per_degree == pytest.approx({4: -2e-3, 6: 2e-4})
    assert res.iterations == 1
    assert res.self_consistency_residual == 0.0


def test_single_counting_fractional_multiplicity():
    res = free_energy_single(_toy_catalog((6, 6, Fraction(1, 2), 1e-3)))
    assert res.f == pytest.approx(-5e-4, abs=1e-18)


def test_multi_with_zero_weights_converges_immediately():
    res = free_energy_multi(_toy_catalog((4, 4, 1, 0.0), (6, 6, 2, 0.0)))
    assert res.f == 0.0
    assert res.iterations == 1


def test_counting_of_empty_catalog_is_zero():
    cat = ExcitationCatalog(
        spec=hexagonal_lattice(), max_degree=5, entries=()
    )
    assert free_energy_single(cat).f == 0.0
    assert free_energy_multi(cat).f == 0.0


def test_counting_warns_on_imaginary_weight():
    cat = _toy_catalog((4, 4, 1, 1e-3 + 1e-3j))
    with pytest.warns(UserWarning, match="imaginary"):
        free_energy_single(cat)
    with pytest.warns(UserWarning, match="imaginary"):
        free_energy_multi(cat)


def test_counting_rejects_unevaluated_weights():
    spec = hexagonal_lattice()
    cat = enumerate_excitations(spec, 6)
    with pytest.raises(ValueError):
        free_energy_single(cat)


def test_counting_diverges_for_order_one_weight():
    with pytest.raises(SeriesNotConverged):
        free_energy_multi(_toy_catalog((4, 4, 1, 1.0)))


# ---------------------------------------------------------- product model


@pytest.fixture(scope="module")
def product_setup():
    rng = np.random.default_rng(4)
    spec = hexagonal_lattice()
    vs = [rng.standard_normal(2) + 1j * rng.standard_normal(2) for _ in range(2)]
    peps = PEPSUnitCell(
        spec=spec, tensors=tuple(v.reshape(2, 1, 1, 1) for v in vs)
    )
    cfp = find_fixed_point_unitcell(build_double_layer(peps))
    cat = evaluate_catalog(cfp, enumerate_excitations(spec, 12))
    return vs, cfp, cat


def test_product_cell_has_vanishing_series(product_setup):
    vs, cfp, cat = product_setup
    # bond dimension one leaves no excited space on any edge
    assert max(abs(e.weight) for e in cat.entries) == 0.0
    assert free_energy_multi(cat).f == 0.0
    # BP is exact here: the cell value is just the site norms
    want = -sum(np.log(np.vdot(v, v).real) for v in vs) / 2
    assert bp_free_energy(cfp) == pytest.approx(want, rel=1e-13)


def test_product_cell_transfer_is_pure_vacuum(product_setup):
    _, cfp, cat = product_setup
    t = transfer_matrix_series(cfp, 0.0, cat)
    assert t.matrix.shape == (1, 1)
    assert np.array_equal(t.matrix, t.per_degree[0])
    # normalized messages pair to one across the cut
    assert t.matrix[0, 0] == pytest.approx(1.0, abs=1e-12)
    for degree, term in t.per_degree.items():
        if degree:
            assert np.max(np.abs(term)) == 0.0


def test_product_cell_density_is_exact(product_setup):
    vs, cfp, cat = product_setup
    d = density_matrix_series(cfp, 0.0, cat)
    ra, rb = [np.outer(v, v.conj()) / np.vdot(v, v) for v in vs]
    # bond 0 joins cell sites 0 and 1; site 0 is the row-major factor
    assert np.max(np.abs(d.rho - np.kron(ra, rb))) < 1e-14
    assert np.trace(d.rho) == pytest.approx(1.0, abs=1e-14)


# ----------------------------------------------------------------- AKLT


@pytest.fixture(scope="module")
def aklt12():
    cell = build_double_layer(aklt_peps(hexagonal_lattice()))
    cfp = find_fixed_point_unitcell(cell)
    cat = evaluate_catalog(cfp, enumerate_excitations(cfp.spec, 12))
    return cfp, cat


def test_aklt_density_matrix_properties(aklt12):
    cfp, cat12 = aklt12
    cat = cat12.truncated(6)
    f = free_energy_multi(cat).f
    d = density_matrix_series(cfp, f, cat)
    rho = d.rho
    assert rho.shape == (16, 16)
    assert np.allclose(rho, rho.conj().T, atol=1e-12)
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-12)
    evals = np.linalg.eigvalsh(rho)
    assert evals.min() > -1e-12
    # no weight on total spin 3 across a bond
    p3 = total_spin_projector((1.5, 1.5), 3.0)
    assert abs(np.trace(p3 @ rho)) < 1e-10
    # antiferromagnetic spin-spin correlation
    ops = spin_matrices(1.5)
    corr = sum(np.trace(np.kron(o, o) @ rho).real for o in ops)
    assert corr < -0.1


def test_aklt_single_matches_multi_to_first_order(aklt12):
    _, cat12 = aklt12
    cat = cat12.truncated(6)
    fs = free_energy_single(cat).f
    fm = free_energy_multi(cat).f
    assert fs < 0 and fm < 0
    # the two counting schemes differ only beyond first order in the weights
    assert abs(fs - fm) <= 10 * fm**2 * 6


def test_transfer_vacuum_is_outer_product_of_cut_messages(aklt12):
    cfp, cat12 = aklt12
    t = transfer_matrix_series(cfp, 0.0, cat12.truncated(0))
    want = np.outer(cfp.message_into(0, 0), cfp.message_into(0, 1))
    assert np.max(np.abs(t.per_degree[0] - want)) < 1e-13
    assert np.array_equal(t.matrix, t.per_degree[0])


def test_transfer_far_excitations_enter_at_second_order(aklt12):
    cfp, cat12 = aklt12
    cat = cat12.truncated(6)
    f = free_energy_multi(cat).f
    res = transfer_matrix_series(cfp, f, cat)
    # a loop that never touches the cut bond scales every contribution
    # alike, so the trace-normalized matrix moves only at second order
    w = cat.entries[0].weight * np.exp(6 * f)
    bumped = res.matrix + w * res.per_degree[0]
    a = res.matrix / np.trace(res.matrix)
    b = bumped / np.trace(bumped)
    bound = 10 * abs(cat.entries[0].weight) * abs(f) * np.linalg.norm(a)
    assert np.linalg.norm(b - a) <= bound


def test_aklt_transfer_error_decreases_with_degree(aklt12):
    cfp, cat12 = aklt12
    t_ref = boundary_environment(cfp.cell, chi=16).transfer_matrix(0)
    errs = []
    for cutoff in (0, 6, 10, 12):
        sub = cat12.truncated(cutoff)
        f = free_energy_multi(sub).f if cutoff else 0.0
        t = transfer_matrix_series(cfp, f, sub).matrix
        errs.append(np.linalg.norm(t / np.trace(t) - t_ref))
    assert errs == sorted(errs, reverse=True)
    assert errs[-1] < 1e-3


def test_density_series_needs_impurities():
    rng = np.random.default_rng(0)
    spec = hexagonal_lattice()
    from tnloop.network import DoubleLayerCell

    base = build_double_layer(aklt_peps(spec))
    bare = DoubleLayerCell(spec=spec, bulk=base.bulk, impurity=None)
    cfp = find_fixed_point_unitcell(bare)
    cat = evaluate_catalog(cfp, enumerate_excitations(spec, 6))
    with pytest.raises(ValueError):
        density_matrix_series(cfp, 0.0, cat)
    # the transfer series needs no impurities
    t = transfer_matrix_series(cfp, 0.0, cat, bond=1)
    assert t.bond == 1
    assert t.matrix.shape == (4, 4)
    with pytest.raises(ValueError):
        transfer_matrix_series(cfp, 0.0, cat, bond=9)


def test_bp_free_energy_requires_normalized_input():
    from dataclasses import replace

    cell = build_double_layer(aklt_peps(hexagonal_lattice()))
    cfp = find_fixed_point_unitcell(cell)
    with pytest.raises(ValueError):
        bp_free_energy(replace(cfp, normalized=False))
