"""Excitation machinery: projectors, configuration sums, weights, catalogs."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from conftest import exact_value, random_tree, ring_with_chords, theta_network
from tnloop import (
    TensorNetwork,
    aklt_peps,
    build_double_layer,
    enumerate_excitations,
    excitation_weight,
    factorized_weight,
    find_fixed_point,
    find_fixed_point_unitcell,
    fit_suppression,
    hexagonal_lattice,
    normalize_fixed_point,
    single_loop_ring,
    square_lattice,
    weight_on_network,
    windowed_excitation_counts,
)
from tnloop.bp import BPFixedPoint, vacuum_scalars
from tnloop.loops import brute_force_config_sum, edge_projectors


# ---------------------------------------------------------------- projectors


def test_edge_projector_algebra():
    rng = np.random.default_rng(0)
    for dim in (2, 3, 5):
        m0 = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        m1 = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        p, pc = edge_projectors(m0, m1)
        eye = np.eye(dim)
        assert np.allclose(p + pc, eye, atol=1e-12)
        assert np.allclose(p @ p, p, atol=1e-12)
        assert np.allclose(pc @ pc, pc, atol=1e-12)
        assert np.allclose(p @ pc, 0 * eye, atol=1e-12)
        assert np.trace(p) == pytest.approx(1.0, abs=1e-12)
        assert np.trace(pc) == pytest.approx(dim - 1.0, abs=1e-12)
        # the excited projector annihilates the message pair on either side
        assert np.linalg.norm(m1 @ pc) < 1e-12 * np.linalg.norm(m1)
        assert np.linalg.norm(pc @ m0) < 1e-12 * np.linalg.norm(m0)


def test_edge_projector_degenerate_pair_raises():
    with pytest.raises(ValueError):
        edge_projectors(np.array([1.0, 0.0]), np.array([0.0, 1.0]))


def test_dim1_edge_has_no_excited_space():
    p, pc = edge_projectors(np.array([2.0]), np.array([0.5]))
    assert p == pytest.approx(1.0)
    assert abs(pc[0, 0]) < 1e-14


# ------------------------------------------------------- configuration sums


def test_config_sum_resolves_identity():
    rng = np.random.default_rng(1)
    for k in range(4):
        net = ring_with_chords(rng, 5 + k, 2 + k % 2)
        fp = normalize_fixed_point(find_fixed_point(net))
        cs = brute_force_config_sum(fp)
        z = exact_value(net)
        assert cs.total * np.exp(fp.log_scale) == pytest.approx(z, rel=1e-10)
        assert len(cs.weights) == 2 ** len(net.edges)


def test_config_sum_dangling_configs_vanish():
    rng = np.random.default_rng(2)
    net = ring_with_chords(rng, 6, 3)
    fp = normalize_fixed_point(find_fixed_point(net))
    cs = brute_force_config_sum(fp)
    z = abs(exact_value(net))
    for config, w in cs.weights.items():
        touched: dict = {}
        for e in config:
            for node, _ in net.edge_ends(e):
                touched[node] = touched.get(node, 0) + 1
        if any(c == 1 for c in touched.values()):
            assert abs(w * np.exp(fp.log_scale)) <= 1e-10 * max(1.0, z)


def test_config_sum_tree_has_only_vacuum():
    rng = np.random.default_rng(3)
    net = random_tree(rng, 7, complex_entries=False)
    fp = normalize_fixed_point(find_fixed_point(net, damping=0.0))
    cs = brute_force_config_sum(fp)
    nz = cs.nonzero(1e-10)
    assert nz == [frozenset()]


def test_theta_network_has_five_configurations():
    rng = np.random.default_rng(4)
    net = theta_network(rng)
    fp = normalize_fixed_point(find_fixed_point(net))
    cs = brute_force_config_sum(fp)
    nz = {frozenset(c) for c in cs.nonzero(1e-10)}
    assert len(nz) == 5
    paths = {
        "ab": frozenset({("a", 0), ("a", 1), ("b", 0), ("b", 1)}),
        "ac": frozenset({("a", 0), ("a", 1), ("c", 0), ("c", 1), ("c", 2)}),
        "bc": frozenset({("b", 0), ("b", 1), ("c", 0), ("c", 1), ("c", 2)}),
    }
    assert frozenset() in nz
    for cycle in paths.values():
        assert cycle in nz
    assert frozenset(set().union(*paths.values())) in nz


def test_config_sum_rejects_large_networks():
    rng = np.random.default_rng(5)
    net = ring_with_chords(rng, 10, 3)
    fp = normalize_fixed_point(find_fixed_point(net))
    with pytest.raises(ValueError):
        brute_force_config_sum(fp, max_edges=10)


def test_config_sum_on_small_torus():
    net = _torus_grid(np.random.default_rng(9), n=2)
    fp = normalize_fixed_point(find_fixed_point(net))
    cs = brute_force_config_sum(fp)
    z = exact_value(net)
    assert cs.total * np.exp(fp.log_scale) == pytest.approx(z, rel=1e-10)


# ------------------------------------------------------------ factorization


def _torus_grid(rng, n=4, dim=2):
    net = TensorNetwork()
    for x in range(n):
        for y in range(n):
            eids = [
                ("h", x, y),
                ("v", x, y),
                ("h", (x - 1) % n, y),
                ("v", x, (y - 1) % n),
            ]
            net.add_node((x, y), rng.uniform(0.2, 1.0, (dim,) * 4), eids)
    net.validate()
    return net


def _plaquette(x, y, n=4):
    return [
        ("h", x, y),
        ("v", (x + 1) % n, y),
        ("h", x, (y + 1) % n),
        ("v", x, y),
    ]


def test_disjoint_weights_factorize_on_torus():
    rng = np.random.default_rng(6)
    for seed in range(3):
        net = _torus_grid(np.random.default_rng(seed))
        fp = normalize_fixed_point(find_fixed_point(net))
        a = _plaquette(0, 0)
        b = _plaquette(2, 2)
        joint = weight_on_network(fp, a + b)
        product = factorized_weight(fp, [a, b])
        assert joint == pytest.approx(product, rel=1e-11)
        assert factorized_weight(fp, [a]) == pytest.approx(
            weight_on_network(fp, a), rel=1e-12
        )


def test_factorized_weight_rejects_overlap():
    rng = np.random.default_rng(7)
    net = _torus_grid(rng)
    fp = normalize_fixed_point(find_fixed_point(net))
    with pytest.raises(ValueError):
        factorized_weight(fp, [_plaquette(0, 0), _plaquette(1, 0)])


def test_factorized_weight_with_a_dangling_part_is_zero():
    net = _torus_grid(np.random.default_rng(8))
    fp = normalize_fixed_point(find_fixed_point(net))
    # the lone far edge dangles, so its factor and the product vanish
    parts = [_plaquette(0, 0), [("h", 0, 2)]]
    assert abs(factorized_weight(fp, parts)) < 1e-12


# ------------------------------------------------------------------ weights


def test_excitation_weight_translation_invariant():
    cell = build_double_layer(aklt_peps(hexagonal_lattice()))
    cfp = find_fixed_point_unitcell(cell)
    hexagon = next(
        e for e in enumerate_excitations(hexagonal_lattice(), 6).entries
    )
    w0 = excitation_weight(cfp, hexagon)
    for dx, dy in [(1, 0), (0, 1), (2, -1)]:
        shifted = {(x + dx, y + dy, b) for x, y, b in hexagon.edges}
        assert excitation_weight(cfp, shifted) == pytest.approx(w0, abs=1e-12)


def test_hexagon_weight_matches_capped_ring_configuration():
    # rebuild the hexagon as a standalone six-node ring, capping each outer
    # leg with the fixed-point message that flows into it, and read the
    # all-edges-excited term out of the brute-force configuration sum
    cell = build_double_layer(aklt_peps(hexagonal_lattice()))
    cfp = find_fixed_point_unitcell(cell)
    spec = cfp.spec
    hexagon = enumerate_excitations(spec, 6).entries[0]

    ring_sites: dict = {}
    for e in hexagon.edges:
        for site in spec.edge_endpoints(e):
            ring_sites.setdefault(site, []).append(e)
    assert len(ring_sites) == 6

    net = TensorNetwork()
    for site in sorted(ring_sites):
        x, y, s = site
        t = cfp.cell.bulk[s]
        keep = []
        capped = []
        for slot, (b, role) in enumerate(spec.slot_lists[s]):
            _, _, (ox, oy) = spec.bonds[b]
            eid = (x, y, b) if role == 0 else (x - ox, y - oy, b)
            if eid in hexagon.edges:
                keep.append((slot, eid))
            else:
                capped.append((slot, cfp.message_into(b, role)))
        for slot, msg in sorted(capped, reverse=True):
            t = np.moveaxis(t, slot, -1) @ msg
        # capping from the top slot down leaves the kept axes in slot order
        net.add_node(site, t, [eid for _, eid in keep])
    net.validate()

    messages = {}
    for eid in net.edges:
        _, _, b = eid
        for end, (site, slot) in enumerate(net.edge_ends(eid)):
            role = spec.slot_lists[site[2]][slot][1]
            messages[(eid, end)] = cfp.messages[(b, role)]
    fp = BPFixedPoint(
        net=net,
        messages=messages,
        residual=0.0,
        sweeps=0,
        converged=True,
        vacuum=vacuum_scalars(net, messages),
        log_scale=0.0 + 0.0j,
        normalized=True,
    )
    for v in fp.vacuum.values():
        assert v == pytest.approx(1.0, abs=1e-10)

    cs = brute_force_config_sum(fp)
    term = cs.weights[frozenset(net.edges)]
    assert term == pytest.approx(excitation_weight(cfp, hexagon), abs=1e-12)


def test_single_loop_weight_matches_spectrum():
    rng = np.random.default_rng(8)
    a = rng.uniform(0.2, 1.0, (3, 3))
    evals = np.linalg.eigvals(a)
    lam0 = evals[np.argmax(np.abs(evals))]
    for x in range(4, 13):
        fp = single_loop_ring(a, x)
        w = weight_on_network(fp, [("ring", i) for i in range(x)])
        want = complex(np.sum((evals / lam0) ** x) - 1.0)
        assert w == pytest.approx(want, abs=1e-10)


def test_single_loop_ring_rejects_bad_input():
    with pytest.raises(ValueError):
        single_loop_ring(np.ones((2, 3)), 5)
    with pytest.raises(ValueError):
        single_loop_ring(np.eye(2), 2)
    with pytest.raises(ValueError):
        single_loop_ring(np.array([[0.0, 1.0], [0.0, 0.0]]), 5)


# ------------------------------------------------------------------ catalog


def test_hexagonal_catalog_counts():
    cat = enumerate_excitations(hexagonal_lattice(), 12)
    assert cat.per_degree == {6: 1, 10: 3, 11: 3, 12: 2}
    hexagon = cat.entries[0]
    assert hexagon.degree == 6
    assert hexagon.num_sites == 6
    assert hexagon.multiplicity == Fraction(1, 2)


def test_square_catalog_counts():
    cat = enumerate_excitations(square_lattice(), 8)
    assert cat.per_degree == {4: 1, 6: 2, 7: 2, 8: 9}
    plaquette = cat.entries[0]
    assert plaquette.degree == 4
    assert plaquette.num_sites == 4
    assert plaquette.multiplicity == Fraction(1)


def test_catalog_below_girth_is_empty():
    assert enumerate_excitations(hexagonal_lattice(), 5).entries == ()


def test_catalog_deterministic_and_truncatable():
    a = enumerate_excitations(square_lattice(), 7)
    b = enumerate_excitations(square_lattice(), 7)
    assert a.entries == b.entries
    cut = a.truncated(6)
    assert cut.per_degree == {4: 1, 6: 2}


def test_windowed_counts_match_catalog_placements():
    # window wraps are longer than the probed degrees, so every count is a
    # plain translate tally: multiplicity * sites_per_cell * cells
    hexs = hexagonal_lattice()
    cat = enumerate_excitations(hexs, 9)
    wc = windowed_excitation_counts(hexs, 5, 5, 9)
    expected: dict[int, int] = {}
    for exc in cat.entries:
        n = int(exc.multiplicity * hexs.num_sites * 25)
        expected[exc.degree] = expected.get(exc.degree, 0) + n
    assert wc == expected
    assert set(wc) == {6}  # no dangling-free sets exist at degrees 7..9

    sq = square_lattice()
    wc_sq = windowed_excitation_counts(sq, 5, 5, 4)
    assert wc_sq == {4: 25}


def test_windowed_counts_to_degree_twelve():
    # the slow full cross-check: every catalog entry is recovered on a 6x6
    # window.  The window's wrapping cycles are 12 edges around, so at
    # degree 12 the raw count also picks up the three wrap directions, each
    # translatable 6 ways without changing its edge set.
    hexs = hexagonal_lattice()
    cat = enumerate_excitations(hexs, 12)
    wc = windowed_excitation_counts(hexs, 6, 6, 12)
    expected: dict[int, int] = {}
    for exc in cat.entries:
        n = int(exc.multiplicity * hexs.num_sites * 36)
        expected[exc.degree] = expected.get(exc.degree, 0) + n
    expected[12] += 3 * 6
    assert wc == expected


def test_fit_suppression_exact_and_spectral():
    fit = fit_suppression([4, 6, 8], [np.e**-8, np.e**-12, np.e**-16])
    assert fit.k == pytest.approx(2.0, abs=1e-10)
    spectral = fit_suppression(
        [8, 10, 12],
        [2 * 0.5**8, 2 * 0.5**10, 2 * 0.5**12],
        spectrum=[1.0, 0.5, 0.5],
    )
    assert spectral.lambda1 == pytest.approx(0.5)
    assert spectral.degeneracy == 2
    assert spectral.k == pytest.approx(np.log(2.0), abs=1e-10)
    assert spectral.spectral_rate(12) == pytest.approx(
        -np.log(0.5) - np.log(2.0) / 12
    )
    with pytest.raises(ValueError):
        fit_suppression([4, 6], [0.0, 0.0])
    with pytest.raises(ValueError):
        fit_suppression([4], [1.0])
