"""JSON round trips for networks, fixed points, and catalogs."""

from __future__ import annotations

import json

import numpy as np
import pytest

from conftest import exact_value, ring_with_chords
from tnloop import (
    enumerate_excitations,
    find_fixed_point,
    fixed_point_from_json,
    fixed_point_to_json,
    hexagonal_lattice,
    network_from_json,
    network_to_json,
    normalize_fixed_point,
)
from tnloop.bp import bethe_log_z


def test_network_round_trip_preserves_value():
    rng = np.random.default_rng(0)
    net = ring_with_chords(rng, 6, 2)
    text = network_to_json(net)
    back = network_from_json(text)
    assert set(back.nodes) == set(net.nodes)
    assert set(back.edges) == set(net.edges)
    for n in net.nodes:
        assert np.array_equal(back.tensor(n), net.tensor(n))
        assert back.slots(n) == net.slots(n)
    assert exact_value(back) == pytest.approx(exact_value(net), rel=1e-15)
    # a second trip is byte-identical
    assert network_to_json(back) == text


def test_network_json_rejects_foreign_documents():
    with pytest.raises(ValueError):
        network_from_json(json.dumps({"format": "something-else"}))
    doc = json.loads(network_to_json(ring_with_chords(np.random.default_rng(1), 5, 1)))
    doc["edges"][0]["dim"] = 99
    with pytest.raises(ValueError):
        network_from_json(json.dumps(doc))


def test_fixed_point_round_trip():
    rng = np.random.default_rng(2)
    net = ring_with_chords(rng, 5, 2)
    fp = normalize_fixed_point(find_fixed_point(net))
    back = fixed_point_from_json(fixed_point_to_json(fp))
    assert back.converged == fp.converged
    assert back.sweeps == fp.sweeps
    assert back.residual == fp.residual
    assert back.normalized == fp.normalized
    assert back.log_scale == fp.log_scale
    assert set(back.messages) == set(fp.messages)
    for key, v in fp.messages.items():
        assert np.array_equal(back.messages[key], v)
    # vacuum scalars are rebuilt, not stored, and must agree
    for n in fp.net.nodes:
        assert back.vacuum[n] == pytest.approx(fp.vacuum[n], rel=1e-15)
    assert bethe_log_z(back) == pytest.approx(bethe_log_z(fp), abs=1e-14)


def test_fixed_point_json_rejects_foreign_documents():
    with pytest.raises(ValueError):
        fixed_point_from_json(json.dumps({"format": "tnloop-network-v1"}))


def test_catalog_json_schema():
    cat = enumerate_excitations(hexagonal_lattice(), 10)
    doc = json.loads(cat.to_json())
    assert doc["format"] == "tnloop-catalog-v1"
    assert doc["lattice"] == "hexagonal"
    assert doc["max_degree"] == 10
    assert len(doc["entries"]) == len(cat.entries)
    first = doc["entries"][0]
    assert first["degree"] == 6
    assert first["multiplicity"] == [1, 2]
    assert first["num_sites"] == 6
    assert first["weight"] is None
    assert sorted(first["edges"]) == first["edges"]
    # evaluated weights serialize as [re, im] pairs
    from tnloop import (
        aklt_peps,
        build_double_layer,
        evaluate_catalog,
        find_fixed_point_unitcell,
    )

    cfp = find_fixed_point_unitcell(build_double_layer(aklt_peps(hexagonal_lattice())))
    with_w = evaluate_catalog(cfp, cat.truncated(6))
    row = json.loads(with_w.to_json())["entries"][0]
    assert isinstance(row["weight"], list) and len(row["weight"]) == 2
