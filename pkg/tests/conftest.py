"""Shared generators and independent contraction oracles for the test suite."""

from __future__ import annotations

import numpy as np

from tnloop import TensorNetwork


def exact_value(net: TensorNetwork) -> complex:
    """Contract a closed network by a single naive einsum.

    Independent of the library's pairwise planner: every edge becomes one
    subscript letter and the whole sum runs in one call.
    """
    letters = {}
    for e in net.edges:
        letters[e] = chr(ord("a") + len(letters))
    terms = []
    operands = []
    for node in net.nodes:
        terms.append("".join(letters[e] for e in net.slots(node)))
        operands.append(net.tensor(node))
    return complex(np.einsum(",".join(terms) + "->", *operands))


def ring_with_chords(
    rng: np.random.Generator,
    num_nodes: int,
    num_chords: int,
    max_dim: int = 4,
) -> TensorNetwork:
    """Closed network on a ring of nodes with extra chord edges.

    The ring keeps every node at degree >= 2 and the graph connected; chords
    add loops.  Entries are positive reals, which keeps message passing
    contractive in practice.
    """
    edges = [(("r", i), (i, (i + 1) % num_nodes)) for i in range(num_nodes)]
    for k in range(num_chords):
        i = int(rng.integers(num_nodes))
        j = int(rng.integers(num_nodes - 1))
        if j >= i:
            j += 1
        edges.append((("c", k), (i, j)))
    dims = {eid: int(rng.integers(2, max_dim + 1)) for eid, _ in edges}
    slots: dict[int, list] = {i: [] for i in range(num_nodes)}
    for eid, (i, j) in edges:
        slots[i].append(eid)
        slots[j].append(eid)
    net = TensorNetwork()
    for node, eids in slots.items():
        shape = tuple(dims[e] for e in eids)
        net.add_node(node, rng.uniform(0.2, 1.0, shape), eids)
    net.validate()
    return net


def random_tree(
    rng: np.random.Generator,
    num_nodes: int,
    max_dim: int = 4,
    complex_entries: bool = True,
    positive: bool = False,
) -> TensorNetwork:
    """Closed loop-free network: node i > 0 attaches to a random earlier node.

    With `positive` every entry is drawn from [0.2, 1.0), which keeps the
    contraction value strictly positive.
    """
    edges = []
    for i in range(1, num_nodes):
        parent = int(rng.integers(i))
        edges.append((("t", i), (parent, i)))
    dims = {eid: int(rng.integers(1, max_dim + 1)) for eid, _ in edges}
    slots: dict[int, list] = {i: [] for i in range(num_nodes)}
    for eid, (i, j) in edges:
        slots[i].append(eid)
        slots[j].append(eid)
    net = TensorNetwork()
    for node, eids in slots.items():
        shape = tuple(dims[e] for e in eids)
        if positive:
            t = rng.uniform(0.2, 1.0, shape)
        else:
            t = rng.standard_normal(shape)
            if complex_entries:
                t = t + 1j * rng.standard_normal(shape)
        net.add_node(node, t, eids)
    net.validate()
    return net


def theta_network(rng: np.random.Generator, dim: int = 3) -> TensorNetwork:
    """Two hubs joined by three parallel paths of 2, 2, and 3 edges."""
    # hubs 0 and 1; path A: 0-2-1, path B: 0-3-1, path C: 0-4-5-1
    edges = {
        ("a", 0): (0, 2), ("a", 1): (2, 1),
        ("b", 0): (0, 3), ("b", 1): (3, 1),
        ("c", 0): (0, 4), ("c", 1): (4, 5), ("c", 2): (5, 1),
    }
    slots: dict[int, list] = {i: [] for i in range(6)}
    for eid, (i, j) in edges.items():
        slots[i].append(eid)
        slots[j].append(eid)
    net = TensorNetwork()
    for node, eids in slots.items():
        shape = (dim,) * len(eids)
        net.add_node(node, rng.uniform(0.2, 1.0, shape), eids)
    net.validate()
    return net
