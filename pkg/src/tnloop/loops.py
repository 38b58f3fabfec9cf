"""Loop-series machinery on top of a belief-propagation fixed point.

Every edge of the network carries a resolution of identity I = P + Pc, where
P is the rank-1 projector built from the fixed-point message pair.  Expanding
the full contraction over these choices organizes the network value as a sum
over "configurations" (sets of excited edges carrying Pc).  A node with
exactly one excited edge contracts to zero at a fixed point, so only subsets
whose vertices all have zero or at least two excited edges survive.  The
connected such subsets on an infinite lattice, up to translation, form the
excitation catalog; their capped contractions are the series weights.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from fractions import Fraction
from itertools import combinations
from math import ceil
from typing import Any, Iterable, Sequence

import numpy as np

from .bp import BPFixedPoint, CellFixedPoint, _incoming_key
from .network import LatticeSpec, TensorNetwork, contract_greedy, contraction_plan, execute_plan
from .tensor import DTYPE, contract_pair

__all__ = [
    "edge_projectors",
    "Excitation",
    "ExcitationCatalog",
    "enumerate_excitations",
    "windowed_excitation_counts",
    "excitation_weight",
    "evaluate_catalog",
    "weight_on_network",
    "placement_value",
    "anchored_placements",
    "brute_force_config_sum",
    "ConfigSum",
    "factorized_weight",
    "SuppressionFit",
    "fit_suppression",
    "single_loop_ring",
]


# ------------------------------------------------------------------ #
# Edge projectors                                                     #
# ------------------------------------------------------------------ #


def edge_projectors(
    msg_to_end0: np.ndarray, msg_to_end1: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Ground and excited projectors for one edge.

    P[i, j] = m0[i] m1[j] / (m0 . m1) with i the end-0 side; Pc = I - P.
    P annihilates nothing on its own, but at a fixed point the outgoing
    message of a node hits Pc and vanishes, which is what removes dangling
    excitations from the series.
    """
    dot = complex(np.dot(msg_to_end0, msg_to_end1))
    if abs(dot) < 1e-14:
        raise ValueError("message pair is degenerate; projectors undefined")
    p = np.outer(msg_to_end0, msg_to_end1).astype(DTYPE) / dot
    pc = np.eye(len(msg_to_end0), dtype=DTYPE) - p
    return p, pc


# ------------------------------------------------------------------ #
# Excitation catalog on the infinite lattice                          #
# ------------------------------------------------------------------ #


@dataclass(frozen=True)
class Excitation:
    """Connected excited-edge set, anchored so its lexically least cell is (0, 0).

    multiplicity is the number of placements per lattice site under
    translations; num_sites the number of tensors the excitation touches.
    weight is filled in by evaluation against a fixed point.
    """

    edges: frozenset[tuple[int, int, int]]
    degree: int
    sites: frozenset[tuple[int, int, int]]
    num_sites: int
    multiplicity: Fraction
    weight: complex | None = None

    def sort_key(self):
        return (self.degree, tuple(sorted(self.edges)))


@dataclass(frozen=True)
class ExcitationCatalog:
    spec: LatticeSpec
    max_degree: int
    entries: tuple[Excitation, ...]

    @property
    def per_degree(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for exc in self.entries:
            out[exc.degree] = out.get(exc.degree, 0) + 1
        return out

    @property
    def degrees(self) -> list[int]:
        return sorted(self.per_degree)

    def truncated(self, max_degree: int) -> "ExcitationCatalog":
        return ExcitationCatalog(
            spec=self.spec,
            max_degree=max_degree,
            entries=tuple(e for e in self.entries if e.degree <= max_degree),
        )

    def to_json(self) -> str:
        rows = [
            {
                "degree": e.degree,
                "edges": sorted([list(x) for x in e.edges]),
                "multiplicity": [e.multiplicity.numerator, e.multiplicity.denominator],
                "num_sites": e.num_sites,
                "weight": None
                if e.weight is None
                else [e.weight.real, e.weight.imag],
            }
            for e in self.entries
        ]
        return json.dumps(
            {"format": "tnloop-catalog-v1", "lattice": self.spec.name,
             "max_degree": self.max_degree, "entries": rows},
            separators=(",", ":"),
        )


def _edge_sites(spec: LatticeSpec, edges: Iterable[tuple[int, int, int]]):
    sites: dict[tuple[int, int, int], int] = {}
    for e in edges:
        for site in spec.edge_endpoints(e):
            sites[site] = sites.get(site, 0) + 1
    return sites


def _canonical(edges: frozenset) -> tuple:
    x0, y0 = min((x, y) for x, y, _ in edges)
    return tuple(sorted((x - x0, y - y0, b) for x, y, b in edges))


def _neighbor_edges(spec: LatticeSpec, edges: frozenset, sites) -> list:
    out = []
    for site in sites:
        for e in spec.site_edges(site):
            if e not in edges:
                out.append(e)
    return out


def enumerate_excitations(spec: LatticeSpec, max_degree: int) -> ExcitationCatalog:
    """All translation-inequivalent excitations up to `max_degree` edges.

    Rooted growth over connected edge sets with canonical-form deduplication;
    branches that cannot reach a dangling-free set within the degree budget
    are pruned (every degree-1 site needs at least one more edge, and one new
    edge can serve at most two of them).
    """
    if max_degree < spec.girth:
        return ExcitationCatalog(spec=spec, max_degree=max_degree, entries=())
    mult = Fraction(1, spec.num_sites)
    seen: set[tuple] = set()
    found: dict[tuple, Excitation] = {}
    frontier: list[frozenset] = []
    for b in range(len(spec.bonds)):
        s = frozenset([(0, 0, b)])
        key = _canonical(s)
        if key not in seen:
            seen.add(key)
            frontier.append(s)
    while frontier:
        next_frontier: list[frozenset] = []
        for edges in frontier:
            sites = _edge_sites(spec, edges)
            dangling = sum(1 for c in sites.values() if c == 1)
            if dangling == 0:
                key = _canonical(edges)
                if key not in found:
                    found[key] = Excitation(
                        edges=frozenset(key),
                        degree=len(edges),
                        sites=frozenset(_edge_sites(spec, key)),
                        num_sites=len(sites),
                        multiplicity=mult,
                    )
            if len(edges) == max_degree:
                continue
            for e in _neighbor_edges(spec, edges, sites):
                grown = edges | {e}
                gsites = _edge_sites(spec, grown)
                gdangling = sum(1 for c in gsites.values() if c == 1)
                if len(grown) + ceil(gdangling / 2) > max_degree:
                    continue
                key = _canonical(grown)
                if key in seen:
                    continue
                seen.add(key)
                next_frontier.append(grown)
        frontier = next_frontier
    entries = tuple(sorted(found.values(), key=Excitation.sort_key))
    return ExcitationCatalog(spec=spec, max_degree=max_degree, entries=entries)


def windowed_excitation_counts(
    spec: LatticeSpec, nx: int, ny: int, max_degree: int
) -> dict[int, int]:
    """Count dangling-free connected edge sets on an nx-by-ny torus, by degree.

    Every placement counts separately, so for a window whose wrapping cycles
    are longer than `max_degree` the counts are nx * ny times the catalog's.
    Serves as a brute-force cross-check of the canonical enumeration.
    """

    def wrap(edge):
        x, y, b = edge
        return (x % nx, y % ny, b)

    def torus_sites(edges):
        sites: dict[tuple, int] = {}
        for e in edges:
            for x, y, s in spec.edge_endpoints(e):
                site = (x % nx, y % ny, s)
                sites[site] = sites.get(site, 0) + 1
        return sites

    counts: dict[int, int] = {}
    seen: set[frozenset] = set()
    frontier: list[frozenset] = []
    for x in range(nx):
        for y in range(ny):
            for b in range(len(spec.bonds)):
                s = frozenset([(x, y, b)])
                if s not in seen:
                    seen.add(s)
                    frontier.append(s)
    while frontier:
        next_frontier: list[frozenset] = []
        for edges in frontier:
            sites = torus_sites(edges)
            dangling = sum(1 for c in sites.values() if c == 1)
            if dangling == 0:
                counts[len(edges)] = counts.get(len(edges), 0) + 1
            if len(edges) == max_degree:
                continue
            grow = set()
            for sx, sy, ss in sites:
                for e in spec.site_edges((sx, sy, ss)):
                    w = wrap(e)
                    if w not in edges:
                        grow.add(w)
            for e in grow:
                grown = edges | {e}
                gdangling = sum(
                    1 for c in torus_sites(grown).values() if c == 1
                )
                if len(grown) + ceil(gdangling / 2) > max_degree:
                    continue
                if grown in seen:
                    continue
                seen.add(grown)
                next_frontier.append(grown)
        frontier = next_frontier
    return counts


# ------------------------------------------------------------------ #
# Weight evaluation                                                   #
# ------------------------------------------------------------------ #


def placement_value(
    cfp: CellFixedPoint,
    excited: Iterable[tuple[int, int, int]],
    include_sites: Iterable[tuple[int, int, int]] = (),
    open_edge: tuple[int, int, int] | None = None,
    identity_edge: tuple[int, int, int] | None = None,
    impurity_sites: Iterable[tuple[int, int, int]] = (),
) -> np.ndarray:
    """Contract one excitation placement against the fixed-point environment.

    The cluster contains the excitation's support plus `include_sites`.  Every
    slot is capped with its incoming fixed-point message except: excited edges
    receive the excited projector, `open_edge` is left open (two result axes,
    end-0 side first), `identity_edge` is contracted through, and impurity
    sites contribute their physical pair as trailing open axes, two per site
    in cluster order.

    Ground edges between two cluster sites factor into the same caps as edges
    leaving the cluster, so no case split is needed.
    """
    if not cfp.normalized:
        raise ValueError("placement evaluation needs a normalized fixed point")
    spec = cfp.spec
    excited = frozenset(excited)
    impurity_sites = frozenset(impurity_sites)
    sites: list = []
    for e in excited:
        for s in spec.edge_endpoints(e):
            if s not in sites:
                sites.append(s)
    for s in include_sites:
        if s not in sites:
            sites.append(s)
    sites.sort()
    site_set = set(sites)
    if impurity_sites - site_set:
        raise ValueError("impurity sites must lie in the cluster")
    if cfp.cell.impurity is None and impurity_sites:
        raise ValueError("cell carries no impurity tensors")

    net = TensorNetwork()
    open_order: list = []
    phys_order: list = []
    kept_edges: set = set()
    for site in sites:
        x, y, s = site
        imp = site in impurity_sites
        t = cfp.cell.impurity[s] if imp else cfp.cell.bulk[s]
        edges: list = []
        axis = 0
        for slot, (b, role) in enumerate(spec.slot_lists[s]):
            eid = spec.site_edges(site)[slot]
            if eid == open_edge:
                half = (eid, role)
                edges.append(half)
                if half not in open_order:
                    open_order.append(half)
                axis += 1
            elif eid == identity_edge or (eid in excited and eid != open_edge):
                if eid in excited and eid != identity_edge:
                    kept_edges.add(eid)
                    edges.append((eid, role))
                else:
                    edges.append(("id", eid))
                axis += 1
            else:
                t = contract_pair(t, [axis], cfp.message_into(b, role), [0])
        if imp:
            for k in (0, 1):
                pid = ("p", site, k)
                edges.append(pid)
                phys_order.append(pid)
        net.add_node(site, t, edges)
    open_order.sort(key=lambda h: h[1])  # end-0 (role-0) side first
    for eid in sorted(kept_edges):
        b = eid[2]
        _, pc = edge_projectors(cfp.messages[(b, 0)], cfp.messages[(b, 1)])
        net.add_node(("pc", eid), pc, [(eid, 0), (eid, 1)])
    net.validate()
    out = contract_greedy(net, open_order=open_order + phys_order)
    return out


def excitation_weight(
    cfp: CellFixedPoint, excitation: Excitation | Iterable
) -> complex:
    """Scalar weight of one excitation at the anchored position."""
    edges = excitation.edges if isinstance(excitation, Excitation) else excitation
    value = placement_value(cfp, edges)
    return complex(value.reshape(()))


def evaluate_catalog(
    cfp: CellFixedPoint, catalog: ExcitationCatalog
) -> ExcitationCatalog:
    """Fill in the weight of every catalog entry."""
    entries = tuple(
        replace(e, weight=excitation_weight(cfp, e)) for e in catalog.entries
    )
    return ExcitationCatalog(
        spec=catalog.spec, max_degree=catalog.max_degree, entries=entries
    )


def anchored_placements(
    spec: LatticeSpec,
    catalog: ExcitationCatalog,
    anchors: Sequence[tuple[int, int, int]],
) -> list[tuple[Excitation, frozenset]]:
    """All translates of catalog entries whose support touches an anchor site."""
    out = []
    for exc in catalog.entries:
        shifts = set()
        for ax, ay, akind in anchors:
            for sx, sy, skind in exc.sites:
                if skind == akind:
                    shifts.add((ax - sx, ay - sy))
        for tx, ty in sorted(shifts):
            edges = frozenset((x + tx, y + ty, b) for x, y, b in exc.edges)
            touches = any(
                s in set(anchors)
                for e in edges
                for s in spec.edge_endpoints(e)
            )
            if touches:
                out.append((exc, edges))
    return out


def weight_on_network(fp: BPFixedPoint, excited: Iterable[Any]) -> complex:
    """Configuration weight of an excited-edge set on a finite closed network.

    Same capping rules as `placement_value`, but messages and tensors come
    from a finite-network fixed point.  The fixed point must be normalized.
    """
    if not fp.normalized:
        raise ValueError("weight evaluation needs a normalized fixed point")
    net = fp.net
    excited = set(excited)
    nodes = []
    for e in excited:
        for node, _ in net.edge_ends(e):
            if node not in nodes:
                nodes.append(node)
    sub = TensorNetwork()
    for node in nodes:
        t = net.tensor(node)
        edges = []
        axis = 0
        for slot, e in enumerate(net.slots(node)):
            if e in excited:
                end = next(
                    k for k, (n, s) in enumerate(net.edge_ends(e))
                    if n == node and s == slot
                )
                edges.append((e, end))
                axis += 1
            else:
                t = contract_pair(t, [axis], fp.messages[_incoming_key(net, node, slot)], [0])
        sub.add_node(node, t, edges)
    for e in sorted(excited, key=repr):
        _, pc = edge_projectors(fp.messages[(e, 0)], fp.messages[(e, 1)])
        sub.add_node(("pc", e), pc, [(e, 0), (e, 1)])
    sub.validate()
    return complex(contract_greedy(sub).reshape(()))


def factorized_weight(
    fp: BPFixedPoint | CellFixedPoint, parts: Sequence[Iterable]
) -> complex:
    """Product of the individual weights of site-disjoint excitations."""
    site_sets = []
    for part in parts:
        part = set(part)
        if isinstance(fp, CellFixedPoint):
            sites = set(_edge_sites(fp.spec, part))
        else:
            sites = {n for e in part for n, _ in fp.net.edge_ends(e)}
        site_sets.append(sites)
    for a, b in combinations(range(len(site_sets)), 2):
        if site_sets[a] & site_sets[b]:
            raise ValueError(f"excitations {a} and {b} share a site")
    total = 1.0 + 0.0j
    for part in parts:
        if isinstance(fp, CellFixedPoint):
            total *= excitation_weight(fp, set(part))
        else:
            total *= weight_on_network(fp, set(part))
    return total


# ------------------------------------------------------------------ #
# Brute-force configuration sum                                       #
# ------------------------------------------------------------------ #


@dataclass
class ConfigSum:
    """All 2^M configuration weights of a closed network."""

    edges: tuple
    weights: dict[frozenset, complex]
    total: complex

    def nonzero(self, threshold: float) -> list[frozenset]:
        return [c for c, w in self.weights.items() if abs(w) > threshold]


def brute_force_config_sum(fp: BPFixedPoint, max_edges: int = 24) -> ConfigSum:
    """Contract every P / Pc edge assignment of a closed network.

    Exponential in the edge count by construction; this is the oracle the
    series machinery is checked against, not a production path.
    """
    net = fp.net
    if not net.is_closed():
        raise ValueError("configuration sums need a closed network")
    edges = tuple(net.edges)
    m = len(edges)
    if m > max_edges:
        raise ValueError(f"{m} edges exceeds the configured cap {max_edges}")
    projs = {}
    for e in edges:
        p, pc = edge_projectors(fp.messages[(e, 0)], fp.messages[(e, 1)])
        projs[e] = (p, pc)
    # One static structure for all configurations: each edge runs through its
    # own projector node, whose tensor is swapped per configuration.
    base = TensorNetwork()
    for node in net.nodes:
        base.add_node(
            node,
            net.tensor(node),
            [
                (e, next(k for k, (n, s) in enumerate(net.edge_ends(e))
                         if n == node and s == slot))
                for slot, e in enumerate(net.slots(node))
            ],
        )
    for e in edges:
        base.add_node(("pj", e), projs[e][0], [(e, 0), (e, 1)])
    base.validate()
    plan = contraction_plan(base)
    weights: dict[frozenset, complex] = {}
    total = 0.0 + 0.0j
    for mask in range(1 << m):
        work = base.copy()
        excited = []
        for k, e in enumerate(edges):
            on = (mask >> k) & 1
            if on:
                excited.append(e)
                work.replace_tensor(("pj", e), projs[e][1])
        w = complex(execute_plan(work, plan).reshape(()))
        weights[frozenset(excited)] = w
        total += w
    return ConfigSum(edges=edges, weights=weights, total=total)


# ------------------------------------------------------------------ #
# Suppression diagnostics                                             #
# ------------------------------------------------------------------ #


@dataclass(frozen=True)
class SuppressionFit:
    """Least-squares decay rate of |W| with degree, log|W| ~ -k x + c.

    When a single-loop transfer spectrum is supplied, lambda1 and degeneracy
    record its subleading magnitude and multiplicity; the spectral prediction
    for the rate at degree x is -log(lambda1) - log(degeneracy)/x.
    """

    k: float
    intercept: float
    lambda1: float | None = None
    degeneracy: int | None = None

    def spectral_rate(self, degree: int) -> float:
        if self.lambda1 is None:
            raise ValueError("no spectrum attached to this fit")
        return float(-np.log(self.lambda1) - np.log(self.degeneracy) / degree)


def fit_suppression(
    degrees: Sequence[int],
    weights: Sequence[complex],
    spectrum: Sequence[complex] | None = None,
) -> SuppressionFit:
    """Fit exp(-k x) decay to weights; optionally attach a loop spectrum.

    `spectrum` should be the full eigenvalue list of a single-loop transfer
    matrix normalized so the dominant eigenvalue is 1.
    """
    degrees = np.asarray(degrees, dtype=float)
    mags = np.abs(np.asarray(weights, dtype=DTYPE))
    if len(degrees) != len(mags):
        raise ValueError("degrees and weights differ in length")
    nz = mags > 0
    if np.sum(nz) < 2:
        raise ValueError("need at least two nonzero weights to fit a decay rate")
    slope, intercept = np.polyfit(degrees[nz], np.log(mags[nz]), 1)
    lambda1 = None
    degeneracy = None
    if spectrum is not None:
        mags_s = np.sort(np.abs(np.asarray(spectrum, dtype=DTYPE)))[::-1]
        if len(mags_s) < 2:
            raise ValueError("spectrum needs at least two eigenvalues")
        lambda1 = float(mags_s[1])
        degeneracy = int(np.sum(np.abs(mags_s[1:] - lambda1) <= 1e-8 * lambda1))
    return SuppressionFit(
        k=float(-slope), intercept=float(intercept),
        lambda1=lambda1, degeneracy=degeneracy,
    )


def single_loop_ring(matrix: np.ndarray, length: int) -> BPFixedPoint:
    """Normalized fixed point of a ring of `length` copies of one matrix.

    Messages are the dominant left / right eigenvectors, which solve the
    message equations exactly, so the all-edges-excited weight of this network
    probes the loop-suppression spectrum directly.
    """
    a = np.asarray(matrix, dtype=DTYPE)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("ring tensor must be a square matrix")
    if length < 3:
        raise ValueError("ring needs at least three nodes")
    evals, rvecs = np.linalg.eig(a)
    k0 = int(np.argmax(np.abs(evals)))
    lam0 = evals[k0]
    u = rvecs[:, k0]
    evals_l, lvecs = np.linalg.eig(a.T)
    k0l = int(np.argmin(np.abs(evals_l - lam0)))
    w = lvecs[:, k0l]
    dot = complex(np.dot(u, w))
    if abs(dot) < 1e-12:
        raise ValueError("defective dominant eigenvalue; ring fixed point undefined")
    u = u / dot**0.5
    w = w / dot**0.5
    a = a / lam0
    net = TensorNetwork()
    for i in range(length):
        left = (i - 1) % length
        net.add_node(i, a, [("ring", left), ("ring", i)])
    net.validate()
    messages = {}
    for i in range(length):
        e = ("ring", i)
        for k, (_, slot) in enumerate(net.edge_ends(e)):
            # a left slot receives the rightward message (left eigenvector)
            messages[(e, k)] = w if slot == 0 else u
    from .bp import vacuum_scalars

    return BPFixedPoint(
        net=net,
        messages=messages,
        residual=0.0,
        sweeps=0,
        converged=True,
        vacuum=vacuum_scalars(net, messages),
        log_scale=complex(length) * np.log(complex(lam0)),
        normalized=True,
    )
