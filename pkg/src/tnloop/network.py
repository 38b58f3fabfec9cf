"""Tensor networks on arbitrary graphs and on periodic lattice unit cells.

A `TensorNetwork` is a multigraph: nodes carry tensors, edges connect tensor
axes ("slots") and may be parallel or form self-loops.  Edges with a single
endpoint are open.  Node and edge ids are hashable tuples of ints / strings,
which keeps them JSON-serializable.

Lattice geometry is described by a `LatticeSpec`: a translation unit cell with
a fixed bond list.  Bond b = (sa, sb, (ox, oy)) connects site sa of cell (x, y)
to site sb of cell (x + ox, y + oy).  Per-site slot lists fix the axis order of
every site tensor; virtual axes follow the geometric (counter-clockwise) order
around the site so that cyclic-symmetric states stay cyclic in axis space.

Conventions used throughout the library:
  * single-layer PEPS tensors have axes (phys, v_0, ..., v_{z-1});
  * double-layer tensors merge ket and bra axes row-major, ket index major;
  * impurity double-layer tensors append two axes (p_ket, p_bra);
  * edge ids on lattices are (x, y, b) with (x, y) the cell of the role-0
    (lesser) endpoint of bond b.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from .tensor import DTYPE, as_tensor, contract_pair

__all__ = [
    "TensorNetwork",
    "LatticeSpec",
    "PEPSUnitCell",
    "DoubleLayerCell",
    "square_lattice",
    "hexagonal_lattice",
    "kagome_lattice",
    "build_double_layer",
    "build_finite_patch",
    "build_peps_patch",
    "unit_cell_network",
    "cut_edge",
    "insert_impurity",
    "contract_greedy",
    "contraction_plan",
    "execute_plan",
    "boundary_cap",
    "network_to_json",
    "network_from_json",
]


# ------------------------------------------------------------------ #
# Generic tensor networks                                             #
# ------------------------------------------------------------------ #


class TensorNetwork:
    """Multigraph of tensors; treat instances as immutable once built."""

    def __init__(self) -> None:
        self._tensors: dict[Any, np.ndarray] = {}
        self._slots: dict[Any, list[Any]] = {}
        self._ends: dict[Any, list[tuple[Any, int]]] = {}
        self._dims: dict[Any, int] = {}

    # -- construction ------------------------------------------------

    def add_node(self, node: Any, tensor: np.ndarray, edges: Sequence[Any]) -> None:
        if node in self._tensors:
            raise ValueError(f"duplicate node id {node!r}")
        tensor = as_tensor(tensor)
        edges = list(edges)
        if tensor.ndim != len(edges):
            raise ValueError(
                f"node {node!r}: rank {tensor.ndim} tensor with {len(edges)} slots"
            )
        self._tensors[node] = tensor
        self._slots[node] = edges
        for slot, e in enumerate(edges):
            ends = self._ends.setdefault(e, [])
            if len(ends) >= 2:
                raise ValueError(f"edge {e!r} would have more than two endpoints")
            dim = tensor.shape[slot]
            if e in self._dims and self._dims[e] != dim:
                raise ValueError(
                    f"edge {e!r}: dimension {dim} conflicts with {self._dims[e]}"
                )
            ends.append((node, slot))
            self._dims[e] = dim

    def copy(self) -> "TensorNetwork":
        out = TensorNetwork()
        out._tensors = dict(self._tensors)
        out._slots = {n: list(s) for n, s in self._slots.items()}
        out._ends = {e: list(p) for e, p in self._ends.items()}
        out._dims = dict(self._dims)
        return out

    def replace_tensor(self, node: Any, tensor: np.ndarray) -> None:
        """Swap the tensor at `node`; the shape must be unchanged."""
        old = self._tensors[node]
        tensor = as_tensor(tensor)
        if tensor.shape != old.shape:
            raise ValueError(f"node {node!r}: shape {tensor.shape} != {old.shape}")
        self._tensors[node] = tensor

    # -- accessors ---------------------------------------------------

    @property
    def nodes(self) -> list[Any]:
        return list(self._tensors)

    @property
    def edges(self) -> list[Any]:
        return list(self._ends)

    def tensor(self, node: Any) -> np.ndarray:
        return self._tensors[node]

    def slots(self, node: Any) -> list[Any]:
        return list(self._slots[node])

    def edge_ends(self, edge: Any) -> list[tuple[Any, int]]:
        return list(self._ends[edge])

    def edge_dim(self, edge: Any) -> int:
        return self._dims[edge]

    @property
    def open_edges(self) -> list[Any]:
        return [e for e, ends in self._ends.items() if len(ends) == 1]

    def is_closed(self) -> bool:
        return not self.open_edges

    def validate(self) -> None:
        """Check structural consistency; raises ValueError on violation."""
        for node, edges in self._slots.items():
            t = self._tensors[node]
            for slot, e in enumerate(edges):
                if (node, slot) not in self._ends[e]:
                    raise ValueError(f"edge {e!r} missing endpoint ({node!r}, {slot})")
                if t.shape[slot] != self._dims[e]:
                    raise ValueError(f"edge {e!r}: dim mismatch at {node!r}")
        for e, ends in self._ends.items():
            if not 1 <= len(ends) <= 2:
                raise ValueError(f"edge {e!r} has {len(ends)} endpoints")
            for node, slot in ends:
                if node not in self._slots or self._slots[node][slot] != e:
                    raise ValueError(f"edge {e!r}: stale endpoint ({node!r}, {slot})")


def cut_edge(net: TensorNetwork, edge: Any) -> TensorNetwork:
    """Return a copy with `edge` cut into two open edges (edge, 0), (edge, 1).

    The new open edges keep the endpoint order of the original edge.
    """
    ends = net.edge_ends(edge)
    if len(ends) != 2:
        raise ValueError(f"edge {edge!r} is not internal")
    out = net.copy()
    del out._ends[edge]
    dim = out._dims.pop(edge)
    for k, (node, slot) in enumerate(ends):
        new_edge = (edge, k)
        if new_edge in out._ends:
            raise ValueError(f"edge id {new_edge!r} already in use")
        out._slots[node][slot] = new_edge
        out._ends[new_edge] = [(node, slot)]
        out._dims[new_edge] = dim
    return out


def insert_impurity(
    net: TensorNetwork,
    node: Any,
    tensor: np.ndarray,
    open_edge_ids: Sequence[Any],
) -> TensorNetwork:
    """Replace the tensor at `node` by one with extra trailing open axes."""
    old = net.tensor(node)
    tensor = as_tensor(tensor)
    extra = tensor.ndim - old.ndim
    if extra != len(open_edge_ids):
        raise ValueError(f"expected {extra} open edge ids, got {len(open_edge_ids)}")
    if tensor.shape[: old.ndim] != old.shape:
        raise ValueError("impurity tensor must keep the original axes in front")
    out = net.copy()
    out._tensors[node] = tensor
    for k, e in enumerate(open_edge_ids):
        if e in out._ends:
            raise ValueError(f"edge id {e!r} already in use")
        slot = old.ndim + k
        out._slots[node].append(e)
        out._ends[e] = [(node, slot)]
        out._dims[e] = tensor.shape[slot]
    return out


# ------------------------------------------------------------------ #
# Exact contraction                                                   #
# ------------------------------------------------------------------ #


def _trace_self_edges(t: np.ndarray, edges: list[Any]) -> tuple[np.ndarray, list[Any]]:
    """Contract any edge appearing twice among a single node's slots."""
    while True:
        seen: dict[Any, int] = {}
        pair = None
        for i, e in enumerate(edges):
            if e in seen:
                pair = (seen[e], i)
                break
            seen[e] = i
        if pair is None:
            return t, edges
        i, j = pair
        t = np.trace(t, axis1=i, axis2=j)
        edges = [e for k, e in enumerate(edges) if k not in (i, j)]


def contraction_plan(
    net: TensorNetwork, size_limit: int = 10**7
) -> list[tuple[Any, Any]]:
    """Greedy pairwise contraction order, smallest intermediate first.

    Returns a list of node-id pairs; `execute_plan` replays it on any network
    with the same structure.  Deterministic for a fixed network.
    """
    shapes = {n: list(net.tensor(n).shape) for n in net.nodes}
    slots = {n: list(net.slots(n)) for n in net.nodes}
    plan: list[tuple[Any, Any]] = []
    # Simulate the contraction symbolically to pick the order.
    while True:
        for n in list(slots):
            _, kept = _trace_self_edges_symbolic(shapes[n], slots[n])
            shapes[n] = [d for d, _ in kept]
            slots[n] = [e for _, e in kept]
        pairs: dict[tuple[Any, Any], None] = {}
        owner: dict[Any, Any] = {}
        for n, es in slots.items():
            for e in es:
                if e in owner and owner[e] != n:
                    key = (owner[e], n)
                    pairs.setdefault(key, None)
                else:
                    owner[e] = n
        if not pairs:
            break
        best = None
        for u, v in pairs:
            shared = set(slots[u]) & set(slots[v])
            size = 1
            for n in (u, v):
                for d, e in zip(shapes[n], slots[n]):
                    if e not in shared:
                        size *= d
            if best is None or size < best[0]:
                best = (size, u, v)
        size, u, v = best
        if size > size_limit:
            raise ValueError(
                f"contraction intermediate of {size} entries exceeds limit {size_limit}"
            )
        plan.append((u, v))
        shared = set(slots[u]) & set(slots[v])
        new_shape = []
        new_slots = []
        for n in (u, v):
            for d, e in zip(shapes[n], slots[n]):
                if e not in shared:
                    new_shape.append(d)
                    new_slots.append(e)
        del shapes[v], slots[v]
        shapes[u] = new_shape
        slots[u] = new_slots
    return plan


def _trace_self_edges_symbolic(shape, edges):
    kept = list(zip(shape, edges))
    while True:
        seen: dict[Any, int] = {}
        pair = None
        for i, (_, e) in enumerate(kept):
            if e in seen:
                pair = (seen[e], i)
                break
            seen[e] = i
        if pair is None:
            return None, kept
        kept = [x for k, x in enumerate(kept) if k not in pair]


def execute_plan(
    net: TensorNetwork,
    plan: Sequence[tuple[Any, Any]],
    open_order: Sequence[Any] | None = None,
) -> np.ndarray:
    """Contract `net` along a precomputed plan.

    Open edges survive as axes of the result, ordered by `open_order`
    (default: edge insertion order).  Disconnected pieces are combined by
    outer product at the end.
    """
    tensors = {n: net.tensor(n) for n in net.nodes}
    slots = {n: list(net.slots(n)) for n in net.nodes}
    for n in list(tensors):
        tensors[n], slots[n] = _trace_self_edges(tensors[n], slots[n])
    for u, v in plan:
        shared = [e for e in slots[u] if e in set(slots[v])]
        axes_u = [slots[u].index(e) for e in shared]
        axes_v = [slots[v].index(e) for e in shared]
        t = contract_pair(tensors[u], axes_u, tensors[v], axes_v)
        keep_u = [e for e in slots[u] if e not in shared]
        keep_v = [e for e in slots[v] if e not in shared]
        del tensors[v], slots[v]
        tensors[u] = t
        slots[u] = keep_u + keep_v
        tensors[u], slots[u] = _trace_self_edges(tensors[u], slots[u])
    # Outer product of what remains (disconnected components).
    items = list(tensors)
    t = tensors[items[0]]
    es = slots[items[0]]
    for n in items[1:]:
        t = np.multiply.outer(t, tensors[n])
        es = es + slots[n]
    if open_order is None:
        open_order = [e for e in net.edges if e in set(es)]
    if sorted(map(repr, open_order)) != sorted(map(repr, es)):
        raise ValueError("open_order does not match the surviving open edges")
    perm = [es.index(e) for e in open_order]
    return np.ascontiguousarray(np.transpose(t, perm))


def contract_greedy(
    net: TensorNetwork,
    open_order: Sequence[Any] | None = None,
    size_limit: int = 10**7,
) -> np.ndarray:
    """Exactly contract a network; returns a 0-dim array for closed networks."""
    plan = contraction_plan(net, size_limit=size_limit)
    return execute_plan(net, plan, open_order=open_order)


# ------------------------------------------------------------------ #
# Lattice unit cells                                                  #
# ------------------------------------------------------------------ #


@dataclass(frozen=True)
class LatticeSpec:
    """Translation unit cell of a two-dimensional lattice.

    bonds[b] = (sa, sb, (ox, oy)); slot_lists[s] fixes, per site, the ordered
    incident (bond, role) pairs, role 0 for the sa side and 1 for the sb side.
    """

    name: str
    num_sites: int
    bonds: tuple[tuple[int, int, tuple[int, int]], ...]
    slot_lists: tuple[tuple[tuple[int, int], ...], ...]
    girth: int

    def __post_init__(self) -> None:
        seen = set()
        for s, slots in enumerate(self.slot_lists):
            for b, role in slots:
                sa, sb, _ = self.bonds[b]
                if (b, role) in seen:
                    raise ValueError(f"slot ({b}, {role}) listed twice")
                seen.add((b, role))
                if (sa if role == 0 else sb) != s:
                    raise ValueError(f"slot ({b}, {role}) does not belong to site {s}")
        if len(seen) != 2 * len(self.bonds):
            raise ValueError("slot lists do not cover every bond endpoint")

    def coordination(self, site: int) -> int:
        return len(self.slot_lists[site])

    def slot_of(self, site: int, bond: int, role: int) -> int:
        return self.slot_lists[site].index((bond, role))

    # -- infinite-lattice incidence helpers (used by the loop catalog) --

    def edge_endpoints(self, edge):
        """Edge (x, y, b) -> its two sites ((x, y, sa), (x', y', sb))."""
        x, y, b = edge
        sa, sb, (ox, oy) = self.bonds[b]
        return (x, y, sa), (x + ox, y + oy, sb)

    def site_edges(self, site):
        """All edges incident to lattice site (x, y, s), in slot order."""
        x, y, s = site
        out = []
        for b, role in self.slot_lists[s]:
            _, _, (ox, oy) = self.bonds[b]
            if role == 0:
                out.append((x, y, b))
            else:
                out.append((x - ox, y - oy, b))
        return out


def square_lattice() -> LatticeSpec:
    """One site per cell, coordination 4; slots ordered right, up, left, down."""
    return LatticeSpec(
        name="square",
        num_sites=1,
        bonds=((0, 0, (1, 0)), (0, 0, (0, 1))),
        slot_lists=(((0, 0), (1, 0), (0, 1), (1, 1)),),
        girth=4,
    )


def hexagonal_lattice() -> LatticeSpec:
    """Honeycomb with a two-site (A, B) cell, coordination 3."""
    return LatticeSpec(
        name="hexagonal",
        num_sites=2,
        bonds=((0, 1, (0, 0)), (1, 0, (1, 0)), (1, 0, (0, 1))),
        slot_lists=(
            ((0, 0), (1, 1), (2, 1)),
            ((0, 1), (1, 0), (2, 0)),
        ),
        girth=6,
    )


def kagome_lattice() -> LatticeSpec:
    """Three-site cell, coordination 4; in-cell bonds form the up triangles."""
    return LatticeSpec(
        name="kagome",
        num_sites=3,
        bonds=(
            (0, 1, (0, 0)),
            (1, 2, (0, 0)),
            (2, 0, (0, 0)),
            (2, 0, (0, 1)),
            (2, 1, (1, 0)),
            (0, 1, (1, -1)),
        ),
        slot_lists=(
            ((2, 1), (0, 0), (3, 1), (5, 0)),
            ((1, 0), (5, 1), (4, 1), (0, 1)),
            ((4, 0), (3, 0), (1, 1), (2, 0)),
        ),
        girth=3,
    )


_SPECS = {
    "square": square_lattice,
    "hexagonal": hexagonal_lattice,
    "kagome": kagome_lattice,
}


def lattice_by_name(name: str) -> LatticeSpec:
    try:
        return _SPECS[name]()
    except KeyError:
        raise ValueError(f"unknown lattice {name!r}") from None


# ------------------------------------------------------------------ #
# Unit cells with tensors                                             #
# ------------------------------------------------------------------ #


@dataclass(frozen=True)
class PEPSUnitCell:
    """Single-layer PEPS unit cell: one tensor per site, axes (phys, *virtual)."""

    spec: LatticeSpec
    tensors: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if len(self.tensors) != self.spec.num_sites:
            raise ValueError("one tensor per site required")
        for s, t in enumerate(self.tensors):
            if t.ndim != 1 + self.spec.coordination(s):
                raise ValueError(f"site {s}: rank {t.ndim} tensor, expected "
                                 f"{1 + self.spec.coordination(s)}")
        self.bond_dims  # trigger cross-site consistency check

    @property
    def phys_dims(self) -> tuple[int, ...]:
        return tuple(t.shape[0] for t in self.tensors)

    @property
    def bond_dims(self) -> tuple[int, ...]:
        dims = [0] * len(self.spec.bonds)
        for s, t in enumerate(self.tensors):
            for slot, (b, _) in enumerate(self.spec.slot_lists[s]):
                d = t.shape[1 + slot]
                if dims[b] and dims[b] != d:
                    raise ValueError(f"bond {b}: conflicting dimensions")
                dims[b] = d
        return tuple(dims)


@dataclass(frozen=True)
class DoubleLayerCell:
    """Squared-norm unit cell: bulk tensors plus optional physical impurities.

    Bulk tensor axes follow the site slot order with ket/bra pairs merged;
    impurity tensors repeat the bulk axes and append (p_ket, p_bra).
    Tracing an impurity's physical pair recovers the bulk tensor.
    """

    spec: LatticeSpec
    bulk: tuple[np.ndarray, ...]
    impurity: tuple[np.ndarray, ...] | None = None

    def __post_init__(self) -> None:
        if len(self.bulk) != self.spec.num_sites:
            raise ValueError("one bulk tensor per site required")
        for s, t in enumerate(self.bulk):
            if t.ndim != self.spec.coordination(s):
                raise ValueError(f"site {s}: rank {t.ndim}, expected "
                                 f"{self.spec.coordination(s)}")
        if self.impurity is not None:
            for s, (t, b) in enumerate(zip(self.impurity, self.bulk)):
                if t.ndim != b.ndim + 2 or t.shape[: b.ndim] != b.shape:
                    raise ValueError(f"impurity {s}: incompatible shape")
                traced = np.trace(t, axis1=t.ndim - 2, axis2=t.ndim - 1)
                if not np.allclose(traced, b, atol=1e-12 * max(1.0, _absmax(b))):
                    raise ValueError(f"impurity {s}: physical trace != bulk tensor")

    @property
    def bond_dims(self) -> tuple[int, ...]:
        dims = [0] * len(self.spec.bonds)
        for s, t in enumerate(self.bulk):
            for slot, (b, _) in enumerate(self.spec.slot_lists[s]):
                dims[b] = t.shape[slot]
        return tuple(dims)

    @property
    def phys_dims(self) -> tuple[int, ...] | None:
        if self.impurity is None:
            return None
        return tuple(t.shape[-2] for t in self.impurity)


def _absmax(t: np.ndarray) -> float:
    return float(np.abs(t).max()) if t.size else 0.0


def build_double_layer(peps: PEPSUnitCell) -> DoubleLayerCell:
    """Square a PEPS cell into its norm network's unit cell."""
    bulk = []
    imps = []
    for s, t in enumerate(peps.tensors):
        z = t.ndim - 1
        pair = np.multiply.outer(t, t.conj())
        # axes: (p, v_0..v_{z-1}, p', v_0'..v_{z-1}')
        order = []
        for k in range(z):
            order.extend([1 + k, 2 + z + k])
        imp = np.transpose(pair, order + [0, 1 + z])
        merged_dims = [t.shape[1 + k] ** 2 for k in range(z)]
        imp = np.ascontiguousarray(imp).reshape(
            merged_dims + [t.shape[0], t.shape[0]]
        )
        bulk.append(np.trace(imp, axis1=z, axis2=z + 1))
        imps.append(imp)
    return DoubleLayerCell(spec=peps.spec, bulk=tuple(bulk), impurity=tuple(imps))


# ------------------------------------------------------------------ #
# Patch builders                                                      #
# ------------------------------------------------------------------ #


def boundary_cap(dim: int) -> np.ndarray:
    """Unit-norm cap for an open boundary axis.

    Double-layer axes (perfect-square dimension) get the vectorized identity,
    i.e. the maximally entangled ket/bra pair; anything else gets a flat vector.
    """
    root = int(round(dim**0.5))
    if root * root == dim:
        cap = np.eye(root, dtype=DTYPE).ravel() / np.sqrt(root)
    else:
        cap = np.ones(dim, dtype=DTYPE) / np.sqrt(dim)
    return cap


def _slot_edge(spec, x, y, s, slot, nx, ny, periodic):
    """Edge id seen from slot `slot` of patch site (x, y, s), or None.

    The id is (x, y, b) with (x, y) the cell of the bond's role-0 endpoint,
    wrapped into range on periodic patches.  None marks a bond leaving an
    open patch.
    """
    b, role = spec.slot_lists[s][slot]
    _, _, (ox, oy) = spec.bonds[b]
    if role == 0:
        ax, ay = x, y
        tx, ty = x + ox, y + oy
    else:
        ax, ay = x - ox, y - oy
        tx, ty = ax, ay
    if periodic:
        return (ax % nx, ay % ny, b)
    if 0 <= tx < nx and 0 <= ty < ny:
        return (ax, ay, b)
    return None


def build_finite_patch(
    cell: DoubleLayerCell, nx: int, ny: int, periodic: bool = True
) -> TensorNetwork:
    """Tile a double-layer cell into a closed nx-by-ny network.

    Periodic patches need nx, ny >= 2 so no bond folds onto a single site.
    Open patches cap the boundary axes with `boundary_cap`, which keeps the
    network closed.
    """
    if periodic and (nx < 2 or ny < 2):
        raise ValueError("periodic patches need nx, ny >= 2")
    if nx < 1 or ny < 1:
        raise ValueError("patch must contain at least one cell")
    spec = cell.spec
    net = TensorNetwork()
    for x in range(nx):
        for y in range(ny):
            for s in range(spec.num_sites):
                t = cell.bulk[s]
                edges = []
                for slot in range(spec.coordination(s)):
                    eid = _slot_edge(spec, x, y, s, slot, nx, ny, periodic)
                    if eid is None:
                        # boundary of an open patch: absorb the cap
                        k = len(edges)
                        t = contract_pair(t, [k], boundary_cap(t.shape[k]), [0])
                    else:
                        edges.append(eid)
                net.add_node((x, y, s), t, edges)
    net.validate()
    return net


def build_peps_patch(
    peps: PEPSUnitCell, nx: int, ny: int, periodic: bool = True
) -> TensorNetwork:
    """Tile a single-layer PEPS cell; physical axes become open edges.

    Open edge ids: ("p", x, y, s) for physical axes; boundary bonds of open
    patches survive as open virtual edges under their usual (x, y, b) id.
    """
    if periodic and (nx < 2 or ny < 2):
        raise ValueError("periodic patches need nx, ny >= 2")
    spec = peps.spec
    net = TensorNetwork()
    for x in range(nx):
        for y in range(ny):
            for s in range(spec.num_sites):
                edges: list[Any] = [("p", x, y, s)]
                for slot in range(spec.coordination(s)):
                    eid = _slot_edge(spec, x, y, s, slot, nx, ny, periodic)
                    if eid is None:
                        b, role = spec.slot_lists[s][slot]
                        _, _, (ox, oy) = spec.bonds[b]
                        ax, ay = (x, y) if role == 0 else (x - ox, y - oy)
                        eid = (ax, ay, b)
                    edges.append(eid)
                net.add_node((x, y, s), peps.tensors[s], edges)
    net.validate()
    return net


def unit_cell_network(cell: DoubleLayerCell) -> TensorNetwork:
    """Quotient network of the infinite lattice: one node per cell site.

    Every bond becomes a single edge (a self-loop when both ends land on the
    same site), so translation-invariant message passing on the infinite
    lattice is ordinary message passing on this network.
    """
    spec = cell.spec
    net = TensorNetwork()
    for s in range(spec.num_sites):
        edges = [b for b, _ in spec.slot_lists[s]]
        net.add_node(s, cell.bulk[s], edges)
    net.validate()
    return net


# ------------------------------------------------------------------ #
# JSON serialization                                                  #
# ------------------------------------------------------------------ #


def _encode_id(x: Any) -> Any:
    if isinstance(x, tuple):
        return [_encode_id(v) for v in x]
    if isinstance(x, (int, str)):
        return x
    raise TypeError(f"id component {x!r} is not JSON-serializable")


def _decode_id(x: Any) -> Any:
    if isinstance(x, list):
        return tuple(_decode_id(v) for v in x)
    return x


def _encode_array(t: np.ndarray) -> list:
    return [[float(v.real), float(v.imag)] for v in np.asarray(t).ravel()]


def _decode_array(data: list, dims: Sequence[int]) -> np.ndarray:
    flat = np.array([complex(re, im) for re, im in data], dtype=DTYPE)
    return as_tensor(flat, dims)


def network_to_json(net: TensorNetwork) -> str:
    doc = {
        "format": "tnloop-network-v1",
        "nodes": [
            {
                "id": _encode_id(n),
                "dims": list(net.tensor(n).shape),
                "slots": [_encode_id(e) for e in net.slots(n)],
                "data": _encode_array(net.tensor(n)),
            }
            for n in net.nodes
        ],
        "edges": [
            {
                "id": _encode_id(e),
                "dim": net.edge_dim(e),
                "ends": [[_encode_id(n), s] for n, s in net.edge_ends(e)],
            }
            for e in net.edges
        ],
    }
    return json.dumps(doc, separators=(",", ":"))


def network_from_json(text: str) -> TensorNetwork:
    doc = json.loads(text)
    if doc.get("format") != "tnloop-network-v1":
        raise ValueError("not a tnloop network document")
    net = TensorNetwork()
    for nd in doc["nodes"]:
        net.add_node(
            _decode_id(nd["id"]),
            _decode_array(nd["data"], nd["dims"]),
            [_decode_id(e) for e in nd["slots"]],
        )
    # edges are implied by slots; validate against the stored edge table
    for ed in doc["edges"]:
        e = _decode_id(ed["id"])
        if net.edge_dim(e) != ed["dim"]:
            raise ValueError(f"edge {e!r}: stored dim disagrees with tensors")
    net.validate()
    return net
