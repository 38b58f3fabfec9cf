"""Benchmark states: AKLT on three lattices and random rotation-symmetric PEPS.

AKLT tensors are built the standard way: one virtual spin-1/2 per bond, a
singlet on every bond, and the on-site projection onto the fully symmetric
(maximal-spin) subspace.  The singlet matrix is absorbed into the role-0 slot
of each bond so that plain axis contraction of neighboring tensors produces
the state.

Random states are isometries from the physical index into the cyclically
symmetric part of the virtual space, which makes the site tensor invariant
under a simultaneous rotation of its virtual axes.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .network import (
    DoubleLayerCell,
    LatticeSpec,
    PEPSUnitCell,
    TensorNetwork,
    contract_greedy,
    hexagonal_lattice,
)
from .tensor import DTYPE, factorize, permute

__all__ = [
    "spin_matrices",
    "total_spin_projector",
    "aklt_peps",
    "random_peps",
    "RestructuredHex",
    "kagome_to_hex",
    "kagome_to_hex_double_layer",
]


# ------------------------------------------------------------------ #
# Spin algebra                                                        #
# ------------------------------------------------------------------ #


def spin_matrices(j: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(Sx, Sy, Sz) for spin j in the basis m = j, j-1, ..., -j."""
    d = int(round(2 * j + 1))
    if abs(2 * j - (d - 1)) > 1e-12 or d < 1:
        raise ValueError(f"not a spin quantum number: {j}")
    m = j - np.arange(d)
    sz = np.diag(m).astype(DTYPE)
    sp = np.zeros((d, d), dtype=DTYPE)
    for k in range(1, d):
        sp[k - 1, k] = np.sqrt(j * (j + 1) - m[k] * (m[k] + 1))
    sm = sp.conj().T
    sx = (sp + sm) / 2
    sy = (sp - sm) / 2j
    return sx, sy, sz


def total_spin_projector(js: tuple[float, ...], target: float) -> np.ndarray:
    """Projector onto total spin `target` in a product of spins `js`.

    Diagonalizes the total S^2; eigenvalues are exact half-integer products,
    so selection by nearest j(j+1) is unambiguous.
    """
    dims = [int(round(2 * j + 1)) for j in js]
    dim = int(np.prod(dims))
    stot = [np.zeros((dim, dim), dtype=DTYPE) for _ in range(3)]
    for a, j in enumerate(js):
        ops = spin_matrices(j)
        for c in range(3):
            factors = [np.eye(d, dtype=DTYPE) for d in dims]
            factors[a] = ops[c]
            acc = factors[0]
            for f in factors[1:]:
                acc = np.kron(acc, f)
            stot[c] = stot[c] + acc
    s2 = sum(op @ op for op in stot)
    evals, evecs = np.linalg.eigh(s2)
    want = target * (target + 1)
    sel = np.abs(evals - want) < 0.25
    if not np.any(sel):
        raise ValueError(f"total spin {target} absent from {js}")
    v = evecs[:, sel]
    return (v @ v.conj().T).astype(DTYPE)


def _dicke_isometry(n: int) -> np.ndarray:
    """Rows: orthonormal symmetric states of n qubits, total Sz descending.

    Row k is the normalized sum of all computational states with k down
    spins, i.e. the spin-n/2 state with m = n/2 - k.
    """
    w = np.zeros((n + 1, 2**n), dtype=DTYPE)
    for idx in range(2**n):
        k = bin(idx).count("1")
        w[k, idx] = 1.0 / np.sqrt(comb(n, k))
    return w


_SINGLET = np.array([[0.0, 1.0], [-1.0, 0.0]], dtype=DTYPE)


# ------------------------------------------------------------------ #
# Model states                                                        #
# ------------------------------------------------------------------ #


def aklt_peps(spec: LatticeSpec) -> PEPSUnitCell:
    """AKLT state on `spec`: physical spin z/2 at a coordination-z site."""
    tensors = []
    for s in range(spec.num_sites):
        z = spec.coordination(s)
        t = _dicke_isometry(z).reshape((z + 1,) + (2,) * z)
        for slot, (_, role) in enumerate(spec.slot_lists[s]):
            if role == 0:
                t = np.moveaxis(
                    np.tensordot(t, _SINGLET, axes=([1 + slot], [0])), -1, 1 + slot
                )
        tensors.append(t)
    return PEPSUnitCell(spec=spec, tensors=tuple(tensors))


def random_peps(
    spec: LatticeSpec, bond_dim: int, phys_dim: int, seed: int
) -> PEPSUnitCell:
    """Random rotation-symmetric PEPS cell; site s draws from seed + s.

    Columns of a uniform [0, 1) matrix are averaged over cyclic rotations of
    the virtual multi-index and orthonormalized, so the site tensor is an
    isometry from the physical space into the rotation-invariant subspace.
    """
    tensors = []
    for s in range(spec.num_sites):
        z = spec.coordination(s)
        if phys_dim > bond_dim**z:
            raise ValueError("physical dimension exceeds virtual space")
        rng = np.random.default_rng(seed + s)
        mat = rng.uniform(size=(bond_dim**z, phys_dim))
        idx = np.arange(bond_dim**z)
        multi = np.unravel_index(idx, (bond_dim,) * z)
        perm = np.ravel_multi_index(multi[1:] + multi[:1], (bond_dim,) * z)
        sym = np.zeros_like(mat)
        cur = idx
        for _ in range(z):
            sym += mat[cur]
            cur = perm[cur]
        sym /= z
        q, r = np.linalg.qr(sym)
        rd = np.diag(r)
        if np.min(np.abs(rd)) < 1e-10:
            raise ValueError(
                "phys_dim exceeds the rank of the cyclically symmetric span"
            )
        q = q * np.sign(rd)
        tensors.append(q.T.reshape((phys_dim,) + (bond_dim,) * z).astype(DTYPE))
    return PEPSUnitCell(spec=spec, tensors=tuple(tensors))


# ------------------------------------------------------------------ #
# Kagome -> honeycomb restructuring                                   #
# ------------------------------------------------------------------ #


def _double_virtual(t: np.ndarray) -> np.ndarray:
    """Ket/bra pair of a tensor without physical axes, merged per axis."""
    z = t.ndim
    pair = np.multiply.outer(t, t.conj())
    order = []
    for k in range(z):
        order.extend([k, z + k])
    pair = np.transpose(pair, order)
    return np.ascontiguousarray(pair).reshape([d * d for d in t.shape])


@dataclass(frozen=True)
class RestructuredHex:
    """Kagome cell rewritten on honeycomb geometry, single layer.

    Vertex tensors sit at triangle centers; the physical legs live on the
    honeycomb edges in the cores.  Axes of both vertex tensors follow the
    honeycomb slot order (bond 0, 1, 2); edge_cores[b] has axes
    (up-channel, phys, down-channel) for honeycomb bond b.
    """

    vertex_up: np.ndarray
    vertex_down: np.ndarray
    edge_cores: tuple[np.ndarray, np.ndarray, np.ndarray]


def kagome_to_hex(peps: PEPSUnitCell, cutoff: float = 0.0) -> RestructuredHex:
    """Split each kagome site and regroup triangles into honeycomb vertices.

    Each 5-index site tensor is split by two factorizations into an
    up-triangle piece, a physical core, and a down-triangle piece.  The three
    pieces of every triangle contract into one vertex tensor, so triangles
    become honeycomb vertices and kagome sites become honeycomb edges.  With
    cutoff 0 the rewrite is exact and the channel dimension is at most m^2.
    """
    spec = peps.spec
    if spec.name != "kagome":
        raise ValueError("restructuring is defined for the kagome lattice")
    if cutoff >= 1:
        raise ValueError("cutoff must be below 1")
    g_up, core, g_dn = [], [], []
    up_bonds, dn_bonds = [], []
    for s in range(spec.num_sites):
        slots = spec.slot_lists[s]
        up = [k for k, (b, _) in enumerate(slots) if spec.bonds[b][2] == (0, 0)]
        dn = [k for k in range(len(slots)) if k not in up]
        up_bonds.append([slots[k][0] for k in up])
        dn_bonds.append([slots[k][0] for k in dn])
        t = permute(peps.tensors[s], [1 + up[0], 1 + up[1], 0, 1 + dn[0], 1 + dn[1]])
        left, rest, _ = factorize(t, [0, 1], cutoff=cutoff)
        mid, right, _ = factorize(rest, [0, 1], cutoff=cutoff)
        g_up.append(left)  # (v, v, c_up)
        core.append(mid)  # (c_up, p, c_down)
        g_dn.append(right)  # (c_down, v, v)

    def triangle(pieces, bonds_per_site, channel_axis_first):
        net = TensorNetwork()
        for s in range(3):
            ba, bb = bonds_per_site[s]
            if channel_axis_first:
                edges = [("c", s), ("t", ba), ("t", bb)]
            else:
                edges = [("t", ba), ("t", bb), ("c", s)]
            net.add_node(s, pieces[s], edges)
        net.validate()
        return contract_greedy(net, open_order=[("c", 0), ("c", 1), ("c", 2)])

    u = triangle(g_up, up_bonds, channel_axis_first=False)
    d = triangle(g_dn, dn_bonds, channel_axis_first=True)
    # honeycomb bonds 0, 1, 2 carry the cores of kagome sites 2, 1, 0:
    # site 2 joins the triangles of its own cell, site 0 reaches the cell
    # above, site 1 the cell to the right
    site_for_slot = (2, 1, 0)
    return RestructuredHex(
        vertex_up=np.ascontiguousarray(np.transpose(u, site_for_slot)),
        vertex_down=np.ascontiguousarray(np.transpose(d, site_for_slot)),
        edge_cores=tuple(core[s] for s in site_for_slot),
    )


def kagome_to_hex_double_layer(
    peps: PEPSUnitCell, cutoff: float = 0.0
) -> DoubleLayerCell:
    """Norm network of a kagome PEPS as a honeycomb double-layer cell.

    The squared edge cores are absorbed into the up-triangle vertex.  The
    honeycomb cell has no impurity tensors: a kagome site's physical leg
    lives on an edge, not a vertex, after restructuring.
    """
    r = kagome_to_hex(peps, cutoff=cutoff)
    a = _double_virtual(r.vertex_up)
    b = _double_virtual(r.vertex_down)
    for k, m in enumerate(r.edge_cores):
        em = np.einsum("apb,cpd->acbd", m, m.conj()).reshape(
            m.shape[0] ** 2, m.shape[2] ** 2
        )
        a = np.moveaxis(np.tensordot(a, em, axes=([k], [0])), -1, k)
    a = np.ascontiguousarray(a)
    return DoubleLayerCell(spec=hexagonal_lattice(), bulk=(a, b), impurity=None)
