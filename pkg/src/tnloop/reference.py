"""Independent reference contractions for translation-invariant networks.

Everything here works on a square grid of "blocks".  A square-lattice cell is
one block; a honeycomb cell is blocked by contracting its in-cell bond, which
turns the two-site cell into a single four-legged tensor whose horizontal and
vertical grid bonds are the two remaining bond types.  Kagome cells must be
restructured to honeycomb first.

Three references with very different systematics are provided: exact tori
(tr M^N via the column transfer matrix), infinite strips of finite width
(power iteration on a ring transfer operator), and the infinite plane via a
uniform boundary matrix-product state of capped bond dimension.  The boundary
environment also yields reference cut-bond transfer matrices and two-site
density matrices by sandwiching a modified column between channel fixed
points.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigs

from .network import DoubleLayerCell
from .tensor import DTYPE, contract_pair, permute

__all__ = [
    "ReferenceUnreliable",
    "ReferenceResult",
    "BlockedSquare",
    "block_cell",
    "exact_patch_value",
    "periodic_torus_free_energy",
    "strip_free_energy",
    "BoundaryEnvironment",
    "boundary_environment",
    "boundary_mps_free_energy",
]


class ReferenceUnreliable(RuntimeError):
    """A reference contraction failed to reach its stated accuracy."""


@dataclass(frozen=True)
class ReferenceResult:
    """One reference evaluation: `resolution` is N or chi or the strip width.

    error_estimate is a monitored proxy (truncation weight, spectral tail),
    not a rigorous bound; None when the method offers nothing sensible.
    """

    value: Any
    method: str
    resolution: int
    info: dict
    error_estimate: float | None = None


# ------------------------------------------------------------------ #
# Blocking                                                            #
# ------------------------------------------------------------------ #


@dataclass(frozen=True)
class BlockedSquare:
    """One square-grid block tensor with axes (left, down, right, up)."""

    tensor: np.ndarray
    sites_per_block: int

    @property
    def hdim(self) -> int:
        return self.tensor.shape[0]

    @property
    def vdim(self) -> int:
        return self.tensor.shape[1]


def block_cell(cell: DoubleLayerCell) -> BlockedSquare:
    """Map a square or honeycomb double-layer cell onto the block grid."""
    name = cell.spec.name
    if name == "square":
        # slots (right, up, left, down) -> (left, down, right, up)
        return BlockedSquare(permute(cell.bulk[0], [2, 3, 0, 1]), 1)
    if name == "hexagonal":
        a, b = cell.bulk
        # contracting the in-cell bond leaves (a.b1, a.b2, b.b1, b.b2),
        # which point left, down, right, up by the bond offsets
        return BlockedSquare(contract_pair(a, [0], b, [0]), 2)
    raise ValueError(f"cannot block lattice {name!r}; restructure first")


def _hex_cut_open(cell: DoubleLayerCell) -> np.ndarray:
    """Hex block with the in-cell bond cut: axes (l, d, r, u, i, j)."""
    a, b = cell.bulk
    pair = np.multiply.outer(a, b)
    return np.ascontiguousarray(np.transpose(pair, [1, 2, 4, 5, 0, 3]))


def _hex_imp_pair(cell: DoubleLayerCell) -> np.ndarray:
    """Hex impurity block: axes (l, d, r, u, p_ket, p_bra, q_ket, q_bra)."""
    ia, ib = cell.impurity
    t = contract_pair(ia, [0], ib, [0])
    # (a.b1, a.b2, pk, pb, b.b1, b.b2, qk, qb) -> grid axes first
    return permute(t, [0, 1, 4, 5, 2, 3, 6, 7])


def _square_cut_open(cell: DoubleLayerCell) -> tuple[np.ndarray, np.ndarray]:
    """Two adjacent square blocks with the bond between them cut.

    The severed horizontal bond is replaced by a dummy dimension-1 bond so
    both specials keep the (l, d, r, u, *extra) layout.
    """
    t = cell.bulk[0]  # (r, u, l, d)
    left = np.transpose(t, [2, 3, 1, 0])[:, :, None, :, :]
    right = np.transpose(t, [3, 0, 1, 2])[None, :, :, :, :]
    return np.ascontiguousarray(left), np.ascontiguousarray(right)


def _square_imp_block(cell: DoubleLayerCell) -> np.ndarray:
    imp = cell.impurity[0]  # (r, u, l, d, pk, pb)
    return permute(imp, [2, 3, 0, 1, 4, 5])


# ------------------------------------------------------------------ #
# Exact small patches                                                 #
# ------------------------------------------------------------------ #


def exact_patch_value(cell: DoubleLayerCell, nx: int, ny: int) -> complex:
    """Contract an nx-by-ny periodic patch of the cell exactly."""
    from .network import build_finite_patch, contract_greedy

    net = build_finite_patch(cell, nx, ny, periodic=True)
    return complex(contract_greedy(net).reshape(()))


# ------------------------------------------------------------------ #
# Ring transfer operator (shared by torus and strip references)       #
# ------------------------------------------------------------------ #


def _ring_apply(t: np.ndarray, n: int, vecs: np.ndarray) -> np.ndarray:
    """Apply a ring of n copies of block t to stacked vectors (dim, batch)."""
    vdim = t.shape[1]
    batch = vecs.shape[1]
    w = vecs.reshape((vdim,) * n + (batch,))
    w = np.tensordot(t, w, axes=([3], [0]))  # (l0, d0, r, u1.., batch)
    w = np.moveaxis(w, 2, 1)  # (l0, r, d0, u1.., batch)
    for k in range(1, n):
        w = np.tensordot(w, t, axes=([1, 2 + k], [0, 3]))
        w = np.moveaxis(w, -1, 1)  # new r bond home
        w = np.moveaxis(w, -1, 2 + k)  # d_k after d_{k-1}
    out = np.trace(w, axis1=0, axis2=1)
    return np.ascontiguousarray(out).reshape(vdim**n, batch)


def _ring_matrix(t: np.ndarray, n: int, batch: int = 128) -> np.ndarray:
    dim = t.shape[1] ** n
    m = np.empty((dim, dim), dtype=DTYPE)
    eye = np.eye(dim, dtype=DTYPE)
    for lo in range(0, dim, batch):
        hi = min(lo + batch, dim)
        m[:, lo:hi] = _ring_apply(t, n, eye[:, lo:hi])
    return m


def periodic_torus_free_energy(
    cell: DoubleLayerCell,
    n: int,
    dense_limit: int = 4096,
    num_eigs: int = 48,
) -> ReferenceResult:
    """Free energy per site of the torus that is n lattice sites around.

    n counts sites along a cycle that wraps the torus, so the shortest
    wrapping excitation has degree n; on the honeycomb each block holds two
    sites of any wrapping cycle, so the grid is n/2 blocks on a side and n
    must be even.  M is the transfer operator of one periodic row of blocks,
    mapping the vertical bonds above the row to those below, and
    f = -log tr(M^rows) / sites.  Below `dense_limit` the trace comes from
    an exact dense matrix power; above it from the leading part of the
    spectrum, with an a-posteriori bound on what the discarded tail could
    contribute.
    """
    bs = block_cell(cell)
    if n % bs.sites_per_block:
        raise ValueError(
            f"torus size {n} is not a multiple of {bs.sites_per_block} sites"
        )
    nb = n // bs.sites_per_block
    dim = bs.vdim**nb
    info: dict = {"n": n, "blocks": nb, "dim": dim}
    if dim <= dense_limit:
        m = _ring_matrix(bs.tensor, nb)
        scale = float(np.abs(m).max())
        trace = complex(np.trace(np.linalg.matrix_power(m / scale, nb)))
        log_trace = np.log(trace) + nb * np.log(scale)
        info["method_detail"] = "dense matrix power"
    else:
        op = LinearOperator(
            (dim, dim),
            matvec=lambda v: _ring_apply(bs.tensor, nb, v.reshape(-1, 1))[:, 0],
            dtype=DTYPE,
        )
        k = min(num_eigs, dim - 2)
        v0 = np.ones(dim, dtype=DTYPE)
        try:
            evals = eigs(op, k=k, which="LM", v0=v0, return_eigenvectors=False)
        except ArpackNoConvergence as err:
            raise ReferenceUnreliable(f"torus spectrum did not converge: {err}")
        mags = np.sort(np.abs(evals))[::-1]
        partial = complex(np.sum(evals**nb))
        tail_bound = float((dim - k) * mags[-1] ** nb)
        if tail_bound > 1e-12 * abs(partial):
            raise ReferenceUnreliable(
                f"torus spectral tail bound {tail_bound:.2e} is not negligible"
            )
        log_trace = np.log(partial)
        info["method_detail"] = f"top-{k} spectrum"
        info["tail_bound"] = tail_bound
    if abs(log_trace.imag) > 1e-8:
        raise ReferenceUnreliable(
            f"torus partition value has phase {log_trace.imag:.2e}"
        )
    f = -float(log_trace.real) / (nb * nb * bs.sites_per_block)
    return ReferenceResult(
        value=f,
        method="torus",
        resolution=n,
        info=info,
        error_estimate=info.get("tail_bound"),
    )


def strip_free_energy(
    cell: DoubleLayerCell,
    width: int,
    tol: float = 1e-12,
    max_iters: int = 5000,
) -> ReferenceResult:
    """Free energy per site of the infinite strip of `width` periodic columns.

    Power iteration for the dominant eigenvalue of the width-w ring operator;
    raises if the estimate stops improving before reaching `tol`.
    """
    bs = block_cell(cell)
    dim = bs.vdim**width
    v = np.ones((dim, 1), dtype=DTYPE) / np.sqrt(dim)
    f_prev = None
    u = width * bs.sites_per_block
    for it in range(1, max_iters + 1):
        w = _ring_apply(bs.tensor, width, v)
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            raise ReferenceUnreliable("strip transfer operator annihilated the state")
        v = w / lam
        f = -np.log(lam) / u
        if f_prev is not None and abs(f - f_prev) < tol * max(1.0, abs(f)):
            return ReferenceResult(
                value=float(f),
                method="strip",
                resolution=width,
                info={"width": width, "iterations": it, "dim": dim},
            )
        f_prev = f
    raise ReferenceUnreliable(
        f"strip power iteration stalled after {max_iters} sweeps"
    )


# ------------------------------------------------------------------ #
# Uniform boundary MPS                                                #
# ------------------------------------------------------------------ #


def _dominant_eig(
    matvec: Callable[[np.ndarray], np.ndarray],
    dim: int,
    v0: np.ndarray | None,
    tol: float = 1e-13,
    max_iters: int = 2000,
) -> tuple[complex, np.ndarray]:
    """Largest-magnitude eigenpair of a linear map given by `matvec`.

    Phase-aligned power iteration: warm starts from the previous fixed point
    make repeated calls cheap, and every operator fed in here has a simple
    dominant eigenvalue.  Falls back to Arnoldi if the gap is too small.
    """
    if v0 is not None and v0.shape != (dim,):
        v0 = None  # stale warm start from before a bond-dimension change
    if dim <= 64:
        m = np.empty((dim, dim), dtype=DTYPE)
        eye = np.eye(dim, dtype=DTYPE)
        for k in range(dim):
            m[:, k] = matvec(eye[:, k])
        evals, evecs = np.linalg.eig(m)
        k = int(np.argmax(np.abs(evals)))
        return complex(evals[k]), evecs[:, k]
    if v0 is None:
        # entries all nonzero and unequal, so symmetric starts are avoided
        v = np.linspace(1.0, 2.0, dim).astype(DTYPE)
    else:
        v = v0.astype(DTYPE, copy=True)
    v /= np.linalg.norm(v)
    for _ in range(max_iters):
        w = matvec(v)
        nw = np.linalg.norm(w)
        if nw < 1e-300:
            raise ReferenceUnreliable("transfer operator annihilated the trial vector")
        w /= nw
        ov = complex(np.vdot(v, w))
        if abs(ov) > 0 and np.linalg.norm(w - (ov / abs(ov)) * v) < tol:
            return ov * nw, w
        v = w
    op = LinearOperator((dim, dim), matvec=matvec, dtype=DTYPE)
    try:
        evals, evecs = eigs(op, k=1, which="LM", v0=np.ascontiguousarray(v), tol=1e-14)
    except ArpackNoConvergence as err:
        raise ReferenceUnreliable(f"dominant eigenvalue did not converge: {err}")
    return complex(evals[0]), evecs[:, 0]


def _mps_transfer_matvec(m: np.ndarray, rho_vec: np.ndarray) -> np.ndarray:
    d = m.shape[0]
    rho = rho_vec.reshape(d, d)
    out = np.einsum("adb,bc,edc->ae", m, rho, m.conj(), optimize=True)
    return out.reshape(-1)


def _mps_transfer_matvec_t(m: np.ndarray, rho_vec: np.ndarray) -> np.ndarray:
    d = m.shape[0]
    rho = rho_vec.reshape(d, d)
    out = np.einsum("adb,ac,cde->be", m, rho, m.conj(), optimize=True)
    return out.reshape(-1)


def _hermitian_factor(rho: np.ndarray) -> np.ndarray:
    """Factor X with X @ X.conj().T ~ rho for rho = phase * (PSD Hermitian).

    Eigenvector routines return fixed points only up to a global phase, so
    the phase of the trace is rotated away before Hermitizing.
    """
    tr = complex(np.trace(rho))
    if abs(tr) > 0:
        rho = rho * np.exp(-1j * np.angle(tr))
    rho = (rho + rho.conj().T) / 2
    evals, evecs = np.linalg.eigh(rho)
    evals = np.clip(evals, 0.0, None)
    return evecs * np.sqrt(evals)[None, :]


class _Boundary:
    """One uniform boundary MPS driven by repeated row absorption."""

    def __init__(self, block: np.ndarray, chi: int):
        self.block = block  # (l, d, r, u); rows are absorbed u-side first
        self.chi = chi
        vdim = block.shape[3]
        from .network import boundary_cap

        self.m = boundary_cap(vdim).reshape(1, vdim, 1)
        self.discarded = 0.0
        self._left_guess: np.ndarray | None = None
        self._right_guess: np.ndarray | None = None
        self._norm_guess: np.ndarray | None = None

    def step(self) -> None:
        t = self.block
        m = self.m
        chi_in = m.shape[0]
        hdim, vdim = t.shape[0], t.shape[1]
        # old MPS bond stays the major index on both new bonds so that
        # neighboring columns keep pairing up consistently
        grown = np.einsum("aub,ldru->aldbr", m, t, optimize=True)
        grown = grown.reshape(chi_in * hdim, vdim, chi_in * hdim)
        self.m, self.discarded = self._truncate(grown)

    def _truncate(self, n: np.ndarray) -> tuple[np.ndarray, float]:
        d = n.shape[0]
        lam_r, rv = _dominant_eig(
            lambda v: _mps_transfer_matvec(n, v), d * d, self._right_guess
        )
        lam_l, lv = _dominant_eig(
            lambda v: _mps_transfer_matvec_t(n, v), d * d, self._left_guess
        )
        self._right_guess, self._left_guess = rv, lv
        y = _hermitian_factor(rv.reshape(d, d))
        xh = _hermitian_factor(lv.reshape(d, d))
        u, s, vh = np.linalg.svd(xh.conj().T @ y)
        keep = int(np.sum(s > s[0] * 1e-14)) if s.size else 1
        keep = max(1, min(self.chi, keep))
        total = float(np.sum(s**2))
        discarded = float(np.sum(s[keep:] ** 2) / total) if total > 0 else 0.0
        sk = s[:keep]
        pl = (u[:, :keep] * (1.0 / np.sqrt(sk))[None, :]).conj().T @ xh.conj().T
        pr = y @ vh[:keep, :].conj().T * (1.0 / np.sqrt(sk))[None, :]
        m = np.einsum("ia,adb,bj->idj", pl, n, pr, optimize=True)
        lam, nv = _dominant_eig(
            lambda v: _mps_transfer_matvec(m, v), keep * keep, self._norm_guess
        )
        self._norm_guess = nv
        m = m / np.sqrt(abs(lam))
        return np.ascontiguousarray(m), discarded


def _env_matvec_right(top, block, bot, vec):
    # pairwise tensordots: einsum's default path cap would evaluate the
    # four-operand expression naively, which is orders of magnitude slower
    chi_t, chi_b = top.shape[0], bot.shape[0]
    hdim = block.shape[0]
    r = vec.reshape(chi_t, hdim, chi_b)
    s = np.tensordot(r, bot, axes=([2], [2]))  # (b, y, c, d)
    s = np.tensordot(s, block, axes=([1, 3], [2, 1]))  # (b, c, x, u)
    out = np.tensordot(top, s, axes=([1, 2], [3, 0]))  # (a, c, x)
    return out.transpose(0, 2, 1).reshape(-1)


def _env_matvec_left(top, block, bot, vec):
    chi_t, chi_b = top.shape[0], bot.shape[0]
    hdim = block.shape[0]
    l = vec.reshape(chi_t, hdim, chi_b)
    s = np.tensordot(l, top, axes=([0], [0]))  # (x, c, u, b)
    s = np.tensordot(s, block, axes=([0, 2], [0, 3]))  # (c, b, d, y)
    out = np.tensordot(s, bot, axes=([0, 2], [0, 1]))  # (b, y, z)
    return out.reshape(-1)


def _apply_column(env, top, special, bot):
    """Advance a left channel vector through one (possibly decorated) column.

    env axes: (top bond, horizontal bond, bottom bond, *carried); special
    axes: (l, d, r, u, *extra).  Extra axes ride along in order.
    """
    ne = env.ndim - 3
    x = np.tensordot(env, top, axes=([0], [0]))  # (A, c, *e1, u, b)
    # contract the left and up legs of the decorated column tensor
    x = np.tensordot(x, special, axes=([0, 2 + ne], [0, 3]))
    # now (c, *e1, b, d, B, *e2); close the bottom
    x = np.tensordot(x, bot, axes=([0, ne + 2], [0, 1]))
    # (*e1, b, B, *e2, z) -> (b, B, z, *e1, *e2)
    ns = special.ndim - 4
    return np.moveaxis(x, [ne, ne + 1, ne + ns + 2], [0, 1, 2])


def _close_column(env, right_vec):
    return np.tensordot(env, right_vec, axes=([0, 1, 2], [0, 1, 2]))


@dataclass
class BoundaryEnvironment:
    """Converged boundary data for one blocked cell.

    free_energy is per site.  The channel fixed points are the dominant left
    and right eigenvectors of the top-block-bottom column transfer operator.
    """

    cell: DoubleLayerCell
    blocks: BlockedSquare
    top: np.ndarray
    bottom: np.ndarray
    left: np.ndarray
    right: np.ndarray
    free_energy: float
    chi: int
    info: dict

    def transfer_matrix(self, bond: int = 0) -> np.ndarray:
        """Trace-normalized reference transfer matrix of the cut bond."""
        name = self.cell.spec.name
        _check_cut_bond(self.cell, bond)
        if name == "hexagonal":
            cols = [_hex_cut_open(self.cell)]
        else:
            cols = list(_square_cut_open(self.cell))
        x = self._sandwich(cols)
        return x / np.trace(x)

    def density_matrix(self, bond: int = 0) -> np.ndarray:
        """Unit-trace reference two-site density matrix across the cut bond."""
        name = self.cell.spec.name
        _check_cut_bond(self.cell, bond)
        if self.cell.impurity is None:
            raise ValueError("cell has no impurity tensors; no physical sites")
        if name == "hexagonal":
            cols = [_hex_imp_pair(self.cell)]
        else:
            imp = _square_imp_block(self.cell)
            cols = [imp, imp]
        x = self._sandwich(cols)
        d1, d2 = x.shape[0], x.shape[2]
        rho = np.transpose(x, [0, 2, 1, 3]).reshape(d1 * d2, d1 * d2)
        return rho / np.trace(rho)

    def _sandwich(self, cols) -> np.ndarray:
        env = self.left
        for c in cols:
            env = _apply_column(env, self.top, c, self.bottom)
        return _close_column(env, self.right)


def _check_cut_bond(cell: DoubleLayerCell, bond: int) -> None:
    if bond != 0:
        raise ValueError("references are assembled for bond 0 only")
    name = cell.spec.name
    if name not in ("hexagonal", "square"):
        raise ValueError(f"no cut-bond reference for lattice {name!r}")


def boundary_environment(
    cell: DoubleLayerCell,
    chi: int = 30,
    tol: float = 1e-12,
    max_iters: int = 1000,
    max_discard: float = 1e-6,
) -> BoundaryEnvironment:
    """Converge top and bottom boundary MPS and the channel fixed points.

    The per-site free energy comes from the ratio of the dominant eigenvalues
    of the three-layer (top, block, bottom) and two-layer (top, bottom)
    column transfer operators.  Raises ReferenceUnreliable if the truncated
    weight at the capped bond dimension exceeds `max_discard`, since the
    result could then be off by more than the series effects being measured.
    """
    bs = block_cell(cell)
    t = bs.tensor
    top = _Boundary(t, chi)
    bottom = _Boundary(permute(t, [0, 3, 2, 1]), chi)
    f_prev = None
    f = None
    eta2_guess = None
    eta3_guess = None
    iters = 0
    delta = None
    best_delta = np.inf
    best_iter = 0
    for iters in range(1, max_iters + 1):
        top.step()
        bottom.step()
        chi_t, chi_b = top.m.shape[0], bottom.m.shape[0]

        def mv2(v, _t=top.m, _b=bottom.m, _ct=chi_t, _cb=chi_b):
            r = v.reshape(_ct, _cb)
            return np.einsum(
                "aub,cuz,bz->ac", _t, _b, r, optimize=True
            ).reshape(-1)

        eta2, v2 = _dominant_eig(mv2, chi_t * chi_b, eta2_guess)
        eta2_guess = v2

        def mv3(v, _t=top.m, _b=bottom.m):
            return _env_matvec_right(_t, t, _b, v)

        eta3, v3 = _dominant_eig(mv3, chi_t * t.shape[0] * chi_b, eta3_guess)
        eta3_guess = v3
        f = -float(np.log(abs(eta3) / abs(eta2))) / bs.sites_per_block
        if f_prev is not None:
            delta = abs(f - f_prev)
            if delta < tol * max(1.0, abs(f)):
                break
            if delta < best_delta:
                best_delta = delta
                best_iter = iters
            # truncation-gauge jitter can floor above tol; a tiny plateau is
            # still a converged boundary, a large one is not
            if iters - best_iter >= 40:
                if best_delta < 1e-10 * max(1.0, abs(f)):
                    break
                raise ReferenceUnreliable(
                    f"boundary estimate plateaued at change {best_delta:.2e}"
                )
        f_prev = f
    else:
        raise ReferenceUnreliable(
            f"boundary iteration did not settle in {max_iters} rows"
        )
    discard = max(top.discarded, bottom.discarded)
    if discard > max_discard:
        raise ReferenceUnreliable(
            f"boundary truncation discarded {discard:.2e} > {max_discard:.2e}; "
            f"raise chi"
        )
    dim3 = top.m.shape[0] * t.shape[0] * bottom.m.shape[0]
    _, right = _dominant_eig(
        lambda v: _env_matvec_right(top.m, t, bottom.m, v), dim3, eta3_guess
    )
    _, left = _dominant_eig(
        lambda v: _env_matvec_left(top.m, t, bottom.m, v), dim3, None
    )
    shape3 = (top.m.shape[0], t.shape[0], bottom.m.shape[0])
    return BoundaryEnvironment(
        cell=cell,
        blocks=bs,
        top=top.m,
        bottom=bottom.m,
        left=left.reshape(shape3),
        right=right.reshape(shape3),
        free_energy=f,
        chi=chi,
        info={
            "iterations": iters,
            "max_discarded": discard,
            "achieved_delta": float(delta) if delta is not None else 0.0,
            "tol": tol,
            "chi_top": top.m.shape[0],
            "chi_bottom": bottom.m.shape[0],
        },
    )


def boundary_mps_free_energy(
    cell: DoubleLayerCell,
    chi: int = 30,
    tol: float = 1e-12,
    max_iters: int = 1000,
) -> ReferenceResult:
    env = boundary_environment(cell, chi=chi, tol=tol, max_iters=max_iters)
    return ReferenceResult(
        value=env.free_energy,
        method="boundary_mps",
        resolution=chi,
        info=env.info,
        error_estimate=max(env.info["max_discarded"], env.info["achieved_delta"]),
    )
