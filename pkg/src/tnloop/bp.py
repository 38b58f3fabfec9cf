"""Belief propagation on closed tensor networks.

Messages live on directed edges: key (edge, end) holds the message flowing
toward endpoint `end` of that edge.  A sweep recomputes every message from the
tensor behind it contracted with all other incoming messages, synchronously,
with optional damping.  Fixed points are defined up to a scale per message;
`normalize_fixed_point` fixes the gauge (unit message-pair dots, unit vacuum
scalars) and accrues the removed scale in `log_scale`, so the network value
predicted by belief propagation is exp(log_scale).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Any

import numpy as np

from .network import (
    DoubleLayerCell,
    TensorNetwork,
    boundary_cap,
    network_from_json,
    network_to_json,
    unit_cell_network,
)
from .tensor import DTYPE, contract_pair

__all__ = [
    "BPNotConverged",
    "BPFixedPoint",
    "CellFixedPoint",
    "init_messages",
    "bp_sweep",
    "find_fixed_point",
    "normalize_fixed_point",
    "vacuum_scalars",
    "bethe_log_z",
    "bethe_free_energy",
    "find_fixed_point_unitcell",
    "fixed_point_to_json",
    "fixed_point_from_json",
]

_TINY = 1e-300


class BPNotConverged(RuntimeError):
    """Raised when message passing fails to reach the residual tolerance."""

    def __init__(self, message: str, residual: float, sweeps: int) -> None:
        super().__init__(message)
        self.residual = residual
        self.sweeps = sweeps


@dataclass
class BPFixedPoint:
    """Converged message set together with the network it belongs to."""

    net: TensorNetwork
    messages: dict[tuple[Any, int], np.ndarray]
    residual: float
    sweeps: int
    converged: bool
    vacuum: dict[Any, complex]
    log_scale: complex = 0.0 + 0.0j
    normalized: bool = False


def init_messages(
    net: TensorNetwork, strategy: str = "identity", seed: int = 0
) -> dict[tuple[Any, int], np.ndarray]:
    """Starting messages, unit-normalized.

    "identity": the vectorized identity on perfect-square (double-layer)
    dimensions, a flat vector otherwise.  "random": entries uniform on [0, 1]
    drawn from `seed` in deterministic edge order.
    """
    if not net.is_closed():
        raise ValueError("belief propagation needs a closed network")
    rng = np.random.default_rng(seed)
    out: dict[tuple[Any, int], np.ndarray] = {}
    for e in net.edges:
        d = net.edge_dim(e)
        for end in range(len(net.edge_ends(e))):
            if strategy == "identity":
                v = boundary_cap(d)
            elif strategy == "random":
                v = rng.random(d).astype(DTYPE)
                v /= np.linalg.norm(v)
            else:
                raise ValueError(f"unknown init strategy {strategy!r}")
            out[(e, end)] = v
    return out


def _incoming_key(net: TensorNetwork, node: Any, slot: int) -> tuple[Any, int]:
    """Directed-message key for the message arriving at (node, slot)."""
    e = net.slots(node)[slot]
    for end, (n, s) in enumerate(net.edge_ends(e)):
        if n == node and s == slot:
            return (e, end)
    raise AssertionError(f"inconsistent edge table at ({node!r}, {slot})")


def _gather(net, messages, node, skip_slot=None) -> np.ndarray:
    """Contract a node tensor with its incoming messages on all slots but one."""
    t = net.tensor(node)
    removed = 0
    for slot in range(len(net.slots(node))):
        if slot == skip_slot:
            continue
        key = _incoming_key(net, node, slot)
        axis = slot - removed
        t = contract_pair(t, [axis], messages[key], [0])
        removed += 1
    return t


def bp_sweep(
    net: TensorNetwork,
    messages: dict[tuple[Any, int], np.ndarray],
    damping: float = 0.0,
) -> tuple[dict[tuple[Any, int], np.ndarray], float]:
    """One synchronous update of every directed message.

    Each new message is unit-normalized, mixed with the old one as
    (1 - damping) * new + damping * old, and re-normalized.  Returns the new
    message set and the residual: the largest norm difference against the old
    messages.
    """
    if not 0.0 <= damping < 1.0:
        raise ValueError(f"damping must lie in [0, 1), got {damping}")
    new: dict[tuple[Any, int], np.ndarray] = {}
    residual = 0.0
    for e in net.edges:
        ends = net.edge_ends(e)
        for end, (node, slot) in enumerate(ends):
            if len(ends) != 2:
                raise ValueError(f"open edge {e!r} in a message-passing network")
            src, src_slot = ends[1 - end]
            v = _gather(net, messages, src, skip_slot=src_slot).ravel()
            nrm = np.linalg.norm(v)
            if nrm < _TINY:
                raise ValueError(f"message on edge {e!r} contracted to zero")
            v = v / nrm
            old = messages[(e, end)]
            if damping:
                v = (1.0 - damping) * v + damping * old
                v = v / np.linalg.norm(v)
            residual = max(residual, float(np.linalg.norm(v - old)))
            new[(e, end)] = v
    return new, residual


def find_fixed_point(
    net: TensorNetwork,
    init: str = "identity",
    seed: int = 0,
    damping: float = 0.2,
    tol: float = 1e-12,
    max_sweeps: int = 5000,
) -> BPFixedPoint:
    """Iterate sweeps until the residual drops below `tol`.

    Raises BPNotConverged when the sweep budget runs out or when the residual
    stops improving for 200 sweeps while still above tolerance, which signals
    a degenerate or oscillating fixed point.
    """
    messages = init_messages(net, strategy=init, seed=seed)
    best = np.inf
    best_sweep = 0
    residual = np.inf
    for sweep in range(1, max_sweeps + 1):
        messages, residual = bp_sweep(net, messages, damping=damping)
        if residual < tol:
            return BPFixedPoint(
                net=net,
                messages=messages,
                residual=residual,
                sweeps=sweep,
                converged=True,
                vacuum=vacuum_scalars(net, messages),
            )
        if residual < 0.99 * best:
            best = residual
            best_sweep = sweep
        elif sweep - best_sweep >= 200:
            raise BPNotConverged(
                f"residual plateau near {residual:.3e} after {sweep} sweeps",
                residual=residual,
                sweeps=sweep,
            )
    raise BPNotConverged(
        f"residual {residual:.3e} above tol {tol:.1e} after {max_sweeps} sweeps",
        residual=residual,
        sweeps=max_sweeps,
    )


def vacuum_scalars(
    net: TensorNetwork, messages: dict[tuple[Any, int], np.ndarray]
) -> dict[Any, complex]:
    """Per-node contraction with all incoming messages."""
    return {
        node: complex(_gather(net, messages, node).reshape(()))
        for node in net.nodes
    }


def _pair_dot(messages, e) -> complex:
    return complex(np.dot(messages[(e, 0)], messages[(e, 1)]))


def normalize_fixed_point(fp: BPFixedPoint) -> BPFixedPoint:
    """Fix the gauge: message-pair dots and vacuum scalars all equal one.

    Message pairs are scaled symmetrically by |dot|^(-1/2) with the residual
    phase pushed into the end-0 direction; tensors are divided by their vacuum
    scalar, whose logarithm accumulates in `log_scale`.  Idempotent up to
    roundoff.
    """
    net = fp.net.copy()
    messages = dict(fp.messages)
    for e in net.edges:
        c = _pair_dot(messages, e)
        if abs(c) < 1e-14:
            raise ValueError(f"degenerate message pair on edge {e!r}: dot {c:.2e}")
        root = np.sqrt(abs(c))
        phase = c / abs(c)
        messages[(e, 0)] = messages[(e, 0)] / (root * phase)
        messages[(e, 1)] = messages[(e, 1)] / root
    log_scale = complex(fp.log_scale)
    vacuum = vacuum_scalars(net, messages)
    for node, tv in vacuum.items():
        if abs(tv) < _TINY:
            raise ValueError(f"vacuum scalar vanished at node {node!r}")
        net.replace_tensor(node, net.tensor(node) / tv)
        log_scale += np.log(complex(tv))
    return BPFixedPoint(
        net=net,
        messages=messages,
        residual=fp.residual,
        sweeps=fp.sweeps,
        converged=fp.converged,
        vacuum=vacuum_scalars(net, messages),
        log_scale=log_scale,
        normalized=True,
    )


def bethe_log_z(fp: BPFixedPoint) -> complex:
    """Complex log of the fixed point's network-value estimate.

    Valid for raw and normalized fixed points alike: message-pair dots enter
    as a correction that vanishes in the normalized gauge.  Principal branch
    per factor; only exp of the result is branch-independent.
    """
    total = complex(fp.log_scale)
    for node, tv in vacuum_scalars(fp.net, fp.messages).items():
        if abs(tv) < _TINY:
            raise ValueError(f"vacuum scalar vanished at node {node!r}")
        total += np.log(complex(tv))
    for e in fp.net.edges:
        total -= np.log(_pair_dot(fp.messages, e))
    return total


def bethe_free_energy(fp: BPFixedPoint) -> float:
    """Real part of -log Z_BP; the phase lives in bethe_log_z."""
    return float(-bethe_log_z(fp).real)


# ------------------------------------------------------------------ #
# Translation-invariant fixed points on unit cells                    #
# ------------------------------------------------------------------ #


@dataclass
class CellFixedPoint:
    """Fixed point of the infinite lattice, one message per directed bond.

    messages[(b, role)] flows toward the role-side endpoint of bond b.  After
    normalization `cell` holds the rescaled tensors and `log_scale` the
    per-cell log of the removed scale, so the free energy per site under pure
    belief propagation is -Re(log_scale) / num_sites.
    """

    cell: DoubleLayerCell
    messages: dict[tuple[int, int], np.ndarray]
    residual: float
    sweeps: int
    converged: bool
    vacuum: tuple[complex, ...]
    log_scale: complex = 0.0 + 0.0j
    normalized: bool = False

    @property
    def spec(self):
        return self.cell.spec

    def message_into(self, bond: int, role: int) -> np.ndarray:
        """Message arriving at the role-side slot of `bond`."""
        return self.messages[(bond, role)]


def _cell_fp_from_generic(cell: DoubleLayerCell, fp: BPFixedPoint) -> CellFixedPoint:
    spec = cell.spec
    messages = {}
    for b in range(len(spec.bonds)):
        ends = fp.net.edge_ends(b)
        for end, (site, slot) in enumerate(ends):
            role = spec.slot_lists[site][slot][1]
            messages[(b, role)] = fp.messages[(b, end)]
    bulk = tuple(fp.net.tensor(s) for s in range(spec.num_sites))
    imps = None
    if cell.impurity is not None:
        # impurities inherit the bulk rescaling so their physical trace
        # still reproduces the bulk tensor
        imps = []
        for s in range(spec.num_sites):
            ratio = _tensor_ratio(bulk[s], cell.bulk[s])
            imps.append(cell.impurity[s] * ratio)
        imps = tuple(imps)
    new_cell = DoubleLayerCell(spec=spec, bulk=bulk, impurity=imps)
    return CellFixedPoint(
        cell=new_cell,
        messages=messages,
        residual=fp.residual,
        sweeps=fp.sweeps,
        converged=fp.converged,
        vacuum=tuple(fp.vacuum[s] for s in range(spec.num_sites)),
        log_scale=fp.log_scale,
        normalized=fp.normalized,
    )


def _tensor_ratio(new: np.ndarray, old: np.ndarray) -> complex:
    """Scalar c with new = c * old, for tensors known to be parallel."""
    idx = np.argmax(np.abs(old))
    return complex(new.ravel()[idx] / old.ravel()[idx])


def find_fixed_point_unitcell(
    cell: DoubleLayerCell,
    init: str = "identity",
    seed: int = 0,
    damping: float = 0.2,
    tol: float = 1e-12,
    max_sweeps: int = 5000,
    normalize: bool = True,
) -> CellFixedPoint:
    """Translation-invariant fixed point via the one-cell quotient network."""
    net = unit_cell_network(cell)
    fp = find_fixed_point(
        net, init=init, seed=seed, damping=damping, tol=tol, max_sweeps=max_sweeps
    )
    if normalize:
        fp = normalize_fixed_point(fp)
    return _cell_fp_from_generic(cell, fp)


# ------------------------------------------------------------------ #
# Serialization                                                       #
# ------------------------------------------------------------------ #


def fixed_point_to_json(fp: BPFixedPoint) -> str:
    from .network import _encode_array, _encode_id  # shared encoding helpers

    doc = {
        "format": "tnloop-fixed-point-v1",
        "network": json.loads(network_to_json(fp.net)),
        "messages": [
            {"edge": _encode_id(e), "end": end, "data": _encode_array(v)}
            for (e, end), v in fp.messages.items()
        ],
        "residual": fp.residual,
        "sweeps": fp.sweeps,
        "converged": fp.converged,
        "log_scale": [fp.log_scale.real, fp.log_scale.imag],
        "normalized": fp.normalized,
    }
    return json.dumps(doc, separators=(",", ":"))


def fixed_point_from_json(text: str) -> BPFixedPoint:
    from .network import _decode_array, _decode_id

    doc = json.loads(text)
    if doc.get("format") != "tnloop-fixed-point-v1":
        raise ValueError("not a tnloop fixed-point document")
    net = network_from_json(json.dumps(doc["network"]))
    messages = {}
    for m in doc["messages"]:
        e = _decode_id(m["edge"])
        messages[(e, m["end"])] = _decode_array(m["data"], [net.edge_dim(e)])
    return BPFixedPoint(
        net=net,
        messages=messages,
        residual=float(doc["residual"]),
        sweeps=int(doc["sweeps"]),
        converged=bool(doc["converged"]),
        vacuum=vacuum_scalars(net, messages),
        log_scale=complex(*doc["log_scale"]),
        normalized=bool(doc["normalized"]),
    )
