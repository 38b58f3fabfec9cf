"""Benchmark harness.

Every subcommand assembles a table whose rows carry the config hash and
library version, so identical configurations produce byte-identical files.

    tnloop free-energy --geometry hexagonal --model aklt --max-degree 12
    tnloop oracle --reference torus:6 --reference strip:8
    tnloop catalog --geometry square --max-degree 8 --format json

Exit codes: 0 success, 2 non-convergence (BP or the counting iteration),
3 unreliable reference.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from dataclasses import asdict, dataclass, replace
from typing import Any

import numpy as np

from .bp import BPNotConverged, CellFixedPoint, find_fixed_point_unitcell
from .loops import ExcitationCatalog, enumerate_excitations, evaluate_catalog
from .models import aklt_peps, kagome_to_hex_double_layer, random_peps
from .network import DoubleLayerCell, build_double_layer, lattice_by_name
from .observables import (
    SeriesNotConverged,
    bp_free_energy,
    density_matrix_series,
    free_energy_multi,
    free_energy_single,
    transfer_matrix_series,
)
from .reference import (
    ReferenceResult,
    ReferenceUnreliable,
    boundary_environment,
    boundary_mps_free_energy,
    periodic_torus_free_energy,
    strip_free_energy,
)

__all__ = ["ExperimentConfig", "config_hash", "main"]

VERSION = "0.1.0"

GEOMETRIES = ("hexagonal", "square", "kagome")
REFERENCE_METHODS = ("boundary_mps", "strip", "torus")


@dataclass(frozen=True)
class ExperimentConfig:
    geometry: str = "hexagonal"
    model: str = "aklt"
    d: int = 2
    m: int = 3
    seed: int = 1
    max_degree: int = 12
    damping: float = 0.2
    bp_tol: float = 1e-12
    max_sweeps: int = 5000
    bp_init: str = "identity"
    references: tuple[tuple[str, int], ...] = (("boundary_mps", 30),)
    output: str | None = None
    format: str = "csv"


def config_hash(cfg: ExperimentConfig) -> str:
    """12-hex-digit digest of everything that affects the numbers.

    Output path and format are plumbing; the same experiment written as CSV
    or JSON shares a hash.
    """
    payload = asdict(cfg)
    payload.pop("output")
    payload.pop("format")
    payload["references"] = [list(r) for r in cfg.references]
    blob = json.dumps(payload, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _parse_reference(text: str) -> tuple[str, int]:
    try:
        method, _, res = text.partition(":")
        resolution = int(res)
    except ValueError:
        raise ValueError(f"reference must look like method:resolution, got {text!r}")
    if method not in REFERENCE_METHODS:
        raise ValueError(f"unknown reference method {method!r}")
    if resolution < 1:
        raise ValueError(f"reference resolution must be positive, got {resolution}")
    return method, resolution


def _coerce_reference(value: Any) -> tuple[str, int]:
    """Accept "method:res", ["method", res], or {"method": ..., "resolution": ...}."""
    if isinstance(value, str):
        return _parse_reference(value)
    if isinstance(value, dict):
        return _parse_reference(f"{value['method']}:{value['resolution']}")
    method, resolution = value
    return _parse_reference(f"{method}:{resolution}")


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    """Defaults, overridden by flags, overridden by the --config file."""
    cfg = ExperimentConfig(
        geometry=args.geometry,
        model=args.model,
        d=args.d,
        m=args.m,
        seed=args.seed,
        max_degree=args.max_degree,
        damping=args.damping,
        bp_tol=args.bp_tol,
        max_sweeps=args.max_sweeps,
        bp_init=args.bp_init,
        references=tuple(_parse_reference(r) for r in args.reference)
        or (("boundary_mps", 30),),
        output=args.output,
        format=args.format,
    )
    if args.config is not None:
        with open(args.config) as fh:
            data = json.load(fh)
        known = set(asdict(cfg))
        for key, value in data.items():
            if key not in known:
                raise ValueError(f"unknown config key {key!r}")
            if key == "references":
                value = tuple(_coerce_reference(v) for v in value)
            cfg = replace(cfg, **{key: value})
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.geometry not in GEOMETRIES:
        raise ValueError(f"unknown geometry {cfg.geometry!r}")
    if cfg.model not in ("aklt", "random"):
        raise ValueError(f"unknown model {cfg.model!r}")
    if cfg.format not in ("csv", "json"):
        raise ValueError(f"unknown output format {cfg.format!r}")
    if cfg.bp_init not in ("identity", "random"):
        raise ValueError(f"unknown bp init {cfg.bp_init!r}")
    girth = lattice_by_name(cfg.geometry).girth
    if cfg.max_degree < girth:
        raise ValueError(
            f"max_degree {cfg.max_degree} is below the {cfg.geometry} girth {girth}"
        )
    for method, _ in cfg.references:
        if method not in REFERENCE_METHODS:
            raise ValueError(f"unknown reference method {method!r}")


# ------------------------------------------------------------------ #
# Pipeline pieces shared across subcommands                           #
# ------------------------------------------------------------------ #


def _build_cell(cfg: ExperimentConfig) -> DoubleLayerCell:
    spec = lattice_by_name(cfg.geometry)
    if cfg.model == "aklt":
        peps = aklt_peps(spec)
    else:
        peps = random_peps(spec, bond_dim=cfg.m, phys_dim=cfg.d, seed=cfg.seed)
    if cfg.geometry == "kagome":
        return kagome_to_hex_double_layer(peps)
    return build_double_layer(peps)


def _fixed_point(cell: DoubleLayerCell, cfg: ExperimentConfig) -> CellFixedPoint:
    return find_fixed_point_unitcell(
        cell,
        init=cfg.bp_init,
        seed=cfg.seed,
        damping=cfg.damping,
        tol=cfg.bp_tol,
        max_sweeps=cfg.max_sweeps,
    )


def _weighted_catalog(cfp: CellFixedPoint, cfg: ExperimentConfig) -> ExcitationCatalog:
    return evaluate_catalog(cfp, enumerate_excitations(cfp.spec, cfg.max_degree))


def _run_reference(cell: DoubleLayerCell, method: str, resolution: int) -> ReferenceResult:
    if method == "boundary_mps":
        return boundary_mps_free_energy(cell, chi=resolution)
    if method == "strip":
        return strip_free_energy(cell, width=resolution)
    return periodic_torus_free_energy(cell, n=resolution)


def _reference_f(cell: DoubleLayerCell, cfg: ExperimentConfig) -> float:
    method, resolution = cfg.references[0]
    return _run_reference(cell, method, resolution).value


def _boundary_chi(cfg: ExperimentConfig) -> int:
    for method, resolution in cfg.references:
        if method == "boundary_mps":
            return resolution
    raise ValueError("transfer/density need a boundary_mps reference")


def _series_f(catalog: ExcitationCatalog, cutoff: int) -> float:
    if cutoff == 0:
        return 0.0
    return free_energy_multi(catalog.truncated(cutoff)).f


# ------------------------------------------------------------------ #
# Subcommands                                                         #
# ------------------------------------------------------------------ #


def cmd_bp(cfg: ExperimentConfig):
    cfp = _fixed_point(_build_cell(cfg), cfg)
    row = {
        "f_bp": bp_free_energy(cfp),
        "residual": cfp.residual,
        "sweeps": cfp.sweeps,
        "converged": cfp.converged,
    }
    return list(row), [row]


def cmd_free_energy(cfg: ExperimentConfig):
    cell = _build_cell(cfg)
    cfp = _fixed_point(cell, cfg)
    catalog = _weighted_catalog(cfp, cfg)
    f_bp = bp_free_energy(cfp)
    f_ref = _reference_f(cell, cfg)
    bp_error = abs(f_bp - f_ref)
    columns = [
        "degree_cutoff",
        "f_single",
        "f_multi",
        "f_reference",
        "abs_error_single",
        "abs_error_multi",
        "bp_error",
    ]
    rows = []
    for cutoff in [0] + catalog.degrees:
        sub = catalog.truncated(cutoff)
        f_single = f_bp + free_energy_single(sub).f
        f_multi = f_bp + free_energy_multi(sub).f
        rows.append(
            {
                "degree_cutoff": cutoff,
                "f_single": f_single,
                "f_multi": f_multi,
                "f_reference": f_ref,
                "abs_error_single": abs(f_single - f_ref),
                "abs_error_multi": abs(f_multi - f_ref),
                "bp_error": bp_error,
            }
        )
    return columns, rows


def cmd_transfer(cfg: ExperimentConfig):
    cell = _build_cell(cfg)
    cfp = _fixed_point(cell, cfg)
    catalog = _weighted_catalog(cfp, cfg)
    env = boundary_environment(cell, chi=_boundary_chi(cfg))
    t_ref = env.transfer_matrix(bond=0)
    columns = ["degree_cutoff", "frobenius_error_T"]
    rows = []
    for cutoff in [0] + catalog.degrees:
        sub = catalog.truncated(cutoff)
        t = transfer_matrix_series(cfp, _series_f(catalog, cutoff), sub).matrix
        t = t / np.trace(t)
        rows.append(
            {
                "degree_cutoff": cutoff,
                "frobenius_error_T": float(np.linalg.norm(t - t_ref)),
            }
        )
    return columns, rows


def cmd_density(cfg: ExperimentConfig):
    cell = _build_cell(cfg)
    cfp = _fixed_point(cell, cfg)
    catalog = _weighted_catalog(cfp, cfg)
    env = boundary_environment(cell, chi=_boundary_chi(cfg))
    rho_ref = env.density_matrix(bond=0)
    columns = ["degree_cutoff", "trace_norm_error_rho"]
    rows = []
    for cutoff in [0] + catalog.degrees:
        sub = catalog.truncated(cutoff)
        rho = density_matrix_series(cfp, _series_f(catalog, cutoff), sub).rho
        rows.append(
            {
                "degree_cutoff": cutoff,
                "trace_norm_error_rho": float(np.linalg.norm(rho - rho_ref, "nuc")),
            }
        )
    return columns, rows


def cmd_compare_counting(cfg: ExperimentConfig):
    cell = _build_cell(cfg)
    cfp = _fixed_point(cell, cfg)
    catalog = _weighted_catalog(cfp, cfg)
    f_bp = bp_free_energy(cfp)
    f_ref = _reference_f(cell, cfg)
    columns = ["degree", "error_single", "error_multi"]
    rows = []
    for cutoff in catalog.degrees:
        sub = catalog.truncated(cutoff)
        rows.append(
            {
                "degree": cutoff,
                "error_single": abs(f_bp + free_energy_single(sub).f - f_ref),
                "error_multi": abs(f_bp + free_energy_multi(sub).f - f_ref),
            }
        )
    return columns, rows


def cmd_catalog(cfg: ExperimentConfig):
    spec = lattice_by_name(cfg.geometry)
    catalog = enumerate_excitations(spec, cfg.max_degree)
    columns = ["degree", "num_edges", "multiplicity", "num_sites", "edges"]
    rows = []
    for entry in catalog.entries:
        edges = sorted(entry.edges)
        rows.append(
            {
                "degree": entry.degree,
                "num_edges": len(edges),
                "multiplicity": f"{entry.multiplicity.numerator}/{entry.multiplicity.denominator}",
                "num_sites": entry.num_sites,
                "edges": ";".join(f"{x},{y},{b}" for x, y, b in edges),
            }
        )
    return columns, rows


def cmd_oracle(cfg: ExperimentConfig):
    cell = _build_cell(cfg)
    columns = ["method", "resolution", "f"]
    rows = []
    for method, resolution in cfg.references:
        result = _run_reference(cell, method, resolution)
        rows.append({"method": method, "resolution": resolution, "f": result.value})
    return columns, rows


COMMANDS = {
    "bp": cmd_bp,
    "free-energy": cmd_free_energy,
    "transfer": cmd_transfer,
    "density": cmd_density,
    "compare-counting": cmd_compare_counting,
    "catalog": cmd_catalog,
    "oracle": cmd_oracle,
}


# ------------------------------------------------------------------ #
# Output and entry point                                              #
# ------------------------------------------------------------------ #


def _cell_text(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def render(columns: list[str], rows: list[dict], cfg: ExperimentConfig) -> str:
    tagged = [dict(r, config_hash=config_hash(cfg), version=VERSION) for r in rows]
    columns = columns + ["config_hash", "version"]
    if cfg.format == "json":
        return json.dumps(tagged, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in tagged:
        writer.writerow([_cell_text(row[c]) for c in columns])
    return buf.getvalue()


def _error_record(exc: Exception) -> str:
    return json.dumps({"error": type(exc).__name__, "message": str(exc)})


class _Parser(argparse.ArgumentParser):
    # usage errors exit 1; codes 2 and 3 are reserved for runtime outcomes
    def error(self, message):
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("experiment")
    g.add_argument("--geometry", default="hexagonal", choices=GEOMETRIES)
    g.add_argument("--model", default="aklt", choices=("aklt", "random"))
    g.add_argument("--d", type=int, default=2, help="physical dimension (random model)")
    g.add_argument("--m", type=int, default=3, help="bond dimension (random model)")
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("--max-degree", type=int, default=12)
    g.add_argument("--damping", type=float, default=0.2)
    g.add_argument("--bp-tol", type=float, default=1e-12)
    g.add_argument("--max-sweeps", type=int, default=5000)
    g.add_argument("--bp-init", default="identity", choices=("identity", "random"))
    g.add_argument(
        "--reference",
        action="append",
        default=[],
        metavar="METHOD:RESOLUTION",
        help="repeatable; default boundary_mps:30; the first entry scores f",
    )
    g.add_argument("--output", default=None, help="write here instead of stdout")
    g.add_argument("--format", default="csv", choices=("csv", "json"))
    g.add_argument("--config", default=None, help="JSON file overriding the flags")

    parser = _Parser(prog="tnloop", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=VERSION)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        columns, rows = COMMANDS[args.command](cfg)
        text = render(columns, rows, cfg)
    except (BPNotConverged, SeriesNotConverged) as exc:
        print(_error_record(exc), file=sys.stderr)
        return 2
    except ReferenceUnreliable as exc:
        print(_error_record(exc), file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(_error_record(exc), file=sys.stderr)
        return 1
    if cfg.output is None:
        sys.stdout.write(text)
    else:
        with open(cfg.output, "w", newline="") as fh:
            fh.write(text)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
