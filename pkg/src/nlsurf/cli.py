"""Command-line entry point: experiments, sweeps, verification, manifests.

Every run writes a result file plus a manifest recording the exact argv,
seeds, package versions, wall time, and sha256 digests of the outputs.
Result files contain no timing or path-dependent data, so rerunning a
manifest with deterministic methods reproduces them byte-for-byte
(`nlsurf rerun --manifest ...` does exactly that and checks the digests).

Exit codes: 0 success, 1 verification failure (or rerun mismatch),
2 usage error, 3 infeasible size.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

from . import verify as verify_mod
from .exact import SizeCapExceeded
from .lattice import Boundary, build_lattice, decompose_box, tiling_interfaces, torus_cut
from .mcmc import McmcConfig
from .model import uniform_params
from .quenched import DisorderMC, GridTooLarge, Quadrature, quenched_pressure
from .surface import (
    SizeCapExceededForSweep,
    SurfaceTermResult,
    adjacency_direct,
    adjacency_integral,
    adjacency_term,
    periodic_minus_free,
    scaling_sweep,
    surface_pressure_free,
    surface_pressure_periodic,
)

RESULT_SCHEMA = "nlsurf.result.v1"
MANIFEST_SCHEMA = "nlsurf.manifest.v1"

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce and audit one run.

    Result files reference the manifest through manifest_id (a digest of the
    parameter snapshot), never the other way around, so reruns are
    byte-identical while the manifest itself may carry wall-clock time.
    """

    manifest_id: str
    argv: list[str]
    config: dict
    seeds: dict
    versions: dict
    wall_time_s: float
    outputs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema"] = MANIFEST_SCHEMA
        return d


def _package_version() -> str:
    try:
        return metadata.version("nlsurf")
    except metadata.PackageNotFoundError:  # running from a source tree
        return "0.1.0+src"


def _method_from_args(args) -> Quadrature | DisorderMC:
    if args.method == "quadrature":
        return Quadrature(nodes_per_bond=args.nodes)
    return DisorderMC(samples=args.samples, seed=args.seed)


def _method_dict(method) -> dict:
    if isinstance(method, Quadrature):
        return {"kind": "quadrature", "nodes_per_bond": method.nodes_per_bond}
    return {"kind": "disorder_mc", "samples": method.samples, "seed": method.seed}


def _estimate_dict(e) -> dict | None:
    if e is None:
        return None
    return {"value": e.value, "std_error": e.std_error}


def _term_dict(r: SurfaceTermResult) -> dict:
    return {
        "kind": r.kind.value,
        "geometry": {"dim": r.geometry.dim, "L": r.geometry.L, "k": r.geometry.k, "corridor_size": r.geometry.corridor_size},
        "x": r.x,
        "t_nodes": r.t_nodes,
        "routes": {
            "direct": _estimate_dict(r.direct),
            "integral": _estimate_dict(r.integral),
            "per_unit_surface": _estimate_dict(r.per_unit_surface),
        },
        "integrand_tables": {
            name: [{"t": p.t, "value": p.value, "std_error": p.std_error} for p in table] if table else None
            for name, table in r.integrand_tables.items()
        },
    }


def emit_sweep(results: list[SurfaceTermResult]) -> str:
    """Plot-ready CSV: one row per (L, term kind), 17 significant digits."""
    if not results:
        raise ValueError("no results to emit")
    lines = ["L,term,value,stderr,per_unit_surface,per_unit_stderr"]
    for r in results:
        lines.append(
            f"{r.geometry.L},{r.kind.value},{r.integral.value:.17g},{r.integral.std_error:.17g},"
            f"{r.per_unit_surface.value:.17g},{r.per_unit_surface.std_error:.17g}"
        )
    return "\n".join(lines) + "\n"


def _config_snapshot(args, command: str) -> dict:
    # only the physics/method parameters enter: the snapshot must be identical
    # across reruns so the manifest id (and the result bytes) reproduce
    skip = {"out", "format", "workers", "func", "manifest", "original_argv", "start_time"}
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in skip and v is not None and not callable(v)}
    cfg["command"] = command
    return cfg


def _write_run(args, command: str, result: dict, csv_text: str | None = None) -> dict:
    """Attach the manifest id, write result + manifest files, return manifest."""
    config = _config_snapshot(args, command)
    manifest_id = hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()[:16]
    result = dict(result)
    result["schema"] = RESULT_SCHEMA
    result["command"] = command
    result["manifest_id"] = manifest_id
    text = json.dumps(result, sort_keys=True, indent=2) + "\n"

    outputs: dict[str, str] = {}
    out = getattr(args, "out", None)
    paths = []
    if out is not None:
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        if getattr(args, "format", "json") == "csv" and csv_text is not None:
            out.write_text(csv_text)
        else:
            out.write_text(text)
        paths.append(out)
        csv_path = None
        if csv_text is not None and getattr(args, "format", "json") == "json":
            csv_path = out.with_suffix(".csv")
            csv_path.write_text(csv_text)
            paths.append(csv_path)
    else:
        sys.stdout.write(text)

    for p in paths:
        outputs[p.name] = hashlib.sha256(p.read_bytes()).hexdigest()
    manifest = RunManifest(
        manifest_id=manifest_id,
        argv=list(args.original_argv),
        config=config,
        seeds={"seed": getattr(args, "seed", None)},
        versions={"nlsurf": _package_version(), "numpy": np.__version__, "python": sys.version.split()[0]},
        wall_time_s=time.time() - args.start_time,
        outputs=outputs,
    )
    if out is not None:
        mpath = out.with_name(out.stem + ".manifest.json")
        mpath.write_text(json.dumps(manifest.to_dict(), sort_keys=True, indent=2) + "\n")
    return manifest


def _boundary(name: str) -> Boundary:
    return Boundary.FREE if name == "free" else Boundary.PERIODIC


# --- subcommand handlers ---------------------------------------------------


def _cmd_lattice_info(args) -> int:
    lat = build_lattice(args.dim, args.side, _boundary(args.bc))
    info: dict = {
        "dim": lat.dim,
        "side": lat.side,
        "boundary": lat.boundary.value,
        "n_sites": lat.n_sites,
        "n_bonds": lat.n_bonds,
    }
    if lat.boundary is Boundary.FREE and lat.side % 2 == 0 and lat.side >= 4:
        dec = decompose_box(lat)
        info["midplane_corridor"] = dec.corridor.cardinality
        info["sub_boxes"] = len(dec.sub_boxes)
    if lat.boundary is Boundary.PERIODIC:
        info["torus_cut"] = torus_cut(lat).cardinality
    if args.tiles is not None:
        if args.side % args.tiles != 0:
            raise ValueError(f"side {args.side} is not a multiple of tile side {args.tiles}")
        _, dec = tiling_interfaces(args.dim, args.tiles, args.side // args.tiles)
        info["tiling_corridor"] = dec.corridor.cardinality
    _write_run(args, "lattice-info", info)
    return EXIT_OK


def _cmd_pressure(args) -> int:
    lat = build_lattice(args.dim, args.side, _boundary(args.bc))
    method = _method_from_args(args)
    est = quenched_pressure(lat, uniform_params(lat, args.x), method)
    _write_run(
        args,
        "pressure",
        {
            "geometry": {"dim": lat.dim, "side": lat.side, "boundary": lat.boundary.value, "n_sites": lat.n_sites},
            "x": args.x,
            "method": _method_dict(method),
            "value": est.value,
            "std_error": est.std_error,
        },
    )
    return EXIT_OK


def _term_command(args, command: str, compute) -> int:
    method = _method_from_args(args)
    result = compute(method)
    payload = _term_dict(result)
    routes = getattr(args, "routes", "both")
    if routes != "both":
        keep = {routes, "per_unit_surface"} if routes == "integral" else {routes}
        payload["routes"] = {k: v for k, v in payload["routes"].items() if k in keep}
    payload["method"] = _method_dict(method)
    _write_run(args, command, payload)
    return EXIT_OK


def _cmd_adjacency(args) -> int:
    if args.routes == "direct":
        method = _method_from_args(args)
        est = adjacency_direct(args.dim, args.L, args.x, method)
        _write_run(
            args,
            "adjacency",
            {
                "geometry": {"dim": args.dim, "L": args.L},
                "x": args.x,
                "method": _method_dict(method),
                "routes": {"direct": _estimate_dict(est)},
            },
        )
        return EXIT_OK
    if args.routes == "integral":
        method = _method_from_args(args)
        est = adjacency_integral(args.dim, args.L, args.x, method, t_nodes=args.t_nodes)
        _write_run(
            args,
            "adjacency",
            {
                "geometry": {"dim": args.dim, "L": args.L},
                "x": args.x,
                "method": _method_dict(method),
                "t_nodes": args.t_nodes,
                "routes": {"integral": _estimate_dict(est)},
            },
        )
        return EXIT_OK
    return _term_command(args, "adjacency", lambda m: adjacency_term(args.dim, args.L, args.x, m, t_nodes=args.t_nodes))


def _cmd_torus_diff(args) -> int:
    return _term_command(args, "torus-diff", lambda m: periodic_minus_free(args.dim, args.L, args.x, m, t_nodes=args.t_nodes))


def _cmd_surface_free(args) -> int:
    return _term_command(args, "surface-free", lambda m: surface_pressure_free(args.dim, args.L, args.x, args.k, m, t_nodes=args.t_nodes))


def _cmd_surface_periodic(args) -> int:
    return _term_command(
        args, "surface-periodic", lambda m: surface_pressure_periodic(args.dim, args.L, args.x, args.k, m, t_nodes=args.t_nodes)
    )


def _cmd_scaling(args) -> int:
    method = _method_from_args(args)
    mcmc = None
    if args.mcmc_sweeps is not None:
        mcmc = McmcConfig(sweeps=args.mcmc_sweeps, burn_in=args.mcmc_burn_in, seed=args.seed, measure_stride=args.mcmc_stride)
    L_list = [int(v) for v in args.L_list.split(",")]
    results = scaling_sweep(
        args.dim, args.x, L_list, k=args.k, method=method, t_nodes=args.t_nodes, mcmc=mcmc, workers=args.workers
    )
    payload = {
        "method": _method_dict(method),
        "x": args.x,
        "terms": [_term_dict(r) for r in results],
    }
    _write_run(args, "scaling", payload, csv_text=emit_sweep(results))
    return EXIT_OK


def _cmd_verify(args) -> int:
    method = None
    if args.method == "mc":
        method = DisorderMC(samples=args.samples, seed=args.seed)
    elif args.method == "quadrature" and args.nodes is not None:
        method = Quadrature(nodes_per_bond=args.nodes)
    tol = args.tolerance if args.tolerance is not None else verify_mod.DEFAULT_TOL
    reports = verify_mod.run_standard_suite(method, tol=tol)
    payload = verify_mod.suite_report(reports)
    _write_run(args, "verify", payload)
    return EXIT_OK if payload["passed"] else EXIT_VERIFY_FAILED


def _cmd_rerun(args) -> int:
    manifest = json.loads(Path(args.manifest).read_text())
    argv = list(manifest["argv"])
    if "--out" in argv:
        i = argv.index("--out")
        del argv[i : i + 2]
    out = args.out
    if out is None:
        out = str(Path(args.manifest).with_name("rerun-" + Path(args.manifest).stem.replace(".manifest", "") + ".json"))
    argv += ["--out", out]
    status = run(argv)
    if status not in (EXIT_OK, EXIT_VERIFY_FAILED):
        return status
    new_manifest = json.loads(Path(out).with_name(Path(out).stem + ".manifest.json").read_text())
    # filenames may differ between runs; the content digests must not
    same = sorted(new_manifest["outputs"].values()) == sorted(manifest["outputs"].values())
    sys.stdout.write(json.dumps({"reproduced": bool(same), "outputs": new_manifest["outputs"]}, indent=2) + "\n")
    return EXIT_OK if same else EXIT_VERIFY_FAILED


# --- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlsurf",
        description="Surface terms of the Gaussian spin glass on the Nishimori line",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--x", type=float, required=True, help="coupling strength x = beta*sigma")
        p.add_argument("--method", choices=("quadrature", "mc"), default="quadrature")
        p.add_argument("--nodes", type=int, default=20, help="quadrature nodes per bond")
        p.add_argument("--samples", type=int, default=100_000, help="disorder MC samples")
        p.add_argument("--seed", type=int, default=2024, help="disorder seed")
        p.add_argument("--t-nodes", dest="t_nodes", type=int, default=16)
        out(p)

    def out(p):
        p.add_argument("--out", type=str, default=None, help="result file (stdout if omitted)")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--workers", type=int, default=1, help="parallelism cap (results are worker-independent)")

    p = sub.add_parser("lattice-info", help="sites, bonds, corridor cardinalities")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--side", type=int, required=True)
    p.add_argument("--bc", choices=("free", "periodic"), required=True)
    p.add_argument("--tiles", type=int, default=None, help="tile side L for tiling-corridor info")
    out(p)
    p.set_defaults(func=_cmd_lattice_info)

    p = sub.add_parser("pressure", help="quenched pressure of one lattice")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--side", type=int, required=True)
    p.add_argument("--bc", choices=("free", "periodic"), required=True)
    common(p)
    p.set_defaults(func=_cmd_pressure)

    for name, func, with_k in (
        ("adjacency", _cmd_adjacency, False),
        ("torus-diff", _cmd_torus_diff, False),
        ("surface-free", _cmd_surface_free, True),
        ("surface-periodic", _cmd_surface_periodic, True),
    ):
        p = sub.add_parser(name, help=f"{name.replace('-', ' ')} term, direct and integral routes")
        p.add_argument("--dim", type=int, required=True)
        p.add_argument("--L", type=int, required=True)
        if with_k:
            p.add_argument("--k", type=int, default=2, help="magnification (reported, not extrapolated)")
        p.add_argument("--routes", choices=("direct", "integral", "both"), default="both")
        common(p)
        p.set_defaults(func=func)

    p = sub.add_parser("scaling", help="per-unit-surface adjacency sweep over L")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--L-list", dest="L_list", type=str, required=True, help="comma-separated box sizes")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--mcmc-sweeps", dest="mcmc_sweeps", type=int, default=None, help="enable the two-level chain estimator")
    p.add_argument("--mcmc-burn-in", dest="mcmc_burn_in", type=int, default=500)
    p.add_argument("--mcmc-stride", dest="mcmc_stride", type=int, default=2)
    common(p)
    p.set_defaults(func=_cmd_scaling)

    p = sub.add_parser("verify", help="run the identity/inequality suite")
    p.add_argument("--suite", choices=("standard",), default="standard")
    p.add_argument("--method", choices=("quadrature", "mc"), default="quadrature")
    p.add_argument("--nodes", type=int, default=None, help="fixed node count (default: per-instance)")
    p.add_argument("--samples", type=int, default=20_000)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--tolerance", type=float, default=None)
    out(p)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("rerun", help="re-execute a manifest and check digests")
    p.add_argument("--manifest", type=str, required=True)
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(func=_cmd_rerun)
    return parser


def run(argv: list[str] | None = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    args.original_argv = list(argv)
    args.start_time = time.time()
    try:
        return args.func(args)
    except (SizeCapExceeded, GridTooLarge, SizeCapExceededForSweep) as exc:
        sys.stderr.write(f"infeasible size: {exc}\n")
        return EXIT_INFEASIBLE
    except ValueError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())
