"""Command-line interface: ``wulffkit {convexity,wulff,verify,report}``.

Exit codes: 0 pass, 1 audit or tolerance failure, 2 usage or parse error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .anisotropy import ConvexityError, SphereFunction, convexity_audit
from .geometry import GeometryError, make_surface
from .integrals import NumericalFailure, build_grid, evaluate_grid, verify
from .jets import DomainError
from .sampling import sphere_samples
from .spec_parser import ParseError, parse_fspec, parse_surfspec
from .wulff import wulff_mesh, wulff_samples_csv, wulff_selftest

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
MIN_AXIS, MAX_AXIS = 8, 4096
SURFACE_DIMS = (1, 2, 3)


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    f: str
    surface: str | None = None
    dim: int | None = None  # ambient dimension n + 1
    resolutions: list = field(default_factory=list)
    output: str | None = None
    format: str = "json"
    tol: float = 1e-6
    convexity_tol: float = 1e-8
    samples: int = 4000
    threads: int = 1
    force: bool = False
    selftest: bool = False


def parse_resolution(text: str) -> tuple[int, ...]:
    try:
        res = tuple(int(v) for v in text.lower().split("x"))
    except ValueError:
        raise UsageError(f"bad resolution {text!r}; expected e.g. 48x96") from None
    for v in res:
        if not MIN_AXIS <= v <= MAX_AXIS:
            raise UsageError(f"resolution {v} outside [{MIN_AXIS}, {MAX_AXIS}]")
    return res


def default_resolution(surface_dim: int, periodic_axes: int) -> tuple[int, ...]:
    if surface_dim == 1:
        return (256,)
    if surface_dim == 2:
        return (48, 48) if periodic_axes == 2 else (48, 96)
    return (16, 16, 32)


def _check_surface_dim(n: int) -> None:
    if n not in SURFACE_DIMS:
        raise UsageError(f"surface dimension {n} not supported by the command line (choose ambient dimension 2, 3 or 4)")


def _threads(value) -> int:
    if value is None:
        value = os.environ.get("WULFFKIT_THREADS", "1")
    try:
        t = int(value)
    except ValueError:
        raise UsageError(f"bad thread count {value!r}") from None
    if t < 1:
        raise UsageError("thread count must be at least 1")
    return t


def _infer_ambient(cfg: RunConfig) -> int:
    if cfg.dim is not None:
        return cfg.dim
    if cfg.resolutions:
        return len(cfg.resolutions[0]) + 1
    return 3


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _emit(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)


def _audit(F, cfg: RunConfig):
    report = convexity_audit(F, samples=cfg.samples, tol=cfg.convexity_tol)
    if not report.passed and not cfg.force:
        sys.stderr.write(_dump_json({"convexity_audit": report.to_dict()}))
        sys.stderr.write("convexity audit failed; rerun with --force to continue anyway\n")
    return report


# ---------------------------------------------------------------------------


def cmd_convexity(cfg: RunConfig) -> int:
    F = SphereFunction(parse_fspec(cfg.f, _infer_ambient(cfg)))
    report = convexity_audit(F, samples=cfg.samples, tol=cfg.convexity_tol)
    out = {"F": F.to_text(), **report.to_dict()}
    _emit(_dump_json(out), cfg.output)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_wulff(cfg: RunConfig) -> int:
    ambient = _infer_ambient(cfg)
    _check_surface_dim(ambient - 1)
    F = SphereFunction(parse_fspec(cfg.f, ambient))
    report = _audit(F, cfg)
    if not report.passed and not cfg.force:
        return EXIT_FAIL
    n = ambient - 1
    res = cfg.resolutions[0] if cfg.resolutions else ((32, 64) if n == 2 else (256,) if n == 1 else (16, 16, 32))
    if len(res) != n:
        raise UsageError(f"need {n} resolution axes for a {n}-dimensional Wulff shape")
    summary = {"F": F.to_text(), "forced": bool(cfg.force and not report.passed), "resolution": list(res)}
    if n == 2:
        mesh = wulff_mesh(F, res)
        text = mesh.to_obj()
        summary.update(format="obj", vertices=len(mesh.vertices), faces=len(mesh.faces))
    else:
        x = sphere_samples(ambient, int(np.prod(res)))
        text = wulff_samples_csv(F, x)
        summary.update(format="csv", samples=len(x))
    if cfg.output:
        _emit(text, cfg.output)
        summary["output"] = cfg.output
    code = EXIT_OK
    if cfg.selftest:
        st = wulff_selftest(F, res, threads=cfg.threads, audit=False)
        st["tol"] = cfg.tol
        st["passed"] = bool(st["sup_abs_lambda_minus_1"] <= cfg.tol)
        summary["selftest"] = st
        code = EXIT_OK if st["passed"] else EXIT_FAIL
    if cfg.output:
        sys.stdout.write(_dump_json(summary))
    else:
        sys.stdout.write(text)
        if cfg.selftest:
            sys.stderr.write(_dump_json(summary))
    if cfg.selftest:
        sys.stderr.write(f"sup|lambda_i - 1| = {summary['selftest']['sup_abs_lambda_minus_1']:.3e}\n")
    return code


def _surface_and_F(cfg: RunConfig):
    n = None if cfg.dim is None else cfg.dim - 1
    if n is None and cfg.resolutions and not cfg.surface.startswith(("ellipsoidsurf", "torus", "curve")):
        n = len(cfg.resolutions[0])
    spec = parse_surfspec(cfg.surface, n)
    _check_surface_dim(spec.dim)
    try:
        surface = make_surface(spec)
    except GeometryError as exc:
        raise UsageError(str(exc)) from None
    F = SphereFunction(parse_fspec(cfg.f, spec.dim + 1))
    return surface, F


def _resolution_ladder(cfg: RunConfig, surface, converge: int) -> list:
    periodic = sum(1 for _, _, p in surface.domain if p)
    base = cfg.resolutions[0] if cfg.resolutions else default_resolution(surface.dim, periodic)
    if len(base) != surface.dim:
        raise UsageError(f"need {surface.dim} resolution axes for this surface, got {len(base)}")
    ladder = [tuple(v * 2**k for v in base) for k in range(converge + 1)]
    if max(ladder[-1]) > MAX_AXIS:
        raise UsageError(f"refinement exceeds {MAX_AXIS} nodes per axis")
    return ladder


def cmd_verify(cfg: RunConfig, converge: int = 0) -> int:
    surface, F = _surface_and_F(cfg)
    report = _audit(F, cfg)
    if not report.passed and not cfg.force:
        return EXIT_FAIL
    ladder = _resolution_ladder(cfg, surface, converge)
    result = verify(surface, F, ladder, threads=cfg.threads, audit=report)
    worst = max(abs(r["normalized"]) for r in result["residuals"])
    result["tol"] = cfg.tol
    result["passed"] = bool(worst < cfg.tol)
    result["forced"] = bool(cfg.force and not report.passed)
    if cfg.format == "json":
        _emit(_dump_json(result), cfg.output)
    else:
        _emit(_verify_csv(result), cfg.output)
    return EXIT_OK if result["passed"] else EXIT_FAIL


def _verify_csv(result: dict) -> str:
    buf = io.StringIO()
    buf.write("resolution,r,normalized_residual,observed_order\n")
    for row in result["convergence"]:
        res = "x".join(str(v) for v in row["resolution"])
        for r, (e, o) in enumerate(zip(row["normalized_residuals"], row["observed_order"])):
            buf.write(f"{res},{r},{e!r},{'' if o is None else repr(o)}\n")
    return buf.getvalue()


def cmd_report(cfg: RunConfig) -> int:
    surface, F = _surface_and_F(cfg)
    report = _audit(F, cfg)
    if not report.passed and not cfg.force:
        return EXIT_FAIL
    (res,) = _resolution_ladder(cfg, surface, 0)
    grid = build_grid(surface, res)
    data = evaluate_grid(surface, F, grid, cfg.threads)
    n, m = surface.dim, surface.dim + 1
    head = (
        [f"u{i + 1}" for i in range(n)]
        + [f"X{i + 1}" for i in range(m)]
        + [f"nu{i + 1}" for i in range(m)]
        + ["support"]
        + [f"lambda{i + 1}" for i in range(n)]
        + [f"M{r}" for r in range(n + 1)]
    )
    fr, pk = data.frames, data.packets
    table = np.concatenate([fr.u, fr.X, fr.normal, fr.support[:, None], pk.lam, pk.M], axis=1)
    lines = [",".join(head)] + [",".join(repr(float(v)) for v in row) for row in table]
    _emit("\n".join(lines) + "\n", cfg.output)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wulffkit", description="Wulff shapes and anisotropic Minkowski formulas.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, surface: bool):
        sp.add_argument("--f", required=True, help="anisotropy: const:c | ellipsoid:a1,.. | pnorm:p,eps | expr:<expression>")
        if surface:
            sp.add_argument("--surface", required=True, help="sphere:R | ellipsoidsurf:a1,.. | radial:<rho> | torus:R,r | curve:<x(t)>;<y(t)> | wulff:<F>")
        sp.add_argument("--dim", type=int, help="ambient dimension n+1 (default: inferred, else 3)")
        sp.add_argument("--res", help="grid resolution per axis, e.g. 48x96")
        sp.add_argument("-o", "--output", help="output file (default stdout)")
        sp.add_argument("--threads", help="worker threads (default $WULFFKIT_THREADS or 1)")
        sp.add_argument("--samples", type=int, default=4000, help="convexity audit sample count")
        sp.add_argument("--convexity-tol", type=float, default=1e-8)
        sp.add_argument("--force", action="store_true", help="continue even if the convexity audit fails (labelled in output)")

    c = sub.add_parser("convexity", help="audit the convexity condition on A_F")
    c.add_argument("--f", required=True)
    c.add_argument("--dim", type=int)
    c.add_argument("--samples", type=int, default=4000)
    c.add_argument("--tol", dest="convexity_tol", type=float, default=1e-8)
    c.add_argument("-o", "--output")

    w = sub.add_parser("wulff", help="export the Wulff shape (OBJ for surfaces in R^3, CSV otherwise)")
    common(w, surface=False)
    w.add_argument("--selftest", action="store_true", help="report sup |lambda_i - 1| on the constructed shape")
    w.add_argument("--tol", type=float, default=1e-6, help="self-test tolerance")

    v = sub.add_parser("verify", help="Minkowski-type residuals and diagnostics on a surface")
    common(v, surface=True)
    v.add_argument("--converge", type=int, default=0, help="number of resolution doublings")
    v.add_argument("--tol", type=float, default=1e-6, help="pass threshold for normalized residuals")
    v.add_argument("--format", choices=("json", "csv"), default="json")

    r = sub.add_parser("report", help="per-node CSV of frames and anisotropic curvatures")
    common(r, surface=True)
    return p


def config_from_args(args) -> RunConfig:
    cfg = RunConfig(command=args.command, f=args.f)
    cfg.dim = args.dim
    if cfg.dim is not None and cfg.dim - 1 not in SURFACE_DIMS:
        raise UsageError("--dim must be 2, 3 or 4")
    cfg.output = args.output
    cfg.samples = args.samples
    cfg.convexity_tol = args.convexity_tol
    if args.command == "convexity":
        return cfg
    cfg.surface = getattr(args, "surface", None)
    if args.res:
        cfg.resolutions = [parse_resolution(args.res)]
    cfg.threads = _threads(args.threads)
    cfg.force = args.force
    cfg.selftest = getattr(args, "selftest", False)
    cfg.tol = getattr(args, "tol", cfg.tol)
    cfg.format = getattr(args, "format", "json")
    if not (cfg.tol > 0 and math.isfinite(cfg.tol)):
        raise UsageError("--tol must be positive")
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        cfg = config_from_args(args)
        if cfg.command == "convexity":
            return cmd_convexity(cfg)
        if cfg.command == "wulff":
            return cmd_wulff(cfg)
        if cfg.command == "verify":
            if args.converge < 0:
                raise UsageError("--converge must be nonnegative")
            return cmd_verify(cfg, args.converge)
        return cmd_report(cfg)
    except (UsageError, ParseError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except ConvexityError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_FAIL
    except NumericalFailure as exc:
        sys.stderr.write(_dump_json({"error": "numerical failure", "node": exc.node, "u": exc.u, "message": str(exc)}))
        return EXIT_NUMERIC
    except (GeometryError, DomainError, np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
