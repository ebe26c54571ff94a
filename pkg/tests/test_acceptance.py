"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import math
import time

import numpy as np
import pytest

from wulffkit.anisotropy import SphereFunction
from wulffkit.cli import main
from wulffkit.curvature import (
    charpoly_sigma,
    curvature_packet,
    spread_identity_gap,
    kronecker_newton,
    kronecker_sigma,
    maclaurin_margins,
    newton_margins,
    newton_operators,
)
from wulffkit.geometry import make_surface, point_frames
from wulffkit.integrals import (
    RESIDUAL_FLOOR,
    build_grid,
    diagnostics,
    equality_mask,
    evaluate_grid,
    integrate,
    observed_orders,
    refinement_ok,
    umbilic_mask,
    verify,
)
from wulffkit.spec_parser import parse_fspec, parse_surfspec
from wulffkit.wulff import wulff_selftest

from conftest import fd_gradient, fd_jacobian, random_spd, random_sym

SPHERE_GRIDS = [(24, 48), (48, 96), (96, 192)]
TORUS_GRIDS = [(24, 24), (48, 48), (96, 96)]


def announce(capsys, number, title, ok, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} ({detail})")


def setup(surface_text, f_text, dim=None):
    s = make_surface(parse_surfspec(surface_text, dim))
    return s, SphereFunction(parse_fspec(f_text, s.dim + 1))


MINKOWSKI_CASES = [
    ("sphere:2", "const:1", SPHERE_GRIDS),
    ("torus:2,0.5", "const:1", TORUS_GRIDS),
    ("ellipsoidsurf:1,1.3,0.7", "ellipsoid:1.1,0.9,1.2", SPHERE_GRIDS),
    ("wulff:ellipsoid:1.1,0.9,1.2", "ellipsoid:1.1,0.9,1.2", SPHERE_GRIDS),
    ("sphere:2", "pnorm:4,0.05", SPHERE_GRIDS),
]


def test_criterion_1_minkowski_residuals(capsys):
    ok = True
    worst, slowest = 0.0, 0.0
    for surface_text, f_text, grids in MINKOWSKI_CASES:
        t0 = time.perf_counter()
        s, F = setup(surface_text, f_text)
        rep = verify(s, F, grids)
        elapsed = time.perf_counter() - t0
        slowest = max(slowest, elapsed)
        for r in range(s.dim):
            errs = [row["normalized_residuals"][r] for row in rep["convergence"]]
            orders = observed_orders(grids, errs)
            ok &= abs(errs[-1]) < 1e-6 and refinement_ok(errs, orders, 4.0, RESIDUAL_FLOOR)
            worst = max(worst, abs(errs[-1]))
        ok &= elapsed <= 60.0
    announce(capsys, 1, "Minkowski residuals below 1e-6 with order >= 4", ok, f"worst finest residual {worst:.2e}, slowest case {slowest:.1f}s")
    assert ok


def test_criterion_2_wulff_selftest(capsys):
    ok = True
    details = []
    for text in ("ellipsoid:1.1,0.9,1.2", "pnorm:4,0.05", "expr:1+0.1*x1*x2"):
        F = SphereFunction(parse_fspec(text, 3))
        errs = [wulff_selftest(F, res)["sup_abs_lambda_minus_1"] for res in SPHERE_GRIDS]
        ok &= errs[-1] <= 1e-6
        ok &= all(b <= max(a, RESIDUAL_FLOOR) for a, b in zip(errs, errs[1:]))
        details.append(f"{text.split(':')[0]} {errs[-1]:.1e}")
    announce(capsys, 2, "Wulff self-test sup|lambda-1| <= 1e-6 at 96x192", ok, ", ".join(details))
    assert ok


def test_criterion_3_algebraic_identities(capsys):
    ok = True
    ident_err = 0.0
    for surface_text, f_text, res in [
        ("ellipsoidsurf:1,1.3,0.7", "ellipsoid:1.1,0.9,1.2", (48, 96)),
        ("torus:2,0.5", "pnorm:4,0.05", (48, 48)),
        ("radial:1 + 0.2*x3 + 0.1*x1*x2", "expr:1+0.1*x1*x2", (48, 96)),
        ("sphere:1", "ellipsoid:1,1.2,0.9,1.1", (12, 12, 24)),
    ]:
        s, F = setup(surface_text, f_text, dim=len(res))
        pk = evaluate_grid(s, F, build_grid(s, res)).packets
        gap = np.abs(spread_identity_gap(pk.M, pk.lam)) / np.maximum(1.0, pk.M[:, 1] ** 2)
        ident_err = max(ident_err, float(gap.max()))
    ok &= ident_err <= 1e-10

    trace_err, sym_err = 0.0, 0.0
    rng = np.random.default_rng(2024)
    for n in (2, 3, 4):
        A = np.stack([random_spd(rng, n) for _ in range(1000)])
        B = np.stack([random_sym(rng, n) for _ in range(1000)])
        pk = curvature_packet(A, B)
        sig = pk.sigma
        BS = B @ pk.S
        sym_err = max(sym_err, float(np.max(np.abs(BS - np.swapaxes(BS, 1, 2)) / np.max(np.abs(BS), axis=(1, 2), keepdims=True))))
        for r in range(n):
            P = pk.P[r]
            tP = np.trace(P, axis1=1, axis2=2)
            tPS = np.trace(P @ pk.S, axis1=1, axis2=2)
            rel3 = np.abs(tP - (n - r) * sig[:, r]) / np.abs((n - r) * sig[:, r])
            rel2 = np.abs(tPS - (r + 1) * sig[:, r + 1]) / np.abs((r + 1) * sig[:, r + 1])
            trace_err = max(trace_err, float(rel2.max()), float(rel3.max()))
            BP = B @ P
            sym_err = max(sym_err, float(np.max(np.abs(BP - np.swapaxes(BP, 1, 2)) / np.max(np.abs(BP), axis=(1, 2), keepdims=True))))
    ok &= trace_err <= 1e-9 and sym_err <= 1e-10
    announce(capsys, 3, "algebraic identities", ok, f"spread identity {ident_err:.1e}, traces {trace_err:.1e}, symmetry {sym_err:.1e}")
    assert ok


def test_criterion_4_kronecker_oracles(capsys):
    rng = np.random.default_rng(7)
    ok = True
    count = 0
    for _ in range(200):
        n = int(rng.integers(1, 5))
        S = rng.integers(-9, 10, size=(n, n)).astype(object)
        sig = charpoly_sigma(S)
        P = newton_operators(np.array(sig, dtype=object), S)
        for r in range(n + 1):
            ok &= kronecker_sigma(S, r) == sig[r]
        for r in range(n):
            ok &= bool((kronecker_newton(S, r) == P[r]).all())
        ok &= all(isinstance(v, int) for v in sig)
        count += 1
    announce(capsys, 4, "Kronecker expansions equal recursions exactly", ok, f"{count} integer matrices, n <= 4")
    assert ok


def test_criterion_5_inequalities_and_equality(capsys):
    ok = True
    worst = math.inf
    for surface_text, f_text in [
        ("sphere:2", "const:1"),
        ("ellipsoidsurf:1,1.3,0.7", "ellipsoid:1.1,0.9,1.2"),
        ("sphere:2", "pnorm:4,0.05"),
        ("wulff:pnorm:4,0.05", "pnorm:4,0.05"),
        ("radial:1 + 0.2*x3 + 0.1*x1*x2", "expr:1+0.1*x1*x2"),
    ]:
        s, F = setup(surface_text, f_text)
        pk = evaluate_grid(s, F, build_grid(s, (48, 96))).packets
        mac = maclaurin_margins(pk.M)
        m = min(float(np.nanmin(mac)), float(newton_margins(pk.M).min()))
        worst = min(worst, m)
        ok &= m >= -1e-10
        # umbilic nodes always meet the inequalities with equality; the converse is checked on sphere vs ellipsoid
        # below, since margins are quadratic in the spread and near-umbilic nodes fall under the equality tolerance
        ok &= bool(np.all(equality_mask(pk.M)[umbilic_mask(pk.lam)]))
    s, F = setup("sphere:2", "const:1")
    d_sphere = diagnostics(s, F, build_grid(s, (24, 48)))
    s, F = setup("ellipsoidsurf:1,1.3,0.7", "const:1")
    d_ell = diagnostics(s, F, build_grid(s, (24, 48)))
    ok &= d_sphere["equality_nodes"] == d_sphere["umbilic_nodes"] == d_sphere["nodes"]
    ok &= d_ell["equality_nodes"] == d_ell["umbilic_nodes"] == 0
    for surface_text, f_text in [("sphere:2", "const:1"), ("ellipsoidsurf:1,1.3,0.7", "const:1"), ("ellipsoidsurf:1,1.3,0.7", "ellipsoid:1.1,0.9,1.2")]:
        s, F = setup(surface_text, f_text)
        pk = evaluate_grid(s, F, build_grid(s, (48, 96))).packets
        ok &= bool(np.array_equal(umbilic_mask(pk.lam), equality_mask(pk.M)))
    announce(capsys, 5, "Newton/Maclaurin margins and umbilic equality", ok, f"worst margin {worst:.1e}, sphere all-equal, ellipsoid none")
    assert ok


def test_criterion_6_geometry_calibration(capsys):
    ok = True
    err = 0.0
    for R in (0.5, 1.0, 2.0):
        s, F = setup(f"sphere:{R}", "const:1")
        grid = build_grid(s, (24, 48))
        fr = point_frames(s, grid.nodes)
        err = max(err, float(np.abs(fr.B - np.eye(2) / R).max()), float(np.abs(fr.support + R).max()))
        err = max(err, abs(integrate(s, F, grid, "area") - 4 * math.pi * R * R) / (4 * math.pi * R * R))
    s3, F3 = setup("sphere:1", "const:1", dim=3)
    err3 = abs(integrate(s3, F3, build_grid(s3, (16, 16, 32)), "area") - 2 * math.pi**2)
    ok &= err <= 1e-10 and err3 <= 1e-10
    R, r = 2.0, 0.5
    s, _ = setup(f"torus:{R},{r}", "const:1")
    U = build_grid(s, (24, 24)).nodes
    lam = np.linalg.eigvalsh(point_frames(s, U).B)
    th = U[:, 0]
    expected = np.sort(np.stack([np.full_like(th, 1 / r), np.cos(th) / (R + r * np.cos(th))], axis=-1), axis=-1)
    terr = float(np.abs(lam - expected).max())
    ok &= terr <= 1e-6
    announce(capsys, 6, "sphere, S^3 and torus calibration", ok, f"sphere {err:.1e}, S^3 area {err3:.1e}, torus {terr:.1e}")
    assert ok


def test_criterion_7_derivatives(capsys):
    rng = np.random.default_rng(99)
    families = [
        lambda: f"ellipsoid:{','.join(f'{v:.3f}' for v in rng.uniform(0.5, 2.0, 3))}",
        lambda: f"pnorm:{rng.uniform(1.5, 6):.3f},{rng.uniform(0.02, 0.5):.3f}",
        lambda: f"expr:2 + {rng.uniform(-0.5, 0.5):.3f}*x1*x2 + {rng.uniform(-0.3, 0.3):.3f}*sin(x3) + {rng.uniform(-0.2, 0.2):.3f}*x1^3",
        lambda: f"const:{rng.uniform(0.5, 3):.3f}",
    ]
    hess_err, euler_err = 0.0, 0.0
    for _ in range(1000):
        F = SphereFunction(parse_fspec(families[int(rng.integers(len(families)))](), 3))
        y = rng.normal(size=(1, 3))
        y *= rng.uniform(0.5, 2.0) / np.linalg.norm(y)
        j = F.jet(y)
        H_fd = fd_jacobian(lambda p: F.jet(p).grad, y)
        g_fd = fd_gradient(lambda p: F.jet(p).val, y)
        hess_err = max(hess_err, float(np.abs(j.hess - H_fd).max() / max(1.0, np.abs(j.hess).max())))
        hess_err = max(hess_err, float(np.abs(j.grad - g_fd).max() / max(1.0, np.abs(j.grad).max())))
        euler_err = max(euler_err, float(abs(j.grad[0] @ y[0] - j.val[0]) / max(1.0, abs(j.val[0]))))
        euler_err = max(euler_err, float(np.abs(j.hess[0] @ y[0]).max() / max(1.0, np.abs(j.hess).max())))
    ok = hess_err <= 1e-7 and euler_err <= 1e-10
    announce(capsys, 7, "jet derivatives vs finite differences and Euler relations", ok, f"FD {hess_err:.1e}, Euler {euler_err:.1e}")
    assert ok


def test_criterion_8_determinism(tmp_path, capsys):
    ok = True
    for threads in ("1", "4"):
        outs = []
        for k in range(2):
            path = tmp_path / f"run{threads}_{k}.json"
            argv = ["verify", "--surface", "ellipsoidsurf:1,1.3,0.7", "--f", "pnorm:4,0.05", "--res", "48x96", "--converge", "1", "--threads", threads, "-o", str(path)]
            with capsys.disabled():
                code = main(argv)
            ok &= code == 0
            outs.append(path.read_bytes())
        ok &= outs[0] == outs[1]
    announce(capsys, 8, "byte-identical verify reports", ok, "two runs each at 1 and 4 threads")
    assert ok
