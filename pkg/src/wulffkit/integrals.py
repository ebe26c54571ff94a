"""Quadrature on closed parametric hypersurfaces, Minkowski residuals and diagnostics."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .anisotropy import SphereFunction, anisotropy_matrix
from .curvature import (
    CurvaturePacket,
    NotPositiveDefinite,
    curvature_packet,
    eigen_spread,
    spread_identity_gap,
    maclaurin_margins,
    newton_margins,
)
from .geometry import PointFrame, Surface, point_frames

MIN_RES = 8
CHUNK = 4096
CONSTANCY_TOL = 1e-6
UMBILIC_TOL = 1e-6
EQUALITY_TOL = 1e-8
CONVEX_TOL = 1e-8
RATIO_GUARD = 1e-12
# normalized residuals below this are at the rounding floor; refinement slopes are not meaningful there
RESIDUAL_FLOOR = 1e-12


class NumericalFailure(RuntimeError):
    def __init__(self, node: int, u, message: str):
        self.node = node
        self.u = [float(v) for v in u]
        super().__init__(f"{message} at node {node}, u = {self.u}")


@dataclass
class QuadratureGrid:
    nodes: np.ndarray  # (N, n)
    weights: np.ndarray  # (N,), parameter measure
    resolution: tuple
    surface: Surface = field(repr=False)

    def __len__(self):
        return len(self.weights)


def build_grid(surface: Surface, res, min_res: int = MIN_RES) -> QuadratureGrid:
    """Gauss-Legendre nodes on bounded angle axes, equispaced trapezoid nodes on periodic ones."""
    res = tuple(int(r) for r in res)
    if len(res) != surface.dim:
        raise ValueError(f"need {surface.dim} resolutions, got {len(res)}")
    if min(res) < min_res:
        raise ValueError(f"resolution must be at least {min_res} per axis, got {res}")
    pts, wts = [], []
    for (lo, hi, periodic), m in zip(surface.domain, res):
        if periodic:
            pts.append(lo + (hi - lo) * np.arange(m) / m)
            wts.append(np.full(m, (hi - lo) / m))
        else:
            x, w = np.polynomial.legendre.leggauss(m)
            pts.append(lo + (hi - lo) * (x + 1.0) / 2.0)
            wts.append(w * (hi - lo) / 2.0)
    mesh = np.meshgrid(*pts, indexing="ij")
    wmesh = np.meshgrid(*wts, indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=-1)
    weights = np.prod(np.stack([w.ravel() for w in wmesh], axis=-1), axis=-1)
    return QuadratureGrid(nodes, weights, res, surface)


@dataclass
class NodeData:
    frames: PointFrame
    packets: CurvaturePacket
    F: np.ndarray  # F evaluated at the inner normal


def _evaluate_chunk(surface, F, U, offset):
    frames = point_frames(surface, U)
    aniso = anisotropy_matrix(F, frames.normal, frames.frame)
    try:
        packets = curvature_packet(aniso.matrix, frames.B)
    except NotPositiveDefinite as exc:
        k = int(exc.index[0]) if exc.index else 0
        raise NumericalFailure(offset + k, U[k], "A_F is not positive definite (Cholesky failed)") from None
    return frames, packets, aniso.value


def evaluate_grid(surface: Surface, F: SphereFunction, grid: QuadratureGrid, threads: int = 1) -> NodeData:
    """Frames and curvature packets at every node.

    Chunk boundaries do not depend on ``threads``, so results are identical for
    any thread count.
    """
    if F.ambient_dim != surface.dim + 1:
        raise ValueError(f"F lives on S^{F.ambient_dim - 1} but the surface is {surface.dim}-dimensional")
    starts = range(0, len(grid), CHUNK)
    jobs = [(grid.nodes[s : s + CHUNK], s) for s in starts]
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda job: _evaluate_chunk(surface, F, *job), jobs))
    else:
        parts = [_evaluate_chunk(surface, F, *job) for job in jobs]
    frames = PointFrame(
        **{
            name: np.concatenate([getattr(p[0], name) for p in parts])
            for name in ("u", "X", "normal", "frame", "B", "dA", "support")
        }
    )
    packets = CurvaturePacket(
        A=np.concatenate([p[1].A for p in parts]),
        B=np.concatenate([p[1].B for p in parts]),
        S=np.concatenate([p[1].S for p in parts]),
        lam=np.concatenate([p[1].lam for p in parts]),
        sigma=np.concatenate([p[1].sigma for p in parts]),
        M=np.concatenate([p[1].M for p in parts]),
        P=[np.concatenate([p[1].P[r] for p in parts]) for r in range(surface.dim)],
    )
    return NodeData(frames, packets, np.concatenate([p[2] for p in parts]))


def integrand_values(data: NodeData, integrand):
    """Per-node values of a named integrand, or of a callable ``f(data) -> (N,)``.

    Names: ``"area"``, ``"F"``, ``"support"``, ``("minkowski", r)``.
    """
    if callable(integrand):
        return np.asarray(integrand(data), dtype=float)
    M = data.packets.M
    if integrand == "area":
        return np.ones_like(data.frames.dA)
    if integrand == "F":
        return data.F
    if integrand == "support":
        return data.frames.support
    if isinstance(integrand, tuple) and integrand[0] == "minkowski":
        r = integrand[1]
        return data.F * M[:, r] + M[:, r + 1] * data.frames.support
    raise ValueError(f"unknown integrand {integrand!r}")


def quadrature_sum(grid: QuadratureGrid, data: NodeData, values) -> float:
    # fsum is exactly rounded, hence independent of summation order
    return math.fsum((grid.weights * data.frames.dA * values).tolist())


def integrate(surface, F, grid, integrand, data: NodeData | None = None, threads: int = 1) -> float:
    if data is None:
        data = evaluate_grid(surface, F, grid, threads)
    return quadrature_sum(grid, data, integrand_values(data, integrand))


def minkowski_residuals(surface, F, grid, data: NodeData | None = None, threads: int = 1) -> list[dict]:
    """Raw and normalized residuals of the integrals of F M_r + M_{r+1} <X, nu> for r = 0..n-1."""
    if data is None:
        data = evaluate_grid(surface, F, grid, threads)
    scale = integrate(surface, F, grid, "F", data)
    out = []
    for r in range(surface.dim):
        raw = integrate(surface, F, grid, ("minkowski", r), data)
        out.append({"r": r, "raw": raw, "normalized": raw / scale})
    return out


def _f(v):
    v = float(v)
    return v if math.isfinite(v) else None


def umbilic_mask(lam, tol: float = UMBILIC_TOL):
    return eigen_spread(lam) <= tol


def equality_mask(M, tol: float = EQUALITY_TOL):
    """Nodes where every Newton (and, where defined, Maclaurin) inequality holds with equality."""
    newton = newton_margins(M)
    mac = maclaurin_margins(M)
    ok = np.all(np.abs(newton) <= tol, axis=-1)
    mac_ok = np.all(np.where(np.isnan(mac), True, np.abs(mac) <= tol), axis=-1)
    return ok & mac_ok


def diagnostics(surface, F, grid, data: NodeData | None = None, threads: int = 1) -> dict:
    if data is None:
        data = evaluate_grid(surface, F, grid, threads)
    n = surface.dim
    frames, pk = data.frames, data.packets
    M, lam = pk.M, pk.lam
    support = frames.support
    out: dict = {}
    out["support_min"] = _f(support.min())
    out["support_max"] = _f(support.max())
    out["fixed_sign_support"] = bool(support.max() < 0 or support.min() > 0)
    b_min = float(np.linalg.eigvalsh(frames.B)[:, 0].min())
    out["B_min_eigenvalue"] = _f(b_min)
    out["convex"] = bool(b_min >= -CONVEX_TOL)

    spreads, constant = [], []
    for r in range(n + 1):
        col = M[:, r]
        spread = float(col.max() - col.min())
        spreads.append({"r": r, "min": _f(col.min()), "max": _f(col.max()), "spread": _f(spread)})
        constant.append(bool(spread <= CONSTANCY_TOL * max(1.0, float(np.abs(col).max()))))
    out["M_ranges"] = spreads
    out["Mr_constant"] = constant

    if n >= 2:
        mean_gap = M[:, 1] ** 2 - M[:, 2]
        out["mean_gap_min"] = _f(mean_gap.min())
        out["mean_gap_negativity"] = _f(max(0.0, -float(mean_gap.min())))
        out["spread_identity_residual"] = _f(np.abs(spread_identity_gap(M, lam)).max())
    else:
        out["mean_gap_min"] = out["mean_gap_negativity"] = out["spread_identity_residual"] = None

    positive = np.all(lam > 0, axis=-1)
    mac = maclaurin_margins(M)
    out["maclaurin"] = [
        {
            "r": r,
            "nodes": int(np.count_nonzero(positive & ~np.isnan(mac[:, r - 2]))),
            "min_margin": _f(mac[positive, r - 2].min()) if np.any(positive) else None,
        }
        for r in range(2, n + 1)
    ]
    newton = newton_margins(M)
    out["newton"] = [{"k": k, "min_margin": _f(newton[:, k].min())} for k in range(n - 1)]

    ratios = []
    for k in range(n + 1):
        for r in range(k + 1, n + 1):
            ok = np.abs(M[:, k]) > RATIO_GUARD
            entry = {"r": r, "k": k, "defined_nodes": int(ok.sum()), "undefined_nodes": int((~ok).sum())}
            if ok.any():
                q = M[ok, r] / M[ok, k]
                entry.update(min=_f(q.min()), max=_f(q.max()), spread=_f(q.max() - q.min()))
            else:
                entry.update(min=None, max=None, spread=None)
            ratios.append(entry)
    out["ratios"] = ratios

    spread = eigen_spread(lam)
    lam_scale = max(1.0, float(np.abs(lam).max()))
    out["lambda_min"] = _f(lam.min())
    out["lambda_max"] = _f(lam.max())
    out["lambda_spread_max"] = _f(spread.max())
    out["umbilic_nodes"] = int(np.count_nonzero(umbilic_mask(lam)))
    out["equality_nodes"] = int(np.count_nonzero(equality_mask(M)))
    out["wulff_candidate"] = bool(spread.max() <= UMBILIC_TOL * lam_scale)
    out["nodes"] = len(grid)
    return out


def observed_orders(resolutions, errors, floor: float = RESIDUAL_FLOOR):
    """Refinement slopes between consecutive grids; ``None`` where the finer error sits at the floor."""
    orders = [None]
    for (h0, e0), (h1, e1) in zip(zip(resolutions, errors), zip(resolutions[1:], errors[1:])):
        ratio = h1[0] / h0[0]
        if abs(e1) <= floor or ratio == 1:
            orders.append(None)
        elif abs(e0) == 0:
            orders.append(-math.inf)
        else:
            orders.append(math.log(abs(e0) / abs(e1)) / math.log(ratio))
    return orders


def refinement_ok(errors, orders, min_order: float, floor: float = RESIDUAL_FLOOR) -> bool:
    """Every refinement step either reaches the floor or converges at ``min_order`` or better."""
    for e1, order in zip(errors[1:], orders[1:]):
        if abs(e1) <= floor:
            continue
        if order is None or order < min_order:
            return False
    return True


def verify(surface: Surface, F: SphereFunction, resolutions, threads: int = 1, audit=None) -> dict:
    """Residuals and diagnostics at the finest grid plus a convergence table over all grids."""
    resolutions = [tuple(int(v) for v in r) for r in resolutions]
    table = []
    finest = None
    for res in resolutions:
        grid = build_grid(surface, res)
        data = evaluate_grid(surface, F, grid, threads)
        residuals = minkowski_residuals(surface, F, grid, data)
        table.append({"resolution": list(res), "normalized_residuals": [r["normalized"] for r in residuals]})
        finest = (grid, data, residuals)
    grid, data, residuals = finest
    for r in range(surface.dim):
        errs = [row["normalized_residuals"][r] for row in table]
        orders = observed_orders(resolutions, errs)
        for row, order in zip(table, orders):
            row.setdefault("observed_order", []).append(_f(order) if order is not None else None)
    diag = diagnostics(surface, F, grid, data)
    if audit is not None:
        diag["convexity_audit"] = audit.to_dict()
    return {
        "surface": surface.to_text(),
        "F": F.to_text(),
        "grid": {"resolution": list(grid.resolution), "nodes": len(grid)},
        "residuals": residuals,
        "diagnostics": diag,
        "convergence": table,
    }
