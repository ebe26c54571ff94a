"""Closed parametric hypersurfaces and per-point frames.

Conventions: ``nu`` is the *inner* unit normal and the second fundamental form
is ``B_ij = <d^2 X(e_i, e_j), nu>``, which equals ``<-d nu(e_j), e_i>``.  A
sphere of radius R then has ``B = I/R`` and support ``<X, nu> = -R``.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from . import jets
from .anisotropy import SphereFunction
from .jets import Jet2
from .spec_parser import (
    ClosedCurve,
    EllipsoidSurf,
    RadialGraph,
    Sphere,
    SurfaceSpec,
    Torus,
    WulffSurf,
    eval_float,
    evaluate,
)

POLE_TOL = 1e-9
IMMERSION_TOL = 1e-12


class GeometryError(ValueError):
    pass


def hyperspherical(u_jets):
    """Unit vector in R^{n+1} from angles (theta_1..theta_n); works on jets or arrays.

    theta_1..theta_{n-1} lie in [0, pi], theta_n in [0, 2 pi).  For n = 2 this is
    the usual ``(sin t cos p, sin t sin p, cos t)``.
    """
    n = len(u_jets)
    out = [None] * (n + 1)
    s = 1.0
    for i in range(n - 1):
        out[n - i] = s * jets.cos(u_jets[i])
        s = s * jets.sin(u_jets[i])
    out[0] = s * jets.cos(u_jets[n - 1])
    out[1] = s * jets.sin(u_jets[n - 1])
    return out


class Surface:
    """Base class.  Subclasses provide :meth:`chart` and :meth:`inward`."""

    spec: SurfaceSpec
    dim: int
    domain: list  # (lo, hi, periodic) per parameter axis

    def chart(self, U):
        """Position, first and second parameter derivatives at nodes ``U`` (N, n).

        Returns arrays shaped (N, m), (N, n, m) and (N, n, n, m) with m = n+1.
        Only the normal component of the second derivatives is used downstream.
        """
        raise NotImplementedError

    def inward(self, U, X, dX):
        """A vector field with positive component along the inner normal."""
        return -X

    def check_parameters(self, U):
        U = np.asarray(U, dtype=float)
        for axis, (lo, hi, periodic) in enumerate(self.domain):
            if periodic:
                continue
            t = U[..., axis]
            if np.any(np.minimum(np.abs(t - lo), np.abs(t - hi)) < POLE_TOL):
                raise GeometryError(f"parameter point too close to a coordinate pole on axis {axis}")

    def to_text(self) -> str:
        return self.spec.to_text()


class _SphericalChart(Surface):
    def __init__(self, spec, dim):
        self.spec = spec
        self.dim = dim
        self.domain = [(0.0, np.pi, False)] * (dim - 1) + [(0.0, 2.0 * np.pi, True)]

    def unit(self, U):
        return hyperspherical(Jet2.variables(U))

    def chart(self, U):
        return jets.stack(self.embed(self.unit(U)))

    def embed(self, x):
        raise NotImplementedError


class SphereSurface(_SphericalChart):
    def __init__(self, spec: Sphere):
        super().__init__(spec, spec.dim)
        self.radius = spec.radius

    def embed(self, x):
        return [self.radius * c for c in x]


class EllipsoidSurface(_SphericalChart):
    def __init__(self, spec: EllipsoidSurf):
        super().__init__(spec, spec.dim)
        self.axes = spec.axes

    def embed(self, x):
        return [a * c for a, c in zip(self.axes, x)]


class RadialSurface(_SphericalChart):
    def __init__(self, spec: RadialGraph):
        super().__init__(spec, spec.dim)

    def embed(self, x):
        rho = evaluate(self.spec.rho, x)
        return [rho * c for c in x]


class WulffSurface(_SphericalChart):
    """``x -> grad Ft(x)`` over the unit sphere; x is the outward normal at the image.

    The normal part of the second derivative follows from the Euler relations of
    the homogeneous extension: ``<d_a d_b X, x> = -(d_a x)^T Hess Ft (d_b x)``,
    so no third derivatives of F are needed.  Tangential parts are dropped.
    """

    def __init__(self, F: SphereFunction, spec: WulffSurf | None = None):
        super().__init__(spec if spec is not None else WulffSurf(F.spec), F.ambient_dim - 1)
        self.F = F

    def chart(self, U):
        x, dx, d2x = jets.stack(self.unit(U))
        j = self.F.jet(x)
        H = j.hess
        dX = dx @ H
        normal_part = -np.einsum("...ai,...ij,...bj->...ab", dx, H, dx)
        d2X = normal_part[..., None] * x[..., None, None, :]
        return j.grad, dX, d2X

    def to_text(self) -> str:
        if self.F.sign == 1:
            return self.spec.to_text()
        return "wulff:" + self.F.to_text()


class TorusSurface(Surface):
    def __init__(self, spec: Torus):
        self.spec = spec
        self.dim = 2
        self.R, self.r = spec.major, spec.minor
        self.domain = [(0.0, 2.0 * np.pi, True), (0.0, 2.0 * np.pi, True)]

    def chart(self, U):
        th, ph = Jet2.variables(U)
        ring = self.R + self.r * jets.cos(th)
        return jets.stack([ring * jets.cos(ph), ring * jets.sin(ph), self.r * jets.sin(th)])

    def inward(self, U, X, dX):
        ph = U[..., 1]
        core = np.stack([self.R * np.cos(ph), self.R * np.sin(ph), np.zeros_like(ph)], axis=-1)
        return core - X


class CurveSurface(Surface):
    def __init__(self, spec: ClosedCurve):
        self.spec = spec
        self.dim = 1
        self.domain = [(0.0, 2.0 * np.pi, True)]
        t = 2.0 * np.pi * np.arange(1024) / 1024
        X, dX, _ = self.chart(t[:, None])
        area = 0.5 * np.mean(X[:, 0] * dX[:, 0, 1] - X[:, 1] * dX[:, 0, 0]) * 2.0 * np.pi
        if abs(area) < 1e-12:
            raise GeometryError("closed curve encloses no area; cannot orient the inner normal")
        self.orientation = 1.0 if area > 0 else -1.0

    def chart(self, U):
        (t,) = Jet2.variables(U)
        return jets.stack([_as_jet(evaluate(self.spec.x, [t]), t), _as_jet(evaluate(self.spec.y, [t]), t)])

    def inward(self, U, X, dX):
        tangent = dX[..., 0, :]
        return self.orientation * np.stack([-tangent[..., 1], tangent[..., 0]], axis=-1)


def _as_jet(v, like: Jet2) -> Jet2:
    if isinstance(v, Jet2):
        return v
    return Jet2.constant(np.broadcast_to(np.asarray(v, dtype=float), like.val.shape), like.nvars)


def make_surface(spec: SurfaceSpec) -> Surface:
    if isinstance(spec, Sphere):
        surface = SphereSurface(spec)
    elif isinstance(spec, EllipsoidSurf):
        surface = EllipsoidSurface(spec)
    elif isinstance(spec, RadialGraph):
        surface = RadialSurface(spec)
    elif isinstance(spec, Torus):
        surface = TorusSurface(spec)
    elif isinstance(spec, ClosedCurve):
        surface = CurveSurface(spec)
    elif isinstance(spec, WulffSurf):
        surface = WulffSurface(SphereFunction(spec.f), spec)
    else:
        raise TypeError(f"unsupported surface spec {spec!r}")
    _probe(surface)
    return surface


def _probe(surface: Surface) -> None:
    from .integrals import build_grid

    res = [8] * surface.dim
    grid = build_grid(surface, res)
    if isinstance(surface, RadialSurface):
        x = np.stack(hyperspherical(list(grid.nodes.T)), axis=-1)
        rho = eval_float(surface.spec.rho, x)
        if np.min(rho) <= 0:
            raise GeometryError("radial function must be positive")
    _, dX, _ = surface.chart(grid.nodes)
    if np.any(_independence(dX) <= IMMERSION_TOL):
        raise GeometryError("chart is not an immersion at a probe node")


def _independence(dX):
    """det(G) / prod(G_aa): 1 for orthogonal tangents, 0 for dependent ones; blind to chart scaling."""
    gram = dX @ np.swapaxes(dX, -1, -2)
    diag = np.prod(np.diagonal(gram, axis1=-2, axis2=-1), axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(diag > 0, np.linalg.det(gram) / diag, 0.0)


# ---------------------------------------------------------------------------


@dataclass
class PointFrame:
    """Geometry at one or many parameter points (leading axes are the batch)."""

    u: np.ndarray  # (..., n)
    X: np.ndarray  # (..., m)
    normal: np.ndarray  # (..., m), inner unit normal
    frame: np.ndarray  # (..., n, m), orthonormal tangent basis as rows
    B: np.ndarray  # (..., n, n)
    dA: np.ndarray  # (...,)
    support: np.ndarray  # (...,) = <X, normal>

    def __getitem__(self, index) -> "PointFrame":
        return PointFrame(**{f.name: getattr(self, f.name)[index] for f in fields(self)})

    def __len__(self):
        return len(self.dA)


def _gram_schmidt(T):
    """Orthonormalize the rows of T (N, n, m); return (e, L) with e = L T, L lower triangular."""
    n = T.shape[-2]
    e = np.zeros_like(T)
    L = np.zeros(T.shape[:-2] + (n, n))
    for i in range(n):
        v = T[..., i, :].copy()
        coeff = np.zeros(T.shape[:-2] + (n,))
        coeff[..., i] = 1.0
        for j in range(i):
            c = np.sum(v * e[..., j, :], axis=-1)
            v = v - c[..., None] * e[..., j, :]
            coeff = coeff - c[..., None] * L[..., j, :]
        norm = np.linalg.norm(v, axis=-1)
        if np.any(norm <= 1e-300):
            raise GeometryError("degenerate tangent frame")
        e[..., i, :] = v / norm[..., None]
        L[..., i, :] = coeff / norm[..., None]
    return e, L


def _complete_normal(e, seed):
    """Unit vector orthogonal to the rows of ``e``, on the same side as ``seed``."""
    v = seed
    for _ in range(2):
        c = np.einsum("...i,...ki->...k", v, e)
        v = v - np.einsum("...k,...ki->...i", c, e)
    norm = np.linalg.norm(v, axis=-1)
    scale = np.linalg.norm(seed, axis=-1)
    if np.any(norm <= 1e-8 * scale):
        raise GeometryError("inward reference direction is tangent to the surface")
    return v / norm[..., None]


def point_frames(surface: Surface, U, mix=None) -> PointFrame:
    """Frames at nodes ``U`` (N, n).

    ``mix`` (n, n), if given, replaces the coordinate tangents by ``mix @ T``
    before Gram-Schmidt; it changes the frame but no invariant.
    """
    U = np.atleast_2d(np.asarray(U, dtype=float))
    surface.check_parameters(U)
    X, dX, d2X = surface.chart(U)
    if np.any(_independence(dX) <= IMMERSION_TOL):
        raise GeometryError("degenerate metric at a node")
    dA = np.sqrt(np.linalg.det(dX @ np.swapaxes(dX, -1, -2)))
    T = dX if mix is None else np.asarray(mix, dtype=float) @ dX
    e, L = _gram_schmidt(T)
    if mix is not None:
        L = L @ np.asarray(mix, dtype=float)
    nu = _complete_normal(e, surface.inward(U, X, dX))
    b = np.einsum("...abi,...i->...ab", d2X, nu)
    B = L @ b @ np.swapaxes(L, -1, -2)
    B = 0.5 * (B + np.swapaxes(B, -1, -2))
    support = np.sum(X * nu, axis=-1)
    return PointFrame(U, X, nu, e, B, dA, support)


def point_frame(surface: Surface, u, mix=None) -> PointFrame:
    return point_frames(surface, np.asarray(u, dtype=float)[None, :], mix)[0]
