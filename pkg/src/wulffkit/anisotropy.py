"""Anisotropy functions on the unit sphere and the operator A_F = D^2 F + F 1.

Everything is computed through the degree-one homogeneous extension
``Ft(y) = |y| F(y/|y|)``.  Its ambient Hessian annihilates ``y`` (Euler), and its
restriction to the tangent space ``x^perp`` at a unit vector ``x`` is exactly
``D^2 F + F 1`` there, so no spherical charts or Christoffel symbols are needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import jets
from .jets import Jet2
from .sampling import sphere_samples
from .spec_parser import ConstF, EllipsoidF, ExprF, FSpec, PNormF, eval_jet2, evaluate

UNIT_TOL = 1e-10
DEFAULT_CONVEXITY_TOL = 1e-8


class ConvexityError(ValueError):
    """A_F is not positive definite where it is needed."""


class SphereFunction:
    """A positive function F on S^n given by an :data:`FSpec`.

    ``sign=-1`` represents the reflected function ``x -> F(-x)``.
    """

    def __init__(self, spec: FSpec, sign: int = 1):
        self.spec = spec
        self.ambient_dim = spec.ambient_dim
        self.sign = sign

    def __repr__(self):
        return f"SphereFunction({self.spec.to_text()!r}, sign={self.sign})"

    def to_text(self) -> str:
        return self.spec.to_text() if self.sign == 1 else f"reflected({self.spec.to_text()})"

    def reflected(self) -> "SphereFunction":
        return SphereFunction(self.spec, -self.sign)

    def jet(self, y) -> Jet2:
        """Jet of the homogeneous extension at ``y`` (shape ``(..., n+1)``)."""
        y = np.asarray(y, dtype=float)
        if y.shape[-1] != self.ambient_dim:
            raise ValueError(f"expected points in R^{self.ambient_dim}, got shape {y.shape}")
        r = np.linalg.norm(y, axis=-1)
        if np.any(r <= 1e-12):
            raise ValueError("homogeneous extension is undefined at the origin")
        if self.sign == 1:
            return _extension_jet(self.spec, y, r)
        j = _extension_jet(self.spec, -y, r)
        return Jet2(j.val, -j.grad, j.hess)

    def __call__(self, x):
        """F on the sphere (``x`` is normalized first)."""
        x = np.asarray(x, dtype=float)
        x = x / np.linalg.norm(x, axis=-1, keepdims=True)
        return self.jet(x).val


def homogeneous_jet(F: SphereFunction, y) -> Jet2:
    return F.jet(y)


def _extension_jet(spec: FSpec, y: np.ndarray, r: np.ndarray) -> Jet2:
    m = y.shape[-1]
    eye = np.eye(m)
    if isinstance(spec, ConstF):
        u = y / r[..., None]
        hess = spec.c * (eye - u[..., :, None] * u[..., None, :]) / r[..., None, None]
        return Jet2(spec.c * r, spec.c * u, hess)
    if isinstance(spec, EllipsoidF):
        a2 = np.asarray(spec.axes) ** 2
        q = np.sqrt(np.sum(a2 * y * y, axis=-1))
        g = a2 * y / q[..., None]
        hess = (np.diag(a2) - g[..., :, None] * g[..., None, :]) / q[..., None, None]
        return Jet2(q, g, hess)
    if isinstance(spec, PNormF):
        return _pnorm_jet(spec.p, spec.eps, y, r)
    if isinstance(spec, ExprF):
        ys = Jet2.variables(y)
        rj = jets.sqrt(sum(v * v for v in ys))
        x = [v / rj for v in ys]
        val = evaluate(spec.expr, x)
        return rj * val
    raise TypeError(f"unsupported anisotropy spec {spec!r}")


def _pnorm_jet(p: float, eps: float, y: np.ndarray, r: np.ndarray) -> Jet2:
    # Ft(y) = G^(1/p),  G = sum_i s_i^(p/2),  s_i = y_i^2 + eps^2 |y|^2
    m = y.shape[-1]
    eye = np.eye(m)
    e2 = eps * eps
    s = y * y + e2 * (r * r)[..., None]
    # v[..., i, :] = (1/2) grad s_i = y_i e_i + eps^2 y
    v = eye * y[..., None, :] + e2 * y[..., None, :]
    w1 = s ** (p / 2.0 - 1.0)
    w2 = (p / 2.0 - 1.0) * s ** (p / 2.0 - 2.0)
    G = np.sum(s ** (p / 2.0), axis=-1)
    dG = p * np.einsum("...i,...ij->...j", w1, v)
    # d2 s_i / 2 = e_i e_i^T + eps^2 I
    diag_part = np.einsum("...i,ij->...ij", w1, eye)
    d2G = p * (
        2.0 * np.einsum("...i,...ij,...ik->...jk", w2, v, v)
        + diag_part
        + e2 * np.sum(w1, axis=-1)[..., None, None] * eye
    )
    val = G ** (1.0 / p)
    c1 = val / (p * G)
    c2 = (1.0 / p) * (1.0 / p - 1.0) * val / (G * G)
    grad = c1[..., None] * dG
    hess = c1[..., None, None] * d2G + c2[..., None, None] * dG[..., :, None] * dG[..., None, :]
    return Jet2(val, grad, hess)


# ---------------------------------------------------------------------------


def tangent_basis(x) -> np.ndarray:
    """Orthonormal basis of ``x^perp`` for unit ``x``, as rows: shape ``(..., n, n+1)``.

    Built from a Householder reflection that maps the dominant axis onto ``-x``.
    """
    x = np.asarray(x, dtype=float)
    m = x.shape[-1]
    k = np.argmax(np.abs(x), axis=-1)
    sign = np.where(np.take_along_axis(x, k[..., None], axis=-1)[..., 0] >= 0, 1.0, -1.0)
    w = x.copy()
    np.put_along_axis(w, k[..., None], np.take_along_axis(x, k[..., None], axis=-1) + sign[..., None], axis=-1)
    H = np.eye(m) - 2.0 * w[..., :, None] * w[..., None, :] / np.sum(w * w, axis=-1)[..., None, None]
    # columns of H other than k span x^perp
    others = (k[..., None] + 1 + np.arange(m - 1)) % m
    rows = np.swapaxes(np.take_along_axis(H, others[..., None, :], axis=-1), -1, -2)
    return rows


@dataclass
class AnisotropyMatrix:
    matrix: np.ndarray  # (..., n, n), components A_ij in ``basis``
    basis: np.ndarray  # (..., n, n+1), rows
    point: np.ndarray  # (..., n+1)
    value: np.ndarray  # F at ``point``


def anisotropy_matrix(F: SphereFunction, x, basis=None, check: bool = True) -> AnisotropyMatrix:
    """Components ``A_ij = b_i . Hess Ft(x) . b_j`` of A_F at the unit vector ``x``."""
    x = np.asarray(x, dtype=float)
    if basis is None:
        basis = tangent_basis(x)
    basis = np.asarray(basis, dtype=float)
    if check:
        if np.any(np.abs(np.linalg.norm(x, axis=-1) - 1.0) > UNIT_TOL):
            raise ValueError("anisotropy matrix needs a unit vector")
        gram = basis @ np.swapaxes(basis, -1, -2)
        if np.any(np.abs(gram - np.eye(basis.shape[-2])) > UNIT_TOL):
            raise ValueError("basis is not orthonormal")
        if np.any(np.abs(np.einsum("...ij,...j->...i", basis, x)) > UNIT_TOL):
            raise ValueError("basis is not orthogonal to x")
    j = F.jet(x)
    A = basis @ j.hess @ np.swapaxes(basis, -1, -2)
    A = 0.5 * (A + np.swapaxes(A, -1, -2))
    return AnisotropyMatrix(A, basis, x, j.val)


@dataclass
class ConvexityReport:
    samples: int
    min_eigenvalue: float
    argmin: list[float]
    passed: bool
    tol: float

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "min_eigenvalue": self.min_eigenvalue,
            "argmin": self.argmin,
            "passed": self.passed,
            "tol": self.tol,
        }


def convexity_audit(F: SphereFunction, samples: int = 4000, tol: float = DEFAULT_CONVEXITY_TOL) -> ConvexityReport:
    """Scan the smallest eigenvalue of A_F over a deterministic lattice on the sphere."""
    if samples < 100:
        raise ValueError("convexity audit needs at least 100 samples")
    x = sphere_samples(F.ambient_dim, samples)
    A = anisotropy_matrix(F, x, check=False).matrix
    mins = np.linalg.eigvalsh(A)[:, 0]
    bad = ~np.isfinite(mins)
    mins = np.where(bad, -np.inf, mins)
    k = int(np.argmin(mins))
    lo = float(mins[k])
    return ConvexityReport(samples, lo, [float(v) for v in x[k]], bool(lo > tol), tol)


def two_term_wulff(F: SphereFunction, x) -> np.ndarray:
    """``F(x) x + grad_S F(x)`` with the spherical gradient taken from the sphere function itself.

    For expression specs the gradient comes from the raw expression (not its
    homogeneous extension), projected onto ``x^perp``.
    """
    x = np.asarray(x, dtype=float)
    spec = F.spec
    if isinstance(spec, ExprF):
        j = eval_jet2(spec.expr, F.sign * x)
        val, grad = j.val, F.sign * j.grad
    else:
        j = F.jet(x)
        val, grad = j.val, j.grad
    tangential = grad - np.sum(grad * x, axis=-1, keepdims=True) * x
    return val[..., None] * x + tangential

