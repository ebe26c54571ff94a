"""Deterministic low-discrepancy point sets on spheres."""

import numpy as np

GOLDEN = (1.0 + 5.0**0.5) / 2.0


def _kronecker(count: int, dim: int) -> np.ndarray:
    # generalized golden-ratio sequence: phi_d is the positive root of x^(d+1) = x + 1
    phi = 2.0
    for _ in range(64):
        phi = (1.0 + phi) ** (1.0 / (dim + 1))
    alpha = (1.0 / phi) ** np.arange(1, dim + 1)
    k = np.arange(1, count + 1)[:, None]
    return (0.5 + k * alpha) % 1.0


def sphere_samples(ambient_dim: int, count: int) -> np.ndarray:
    """Return ``count`` points on the unit sphere in R^ambient_dim.

    Circle: equispaced angles.  S^2: spherical Fibonacci lattice.  Higher
    spheres: a Kronecker sequence pushed through Box-Muller and normalized.
    """
    if ambient_dim < 2:
        raise ValueError("ambient dimension must be at least 2")
    if ambient_dim == 2:
        t = 2.0 * np.pi * (np.arange(count) + 0.5) / count
        return np.stack([np.cos(t), np.sin(t)], axis=-1)
    if ambient_dim == 3:
        i = np.arange(count) + 0.5
        z = 1.0 - 2.0 * i / count
        rho = np.sqrt(1.0 - z * z)
        phi = 2.0 * np.pi * i / GOLDEN
        return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=-1)
    pairs = (ambient_dim + 1) // 2
    u = _kronecker(count, 2 * pairs)
    radius = np.sqrt(-2.0 * np.log(u[:, 0::2]))
    angle = 2.0 * np.pi * u[:, 1::2]
    g = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)], axis=-1)[:, :ambient_dim]
    return g / np.linalg.norm(g, axis=-1, keepdims=True)
