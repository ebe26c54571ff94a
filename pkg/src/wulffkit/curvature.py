"""Anisotropic Weingarten operator, its invariants and Newton operators.

The pipeline functions are batched over leading axes.  The combinatorial
``kronecker_*`` functions are literal sums over multi-indices, meant as test
oracles for small matrices; they work in exact integer arithmetic when given
integer input.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

KRONECKER_MAX_N = 5


class NotPositiveDefinite(np.linalg.LinAlgError):
    """Cholesky factorization of A_F failed; ``index`` is the first offending batch item."""

    def __init__(self, index):
        self.index = index
        super().__init__(f"A_F is not positive definite at batch item {index}")


def f_weingarten(A, B):
    """Return ``S = A B`` and its eigenvalues, sorted ascending.

    With ``A = C^T C`` (Cholesky), ``S`` is similar to the symmetric matrix
    ``C B C^T``, so the eigenvalues are read off a symmetric solver and are
    real by construction.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    try:
        L = np.linalg.cholesky(A)  # A = L L^T, so C = L^T
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite(_first_non_spd(A)) from None
    sym = np.swapaxes(L, -1, -2) @ B @ L
    sym = 0.5 * (sym + np.swapaxes(sym, -1, -2))
    return A @ B, np.linalg.eigvalsh(sym)


def _first_non_spd(A):
    flat = A.reshape((-1,) + A.shape[-2:])
    for i, a in enumerate(flat):
        try:
            np.linalg.cholesky(a)
        except np.linalg.LinAlgError:
            return np.unravel_index(i, A.shape[:-2]) if A.ndim > 2 else ()
    return None


def elementary_symmetric(x):
    """sigma_0..sigma_n.

    For eigenvalues (shape ``(..., n)``) this expands prod(t + lambda_i) term by
    term.  For a single square matrix it runs the Faddeev-LeVerrier recursion on
    the characteristic polynomial, exactly so for integer or Fraction entries.
    """
    x = np.asarray(x)
    if x.ndim == 2 and x.shape[0] == x.shape[1] and x.dtype == object:
        return charpoly_sigma(x)
    lam = np.asarray(x, dtype=float)
    n = lam.shape[-1]
    sig = np.zeros(lam.shape[:-1] + (n + 1,))
    sig[..., 0] = 1.0
    for i in range(n):
        for r in range(i + 1, 0, -1):
            sig[..., r] += lam[..., i] * sig[..., r - 1]
    return sig


def charpoly_sigma(S) -> list:
    """Coefficients sigma_r of det(tI - S) = sum (-1)^r sigma_r t^(n-r), for one matrix."""
    S = np.asarray(S, dtype=object)
    n = S.shape[0]
    P = np.eye(n, dtype=int).astype(object)
    sig = [1]
    for r in range(1, n + 1):
        tr = _trace(P @ S)
        s = Fraction(tr) / r if _is_exact(tr) else tr / r
        s = _demote(s)
        sig.append(s)
        P = s * np.eye(n, dtype=int).astype(object) - P @ S
    return sig


def newton_operators(sigma, S, upto: int | None = None):
    """P_0..P_{upto} (default P_0..P_{n-1}) via ``P_r = sigma_r I - P_{r-1} S``.

    Works batched over leading axes for floats, and on object arrays for exact
    arithmetic.
    """
    S = np.asarray(S)
    n = S.shape[-1]
    upto = n - 1 if upto is None else upto
    exact = S.dtype == object
    sigma = np.asarray(sigma, dtype=object if exact else float)
    eye = np.eye(n, dtype=int).astype(object) if exact else np.eye(n)
    P = np.broadcast_to(eye, S.shape).copy() if S.ndim > 2 else eye.copy()
    out = [P]
    for r in range(1, upto + 1):
        P = sigma[..., r][..., None, None] * eye - P @ S
        out.append(P)
    return out


def binomial(n: int, r: int) -> int:
    return math.comb(n, r)


def normalized_curvatures(sigma):
    """M_r = sigma_r / C(n, r)."""
    sigma = np.asarray(sigma, dtype=float)
    n = sigma.shape[-1] - 1
    return sigma / np.array([math.comb(n, r) for r in range(n + 1)], dtype=float)


# ---------------------------------------------------------------------------
# Combinatorial oracles


def permutation_sign(perm) -> int:
    perm = list(perm)
    sign = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def generalized_kronecker(upper, lower) -> int:
    """delta^{upper}_{lower}: +1/-1 if ``lower`` is distinct and ``upper`` an even/odd permutation of it, else 0."""
    upper, lower = tuple(upper), tuple(lower)
    if len(upper) != len(lower) or len(set(lower)) != len(lower) or sorted(upper) != sorted(lower):
        return 0
    where = {v: k for k, v in enumerate(lower)}
    return permutation_sign([where[v] for v in upper])


def kronecker_determinant(upper, lower) -> int:
    """The same symbol as the determinant of the matrix [delta_{lower_a}^{upper_b}]."""
    q = len(lower)
    total = 0
    for perm in itertools.permutations(range(q)):
        term = permutation_sign(perm)
        for a in range(q):
            if lower[a] != upper[perm[a]]:
                term = 0
                break
        total += term
    return total


def _guard(S, r):
    S = np.asarray(S)
    n = S.shape[-1]
    if S.ndim != 2 or S.shape[0] != n:
        raise ValueError("expected a square matrix")
    if n > KRONECKER_MAX_N:
        raise ValueError(f"Kronecker expansion is limited to n <= {KRONECKER_MAX_N}")
    if not 0 <= r <= n:
        raise ValueError(f"r must lie in [0, {n}]")
    return n


def _exact_divide(total, d: int):
    if _is_exact(total):
        return _demote(Fraction(total) / d)
    return total / d


def kronecker_sigma(S, r: int):
    """sigma_r = (1/r!) sum delta^{j_1..j_r}_{i_1..i_r} s_{i_1 j_1} ... s_{i_r j_r}.

    Only multi-indices where the symbol can be nonzero are visited: distinct
    lower indices and upper indices drawn from the same set.
    """
    n = _guard(S, r)
    S = np.asarray(S, dtype=object)
    total = 0
    for lower in itertools.permutations(range(n), r):
        for upper in itertools.permutations(lower):
            sign = generalized_kronecker(upper, lower)
            term = sign
            for a in range(r):
                term = term * S[lower[a], upper[a]]
            total = total + term
    return _exact_divide(total, math.factorial(r))


def kronecker_newton(S, r: int):
    """(P_r)_ij = (1/r!) sum delta^{j_1..j_r i}_{i_1..i_r j} s_{i_1 j_1} ... s_{i_r j_r}."""
    n = _guard(S, r)
    if r == n:
        raise ValueError("P_r is expanded for r < n")
    S = np.asarray(S, dtype=object)
    out = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            total = 0
            rest = [k for k in range(n) if k != j]
            for head in itertools.permutations(rest, r):
                lower = head + (j,)
                for upper in itertools.permutations(lower):
                    if upper[-1] != i:
                        continue
                    term = generalized_kronecker(upper, lower)
                    for a in range(r):
                        term = term * S[head[a], upper[a]]
                    total = total + term
            out[i, j] = _exact_divide(total, math.factorial(r))
    return out


def _trace(M):
    total = 0
    for k in range(M.shape[0]):
        total = total + M[k, k]
    return total


def _is_exact(v) -> bool:
    return isinstance(v, (int, Fraction, np.integer))


def _demote(v):
    if isinstance(v, Fraction) and v.denominator == 1:
        return int(v.numerator)
    return v


# ---------------------------------------------------------------------------


@dataclass
class CurvaturePacket:
    """Per-node anisotropic curvature data (all arrays batched over nodes)."""

    A: np.ndarray  # (..., n, n)
    B: np.ndarray  # (..., n, n)
    S: np.ndarray  # (..., n, n) = A B
    lam: np.ndarray  # (..., n) ascending
    sigma: np.ndarray  # (..., n+1)
    M: np.ndarray  # (..., n+1)
    P: list  # P_0..P_{n-1}, each (..., n, n)

    @property
    def n(self) -> int:
        return self.lam.shape[-1]


def curvature_packet(A, B) -> CurvaturePacket:
    S, lam = f_weingarten(A, B)
    sigma = elementary_symmetric(lam)
    return CurvaturePacket(
        A=np.asarray(A, dtype=float),
        B=np.asarray(B, dtype=float),
        S=S,
        lam=lam,
        sigma=sigma,
        M=normalized_curvatures(sigma),
        P=newton_operators(sigma, S),
    )


def spread_identity_gap(M, lam):
    """``M_1^2 - M_2`` minus ``sum_{j<i} (lam_i - lam_j)^2 / (n^2 (n-1))`` (zero up to rounding)."""
    n = lam.shape[-1]
    diffs = lam[..., :, None] - lam[..., None, :]
    spread_sum = 0.5 * np.sum(diffs * diffs, axis=(-1, -2))
    return (M[..., 1] ** 2 - M[..., 2]) - spread_sum / (n * n * (n - 1))


def newton_margins(M):
    """``M_{k+1}^2 - M_k M_{k+2}`` for k = 0..n-2 (nonnegative for real eigenvalues)."""
    return M[..., 1:-1] ** 2 - M[..., :-2] * M[..., 2:]


def maclaurin_margins(M):
    """``M_{r-1} - M_r^{(r-1)/r}`` for r = 2..n; NaN where M_r <= 0."""
    n = M.shape[-1] - 1
    cols = []
    for r in range(2, n + 1):
        mr = M[..., r]
        with np.errstate(invalid="ignore"):
            root = np.where(mr > 0, np.abs(mr) ** ((r - 1) / r), np.nan)
        cols.append(M[..., r - 1] - root)
    if not cols:
        return np.zeros(M.shape[:-1] + (0,))
    return np.stack(cols, axis=-1)


def eigen_spread(lam):
    return lam[..., -1] - lam[..., 0]
