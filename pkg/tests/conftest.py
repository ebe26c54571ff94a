import numpy as np
from hypothesis import strategies as st

from wulffkit.spec_parser import BinOp, Call, Neg, Num, Pow, Var

FD_STEP = 1e-5


def fd_gradient(f, y, h=FD_STEP):
    """Central differences of a batched scalar function ``f(y) -> (N,)`` at ``y`` (N, m)."""
    y = np.asarray(y, dtype=float)
    cols = []
    for i in range(y.shape[-1]):
        e = np.zeros(y.shape[-1])
        e[i] = h
        cols.append((f(y + e) - f(y - e)) / (2 * h))
    return np.stack(cols, axis=-1)


def fd_jacobian(g, y, h=FD_STEP):
    """Central differences of a batched vector function ``g(y) -> (N, m)``; result (N, m, m)."""
    y = np.asarray(y, dtype=float)
    cols = []
    for i in range(y.shape[-1]):
        e = np.zeros(y.shape[-1])
        e[i] = h
        cols.append((g(y + e) - g(y - e)) / (2 * h))
    return np.stack(cols, axis=-1)


def random_spd(rng, n, cond=10.0):
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    d = np.exp(rng.uniform(0, np.log(cond), size=n))
    return Q @ np.diag(d) @ Q.T


def random_sym(rng, n):
    M = rng.normal(size=(n, n))
    return 0.5 * (M + M.T)


# Smooth expression trees over x1..x3 whose values stay moderate on [-1.5, 1.5]^3.
_leaf = st.one_of(
    st.integers(1, 3).map(lambda i: Var(i, f"x{i}")),
    st.floats(-2, 2, allow_nan=False).map(lambda v: Num(round(v, 3))),
)


def _extend(children):
    def shifted(u, fn):
        return Call(fn, BinOp("+", Num(2.0), Call("sin", u)))

    return st.one_of(
        st.tuples(st.sampled_from("+-*"), children, children).map(lambda t: BinOp(*t)),
        children.map(Neg),
        children.map(lambda u: Call("sin", u)),
        children.map(lambda u: Call("cos", u)),
        children.map(lambda u: Call("exp", Call("sin", u))),
        children.map(lambda u: shifted(u, "log")),
        children.map(lambda u: shifted(u, "sqrt")),
        children.map(lambda u: BinOp("/", Num(1.0), BinOp("+", Num(2.0), Call("cos", u)))),
        st.tuples(children, st.integers(2, 3)).map(lambda t: Pow(*t)),
    )


smooth_exprs = st.recursive(_leaf, _extend, max_leaves=6)
points3 = st.lists(st.floats(-1.5, 1.5, allow_nan=False), min_size=3, max_size=3).map(np.array)
