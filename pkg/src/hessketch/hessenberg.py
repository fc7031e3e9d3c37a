"""Pivoted Hessenberg processes: inner-product-free Krylov basis construction.

Square operators get the classic process with partial pivoting: after k
steps it holds columns l_1..l_{k+1} and an upper Hessenberg H with

    A L_k = L_{k+1} H_{k+1,k},

where L is unit lower triangular once its rows are reordered by the pivot
permutation t.  Rectangular operators get the generalized process, which
grows a data-space basis D and a solution-space basis L simultaneously:

    A L_k = D_{k+1} H_{k+1,k},        A^T D_{k+1} = L_{k+1} W_{k+1},

with D unit lower triangular under t, L under g, and W upper triangular.

Every elimination coefficient is read off a single entry at a pivot
position, so the construction performs no inner products; the counters on
the operator certify that.  Pivots are chosen as the largest-magnitude
entry over the not-yet-pivoted positions, either over all of them (full)
or over a random subset redrawn each step (sampled).  A sampled subset can
land entirely on zeros of a nonzero vector; since a zero pivot is fatal,
selection then falls back to scanning the whole admissible set, and only
an all-zero set signals breakdown.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linops import save_array

__all__ = [
    "PivotStrategy",
    "TrivialSolution",
    "HessenbergState",
    "GeneralizedHessenbergState",
    "pivot_select",
    "init_square",
    "step_square",
    "init_generalized",
    "step_generalized",
    "dump_factorization",
]


@dataclass(frozen=True)
class PivotStrategy:
    """How elimination pivots are chosen.

    kind "full" scans every admissible position; "sampled" scans a random
    subset of ``sample_size`` positions drawn without replacement, redrawn
    at every selection, from a generator seeded with ``seed``.
    """

    kind: str = "full"
    sample_size: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("full", "sampled"):
            raise ValueError(f"unknown pivot kind {self.kind!r}")
        if self.kind == "sampled" and self.sample_size < 1:
            raise ValueError("sampled pivoting needs sample_size >= 1")

    @classmethod
    def full(cls):
        return cls("full")

    @classmethod
    def sampled(cls, sample_size, seed=0):
        return cls("sampled", sample_size, seed)


_FULL = PivotStrategy.full()


class TrivialSolution(Exception):
    """The start vector already solves the problem; no iteration is needed.

    Raised when the initial residual is zero (square or rectangular) or
    when the initial transposed residual is zero (rectangular: the normal
    equations are already satisfied).  Carries the trivial solution in
    ``x``.
    """

    def __init__(self, message, x):
        super().__init__(message)
        self.x = x


def pivot_select(v, admissible, strategy, rng=None):
    """Choose a pivot position for v among the admissible row indices.

    Returns ``(index, value)`` with ``value = v[index]`` signed.  Ties in
    magnitude are broken toward the smallest row index, so the result does
    not depend on the order the candidates are listed in.  A returned
    value of exactly 0 means every candidate was zero (breakdown signal);
    the index is then arbitrary.
    """

    admissible = np.asarray(admissible, dtype=int)
    if admissible.size == 0:
        raise ValueError("admissible index set is empty")
    if strategy.kind == "sampled" and strategy.sample_size < admissible.size:
        if rng is None:
            raise ValueError("sampled pivoting requires a random generator")
        admissible = rng.choice(admissible, size=strategy.sample_size, replace=False)
    vals = np.abs(v[admissible])
    top = vals.max()
    if top == 0.0:
        return int(admissible.min()), 0.0
    idx = int(admissible[vals == top].min())
    return idx, float(v[idx])


def _pivot_with_fallback(v, admissible, strategy, rng):
    # a sampled subset may miss every nonzero entry; rescan everything
    # before declaring breakdown, since dividing by a zero pivot is fatal
    idx, val = pivot_select(v, admissible, strategy, rng)
    if val == 0.0 and strategy.kind == "sampled":
        idx, val = pivot_select(v, admissible, _FULL)
    return idx, val


def _swap_to_position(perm, used, idx):
    pos = used + int(np.nonzero(perm[used:] == idx)[0][0])
    perm[used], perm[pos] = perm[pos], perm[used]


@dataclass
class HessenbergState:
    """Running factorization A L_k = L_{k+1} H_{k+1,k} for square A."""

    L_cols: list
    h_cols: list
    t: np.ndarray
    beta: float
    k: int
    breakdown: bool
    r0: np.ndarray
    strategy: PivotStrategy
    rng: object = None
    last_product: np.ndarray = None

    def L_matrix(self):
        return np.column_stack(self.L_cols)

    def H_matrix(self, rows=None):
        """Dense H with k+1 rows; pass rows=len(L_cols) at breakdown to
        drop the structurally zero last row."""
        k = len(self.h_cols)
        H = np.zeros((k + 1, k))
        for j, col in enumerate(self.h_cols):
            H[: j + 2, j] = col
        return H if rows is None else H[:rows]


def init_square(A, b, x0=None, strategy=_FULL):
    """Start the square Hessenberg process from the residual b - A x0."""
    if not A.is_square:
        raise ValueError("the square Hessenberg process needs a square operator")
    b = np.asarray(b, dtype=float)
    if b.shape != (A.rows,):
        raise ValueError(f"b must have length {A.rows}, got shape {b.shape}")
    if x0 is None:
        r0 = b.copy()
    else:
        r0 = b - A.apply(np.asarray(x0, dtype=float))
    rng = np.random.default_rng(strategy.seed) if strategy.kind == "sampled" else None
    t = np.arange(A.rows)
    idx, beta = _pivot_with_fallback(r0, t, strategy, rng)
    if beta == 0.0:
        x = np.zeros(A.cols) if x0 is None else np.asarray(x0, dtype=float).copy()
        raise TrivialSolution("initial residual is zero; starting point is exact", x)
    _swap_to_position(t, 0, idx)
    return HessenbergState(
        L_cols=[r0 / beta],
        h_cols=[],
        t=t,
        beta=beta,
        k=0,
        breakdown=False,
        r0=r0,
        strategy=strategy,
        rng=rng,
    )


def step_square(state, A, keep_product=False):
    """Advance the square factorization by one column.

    Applies A to the newest basis column, eliminates against all previous
    columns by reading coefficients at pivot positions, then pivots the
    remainder.  An all-zero remainder is a lucky breakdown: H gains a
    column with a zero subdiagonal entry and the basis stops growing.
    With ``keep_product`` the unreduced A l_k is kept on the state (the
    sketched solvers sketch exactly this vector).
    """
    if state.breakdown:
        raise RuntimeError("factorization already broke down")
    k = state.k + 1
    n = A.rows
    u = A.apply(state.L_cols[-1])
    if keep_product:
        state.last_product = u.copy()
    h = np.empty(k + 1)
    for j in range(k):
        c = u[state.t[j]]
        h[j] = c
        u = u - c * state.L_cols[j]
    if k < n:
        idx, val = _pivot_with_fallback(u, state.t[k:], state.strategy, state.rng)
    else:
        val = 0.0
    if val == 0.0:
        h[k] = 0.0
        state.breakdown = True
    else:
        h[k] = val
        _swap_to_position(state.t, k, idx)
        state.L_cols.append(u / val)
    state.h_cols.append(h)
    state.k = k
    return state


@dataclass
class GeneralizedHessenbergState:
    """Running factorization pair for rectangular A.

    D_cols spans the data-space Krylov subspace (m-vectors, pivots t),
    L_cols the solution-space one (n-vectors, pivots g).
    """

    D_cols: list
    L_cols: list
    h_cols: list
    w_cols: list
    t: np.ndarray
    g: np.ndarray
    beta: float
    alpha: float
    k: int
    breakdown: bool
    r0: np.ndarray
    strategy: PivotStrategy
    rng: object = None
    last_data_product: np.ndarray = None
    last_solution_product: np.ndarray = None

    def D_matrix(self):
        return np.column_stack(self.D_cols)

    def L_matrix(self):
        return np.column_stack(self.L_cols)

    def H_matrix(self, rows=None):
        k = len(self.h_cols)
        H = np.zeros((k + 1, k))
        for j, col in enumerate(self.h_cols):
            H[: j + 2, j] = col
        return H if rows is None else H[:rows]

    def W_matrix(self, rows=None):
        """Upper triangular W with one column per D column."""
        cols = len(self.w_cols)
        W = np.zeros((cols, cols))
        for j, col in enumerate(self.w_cols):
            W[: j + 1, j] = col
        return W if rows is None else W[:rows]


def init_generalized(A, b, x0=None, strategy=_FULL):
    """Start the generalized process from r0 = b - A x0 and A^T r0.

    Pivots r0 to get the first data column d_1 and scale beta, pivots
    A^T r0 to get the first solution column l_1 and scale alpha, and
    seeds W with the coefficient of A^T d_1 along l_1.
    """
    b = np.asarray(b, dtype=float)
    if b.shape != (A.rows,):
        raise ValueError(f"b must have length {A.rows}, got shape {b.shape}")
    if x0 is None:
        r0 = b.copy()
    else:
        r0 = b - A.apply(np.asarray(x0, dtype=float))
    rng = np.random.default_rng(strategy.seed) if strategy.kind == "sampled" else None
    zero_x = np.zeros(A.cols) if x0 is None else np.asarray(x0, dtype=float).copy()

    t = np.arange(A.rows)
    idx, beta = _pivot_with_fallback(r0, t, strategy, rng)
    if beta == 0.0:
        raise TrivialSolution("initial residual is zero; starting point is exact", zero_x)
    d1 = r0 / beta
    _swap_to_position(t, 0, idx)

    v0 = A.apply_transpose(r0)
    g = np.arange(A.cols)
    idx2, alpha = _pivot_with_fallback(v0, g, strategy, rng)
    if alpha == 0.0:
        raise TrivialSolution(
            "transposed residual is zero; the normal equations already hold", zero_x
        )
    l1 = v0 / alpha
    _swap_to_position(g, 0, idx2)

    r = A.apply_transpose(d1)
    state = GeneralizedHessenbergState(
        D_cols=[d1],
        L_cols=[l1],
        h_cols=[],
        w_cols=[np.array([r[g[0]]])],
        t=t,
        g=g,
        beta=beta,
        alpha=alpha,
        k=0,
        breakdown=False,
        r0=r0,
        strategy=strategy,
        rng=rng,
    )
    state.last_solution_product = r.copy()
    return state


def step_generalized(state, A, keep_products=False):
    """Advance both bases by one column.

    Data side: A l_k is eliminated against d_1..d_k at the t pivots,
    giving H column k and, after pivoting, d_{k+1}.  Solution side:
    A^T d_{k+1} is eliminated against l_1..l_k at the g pivots, giving W
    column k+1 and l_{k+1}.  Breakdown on either side (all remaining
    entries zero, or a basis reaching full dimension) is terminal.
    """
    if state.breakdown:
        raise RuntimeError("factorization already broke down")
    k = state.k + 1
    m, n = A.rows, A.cols

    u = A.apply(state.L_cols[-1])
    if keep_products:
        state.last_data_product = u.copy()
    h = np.empty(k + 1)
    for j in range(k):
        c = u[state.t[j]]
        h[j] = c
        u = u - c * state.D_cols[j]
    if k < m:
        idx, val = _pivot_with_fallback(u, state.t[k:], state.strategy, state.rng)
    else:
        val = 0.0
    if val == 0.0:
        h[k] = 0.0
        state.h_cols.append(h)
        state.k = k
        state.breakdown = True
        return state
    h[k] = val
    _swap_to_position(state.t, k, idx)
    d_new = u / val
    state.D_cols.append(d_new)
    state.h_cols.append(h)

    q = A.apply_transpose(d_new)
    if keep_products:
        state.last_solution_product = q.copy()
    w = np.empty(k + 1)
    for j in range(k):
        c = q[state.g[j]]
        w[j] = c
        q = q - c * state.L_cols[j]
    if k < n:
        idx2, val2 = _pivot_with_fallback(q, state.g[k:], state.strategy, state.rng)
    else:
        val2 = 0.0
    if val2 == 0.0:
        w[k] = 0.0
        state.w_cols.append(w)
        state.k = k
        state.breakdown = True
        return state
    w[k] = val2
    _swap_to_position(state.g, k, idx2)
    state.L_cols.append(q / val2)
    state.w_cols.append(w)
    state.k = k
    return state


def dump_factorization(state, directory, prefix=""):
    """Write the factorization pieces as MatrixMarket files for inspection."""
    import os

    def path(name):
        return os.path.join(str(directory), prefix + name)

    save_array(path("L.mm"), state.L_matrix())
    save_array(path("H.mm"), state.H_matrix())
    save_array(path("pivots_t.mm"), np.asarray(state.t, dtype=float))
    if isinstance(state, GeneralizedHessenbergState):
        save_array(path("D.mm"), state.D_matrix())
        save_array(path("W.mm"), state.W_matrix())
        save_array(path("pivots_g.mm"), np.asarray(state.g, dtype=float))
