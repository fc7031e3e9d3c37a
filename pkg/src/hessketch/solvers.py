"""Iterative solvers built on the pivoted Hessenberg bases, plus references.

Six solvers share one interface ``solver(A, b, cfg, x_true=None)``:

* ``gmres`` and ``lsqr`` are the classical references (orthonormal bases,
  inner products, here with one reorthogonalization pass);
* ``cmrh`` and ``lslu`` replace the orthonormal basis by the pivoted
  (generalized) Hessenberg basis and quasi-minimize the residual through
  the projected problem min ||beta e1 - H y||;
* ``scmrh`` and ``slslu`` solve the projected problem under a Gaussian
  sketch instead: min ||S (A L_k y - r0)||, with the sketched system
  grown one column per iteration.

Every solver honors ``cfg.lam``: a positive value adds lam^2 times a
penalty (||y||^2 through the basis for the unsketched methods, the
sketched basis norm ||S1 L_k y||^2 for the sketched ones).  The
``*_tikhonov`` names are kept as explicit entry points for the penalized
forms; with lam = 0 they reduce, bit for bit, to their unregularized
counterparts.

Counter semantics: the counters on the returned trace report the
operations the algorithm itself performed (forward/transpose
applications, tracked inner products, sketch applications).  Diagnostics
(exact residual norms, condition numbers, measured embedding distortion)
run on uncounted paths and never perturb the iterate sequence, so a
trace's cost columns are identical with diagnostics on or off.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .hessenberg import (
    PivotStrategy,
    TrivialSolution,
    init_generalized,
    init_square,
    step_generalized,
    step_square,
)
from .linops import (
    RankDeficiencyError,
    dense_qr_ls,
    stacked_tikhonov_ls,
    tracked_dot,
    tracked_norm,
)
from .sketch import derive_seed, make_gaussian_sketch, measured_epsilon, sketch_apply

__all__ = [
    "SolverConfig",
    "TraceRecord",
    "SolverTrace",
    "SolveResult",
    "trace_to_csv",
    "gmres",
    "lsqr",
    "cmrh",
    "lslu",
    "scmrh",
    "slslu",
    "scmrh_tikhonov",
    "slslu_tikhonov",
    "projected_minres_oracle",
    "SOLVERS",
]

CSV_COLUMNS = [
    "iter",
    "res_norm",
    "sres_norm",
    "proj_obj",
    "rel_err",
    "kappa_basis",
    "kappa_dbar",
    "eps_embed",
    "matvecs",
    "tmatvecs",
    "dots",
    "sketches",
    "wall_ms",
]


@dataclass
class SolverConfig:
    """Knobs shared by all solvers.

    ``sketch_rows`` of None means the experiment default 10*(maxiter+1).
    ``pivot`` only affects the Hessenberg-based solvers; ``seed`` only the
    sketched ones (it determines the embedding).
    """

    maxiter: int = 30
    pivot: PivotStrategy = field(default_factory=PivotStrategy.full)
    sketch_rows: int = None
    lam: float = 0.0
    seed: int = 0
    x0: np.ndarray = None
    compute_diagnostics: bool = False

    def __post_init__(self):
        if self.maxiter < 1:
            raise ValueError("maxiter must be positive")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.sketch_rows is not None and self.sketch_rows < 1:
            raise ValueError("sketch_rows must be positive")

    def effective_sketch_rows(self):
        if self.sketch_rows is None:
            return 10 * (self.maxiter + 1)
        return self.sketch_rows


@dataclass
class TraceRecord:
    """One iteration's worth of observable state.

    Optional floats are None when not computed (serialized as empty CSV
    fields).  ``rank_fallback`` marks iterations whose projected problem
    was rank deficient and solved by truncated least squares instead.
    """

    iteration: int
    res_norm: float = None
    sres_norm: float = None
    proj_obj: float = None
    rel_err: float = None
    kappa_basis: float = None
    kappa_dbar: float = None
    eps_embed: float = None
    matvecs: int = 0
    tmatvecs: int = 0
    dots: int = 0
    sketches: int = 0
    wall_ms: float = None
    rank_fallback: bool = False


@dataclass
class SolverTrace:
    records: list = field(default_factory=list)

    def column(self, name):
        return [getattr(r, name) for r in self.records]

    def final(self):
        return self.records[-1] if self.records else None


@dataclass
class SolveResult:
    x: np.ndarray
    trace: SolverTrace
    termination: str  # maxiter | breakdown | trivial
    factorization: object = None


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def trace_to_csv(trace, target, include_timing=False):
    """Serialize a trace with the fixed column order.

    Timing is volatile, so ``wall_ms`` is left empty unless
    ``include_timing`` is set; everything else replays byte-identically
    for identical runs.
    """
    lines = [",".join(CSV_COLUMNS)]
    for r in trace.records:
        cells = [
            str(r.iteration),
            _cell(r.res_norm),
            _cell(r.sres_norm),
            _cell(r.proj_obj),
            _cell(r.rel_err),
            _cell(r.kappa_basis),
            _cell(r.kappa_dbar),
            _cell(r.eps_embed),
            str(r.matvecs),
            str(r.tmatvecs),
            str(r.dots),
            str(r.sketches),
            _cell(r.wall_ms) if include_timing else "",
        ]
        lines.append(",".join(cells))
    content = "\n".join(lines) + "\n"
    if hasattr(target, "write"):
        target.write(content)
    else:
        with open(target, "w", newline="") as fh:
            fh.write(content)


def _projected_solve(M, rhs, lam, N=None):
    """Least-squares solve of the projected problem with a truncated-rank
    fallback; returns (y, fallback_used)."""
    try:
        if lam == 0.0:
            return dense_qr_ls(M, rhs), False
        return stacked_tikhonov_ls(M, N, rhs, lam), False
    except RankDeficiencyError:
        if lam == 0.0:
            stacked, srhs = M, rhs
        else:
            stacked = np.vstack([M, lam * N])
            srhs = np.concatenate([rhs, np.zeros(N.shape[0])])
        y, _, _, _ = np.linalg.lstsq(stacked, srhs, rcond=None)
        return y, True


def _objective(M, rhs, y, lam, N=None):
    val = np.linalg.norm(M @ y - rhs) ** 2
    if lam > 0.0:
        val += lam**2 * np.linalg.norm(N @ y) ** 2
    return float(np.sqrt(val))


def _union_condition(*mats):
    s = np.concatenate([np.linalg.svd(M, compute_uv=False) for M in mats])
    smin = s.min()
    if smin < 1e-300:
        return np.inf
    return float(s.max() / smin)


def _relative_error(x, x_true):
    denom = np.linalg.norm(x_true)
    if denom == 0.0:
        raise ValueError("x_true must be nonzero for relative errors")
    return float(np.linalg.norm(x - x_true) / denom)


def _trivial_result(x):
    return SolveResult(x=x, trace=SolverTrace(), termination="trivial")


def _exact_residual(A, b, x):
    # diagnostics-only: raw forward application, no counter update
    return float(np.linalg.norm(b - np.asarray(A.forward(x), dtype=float)))


# ---------------------------------------------------------------------------
# reference solvers


def gmres(A, b, cfg=None, x_true=None):
    """Arnoldi-based minimal-residual reference for square systems.

    Modified Gram-Schmidt with one reorthogonalization pass; all inner
    products go through the tracked kernels, which is what makes the
    Hessenberg family's zero dot counts meaningful by contrast.  A
    positive cfg.lam damps the projected problem with lam^2 ||y||^2
    (equal to lam^2 ||x||^2 on the orthonormal basis).
    """
    cfg = cfg or SolverConfig()
    if not A.is_square:
        raise ValueError("gmres needs a square operator")
    A = A.with_fresh_counters()
    c = A.counters
    b = np.asarray(b, dtype=float)
    x0 = None if cfg.x0 is None else np.asarray(cfg.x0, dtype=float)
    r0 = b.copy() if x0 is None else b - A.apply(x0)
    beta = tracked_norm(c, r0)
    if beta == 0.0:
        return _trivial_result(np.zeros(A.cols) if x0 is None else x0.copy())
    V = [r0 / beta]
    h_cols = []
    trace = SolverTrace()
    x = None
    termination = "maxiter"
    n = A.rows
    for k in range(1, min(cfg.maxiter, n) + 1):
        tic = time.perf_counter()
        w = A.apply(V[-1])
        h = np.empty(k + 1)
        for j in range(k):
            h[j] = tracked_dot(c, V[j], w)
            w = w - h[j] * V[j]
        for j in range(k):
            corr = tracked_dot(c, V[j], w)
            w = w - corr * V[j]
            h[j] += corr
        h[k] = tracked_norm(c, w)
        h_cols.append(h)
        # relative test: an exactly-zero norm never survives rounding
        lucky = h[k] <= 1e-14 * np.linalg.norm(h)
        if not lucky:
            V.append(w / h[k])
        H = np.zeros((k + 1, k))
        for j, col in enumerate(h_cols):
            H[: j + 2, j] = col
        rhs = np.zeros(k + 1)
        rhs[0] = beta
        N = np.eye(k) if cfg.lam > 0.0 else None
        y, fallback = _projected_solve(H, rhs, cfg.lam, N)
        x = np.column_stack(V[:k]) @ y
        if x0 is not None:
            x = x0 + x
        rec = TraceRecord(
            iteration=k,
            proj_obj=_objective(H, rhs, y, cfg.lam, N),
            rank_fallback=fallback,
        )
        if x_true is not None:
            rec.rel_err = _relative_error(x, x_true)
        if cfg.compute_diagnostics:
            rec.res_norm = _exact_residual(A, b, x)
            rec.kappa_basis = _union_condition(np.column_stack(V))
        rec.matvecs, rec.tmatvecs, rec.dots, rec.sketches = c.snapshot()
        rec.wall_ms = (time.perf_counter() - tic) * 1e3
        trace.records.append(rec)
        if lucky:
            termination = "breakdown"
            break
    return SolveResult(x=x, trace=trace, termination=termination)


def lsqr(A, b, cfg=None, x_true=None):
    """Golub-Kahan-based least-squares reference.

    One reorthogonalization pass on both bidiagonalization sequences;
    cfg.lam > 0 gives damped least squares min ||Ax-b||^2 + lam^2||x||^2
    restricted to the Krylov subspace.
    """
    cfg = cfg or SolverConfig()
    A = A.with_fresh_counters()
    c = A.counters
    b = np.asarray(b, dtype=float)
    x0 = None if cfg.x0 is None else np.asarray(cfg.x0, dtype=float)
    r0 = b.copy() if x0 is None else b - A.apply(x0)
    beta1 = tracked_norm(c, r0)
    if beta1 == 0.0:
        return _trivial_result(np.zeros(A.cols) if x0 is None else x0.copy())
    U = [r0 / beta1]
    z = A.apply_transpose(U[0])
    alpha = tracked_norm(c, z)
    if alpha == 0.0:
        # normal equations already satisfied at the start vector
        return _trivial_result(np.zeros(A.cols) if x0 is None else x0.copy())
    V = [z / alpha]
    alphas = [alpha]
    betas = []
    trace = SolverTrace()
    x = None
    termination = "maxiter"
    for k in range(1, min(cfg.maxiter, A.cols) + 1):
        tic = time.perf_counter()
        w = A.apply(V[-1]) - alphas[-1] * U[-1]
        for u in U:
            w = w - tracked_dot(c, u, w) * u
        beta = tracked_norm(c, w)
        exhausted = beta <= 1e-14 * alphas[-1]
        if not exhausted:
            U.append(w / beta)
        betas.append(beta)
        B = np.zeros((k + 1, k))
        for j in range(k):
            B[j, j] = alphas[j]
            B[j + 1, j] = betas[j]
        rhs = np.zeros(k + 1)
        rhs[0] = beta1
        N = np.eye(k) if cfg.lam > 0.0 else None
        y, fallback = _projected_solve(B, rhs, cfg.lam, N)
        x = np.column_stack(V[:k]) @ y
        if x0 is not None:
            x = x0 + x
        rec = TraceRecord(
            iteration=k,
            proj_obj=_objective(B, rhs, y, cfg.lam, N),
            rank_fallback=fallback,
        )
        if x_true is not None:
            rec.rel_err = _relative_error(x, x_true)
        if cfg.compute_diagnostics:
            rec.res_norm = _exact_residual(A, b, x)
            rec.kappa_basis = _union_condition(np.column_stack(V))
        if not exhausted:
            z = A.apply_transpose(U[-1]) - beta * V[-1]
            for v in V:
                z = z - tracked_dot(c, v, z) * v
            alpha = tracked_norm(c, z)
            if alpha <= 1e-14 * beta:
                exhausted = True
            else:
                V.append(z / alpha)
                alphas.append(alpha)
        rec.matvecs, rec.tmatvecs, rec.dots, rec.sketches = c.snapshot()
        rec.wall_ms = (time.perf_counter() - tic) * 1e3
        trace.records.append(rec)
        if exhausted:
            termination = "breakdown"
            break
    return SolveResult(x=x, trace=trace, termination=termination)


# ---------------------------------------------------------------------------
# Hessenberg family


def _hessenberg_solve(
    A, b, cfg, x_true, square, sketched, sketch_basis, f_unreduced, sketch=None
):
    cfg = cfg or SolverConfig()
    if square and not A.is_square:
        raise ValueError("this solver needs a square operator")
    A = A.with_fresh_counters()
    c = A.counters
    b = np.asarray(b, dtype=float)
    x0 = None if cfg.x0 is None else np.asarray(cfg.x0, dtype=float)

    init = init_square if square else init_generalized
    step = step_square if square else step_generalized
    try:
        state = init(A, b, x0=x0, strategy=cfg.pivot)
    except TrivialSolution as sig:
        return _trivial_result(sig.x)

    keep = sketched and (not sketch_basis or cfg.compute_diagnostics)
    S2 = S1 = None
    sr0 = None
    Z_cols = []
    G_cols = []
    F_cols = []
    AL_cols = []
    if sketched:
        if sketch is not None:
            if sketch.in_rows != A.rows:
                raise ValueError(
                    f"sketch expects vectors of length {sketch.in_rows}, "
                    f"operator produces length {A.rows}"
                )
            S2 = sketch
            ell = S2.out_rows
        else:
            ell = cfg.effective_sketch_rows()
            S2 = None
        if ell < cfg.maxiter + 1:
            raise ValueError(
                f"sketch_rows={ell} cannot embed a {cfg.maxiter}-dimensional "
                "projected problem; need at least maxiter+1 rows"
            )
        if S2 is None:
            S2 = make_gaussian_sketch(ell, A.rows, cfg.seed)
        sr0 = sketch_apply(S2, state.r0, c)
        if sketch_basis:
            first = state.L_cols[0] if square else state.D_cols[0]
            G_cols.append(sketch_apply(S2, first, c))
        if cfg.lam > 0.0:
            S1 = make_gaussian_sketch(ell, A.cols, derive_seed(cfg.seed, 1))
            if f_unreduced and not square:
                F_cols.append(sketch_apply(S1, state.last_solution_product, c))
            else:
                F_cols.append(sketch_apply(S1, state.L_cols[0], c))

    trace = SolverTrace()
    x = None
    termination = "maxiter"
    for k in range(1, cfg.maxiter + 1):
        tic = time.perf_counter()
        n_basis_before = len(state.L_cols) if square else len(state.D_cols)
        n_sol_before = len(state.L_cols)
        if square:
            step_square(state, A, keep_product=keep)
        else:
            step_generalized(state, A, keep_products=keep)
        if sketched:
            if keep:
                prod = state.last_product if square else state.last_data_product
                if not sketch_basis:
                    Z_cols.append(sketch_apply(S2, prod, c))
                if cfg.compute_diagnostics:
                    AL_cols.append(prod)
            if sketch_basis:
                cols = state.L_cols if square else state.D_cols
                if len(cols) > n_basis_before:
                    G_cols.append(sketch_apply(S2, cols[-1], c))
            if cfg.lam > 0.0:
                if f_unreduced and not square:
                    if len(state.D_cols) > n_basis_before:
                        F_cols.append(sketch_apply(S1, state.last_solution_product, c))
                elif len(state.L_cols) > n_sol_before:
                    F_cols.append(sketch_apply(S1, state.L_cols[-1], c))

        Lk = np.column_stack(state.L_cols[:k])
        if sketched:
            if sketch_basis:
                G = np.column_stack(G_cols)
                M = G @ state.H_matrix(rows=G.shape[1])
            else:
                M = np.column_stack(Z_cols)
            rhs = sr0
        else:
            M = state.H_matrix()
            rhs = np.zeros(M.shape[0])
            rhs[0] = state.beta
        N = np.column_stack(F_cols[:k]) if (sketched and cfg.lam > 0.0) else (
            np.eye(k) if cfg.lam > 0.0 else None
        )
        y, fallback = _projected_solve(M, rhs, cfg.lam, N)
        x = Lk @ y
        if x0 is not None:
            x = x0 + x

        rec = TraceRecord(
            iteration=k,
            proj_obj=_objective(M, rhs, y, cfg.lam, N),
            rank_fallback=fallback,
        )
        if sketched:
            rec.sres_norm = float(np.linalg.norm(M @ y - rhs))
        if x_true is not None:
            rec.rel_err = _relative_error(x, x_true)
        if cfg.compute_diagnostics:
            rec.res_norm = _exact_residual(A, b, x)
            basis = state.L_matrix() if square else state.D_matrix()
            rec.kappa_basis = _union_condition(basis)
            if cfg.lam > 0.0:
                rec.kappa_dbar = _union_condition(basis, Lk)
            if sketched and AL_cols:
                rec.eps_embed = measured_epsilon(
                    S2, np.column_stack(AL_cols + [state.r0])
                )
        rec.matvecs, rec.tmatvecs, rec.dots, rec.sketches = c.snapshot()
        rec.wall_ms = (time.perf_counter() - tic) * 1e3
        trace.records.append(rec)
        if state.breakdown:
            termination = "breakdown"
            break
    return SolveResult(x=x, trace=trace, termination=termination, factorization=state)


def cmrh(A, b, cfg=None, x_true=None):
    """Quasi-minimal residual on the pivoted Hessenberg basis (square A).

    Minimizes ||beta e1 - H_{k+1,k} y|| (plus lam^2 ||y||^2 when
    cfg.lam > 0) and maps back through the unit triangular basis; the
    true residual then sits within a factor kappa(L_{k+1}) of the best
    residual in the same subspace.
    """
    return _hessenberg_solve(A, b, cfg, x_true, True, False, False, False)


def lslu(A, b, cfg=None, x_true=None):
    """Quasi-minimal residual on the generalized Hessenberg bases.

    Rectangular analogue of cmrh: the data-space basis D plays the role
    of L_{k+1}, and the residual bound factor is kappa(D_{k+1}).
    """
    return _hessenberg_solve(A, b, cfg, x_true, False, False, False, False)


def scmrh(A, b, cfg=None, x_true=None, *, sketch_basis=False, sketch=None):
    """Sketched projected minimal residual on the Hessenberg basis.

    Draws one Gaussian embedding S from cfg.seed and solves
    min ||S(A L_k y - r0)|| per iteration, appending the column
    S (A l_k) as it appears.  With ``sketch_basis`` the sketched system
    is instead assembled as (S L_{k+1}) H_{k+1,k}, which is the same
    matrix in exact arithmetic.  A prebuilt ``sketch`` overrides the
    seeded draw.
    """
    return _hessenberg_solve(
        A, b, cfg, x_true, True, True, sketch_basis, False, sketch=sketch
    )


def slslu(A, b, cfg=None, x_true=None, *, sketch_basis=False, sketch=None):
    """Sketched projected least squares on the generalized bases."""
    return _hessenberg_solve(
        A, b, cfg, x_true, False, True, sketch_basis, False, sketch=sketch
    )


def scmrh_tikhonov(A, b, cfg=None, x_true=None):
    """scmrh with the sketched penalty lam^2 ||S1 L_k y||^2.

    S1 is drawn from a seed derived from cfg.seed, so the pair of
    embeddings is reproducible from the single configured seed.  With
    cfg.lam = 0 this is exactly scmrh.
    """
    return _hessenberg_solve(A, b, cfg, x_true, True, True, False, False)


def slslu_tikhonov(A, b, cfg=None, x_true=None, *, printed_f_columns=False):
    """slslu with the sketched penalty lam^2 ||S1 L_k y||^2.

    By default the penalty columns are the sketches of the final
    normalized basis vectors, so the minimized objective is exactly
    ||S2(A L_k y - r0)||^2 + lam^2 ||S1 L_k y||^2.  The
    ``printed_f_columns`` variant sketches the unreduced transpose
    products (A^T d_k before elimination) instead, which penalizes
    through a different matrix than S1 L_k; it is kept for comparison
    only.
    """
    return _hessenberg_solve(A, b, cfg, x_true, False, True, False, printed_f_columns)


def projected_minres_oracle(A, basis, b):
    """Exact minimal residual over the span of the given basis columns.

    Forms A times each basis column densely (uncounted: this is a
    verification tool, not part of any solver's budget), solves the tall
    least-squares problem, and returns (y, residual_norm).
    """
    basis = np.asarray(basis, dtype=float)
    if basis.ndim == 1:
        basis = basis.reshape(-1, 1)
    b = np.asarray(b, dtype=float)
    cols = [np.asarray(A.forward(basis[:, j]), dtype=float) for j in range(basis.shape[1])]
    M = np.column_stack(cols)
    y = dense_qr_ls(M, b)
    return y, float(np.linalg.norm(M @ y - b))


SOLVERS = {
    "gmres": gmres,
    "lsqr": lsqr,
    "cmrh": cmrh,
    "lslu": lslu,
    "scmrh": scmrh,
    "slslu": slslu,
}
