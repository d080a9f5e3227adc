"""Sequential weight quantization in parameter space.

Given calibration inputs X (k x n, rows are samples) and a weight row w,
the task is to pick v with integer entries minimizing ||X w - X v||_2.
The solvers here:

  gptq            sequential rounding with a correction of the remaining
                  coordinates through the column of L^-1 (L from X = Q L)
  gptq_rec        the same computation written as a recursion that
                  re-factors the column suffix X_{>=2} at every level
  babai           the nearest-plane sweep in data space (see lattice.py)
  babai_proj_rec  the recursion that rounds the data-space coefficient
                  <t, Q_1>/L_11 but then projects back to parameter space

All four provably return the same integer vector; the recursive variants
exist to make that equivalence executable and are O(n) factorizations per
solve, while gptq and babai are the production paths (one factorization,
then O(n^2)).

Rank-deficient calibration data (in particular k < n) is handled by
stacking mu * I under X, which adds mu^2 to every eigenvalue of X^T X;
mu -> infinity degenerates to plain round(w).  Reported errors always
refer to the original X, with the regularized objective carried
separately.  The alphabet alpha * Z is handled by solving for w / alpha,
and an optional [lo, hi] clamp is applied to v after the full run.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .lattice import (
    DEFAULT_TIE_TOL,
    _nearest_plane,
    fragile_indices,
    round_half_even,
)
from .linalg import QLFactors, check_matrix, check_vector, ql_decompose

ALGORITHMS = ("gptq", "gptq_rec", "babai", "babai_proj_rec")


@dataclass(frozen=True)
class QuantConfig:
    """Knobs for a quantization run.

    mu:        regularizer (mu = sqrt(lambda)); 0 disables, "auto" picks
               sqrt(0.01 * mean diag of X^T X).
    alpha:     alphabet scale; quantized values live on alpha * Z.
    rounding:  fixed to "half-to-even"; listed so configs are explicit.
    tie_tol:   half-integer proximity below which a coefficient is flagged
               fragile (rounding may legitimately differ between float
               paths).
    clamp:     optional inclusive integer interval applied to v after the
               full sequential run.
    algorithm: one of gptq | gptq_rec | babai | babai_proj_rec.
    """

    mu: float | str = 0.0
    alpha: float = 1.0
    rounding: str = "half-to-even"
    tie_tol: float = DEFAULT_TIE_TOL
    clamp: tuple[int, int] | None = None
    algorithm: str = "gptq"

    def __post_init__(self):
        if self.mu != "auto":
            if not isinstance(self.mu, (int, float)) or self.mu < 0:
                raise ValueError(f"mu must be >= 0 or 'auto', got {self.mu!r}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if self.rounding != "half-to-even":
            raise ValueError(f"unsupported rounding rule {self.rounding!r}")
        if not self.tie_tol >= 0:
            raise ValueError("tie_tol must be >= 0")
        if self.clamp is not None:
            lo, hi = self.clamp
            if lo > hi:
                raise ValueError(f"clamp interval is empty: {self.clamp}")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")


@dataclass(eq=False)
class QuantResult:
    """Outcome of quantizing one weight row.

    values = alpha * v (before any clamp the two carry the same data).
    error_l2 is measured against the original, unregularized X;
    error_regularized is the solver's actual objective (equal when mu=0).
    w_history, when present, holds the intermediate weight vectors
    w^(0) .. w^(n); the last entry equals v as reals.
    """

    v: np.ndarray
    values: np.ndarray
    error_l2: float
    error_regularized: float
    step_coeffs: np.ndarray
    fragile: list[int] = field(default_factory=list)
    w_history: list[np.ndarray] | None = None


def resolve_mu(x: np.ndarray, mu: float | str) -> float:
    """Turn the config's mu into a number ("auto" keys off mean diag X^T X)."""
    if mu == "auto":
        return math.sqrt(0.01 * float(np.mean(np.sum(x * x, axis=0))))
    mu = float(mu)
    if mu < 0:
        raise ValueError(f"mu must be >= 0, got {mu}")
    return mu


def regularize(x, mu: float) -> np.ndarray:
    """Stack mu * I under x; the result always has full column rank.

    Satisfies (x' ^T x') = x^T x + mu^2 I, so it matches diagonal-loading
    of the Gram matrix while staying a plain lattice basis.
    """
    x = check_matrix(x, "x", min_rows=0)  # k = 0 is legal: no data at all
    if not mu > 0:
        raise ValueError(f"mu must be > 0, got {mu}")
    return np.vstack([x, mu * np.eye(x.shape[1])])


def _prepare(x, cfg: QuantConfig) -> tuple[np.ndarray, np.ndarray, QLFactors, float]:
    """Validate x, apply regularization, factor the solver matrix once."""
    x = check_matrix(x, "x")
    mu = resolve_mu(x, cfg.mu)
    x_solver = regularize(x, mu) if mu > 0 else x
    factors = ql_decompose(x_solver)
    return x, x_solver, factors, mu


def _gptq_core(l_inv: np.ndarray, w: np.ndarray, tie_tol: float,
               keep_history: bool):
    """The sequential loop: round w_i, then shift the remaining
    coordinates along column i of L^-1 so the already-fixed ones are
    untouched.  Coordinate i is assigned v_i directly, which is what the
    update does in exact arithmetic; this keeps the stabilized
    coordinates exactly integer."""
    w = np.array(w, dtype=float)
    n = w.size
    v = np.empty(n, dtype=np.int64)
    coeffs = np.empty(n)
    history = [w.copy()] if keep_history else None
    for i in range(n):
        c = float(w[i])
        coeffs[i] = c
        vi = round_half_even(c)
        v[i] = vi
        if i + 1 < n:
            w[i + 1 :] += ((vi - c) / l_inv[i, i]) * l_inv[i + 1 :, i]
        w[i] = float(vi)
        if keep_history:
            history.append(w.copy())
    return v, coeffs, history, fragile_indices(coeffs, tie_tol)


def _recursive_core(x_solver: np.ndarray, w: np.ndarray, variant: str,
                    tie_tol: float):
    """Suffix recursion, unrolled: at every level re-factor the current
    column suffix, fix one coordinate, and recurse on the rest.

    gptq_rec rounds w_1 directly; babai_proj_rec rounds the data-space
    coefficient <X w, Q_1>/L_11 (the same real number, by a telescoping
    identity).  Both then move w along column 1 of L^-1 and drop the
    first coordinate."""
    x_cur = np.array(x_solver, dtype=float)
    w_cur = np.array(w, dtype=float)
    n = x_cur.shape[1]
    v = np.empty(n, dtype=np.int64)
    coeffs = np.empty(n)
    for i in range(n):
        factors = ql_decompose(x_cur)
        if variant == "gptq_rec":
            c = float(w_cur[0])
        else:
            t = x_cur @ w_cur
            c = float(t @ factors.q[:, 0]) / float(factors.l[0, 0])
        coeffs[i] = c
        vi = round_half_even(c)
        v[i] = vi
        if i + 1 < n:
            l_inv = factors.l_inv
            step = (vi - w_cur[0]) / l_inv[0, 0]
            w_cur = (w_cur + step * l_inv[:, 0])[1:]
            x_cur = x_cur[:, 1:]
    return v, coeffs, fragile_indices(coeffs, tie_tol)


def _dispatch(x_solver: np.ndarray, factors: QLFactors, w: np.ndarray,
              algorithm: str, tie_tol: float, keep_history: bool):
    """Run one of the four solvers on the (already regularized) matrix."""
    if algorithm == "gptq":
        return _gptq_core(factors.l_inv, w, tie_tol, keep_history)
    if algorithm == "babai":
        t = x_solver @ w
        v, coeffs, _, fragile = _nearest_plane(x_solver, factors, t, tie_tol)
        return v, coeffs, None, fragile
    v, coeffs, fragile = _recursive_core(x_solver, w, algorithm, tie_tol)
    return v, coeffs, None, fragile


def _errors(x: np.ndarray, x_solver: np.ndarray, w_scaled: np.ndarray,
            v: np.ndarray, alpha: float) -> tuple[float, float]:
    diff = w_scaled - v
    err = alpha * float(np.linalg.norm(x @ diff))
    err_reg = alpha * float(np.linalg.norm(x_solver @ diff))
    return err, err_reg


def gptq_quantize(x, w, cfg: QuantConfig = QuantConfig()) -> QuantResult:
    """Quantize one weight row with the sequential corrective loop.

    Works on the integer grid (cfg.alpha and cfg.clamp are the business
    of scaled_quantize / quantize_matrix).  With cfg.mu = 0 and
    rank-deficient x this raises RankDeficient; the fix is mu > 0.
    """
    x, x_solver, factors, _ = _prepare(x, cfg)
    w = check_vector(w, x.shape[1], "w")
    v, coeffs, history, fragile = _gptq_core(
        factors.l_inv, w, cfg.tie_tol, keep_history=True
    )
    err, err_reg = _errors(x, x_solver, w, v, 1.0)
    return QuantResult(
        v=v,
        values=v.astype(float),
        error_l2=err,
        error_regularized=err_reg,
        step_coeffs=coeffs,
        fragile=fragile,
        w_history=history,
    )


def gptq_quantize_recursive(x, w, cfg: QuantConfig = QuantConfig(),
                            variant: str = "gptq_rec") -> QuantResult:
    """Recursive reference solvers (variant: gptq_rec | babai_proj_rec).

    Naive form: every level re-factors the column suffix, so a solve costs
    n factorizations.  On inputs with no fragile ties the output matches
    gptq_quantize bit for bit."""
    if variant not in ("gptq_rec", "babai_proj_rec"):
        raise ValueError(f"variant must be gptq_rec or babai_proj_rec, got {variant!r}")
    x, x_solver, _, _ = _prepare(x, cfg)
    w = check_vector(w, x.shape[1], "w")
    v, coeffs, fragile = _recursive_core(x_solver, w, variant, cfg.tie_tol)
    err, err_reg = _errors(x, x_solver, w, v, 1.0)
    return QuantResult(
        v=v,
        values=v.astype(float),
        error_l2=err,
        error_regularized=err_reg,
        step_coeffs=coeffs,
        fragile=fragile,
    )


def scaled_quantize(x, w, cfg: QuantConfig = QuantConfig()) -> QuantResult:
    """Full-config solve of one row: algorithm dispatch, alphabet scale,
    post-run clamp.

    Solves the problem for w / alpha on the same lattice, returns v and
    values = alpha * v; the error is ||X w - alpha X v||.  When clamp is
    set, v is clipped coordinatewise after the sequential run and the
    errors are recomputed for the clipped vector."""
    x, x_solver, factors, _ = _prepare(x, cfg)
    w = check_vector(w, x.shape[1], "w")
    w_scaled = w / cfg.alpha
    v, coeffs, history, fragile = _dispatch(
        x_solver, factors, w_scaled, cfg.algorithm, cfg.tie_tol,
        keep_history=(cfg.algorithm == "gptq"),
    )
    if cfg.clamp is not None:
        lo, hi = cfg.clamp
        v = np.clip(v, lo, hi)
    err, err_reg = _errors(x, x_solver, w_scaled, v, cfg.alpha)
    return QuantResult(
        v=v,
        values=cfg.alpha * v.astype(float),
        error_l2=err,
        error_regularized=err_reg,
        step_coeffs=coeffs,
        fragile=fragile,
        w_history=history,
    )


@dataclass(eq=False)
class MatrixQuantReport:
    """Per-row errors and diagnostics for a whole-matrix run."""

    row_errors: np.ndarray
    row_errors_regularized: np.ndarray
    total_error_l2: float
    total_error_regularized: float
    fragile: list[tuple[int, int]]
    step_coeffs: np.ndarray
    mu: float
    l_diag: np.ndarray


def quantize_matrix(weights, x, cfg: QuantConfig = QuantConfig(),
                    threads: int = 1) -> tuple[np.ndarray, MatrixQuantReport]:
    """Quantize every row of a weight matrix against shared calibration
    data.

    The (regularized) calibration matrix is factored once; rows are then
    independent problems and may be solved on several threads.  The output
    does not depend on the row scheduling.  Total squared error is the sum
    of the per-row squared errors."""
    weights = check_matrix(weights, "weights")
    x, x_solver, factors, mu = _prepare(x, cfg)
    if weights.shape[1] != x.shape[1]:
        raise ValueError(
            f"weights have {weights.shape[1]} columns, calibration has {x.shape[1]}"
        )
    m, n = weights.shape

    def solve_row(i: int):
        w_scaled = weights[i] / cfg.alpha
        v, coeffs, _, fragile = _dispatch(
            x_solver, factors, w_scaled, cfg.algorithm, cfg.tie_tol,
            keep_history=False,
        )
        if cfg.clamp is not None:
            v = np.clip(v, cfg.clamp[0], cfg.clamp[1])
        err, err_reg = _errors(x, x_solver, w_scaled, v, cfg.alpha)
        return i, v, coeffs, fragile, err, err_reg

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(solve_row, range(m)))
    else:
        rows = [solve_row(i) for i in range(m)]

    v_mat = np.empty((m, n), dtype=np.int64)
    coeffs_mat = np.empty((m, n))
    row_err = np.empty(m)
    row_err_reg = np.empty(m)
    fragile_all: list[tuple[int, int]] = []
    for i, v, coeffs, fragile, err, err_reg in rows:
        v_mat[i] = v
        coeffs_mat[i] = coeffs
        row_err[i] = err
        row_err_reg[i] = err_reg
        fragile_all.extend((i, j) for j in fragile)

    report = MatrixQuantReport(
        row_errors=row_err,
        row_errors_regularized=row_err_reg,
        total_error_l2=float(np.sqrt(np.sum(row_err ** 2))),
        total_error_regularized=float(np.sqrt(np.sum(row_err_reg ** 2))),
        fragile=sorted(fragile_all),
        step_coeffs=coeffs_mat,
        mu=mu,
        l_diag=factors.diag.copy(),
    )
    return v_mat, report


@dataclass(eq=False)
class CrossLayerResult:
    """Both solution routes for a cross-layer target, plus diagnostics.

    result holds the target-form solve (the production route).  w_hat is
    the least-squares pull-back of the target onto the quantized lattice;
    v_gptq_route is what the parameter-space loop returns for it.  The two
    agree on every non-fragile coordinate.  off_span_residual is
    ||X w - alpha X_hat w_hat||, the part of the target no lattice vector
    can reach; projected_error measures the solve against the projected
    target instead of the original one."""

    result: QuantResult
    w_hat: np.ndarray
    v_gptq_route: np.ndarray
    routes_agree: bool
    off_span_residual: float
    projected_error: float


def cross_layer_target(x, x_hat, w, cfg: QuantConfig = QuantConfig()) -> CrossLayerResult:
    """Quantize against the lattice of x_hat while aiming at x @ w.

    The target t = X w generally lies outside the column span of X_hat
    (already-quantized upstream layers shift it).  The target-form sweep
    handles that directly; equivalently one can project, w_hat being the
    least-squares solution, and run the parameter-space loop on w_hat.
    Both answers are computed and compared here.

    With mu > 0 the lattice is the regularized stack of x_hat and the
    target is embedded with zeros in the regularization block, which keeps
    the two routes exactly equivalent for every mu >= 0."""
    x = check_matrix(x, "x")
    x_hat = check_matrix(x_hat, "x_hat")
    if x.shape != x_hat.shape:
        raise ValueError(f"x and x_hat shapes differ: {x.shape} vs {x_hat.shape}")
    w = check_vector(w, x.shape[1], "w")
    n = x.shape[1]

    mu = resolve_mu(x_hat, cfg.mu)
    t = x @ w
    t_work = t / cfg.alpha
    if mu > 0:
        b_mat = regularize(x_hat, mu)
        t_emb = np.concatenate([t_work, np.zeros(n)])
    else:
        b_mat = x_hat
        t_emb = t_work
    factors = ql_decompose(b_mat)

    w_hat = solve_triangular(factors.l, factors.q.T @ t_emb, lower=True)
    v_b, coeffs_b, _, fragile_b = _nearest_plane(b_mat, factors, t_emb, cfg.tie_tol)
    v_g, _, _, fragile_g = _gptq_core(factors.l_inv, w_hat, cfg.tie_tol,
                                      keep_history=False)

    fragile = sorted(set(fragile_b) | set(fragile_g))
    solid = np.setdiff1d(np.arange(n), np.array(fragile, dtype=int))
    routes_agree = bool(np.array_equal(v_b[solid], v_g[solid]))

    v = v_b
    if cfg.clamp is not None:
        v = np.clip(v, cfg.clamp[0], cfg.clamp[1])
    values = cfg.alpha * v.astype(float)
    err = float(np.linalg.norm(t - x_hat @ values))
    err_reg = cfg.alpha * float(np.linalg.norm(t_emb - b_mat @ v))
    projected = x_hat @ (cfg.alpha * w_hat)
    result = QuantResult(
        v=v,
        values=values,
        error_l2=err,
        error_regularized=err_reg,
        step_coeffs=coeffs_b,
        fragile=fragile,
    )
    return CrossLayerResult(
        result=result,
        w_hat=w_hat,
        v_gptq_route=v_g,
        routes_agree=routes_agree,
        off_span_residual=float(np.linalg.norm(t - projected)),
        projected_error=float(np.linalg.norm(projected - x_hat @ values)),
    )
