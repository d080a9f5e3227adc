"""Command-line front end: quantize, compare, bounds, oracle, reduce.

Exit codes: 0 success / 1 solver disagreement or guarantee violation /
2 input error / 3 rank-deficient calibration data with mu = 0.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
import time

import numpy as np

from .lattice import (
    DimensionTooLarge,
    LatticeBasis,
    absolute_error_bound,
    babai_from_target,
    relative_error_factor,
    solve_cvp_exact,
)
from .linalg import NotPositiveDefinite, RankDeficient, ql_decompose
from .matio import ParseError, RaggedRows, load_matrix_csv, save_matrix_csv
from .quantize import (
    QuantConfig,
    quantize_matrix,
    regularize,
    resolve_mu,
    scaled_quantize,
)
from .reduction import DEFAULT_DELTA, lll_reduce, map_solution
from .report import Report

_ALGO_CHOICES = ("gptq", "babai", "gptq-rec", "babai-proj-rec")


def _parse_mu(text: str):
    if text == "auto":
        return "auto"
    try:
        value = float(text)
    except ValueError:
        raise ValueError(f"--mu expects a number or 'auto', got {text!r}") from None
    return value


def _parse_clamp(text: str) -> tuple[int, int]:
    try:
        lo, hi = text.split(":")
        return int(lo), int(hi)
    except ValueError:
        raise ValueError(f"--clamp expects LO:HI, got {text!r}") from None


def _parse_random(text: str) -> tuple[int, int]:
    try:
        n, k = text.split(",")
        return int(n), int(k)
    except ValueError:
        raise ValueError(f"--random expects n,k , got {text!r}") from None


def _config(args) -> QuantConfig:
    return QuantConfig(
        mu=_parse_mu(args.mu),
        alpha=args.alpha,
        clamp=_parse_clamp(args.clamp) if args.clamp else None,
        algorithm=args.algo.replace("-", "_"),
    )


def _solver_matrix(x: np.ndarray, cfg: QuantConfig) -> tuple[np.ndarray, float]:
    mu = resolve_mu(x, cfg.mu)
    return (regularize(x, mu) if mu > 0 else x), mu


def _write_report(args, report: Report) -> None:
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(report.to_json())


def _cmd_quantize(args) -> int:
    weights = load_matrix_csv(args.weights)
    x = load_matrix_csv(args.calib)
    cfg = _config(args)
    m, n = weights.shape
    k = x.shape[0]

    start = time.perf_counter()
    if args.reduce == "lll":
        x_solver, mu = _solver_matrix(x, cfg)
        reduced = lll_reduce(x_solver, args.delta)
        lat = LatticeBasis(reduced.basis_red)
        v_mat = np.empty((m, n), dtype=np.int64)
        coeffs = np.empty((m, n))
        fragile_count = 0
        err2 = err2_reg = 0.0
        for i in range(m):
            w_scaled = weights[i] / cfg.alpha
            sol = babai_from_target(lat, x_solver @ w_scaled, tie_tol=cfg.tie_tol)
            v = map_solution(reduced.u, sol.v)
            if cfg.clamp is not None:
                v = np.clip(v, cfg.clamp[0], cfg.clamp[1])
            v_mat[i] = v
            coeffs[i] = sol.step_coeffs
            fragile_count += len(sol.fragile)
            err2 += float(np.sum((x @ (w_scaled - v)) ** 2)) * cfg.alpha ** 2
            err2_reg += float(np.sum((x_solver @ (w_scaled - v)) ** 2)) * cfg.alpha ** 2
        error_l2, error_reg = float(np.sqrt(err2)), float(np.sqrt(err2_reg))
        diag = lat.factors.diag
        algorithm = args.algo + "+lll"
        step_coeffs = coeffs.ravel().tolist()
        resolved_mu = mu
    else:
        v_mat, rep = quantize_matrix(weights, x, cfg, threads=args.threads)
        error_l2, error_reg = rep.total_error_l2, rep.total_error_regularized
        diag = rep.l_diag
        fragile_count = len(rep.fragile)
        algorithm = args.algo
        step_coeffs = rep.step_coeffs.ravel().tolist()
        resolved_mu = rep.mu
    wall_ms = (time.perf_counter() - start) * 1e3

    save_matrix_csv(args.out, v_mat)
    abs_bound = absolute_error_bound(diag)
    gamma = relative_error_factor(diag)
    # per-row guarantee, scaled to the alphabet and summed over m rows
    bound_scale = cfg.alpha * np.sqrt(m)
    report = Report(
        algorithm=algorithm,
        n=n, k=k, m=m,
        mu=resolved_mu, alpha=cfg.alpha, delta=args.delta,
        error_l2=error_l2, error_regularized=error_reg,
        bound_abs_paper=bound_scale * abs_bound.paper,
        bound_abs_halfstep=bound_scale * abs_bound.half_step,
        gamma_bound=gamma.gamma,
        step_coeffs=step_coeffs,
        fragile_count=fragile_count,
        wall_time_ms=wall_ms,
        v=v_mat[0].tolist() if m == 1 else None,
        V=v_mat.tolist() if m > 1 else None,
    )
    _write_report(args, report)
    print(f"quantized {m}x{n} with {algorithm}: error_l2={error_l2!r} "
          f"(bound {abs_bound.paper!r}), fragile={fragile_count} -> {args.out}")
    return 0


def _compare_instance(x: np.ndarray, w: np.ndarray, cfg: QuantConfig):
    """Run all four solvers on one row; agreement ignores fragile coords."""
    results = {
        algo: scaled_quantize(x, w, dataclasses.replace(cfg, algorithm=algo))
        for algo in ("gptq", "gptq_rec", "babai", "babai_proj_rec")
    }
    fragile: set[int] = set()
    for res in results.values():
        fragile.update(res.fragile)
    solid = np.setdiff1d(np.arange(w.size), np.array(sorted(fragile), dtype=int))
    reference = results["gptq"].v[solid]
    agree = all(np.array_equal(res.v[solid], reference) for res in results.values())
    return results, agree, fragile


def _cmd_compare(args) -> int:
    cfg = _config(args)
    start = time.perf_counter()
    all_agree = True
    fragile_total = 0
    instances: list[tuple[np.ndarray, np.ndarray]] = []

    if args.random:
        n, k = _parse_random(args.random)
        if args.seeds < 1:
            raise ValueError("--seeds must be >= 1")
        for s in range(args.seeds):
            seed = args.seed + s
            rng = np.random.default_rng(seed)
            instances.append((rng.uniform(-1, 1, (k, n)), rng.uniform(-1, 1, n)))
            print(f"instance {s}: seed={seed}")
    else:
        if not (args.weights and args.calib):
            raise ValueError("compare needs --weights/--calib or --random n,k")
        x = load_matrix_csv(args.calib)
        weights = load_matrix_csv(args.weights)
        instances = [(x, weights[i]) for i in range(weights.shape[0])]

    last = None
    for idx, (x, w) in enumerate(instances):
        results, agree, fragile = _compare_instance(x, w, cfg)
        fragile_total += len(fragile)
        all_agree &= agree
        last = (x, w, results)
        print(f"instance {idx}: agree={agree} fragile={len(fragile)}")
    wall_ms = (time.perf_counter() - start) * 1e3

    x, w, results = last
    ref = results["gptq"]
    x_solver, mu = _solver_matrix(x, cfg)
    factors = ql_decompose(x_solver)
    abs_bound = absolute_error_bound(factors)
    gamma = relative_error_factor(factors)
    report = Report(
        algorithm="compare",
        n=x.shape[1], k=x.shape[0], m=1,
        mu=mu, alpha=cfg.alpha, delta=args.delta,
        error_l2=ref.error_l2, error_regularized=ref.error_regularized,
        bound_abs_paper=cfg.alpha * abs_bound.paper,
        bound_abs_halfstep=cfg.alpha * abs_bound.half_step,
        gamma_bound=gamma.gamma,
        step_coeffs=ref.step_coeffs.tolist(),
        fragile_count=fragile_total,
        wall_time_ms=wall_ms,
        v=None if args.random else ref.v.tolist(),
        agreement=all_agree,
    )
    _write_report(args, report)
    print(f"agreement={all_agree} over {len(instances)} instance(s), "
          f"fragile={fragile_total}")
    return 0 if all_agree else 1


def _print_bounds(label: str, diag: np.ndarray) -> None:
    abs_bound = absolute_error_bound(diag)
    gamma = relative_error_factor(diag)
    print(f"[{label}]")
    print("L_diag: " + ",".join(repr(float(d)) for d in diag))
    print(f"bound_abs_paper    = {abs_bound.paper!r}")
    print(f"bound_abs_halfstep = {abs_bound.half_step!r}")
    print(f"gamma_bound        = {gamma.gamma!r}")
    print(f"gamma_bound_loose  = {gamma.loose!r}")


def _cmd_bounds(args) -> int:
    x = load_matrix_csv(args.calib)
    cfg = _config(args)
    x_solver, mu = _solver_matrix(x, cfg)
    factors = ql_decompose(x_solver)
    print(f"n={x.shape[1]} k={x.shape[0]} mu={mu!r}")
    _print_bounds("input basis", factors.diag)
    if args.reduce == "lll":
        reduced = lll_reduce(x_solver, args.delta)
        _print_bounds(f"after lll(delta={args.delta})",
                      ql_decompose(reduced.basis_red).diag)
    return 0


def _cmd_oracle(args) -> int:
    x = load_matrix_csv(args.calib)
    cfg = _config(args)
    if args.target:
        t = load_matrix_csv(args.target).ravel()
    elif args.weights:
        w = load_matrix_csv(args.weights)[0]
        t = x @ w
    else:
        raise ValueError("oracle needs --target or --weights")
    if t.size != x.shape[0]:
        raise ValueError(f"target has length {t.size}, calibration has {x.shape[0]} rows")

    x_solver, mu = _solver_matrix(x, cfg)
    t_emb = np.concatenate([t, np.zeros(x.shape[1])]) if mu > 0 else t

    start = time.perf_counter()
    reduced = None
    if args.reduce == "lll":
        reduced = lll_reduce(x_solver, args.delta)
        lat = LatticeBasis(reduced.basis_red)
    else:
        lat = LatticeBasis(x_solver)

    exact = solve_cvp_exact(lat, t_emb, radius=args.radius)
    babai = babai_from_target(lat, t_emb, tie_tol=cfg.tie_tol)
    wall_ms = (time.perf_counter() - start) * 1e3

    if exact.boundary_hit or not exact.certified:
        print("warning: enumeration box may not contain the optimum "
              f"(boundary_hit={exact.boundary_hit}, certified={exact.certified})",
              file=sys.stderr)

    gamma = relative_error_factor(lat.factors)
    abs_bound = absolute_error_bound(lat.factors)
    if exact.error_l2 > 0:
        ratio = babai.error_l2 / exact.error_l2
    else:
        ratio = 1.0 if babai.error_l2 == 0 else float("inf")

    v = map_solution(reduced.u, babai.v) if reduced is not None else babai.v
    error_vs_original = float(np.linalg.norm(t - x @ v))
    print(f"optimum_error = {exact.error_l2!r}")
    print(f"babai_error   = {babai.error_l2!r}")
    print(f"ratio         = {ratio!r}")
    print(f"gamma_bound   = {gamma.gamma!r}")

    report = Report(
        algorithm="babai+lll" if reduced is not None else "babai",
        n=x.shape[1], k=x.shape[0], m=1,
        mu=mu, alpha=cfg.alpha, delta=args.delta,
        error_l2=error_vs_original,
        error_regularized=babai.error_l2,
        bound_abs_paper=abs_bound.paper, bound_abs_halfstep=abs_bound.half_step,
        gamma_bound=gamma.gamma,
        step_coeffs=babai.step_coeffs.tolist(),
        fragile_count=len(babai.fragile),
        wall_time_ms=wall_ms,
        v=v.tolist(),
        oracle_error=exact.error_l2,
    )
    _write_report(args, report)

    if ratio > gamma.gamma * (1 + 1e-12):
        print("error: approximation-factor guarantee violated", file=sys.stderr)
        return 1
    return 0


def _cmd_reduce(args) -> int:
    x = load_matrix_csv(args.calib)
    before = ql_decompose(x).diag
    reduced = lll_reduce(x, args.delta)
    after = ql_decompose(reduced.basis_red).diag
    save_matrix_csv(args.out, reduced.basis_red)
    save_matrix_csv(args.out_unimodular, reduced.u)
    print("L_diag before: " + ",".join(repr(float(d)) for d in before))
    print("L_diag after:  " + ",".join(repr(float(d)) for d in after))
    print(f"sum L_ii^2: {float(np.sum(before ** 2))!r} -> {float(np.sum(after ** 2))!r}")
    print(f"wrote {args.out} and {args.out_unimodular}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latquant",
        description="Data-driven quantization of linear layers as a "
                    "lattice closest-vector problem.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_mu_delta(p):
        p.add_argument("--mu", default="0", help="regularizer (number or 'auto')")
        p.add_argument("--delta", type=float, default=DEFAULT_DELTA,
                       help="LLL reduction parameter")

    q = sub.add_parser("quantize", help="quantize a weight matrix")
    q.add_argument("--weights", required=True, help="weight matrix CSV (m x n)")
    q.add_argument("--calib", required=True, help="calibration matrix CSV (k x n)")
    add_mu_delta(q)
    q.add_argument("--alpha", type=float, default=1.0, help="alphabet scale")
    q.add_argument("--algo", choices=_ALGO_CHOICES, default="gptq")
    q.add_argument("--clamp", default=None, help="clamp v into LO:HI after the run")
    q.add_argument("--reduce", choices=["lll"], default=None)
    q.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    q.add_argument("--out", default="V.csv")
    q.add_argument("--report", default="report.json")
    q.set_defaults(func=_cmd_quantize)

    c = sub.add_parser("compare", help="run all four solvers and check agreement")
    c.add_argument("--weights", default=None)
    c.add_argument("--calib", default=None)
    c.add_argument("--random", default=None, metavar="n,k",
                   help="generate random instances instead of reading files")
    c.add_argument("--seeds", type=int, default=1, help="number of random instances")
    c.add_argument("--seed", type=int, default=0, help="base seed")
    add_mu_delta(c)
    c.add_argument("--alpha", type=float, default=1.0, help="alphabet scale")
    c.add_argument("--report", default=None)
    c.set_defaults(func=_cmd_compare, algo="gptq", clamp=None)

    b = sub.add_parser("bounds", help="print worst-case error bounds")
    b.add_argument("--calib", required=True)
    add_mu_delta(b)
    b.add_argument("--reduce", choices=["lll"], default=None)
    b.set_defaults(func=_cmd_bounds, algo="gptq", clamp=None, alpha=1.0)

    o = sub.add_parser("oracle", help="exhaustive optimum vs the greedy answer")
    o.add_argument("--calib", required=True)
    o.add_argument("--target", default=None, help="target vector CSV (length k)")
    o.add_argument("--weights", default=None, help="derive target as X @ first row")
    add_mu_delta(o)
    o.add_argument("--radius", type=int, default=2)
    o.add_argument("--reduce", choices=["lll"], default=None)
    o.add_argument("--report", default=None)
    o.set_defaults(func=_cmd_oracle, algo="babai", clamp=None, alpha=1.0)

    r = sub.add_parser("reduce", help="LLL-reduce a basis and save the transform")
    r.add_argument("--calib", required=True)
    r.add_argument("--delta", type=float, default=DEFAULT_DELTA)
    r.add_argument("--out", default="reduced.csv")
    r.add_argument("--out-unimodular", default="unimodular.csv")
    r.set_defaults(func=_cmd_reduce)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, RaggedRows) as exc:
        print(f"error: bad CSV input: {exc}", file=sys.stderr)
        return 2
    except (RankDeficient, NotPositiveDefinite) as exc:
        print(f"error: {exc}\nhint: pass --mu > 0 (or --mu auto) to regularize "
              "the calibration matrix", file=sys.stderr)
        return 3
    except DimensionTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
