"""Command-line driver.

Subcommands:

* ``run``       Monte Carlo trajectories; writes per-run CSV traces, the
                per-iteration mean/stderr table, a manifest, optional plots.
* ``validate``  check a mixing schedule against the stochasticity, entry
                floor, and window-connectivity assumptions.
* ``theory``    evaluate the explicit rate constants and compare the
                certified bound against the measured error.
* ``lemmas``    run the randomized inequality suite (nonzero exit on any
                violation).
* ``sweep``     final-iterate statistics across a horizon grid plus a
                log-log rate fit.

The output directory is resolved in order: ``--out``, the config's
``output_dir``, the ``DIMIX_OUT`` environment variable, ``./dimix-out``.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import (
    StepSchedule,
    contraction_factor,
    fit_rate,
    kappa_factor,
    theorem_bound,
    thresholds,
    xi_constants,
)
from .dynamics import MonteCarlo, RunConfig, config_from_problem, empirical_bounds, monte_carlo
from .lemmas import run_suite
from .noise import NoiseModel, noise_variance_bound
from .objective import Problem, build_problem
from .reporting import (
    VERSION,
    Config,
    fmt,
    parse_config,
    svg_loglog,
    write_manifest,
    write_mean_csv,
    write_sweep_csv,
    write_trace_csv,
)
from .topology import (
    MixingSchedule,
    fixed_cycle_schedule,
    gossip_schedule,
    matrix_list_schedule,
    parse_matrix_file,
    validate_schedule,
)


@dataclass
class Experiment:
    """A fully resolved run setup plus the config values that describe it
    (including any command-line seed override) for the manifest echo."""

    values: dict
    problem: Problem
    schedule: MixingSchedule
    steps: StepSchedule
    noise: NoiseModel
    run_config: RunConfig


def build_experiment(cfg: Config, seed_override: int | None = None, T_override: int | None = None) -> Experiment:
    values = dict(cfg.values)
    if seed_override is not None:
        values["seed"] = int(seed_override)
    if T_override is not None:
        values["T"] = int(T_override)
    seed = values["seed"]

    family = values["family"]
    if family == "matrix_file":
        if not values["matrix_file"]:
            raise ValueError("family = matrix_file needs the matrix_file key")
        schedule = matrix_list_schedule(parse_matrix_file(values["matrix_file"]))
        if cfg.was_set("n") and values["n"] != schedule.n:
            raise ValueError(
                f"config says n = {values['n']} but the matrix file has {schedule.n} agents"
            )
        values["n"] = schedule.n
        problem = build_problem(
            n=schedule.n, d=values["d"], N=values["N"], seed=seed, r=schedule.r
        )
    else:
        problem = build_problem(
            n=values["n"],
            d=values["d"],
            N=values["N"],
            seed=seed,
            p_low=values["p_low"],
            p_high=values["p_high"],
        )
        schedule = (
            gossip_schedule(problem.r) if family == "gossip" else fixed_cycle_schedule(problem.r)
        )

    noise = NoiseModel(
        values["noise"], sigma=values["sigma"], levels=values["quantizer_levels"]
    )
    steps = StepSchedule(
        alpha0=values["alpha0"], nu=values["nu"], beta0=values["beta0"], mu=values["mu"]
    )
    run_config = config_from_problem(problem, schedule, steps, noise, values["T"])
    return Experiment(
        values=values,
        problem=problem,
        schedule=schedule,
        steps=steps,
        noise=noise,
        run_config=run_config,
    )


def resolve_out_dir(arg_out: str | None, values: dict) -> Path:
    target = arg_out or values.get("output_dir") or os.environ.get("DIMIX_OUT") or "dimix-out"
    out = Path(target)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _derived_facts(exp: Experiment, mc: MonteCarlo) -> dict:
    sched = exp.schedule
    lam = contraction_factor(sched.eta, float(sched.r.min()), sched.B, sched.n)
    good = [tr for tr in mc.traces if not tr.aborted]
    K, norm_bound = empirical_bounds(good)
    gamma = noise_variance_bound(exp.noise, exp.problem.d, state_norm_bound=norm_bound)
    facts = {
        "version": VERSION,
        "r": exp.schedule.r,
        "eta": sched.eta,
        "B": sched.B,
        "lambda": lam,
        "kappa": kappa_factor(lam, exp.steps.beta0, sched.B),
        "mu_f": exp.problem.strong_convexity,
        "L_f": exp.problem.smoothness,
        "K": K,
        "state_norm_bound": norm_bound,
        "gamma": gamma,
        "run_seeds": [tr.seed for tr in mc.traces],
        "completed": mc.completed,
        "aborted": mc.aborted,
    }
    try:
        th = thresholds(exp.steps, lam, exp.problem.strong_convexity, exp.problem.smoothness)
        facts["T1"] = th.T1
        facts["T2"] = th.T2
        facts["T3"] = th.T3
        facts["T4"] = "none" if th.T4 is None else th.T4
        facts["T0"] = th.T0
    except ValueError as exc:
        facts["theory_note"] = str(exc)
    return facts


def cmd_run(args) -> int:
    cfg = parse_config(args.config)
    exp = build_experiment(cfg, seed_override=args.seed)
    out = resolve_out_dir(args.out, exp.values)
    mc = monte_carlo(
        exp.run_config, exp.values["runs"], base_seed=exp.values["seed"], jobs=args.jobs
    )
    for k, trace in enumerate(mc.traces):
        write_trace_csv(out / f"run_{k:02d}.csv", trace)
    write_mean_csv(out / "mean.csv", mc)
    write_manifest(out / "manifest.txt", exp.values, _derived_facts(exp, mc))
    if args.plots:
        svg_loglog(
            out / "loss.svg",
            {
                "loss_pooled": (mc.t, mc.mean["loss_pooled"]),
                "loss_weighted": (mc.t, mc.mean["loss_weighted"]),
            },
            title=f"{exp.values['family']}, n={exp.schedule.n}, mean over {mc.completed} runs",
            ylabel="mean loss",
        )
        svg_loglog(
            out / "deviation.svg",
            {"deviation_sq": (mc.t, mc.mean["deviation_sq"])},
            title="consensus error",
            ylabel="mean deviation_sq",
        )
    final = mc.mean["dist_opt_sq"][-1]
    print(
        f"{exp.values['family']}: n={exp.schedule.n} T={exp.values['T']} "
        f"runs={mc.completed} completed, {mc.aborted} aborted"
    )
    if mc.aborted:
        print("warning: aborted runs are excluded from mean.csv")
    print(f"final mean dist_opt_sq = {fmt(final)}")
    print(f"wrote {out}/run_*.csv, {out}/mean.csv, {out}/manifest.txt")
    return 0


def cmd_validate(args) -> int:
    cfg = parse_config(args.config)
    exp = build_experiment(cfg, seed_override=args.seed)
    horizon = exp.values["horizon"] or exp.values["T"]
    window = exp.values["window"] or None
    report = validate_schedule(exp.schedule, horizon, window)
    print(report.summary())
    return 0 if report.passed else 1


def cmd_theory(args) -> int:
    cfg = parse_config(args.config)
    exp = build_experiment(cfg, seed_override=args.seed)
    mc = monte_carlo(
        exp.run_config, exp.values["runs"], base_seed=exp.values["seed"], jobs=args.jobs
    )
    sched = exp.schedule
    lam = contraction_factor(sched.eta, float(sched.r.min()), sched.B, sched.n)
    kappa = kappa_factor(lam, exp.steps.beta0, sched.B)
    good = [tr for tr in mc.traces if not tr.aborted]
    K, norm_bound = empirical_bounds(good)
    gamma = noise_variance_bound(exp.noise, exp.problem.d, state_norm_bound=norm_bound)
    mu_f, L_f = exp.problem.strong_convexity, exp.problem.smoothness

    th = thresholds(exp.steps, lam, mu_f, L_f)
    if th.T0 <= mc.t.size:
        q0 = mc.q0_estimate(th.T0)
        q0_source = f"measured over {mc.completed} runs"
    elif args.assume_q0 is not None:
        q0 = args.assume_q0
        q0_source = "assumed (--assume-q0)"
    else:
        raise ValueError(
            f"burn-in T0 = {th.T0} lies beyond the simulated horizon T = {mc.t.size}; "
            "raise T or supply --assume-q0"
        )

    tc = xi_constants(exp.steps, lam, kappa, mu_f, L_f, gamma, K, q0)
    print(f"schedule {exp.values['family']}: n={sched.n} B={sched.B} eta={fmt(sched.eta)}")
    print(f"lambda = {fmt(lam)}   kappa = {fmt(kappa)}")
    print(f"mu_f = {fmt(mu_f)}   L_f = {fmt(L_f)}   c1 = {fmt(tc.c1)}   c2 = {fmt(tc.c2)}")
    print(f"gamma = {fmt(gamma)}   K = {fmt(K)}   q0 = {fmt(q0)} ({q0_source})")
    t4 = "-" if th.T4 is None else str(th.T4)
    print(f"T1 = {th.T1}   T2 = {th.T2}   T3 = {th.T3}   T4 = {t4}   T0 = {th.T0}")
    for name in ("eps1", "eps2", "eps3", "eps4", "eps5", "xi1", "xi2", "xi3", "xi4", "xi5"):
        val = getattr(tc, name)
        if val is not None:
            print(f"{name} = {fmt(val)}")
    print(f"regime: mu + nu {'<' if tc.regime == 1 else '=='} 1")
    if tc.regime == 2 and not tc.side_condition_ok:
        need = min(exp.steps.mu - exp.steps.nu, 2 * exp.steps.nu) / tc.c2
        print(
            f"WARNING: alpha0*beta0 = {fmt(exp.steps.alpha0 * exp.steps.beta0)} is below "
            f"the certification threshold {fmt(need)}; the bound below is reported "
            "but not certified for these steps"
        )
    print()
    print("T, certified bound, empirical mean dist_opt_sq, bound/empirical")
    for T in exp.values["T_grid"]:
        bound = theorem_bound(tc, T, strict=False)
        note = "" if T >= tc.thresholds.T_min else "  (below burn-in, not covered)"
        if T <= mc.t.size:
            emp = float(mc.mean["dist_opt_sq"][T - 1])
            ratio = bound / emp if emp > 0 else float("inf")
            print(f"{T}, {fmt(bound)}, {fmt(emp)}, {fmt(ratio)}{note}")
        else:
            print(f"{T}, {fmt(bound)}, -, -{note}")
    return 0


def cmd_lemmas(args) -> int:
    if args.seed is not None:
        seed = args.seed
    elif args.config:
        seed = parse_config(args.config)["seed"]
    else:
        seed = 0
    suite = run_suite(seed=seed)
    print(suite.summary())
    return 0 if suite.passed else 1


def cmd_sweep(args) -> int:
    cfg = parse_config(args.config)
    grid = sorted(set(cfg["T_grid"]))
    if grid[0] < 1:
        raise ValueError("T_grid entries must be >= 1")
    exp = build_experiment(cfg, seed_override=args.seed, T_override=max(grid))
    out = resolve_out_dir(args.out, exp.values)
    mc = monte_carlo(
        exp.run_config, exp.values["runs"], base_seed=exp.values["seed"], jobs=args.jobs
    )
    write_sweep_csv(out / "sweep.csv", grid, mc)
    write_manifest(out / "manifest.txt", exp.values, _derived_facts(exp, mc))
    finals = np.array([mc.mean["dist_opt_sq"][T - 1] for T in grid], dtype=float)
    print(f"horizon grid: {', '.join(str(T) for T in grid)}")
    print(f"final mean dist_opt_sq: {', '.join(fmt(v) for v in finals)}")
    if len(grid) >= 2 and np.all(finals > 0):
        fit = fit_rate(np.array(grid, dtype=float), finals)
        print(f"log-log rate: slope = {fit.slope:.4f} +/- {fit.stderr:.4f}")
    if args.plots:
        svg_loglog(
            out / "sweep.svg",
            {"dist_opt_sq(T)": (np.array(grid, dtype=float), finals)},
            title=f"final error vs horizon ({exp.values['family']}, n={exp.schedule.n})",
            xlabel="T",
            ylabel="mean dist_opt_sq",
        )
    print(f"wrote {out}/sweep.csv, {out}/manifest.txt")
    return 0


def _add_common(sp: argparse.ArgumentParser, config_required: bool = True) -> None:
    sp.add_argument("--config", required=config_required, help="flat key = value config file")
    sp.add_argument("--seed", type=int, default=None, help="override the config seed")
    sp.add_argument("--out", default=None, help="output directory")
    sp.add_argument("--jobs", type=int, default=1, help="worker processes for Monte Carlo")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dimix",
        description="Two-time-scale decentralized descent: simulate, validate, certify.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("run", help="Monte Carlo trajectories with CSV traces")
    _add_common(sp)
    sp.add_argument("--plots", action="store_true", help="also write SVG plots")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("validate", help="check the mixing assumptions")
    _add_common(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("theory", help="explicit constants and certified bound")
    _add_common(sp)
    sp.add_argument(
        "--assume-q0",
        type=float,
        default=None,
        dest="assume_q0",
        help="take E||xbar(T0) - x*||^2 as given when T0 exceeds the horizon",
    )
    sp.set_defaults(func=cmd_theory)

    sp = sub.add_parser("lemmas", help="randomized inequality suite")
    _add_common(sp, config_required=False)
    sp.set_defaults(func=cmd_lemmas)

    sp = sub.add_parser("sweep", help="final error across a horizon grid")
    _add_common(sp)
    sp.add_argument("--plots", action="store_true", help="also write SVG plots")
    sp.set_defaults(func=cmd_sweep)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
