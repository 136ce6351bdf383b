"""The two-time-scale decentralized descent loop.

Each agent i keeps a state x_i(t), t >= 1, all starting at zero, and updates

    x_i(t+1) = x_i(t) + beta(t) * (xhat_i(t) - x_i(t))
               - alpha(t) * beta(t) * grad f_i(x_i(t)),

where xhat_i is the (noisy) estimate of its mixing-weighted neighborhood
average.  Mixing decays at beta(t) = beta0/t^mu and descent at
alpha(t)*beta(t); with nu < mu the consensus error contracts faster than the
optimization drifts, which is what the rate certificate exploits.

``run`` produces a per-iteration trace of four scalar diagnostics:
pooled-data loss at the weighted mean state, the r-weighted sum of local
losses at the agent states, the consensus error, and the squared r-weighted
distance to the weighted optimum x*.  ``monte_carlo`` repeats a run over
seeds base_seed, base_seed+1, ... and aggregates the columns.

Randomness is consumed in a fixed canonical order (iteration by iteration;
within an iteration, receiving agents in ascending index, each one's
neighbors in ascending index), so a trace is a pure function of (config,
seed) no matter how the draws are batched internally.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .analysis import StepSchedule, deviation_sq, dist_opt_sq, weighted_mean
from .noise import NoiseModel, noiseless, stochastic_quantize
from .objective import LocalObjective, Problem
from .rng import philox
from .topology import MixingSchedule

# States beyond this magnitude mean the configuration diverged; the run is
# cut short and flagged rather than allowed to overflow into inf/nan.
DIVERGENCE_LIMIT = 1e12

TRACE_COLUMNS = ("loss_pooled", "loss_weighted", "deviation_sq", "dist_opt_sq")


@dataclass(frozen=True)
class RunConfig:
    """Everything a single trajectory depends on, apart from the seed.

    ``problem`` supplies the pooled data behind the loss_pooled column; when
    absent (synthetic quadratics with no pool) that column falls back to the
    r-weighted objective evaluated at the weighted mean state.
    """

    schedule: MixingSchedule
    steps: StepSchedule
    agents: tuple[LocalObjective, ...]
    x_star: np.ndarray
    T: int
    noise: NoiseModel = field(default_factory=noiseless)
    problem: Problem | None = None

    def __post_init__(self) -> None:
        if self.T < 1:
            raise ValueError("need a horizon T >= 1")
        if len(self.agents) != self.schedule.n:
            raise ValueError(
                f"{len(self.agents)} local objectives for {self.schedule.n} agents"
            )
        d = self.agents[0].b.size
        if any(f.b.size != d for f in self.agents):
            raise ValueError("all local objectives must share one dimension")
        if np.asarray(self.x_star).shape != (d,):
            raise ValueError("x_star dimension does not match the objectives")
        if self.problem is not None and not np.allclose(
            self.problem.r, self.schedule.r, atol=1e-12
        ):
            raise ValueError("problem weights and schedule weights disagree")

    @property
    def dimension(self) -> int:
        return self.agents[0].b.size


def config_from_problem(
    problem: Problem,
    schedule: MixingSchedule,
    steps: StepSchedule,
    noise: NoiseModel,
    T: int,
) -> RunConfig:
    return RunConfig(
        schedule=schedule,
        steps=steps,
        agents=problem.agents,
        x_star=problem.x_star,
        T=T,
        noise=noise,
        problem=problem,
    )


@dataclass
class RunTrace:
    """One trajectory's diagnostics, row t in [1, len].

    An aborted (diverged) trace is truncated at the last finite-magnitude
    iterate; ``abort_t`` is the iteration whose update blew past the limit.
    """

    seed: int
    T: int
    t: np.ndarray
    loss_pooled: np.ndarray
    loss_weighted: np.ndarray
    deviation_sq: np.ndarray
    dist_opt_sq: np.ndarray
    final_state: np.ndarray
    max_grad_sq: float
    max_state_norm: float
    aborted: bool = False
    abort_t: int | None = None

    def column(self, name: str) -> np.ndarray:
        if name not in TRACE_COLUMNS:
            raise KeyError(name)
        return getattr(self, name)


@dataclass
class _SlotPlan:
    """Precomputed row supports of one period slot, flattened for batching."""

    W: np.ndarray
    src: np.ndarray
    wvec: np.ndarray
    starts: np.ndarray


def _slot_plan(schedule: MixingSchedule, t: int) -> _SlotPlan:
    W = schedule.matrix_at(t)
    supports = [np.flatnonzero(row > 0.0) for row in W]
    src = np.concatenate(supports)
    wvec = np.concatenate([W[i, s] for i, s in enumerate(supports)])
    sizes = np.array([s.size for s in supports], dtype=np.intp)
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.intp)
    return _SlotPlan(W=W, src=src, wvec=wvec, starts=starts)


def _estimates(
    X: np.ndarray, plan: _SlotPlan, noise: NoiseModel, rng: np.random.Generator
) -> np.ndarray:
    """All n neighbor estimates at once, consuming the generator in the same
    order as n sequential ``neighbor_estimate`` calls."""
    if noise.kind == "noiseless":
        return plan.W @ X
    if noise.kind == "gaussian_channel":
        d = X.shape[1]
        Z = rng.normal(0.0, noise.sigma / np.sqrt(d), size=(plan.src.size, d))
        return plan.W @ X + np.add.reduceat(Z * plan.wvec[:, None], plan.starts, axis=0)
    Q = stochastic_quantize(X[plan.src], noise.levels, rng)
    return np.add.reduceat(Q * plan.wvec[:, None], plan.starts, axis=0)


def step_matrix(
    X: np.ndarray,
    W: np.ndarray,
    E: np.ndarray,
    grads: np.ndarray,
    alpha_t: float,
    beta_t: float,
) -> np.ndarray:
    """The update in matrix form for an explicit perturbation E:

        X(t+1) = ((1 - beta) I + beta W) X + beta E - alpha beta grad.

    The driver's incremental form X + beta (Xhat - X) - alpha beta grad is
    the same map with E = Xhat - W X; this symbolic version exists so tests
    and callers can check or replay a step from captured quantities.
    """
    X = np.asarray(X, dtype=float)
    return (
        (1.0 - beta_t) * X
        + beta_t * (W @ X)
        + beta_t * np.asarray(E, dtype=float)
        - alpha_t * beta_t * np.asarray(grads, dtype=float)
    )


def step(
    X: np.ndarray, t: int, cfg: RunConfig, rng: np.random.Generator
) -> np.ndarray:
    """Advance the full state one iteration (standalone, uncached)."""
    plan = _slot_plan(cfg.schedule, t)
    Xhat = _estimates(np.asarray(X, dtype=float), plan, cfg.noise, rng)
    H = np.stack([f.H for f in cfg.agents])
    b = np.stack([f.b for f in cfg.agents])
    G = np.einsum("nij,nj->ni", H, X) - b
    a_t = float(cfg.steps.alpha(t))
    b_t = float(cfg.steps.beta(t))
    return X + b_t * (Xhat - X) - a_t * b_t * G


def run(cfg: RunConfig, seed: int) -> RunTrace:
    """One full trajectory from X(1) = 0 through X(T), seeded."""
    rng = philox(seed)
    n, d = cfg.schedule.n, cfg.dimension
    r = cfg.schedule.r
    H = np.stack([f.H for f in cfg.agents])
    bvec = np.stack([f.b for f in cfg.agents])
    cvec = np.array([f.c for f in cfg.agents])
    x_star = np.asarray(cfg.x_star, dtype=float)

    plans = [_slot_plan(cfg.schedule, t) for t in range(1, cfg.schedule.period + 1)]

    T = cfg.T
    cols = {name: np.empty(T) for name in TRACE_COLUMNS}
    ts = np.arange(1, T + 1)
    X = np.zeros((n, d))
    max_grad_sq = 0.0
    max_state_norm = 0.0
    aborted = False
    abort_t: int | None = None
    recorded = 0

    for t in range(1, T + 1):
        HX = np.einsum("nij,nj->ni", H, X)
        G = HX - bvec
        local_values = 0.5 * np.einsum("ni,ni->n", X, HX) - np.einsum("ni,ni->n", X, bvec) + cvec
        xbar = weighted_mean(X, r)
        if cfg.problem is not None:
            pooled = cfg.problem.pooled_loss(xbar)
        else:
            pooled = float(
                sum(
                    r_i * f.value(xbar)
                    for r_i, f in zip(r, cfg.agents)
                )
            )
        i = t - 1
        cols["loss_pooled"][i] = pooled
        cols["loss_weighted"][i] = float(r @ local_values)
        cols["deviation_sq"][i] = deviation_sq(X, r)
        cols["dist_opt_sq"][i] = dist_opt_sq(X, r, x_star)
        recorded = t

        max_grad_sq = max(max_grad_sq, float(np.max(np.einsum("ni,ni->n", G, G))))
        max_state_norm = max(max_state_norm, float(np.max(np.linalg.norm(X, axis=1))))

        if t == T:
            break
        Xhat = _estimates(X, plans[(t - 1) % len(plans)], cfg.noise, rng)
        a_t = float(cfg.steps.alpha(t))
        b_t = float(cfg.steps.beta(t))
        X = X + b_t * (Xhat - X) - a_t * b_t * G
        if not np.all(np.isfinite(X)) or np.max(np.abs(X)) > DIVERGENCE_LIMIT:
            aborted = True
            abort_t = t + 1
            break

    sl = slice(0, recorded)
    return RunTrace(
        seed=seed,
        T=T,
        t=ts[sl],
        loss_pooled=cols["loss_pooled"][sl],
        loss_weighted=cols["loss_weighted"][sl],
        deviation_sq=cols["deviation_sq"][sl],
        dist_opt_sq=cols["dist_opt_sq"][sl],
        final_state=X,
        max_grad_sq=max_grad_sq,
        max_state_norm=max_state_norm,
        aborted=aborted,
        abort_t=abort_t,
    )


def _run_for_seed(args: tuple[RunConfig, int]) -> RunTrace:
    cfg, seed = args
    return run(cfg, seed)


@dataclass
class MonteCarlo:
    """Aggregate of repeated runs with seeds base_seed + k.

    ``mean`` and ``stderr`` hold one array per trace column, averaged over
    the completed (non-aborted) runs; aborted runs are kept in ``traces``
    but excluded from the statistics.
    """

    traces: list[RunTrace]
    base_seed: int
    t: np.ndarray
    mean: dict[str, np.ndarray]
    stderr: dict[str, np.ndarray]
    completed: int
    aborted: int

    def q0_estimate(self, T0: int) -> float:
        """Mean squared error of the weighted mean state at iteration T0,
        E||xbar(T0) - x*||^2, recovered from the recorded columns (the
        r-weighted distance splits exactly into consensus plus mean parts).
        """
        idx = T0 - 1
        if T0 < 1 or idx >= self.t.size:
            raise ValueError(f"T0 = {T0} outside the recorded horizon")
        vals = [
            tr.dist_opt_sq[idx] - tr.deviation_sq[idx]
            for tr in self.traces
            if not tr.aborted
        ]
        return max(float(np.mean(vals)), 0.0)


def monte_carlo(
    cfg: RunConfig, num_runs: int, base_seed: int, jobs: int = 1
) -> MonteCarlo:
    """Run ``num_runs`` seeded trajectories and aggregate their columns.

    ``jobs > 1`` distributes runs over processes; results are identical to
    the serial order because each run is a pure function of its seed.
    """
    if num_runs < 1:
        raise ValueError("need at least one run")
    seeds = [base_seed + k for k in range(num_runs)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            traces = list(pool.map(_run_for_seed, [(cfg, s) for s in seeds]))
    else:
        traces = [run(cfg, s) for s in seeds]

    good = [tr for tr in traces if not tr.aborted]
    if not good:
        raise RuntimeError(
            f"all {num_runs} runs diverged (first abort at t = {traces[0].abort_t})"
        )
    mean: dict[str, np.ndarray] = {}
    stderr: dict[str, np.ndarray] = {}
    for name in TRACE_COLUMNS:
        stacked = np.stack([tr.column(name) for tr in good])
        mean[name] = stacked.mean(axis=0)
        if len(good) > 1:
            stderr[name] = stacked.std(axis=0, ddof=1) / np.sqrt(len(good))
        else:
            stderr[name] = np.zeros(stacked.shape[1])
    return MonteCarlo(
        traces=traces,
        base_seed=base_seed,
        t=good[0].t.copy(),
        mean=mean,
        stderr=stderr,
        completed=len(good),
        aborted=len(traces) - len(good),
    )


def empirical_bounds(traces) -> tuple[float, float]:
    """(K, state_norm_bound): the largest squared local gradient and the
    largest state norm seen anywhere in the given traces."""
    traces = list(traces)
    if not traces:
        raise ValueError("need at least one trace")
    K = max(tr.max_grad_sq for tr in traces)
    norm_bound = max(tr.max_state_norm for tr in traces)
    return K, norm_bound
