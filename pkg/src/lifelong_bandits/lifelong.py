"""Sequential bandit tasks with kernel learning between tasks.

Each task runs a UCB agent for n steps. The first few steps of a task are
forced uniform draws from the candidate grid; those observations accumulate
into a pooled exploration dataset. After a task finishes, the group lasso
runs on the pool and the resulting kernel estimate is handed to the next
task's agent. Baselines run the same loop with a pinned kernel and no
forced exploration.

Exploration counts follow a residue-carrying integerization of the real
rates, so the realized counts track the prescribed totals within one draw
at every prefix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError
from .features import KernelEstimate
from .gp_ucb import GpUcb, UcbConfig
from .group_lasso import GroupCoefficients
from .seeding import STREAM_EXPLORE, substream
from .selection import design_diagnostics, design_from_tasks, learn_kernel


class ScheduleMode(str, Enum):
    DECREASING = "decreasing"
    CONSTANT = "constant"
    CUSTOM = "custom"


def schedule_rates(n: int, m: int, mode: ScheduleMode) -> np.ndarray:
    """Real-valued forced-exploration rates for m tasks of horizon n.

    decreasing: sqrt(n) / s^(1/4); constant: sqrt(n) for every task.
    """
    if n < 1 or m < 1:
        raise ValueError("need n >= 1 and m >= 1")
    mode = ScheduleMode(mode)
    s = np.arange(1, m + 1, dtype=float)
    if mode is ScheduleMode.DECREASING:
        return math.sqrt(n) / s**0.25
    if mode is ScheduleMode.CONSTANT:
        return np.full(m, math.sqrt(n))
    raise ValueError("custom schedules carry their own rates")


def integerize(rates) -> np.ndarray:
    """Round rates to integers while carrying the fractional residue.

    ñ_s = floor(n_s) + floor(r + frac(n_s)), with r then reduced to its own
    fractional part. Every prefix sum of the output stays within one of the
    corresponding prefix sum of the input.
    """
    rates = np.asarray(rates, dtype=float)
    if np.any(rates < 0):
        raise ValueError("rates must be nonnegative")
    counts = np.empty(len(rates), dtype=int)
    r = 0.0
    for i, rate in enumerate(rates):
        base = math.floor(rate)
        r += rate - base
        carry = math.floor(r)
        counts[i] = base + carry
        r -= carry
    return counts


@dataclass(frozen=True)
class ExplorationSchedule:
    mode: ScheduleMode
    rates: np.ndarray
    counts: np.ndarray
    residual: float

    @classmethod
    def build(cls, mode: ScheduleMode, n: int, m: int) -> "ExplorationSchedule":
        rates = schedule_rates(n, m, mode)
        counts = np.minimum(integerize(rates), n)
        return cls(ScheduleMode(mode), rates, counts, float(rates.sum() - counts.sum()))

    @classmethod
    def custom(cls, rates, n: int) -> "ExplorationSchedule":
        rates = np.asarray(rates, dtype=float)
        counts = np.minimum(integerize(rates), n)
        return cls(ScheduleMode.CUSTOM, rates, counts, float(rates.sum() - counts.sum()))



@dataclass
class TaskRecord:
    """One task's trace: the kernel it ran under and what happened per step."""

    task: int
    kernel: tuple[int, ...]
    explore_count: int
    actions: np.ndarray
    rewards: np.ndarray
    regrets: np.ndarray
    explored: np.ndarray
    recovered: bool | None


@dataclass
class LifelongRunRecord:
    """Full trace of a sequential run plus bookkeeping for the harness.

    ``events`` lists (task, kind) pairs: "fallback" when thresholding kept
    nothing and the full kernel took over, "solver" when the fit did not
    converge and the previous kernel was kept, "empty" when there was no
    data to fit.
    """

    seed: int
    config_digest: str
    tasks: list[TaskRecord] = field(default_factory=list)
    events: list[tuple[int, str]] = field(default_factory=list)
    final_kernel: tuple[int, ...] = ()
    max_gain_slack: float = -math.inf

    def cumulative_regret(self) -> np.ndarray:
        return np.cumsum(np.concatenate([t.regrets for t in self.tasks]))

    @property
    def final_regret(self) -> float:
        return float(self.cumulative_regret()[-1])

    def kernel_after_task(self, s: int) -> tuple[int, ...]:
        """Kernel estimate produced by the update that ran after task s."""
        if not 1 <= s <= len(self.tasks):
            raise IndexError("task out of range")
        if s == len(self.tasks):
            return self.final_kernel
        return self.tasks[s].kernel


def default_solver_factory(config: UcbConfig | None = None):
    cfg = config if config is not None else UcbConfig()

    def make(atlas, estimate):
        return GpUcb(atlas, estimate, cfg)

    return make


def _run_one_task(env, view, agent, explore_count, explore_rng, n):
    actions = np.empty(n, dtype=int)
    rewards = np.empty(n)
    regrets = np.empty(n)
    explored = np.zeros(n, dtype=bool)
    grid = env.grid
    for i in range(n):
        if i < explore_count:
            idx = int(explore_rng.integers(env.grid_size))
            explored[i] = True
        else:
            idx = agent.select(grid)
        y = view.observe(idx)
        agent.observe(idx, y, grid)
        actions[i] = idx
        rewards[i] = y
        regrets[i] = view.regret(idx)
    return actions, rewards, regrets, explored


def _padded_warm_start(coeffs: GroupCoefficients | None, m: int, dims):
    """Previous pooled fit, extended with a zero row for the newest task."""
    if coeffs is None or coeffs.matrix.shape[0] + 1 != m:
        return None
    return GroupCoefficients(
        np.vstack([coeffs.matrix, np.zeros(coeffs.matrix.shape[1])]), dims
    )


def theory_lambda(
    lam0: float,
    omega: float,
    design,
    s: int,
    *,
    support_size: int,
    beta_min: float | None = None,
) -> float:
    """Penalty weight omega_bar * kappa^2 / (8 sqrt(s)) from design diagnostics.

    kappa^2 is the certified compatibility lower bound for the assumed
    support size; omega_bar = min(omega, beta_min - omega) when the block
    floor is known, else omega. Returns ``lam0`` unchanged whenever the
    diagnostics cannot certify kappa > 0 (or omega_bar <= 0), so the policy
    degrades to the constant one instead of zeroing the penalty.
    """
    diag = design_diagnostics(design, support_size)
    if diag.kappa_lower is None:
        return lam0
    omega_bar = omega if beta_min is None else min(omega, beta_min - omega)
    if omega_bar <= 0:
        return lam0
    return omega_bar * diag.kappa_lower**2 / (8.0 * math.sqrt(s))


def run_lifelong(
    env,
    m: int,
    n: int,
    omega: float,
    lam: float,
    *,
    lam_policy: str = "constant",
    schedule_mode: ScheduleMode = ScheduleMode.DECREASING,
    meta_data: str = "exploration",
    solver_factory=None,
    seed: int = 0,
    solver_tol: float = 1e-8,
    solver_max_iter: int = 50_000,
    config_digest: str = "",
) -> LifelongRunRecord:
    """Run m tasks with forced exploration and a kernel update after each.

    Task 1 runs under the full kernel. Task s > 1 runs under the estimate
    produced after task s-1; a non-converged fit keeps the prior estimate,
    while a converged fit that selects nothing installs the full kernel.
    ``meta_data`` chooses what the fit sees: "exploration" pools only the
    forced draws, "all" pools every observation.
    """
    if lam_policy not in ("constant", "inv_sqrt", "theory"):
        raise ConfigError(f"unknown lam policy: {lam_policy!r}")
    if meta_data not in ("exploration", "all"):
        raise ConfigError(f"unknown meta data policy: {meta_data!r}")
    if not 1 <= m <= env.m:
        raise ConfigError("environment has too few tasks")
    make_agent = solver_factory if solver_factory is not None else default_solver_factory()
    atlas = env.atlas
    schedule = ExplorationSchedule.build(schedule_mode, n, m)
    record = LifelongRunRecord(seed=seed, config_digest=config_digest)
    estimate = KernelEstimate.full(atlas.p)
    pool: list[tuple[np.ndarray, np.ndarray]] = []
    warm: GroupCoefficients | None = None
    for s in range(1, m + 1):
        view = env.task_view(s)
        agent = make_agent(atlas, estimate)
        explore_count = int(schedule.counts[s - 1])
        actions, rewards, regrets, explored = _run_one_task(
            env, view, agent, explore_count, substream(seed, STREAM_EXPLORE, s), n
        )
        record.max_gain_slack = max(record.max_gain_slack, agent.max_gain_slack)
        recovered = None
        if env.support is not None:
            recovered = estimate.selected == env.support
        record.tasks.append(
            TaskRecord(
                task=s,
                kernel=estimate.selected,
                explore_count=explore_count,
                actions=actions,
                rewards=rewards,
                regrets=regrets,
                explored=explored,
                recovered=recovered,
            )
        )
        keep = slice(None) if meta_data == "all" else explored
        pool.append((env.grid[actions[keep]], rewards[keep]))
        if sum(len(y) for _, y in pool) == 0:
            record.events.append((s, "empty"))
            estimate = KernelEstimate.full(atlas.p)
            continue
        design = design_from_tasks(atlas, pool)
        if lam_policy == "constant":
            lam_s = lam
        elif lam_policy == "inv_sqrt":
            lam_s = lam / math.sqrt(s)
        else:
            # assumed support size: the truth when the environment knows it,
            # otherwise the current estimate's size (full kernel early on,
            # which keeps kappa conservative and falls back to lam)
            s_star = len(env.support) if env.support is not None else max(1, estimate.size)
            lam_s = theory_lambda(
                lam, omega, design, s,
                support_size=s_star, beta_min=getattr(env, "beta_min", None),
            )
        outcome = learn_kernel(
            design,
            omega,
            lam_s,
            tol=solver_tol,
            max_iter=solver_max_iter,
            x0=_padded_warm_start(warm, len(pool), atlas.dims),
        )
        if not outcome.report.converged:
            record.events.append((s, "solver"))
            warm = None
            continue
        warm = outcome.coeffs
        if outcome.fallback:
            record.events.append((s, "fallback"))
        estimate = outcome.estimate
    record.final_kernel = estimate.selected
    return record


def run_baseline(
    env,
    kernel: str,
    m: int,
    n: int,
    *,
    solver_factory=None,
    seed: int = 0,
    config_digest: str = "",
) -> LifelongRunRecord:
    """Run m tasks under a pinned kernel: the true support or the full set."""
    if kernel == "oracle":
        if env.support is None:
            raise ConfigError("environment does not expose a true support")
        estimate = KernelEstimate(p=env.atlas.p, selected=env.support)
    elif kernel == "full":
        estimate = KernelEstimate.full(env.atlas.p)
    else:
        raise ConfigError(f"unknown baseline kernel: {kernel!r}")
    if not 1 <= m <= env.m:
        raise ConfigError("environment has too few tasks")
    make_agent = solver_factory if solver_factory is not None else default_solver_factory()
    record = LifelongRunRecord(seed=seed, config_digest=config_digest)
    for s in range(1, m + 1):
        view = env.task_view(s)
        agent = make_agent(env.atlas, estimate)
        actions, rewards, regrets, explored = _run_one_task(
            env, view, agent, 0, substream(seed, STREAM_EXPLORE, s), n
        )
        record.max_gain_slack = max(record.max_gain_slack, agent.max_gain_slack)
        recovered = None
        if env.support is not None:
            recovered = estimate.selected == env.support
        record.tasks.append(
            TaskRecord(
                task=s,
                kernel=estimate.selected,
                explore_count=0,
                actions=actions,
                rewards=rewards,
                regrets=regrets,
                explored=explored,
                recovered=recovered,
            )
        )
    record.final_kernel = estimate.selected
    return record
