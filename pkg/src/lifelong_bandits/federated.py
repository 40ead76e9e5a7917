"""Federated kernel learning: local fits, index-only votes, majority merge.

Each client fits a single-task group lasso on its own exploration data and
uploads nothing but the surviving group indices. The server keeps per-index
counters and selects the indices endorsed by at least a fraction alpha of
the clients seen so far. The counter merge is commutative, so vote order
never matters, and the aggregation functions accept votes and ledgers only:
raw observations cannot cross the client boundary by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .features import FeatureAtlas, KernelEstimate
from .lifelong import (
    ExplorationSchedule,
    LifelongRunRecord,
    ScheduleMode,
    TaskRecord,
    default_solver_factory,
)
from .seeding import STREAM_EXPLORE, substream
from .selection import design_from_tasks, learn_kernel


@dataclass(frozen=True)
class ClientVote:
    """One client's uplink: its id, the endorsed indices, and fit metadata.

    ``indices`` and ``client`` are the complete wire content; the counts and
    flag exist for local logs only.
    """

    client: int
    indices: tuple[int, ...]
    explore_count: int
    failed: bool = False

    def __post_init__(self):
        ordered = tuple(sorted(set(int(j) for j in self.indices)))
        if ordered != self.indices:
            object.__setattr__(self, "indices", ordered)

    def wire_format(self) -> str:
        return f"{self.client}:{','.join(str(j) for j in self.indices)}"


class VoteLedger:
    """Per-index endorsement counters with an alpha-fraction selection rule."""

    def __init__(self, p: int, alpha: float) -> None:
        if p < 1:
            raise ConfigError("need at least one group")
        if not 0.0 <= alpha <= 1.0:
            raise ConfigError("alpha must lie in [0, 1]")
        self.p = p
        self.alpha = float(alpha)
        self.counts = np.zeros(p, dtype=int)
        self.clients_seen = 0

    def add(self, vote: ClientVote) -> None:
        for j in vote.indices:
            if not 1 <= j <= self.p:
                raise ConfigError(f"vote index {j} outside 1..{self.p}")
            self.counts[j - 1] += 1
        self.clients_seen += 1

    def selected(self) -> tuple[int, ...]:
        """Indices endorsed by at least alpha of the clients seen.

        The comparison is non-strict, and an index with zero endorsements is
        never selected, so alpha=0 yields exactly the union of the votes and
        alpha=1 exactly their intersection.
        """
        if self.clients_seen < 1:
            return ()
        need = self.clients_seen * self.alpha
        keep = (self.counts >= need) & (self.counts >= 1)
        return tuple(int(j) + 1 for j in np.flatnonzero(keep))


def server_vote(ledger: VoteLedger) -> tuple[int, ...]:
    return ledger.selected()


def client_fit(
    atlas: FeatureAtlas,
    X,
    y,
    lam: float,
    omega: float,
    *,
    client: int = 0,
    tol: float = 1e-8,
    max_iter: int = 50_000,
) -> ClientVote:
    """Fit one client's data alone and return its index vote.

    The threshold is a plain strict cut at omega on the group norms (the
    single-task case of the pooled rule). A non-converged fit returns an
    empty vote with the failure flag set rather than raising.
    """
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise DataError("client has no exploration data")
    outcome = learn_kernel(
        design_from_tasks(atlas, [(X, y)]), omega, lam, tol=tol, max_iter=max_iter
    )
    if not outcome.report.converged:
        return ClientVote(client=client, indices=(), explore_count=len(y), failed=True)
    indices = () if outcome.fallback else outcome.estimate.selected
    return ClientVote(client=client, indices=indices, explore_count=len(y))


@dataclass
class FederatedRunRecord(LifelongRunRecord):
    votes: list[ClientVote] = field(default_factory=list)
    server_sets: list[tuple[int, ...]] = field(default_factory=list)


def run_federated(
    env,
    m: int,
    n: int,
    omega: float,
    lam: float,
    alpha: float,
    *,
    solver_factory=None,
    seed: int = 0,
    solver_tol: float = 1e-8,
    solver_max_iter: int = 50_000,
    config_digest: str = "",
) -> FederatedRunRecord:
    """Run m client tasks with voting between exploration and exploitation.

    Every client explores for the constant integerized sqrt(n) prefix, fits
    its own data, and votes. The server set after the client's own vote
    determines the kernel for that same client's exploitation phase, with
    the buffered exploration observations replayed into the fresh agent so
    the posterior sees the full task history.
    """
    if not 1 <= m <= env.m:
        raise ConfigError("environment has too few tasks")
    make_agent = solver_factory if solver_factory is not None else default_solver_factory()
    atlas = env.atlas
    grid = env.grid
    schedule = ExplorationSchedule.build(ScheduleMode.CONSTANT, n, m)
    ledger = VoteLedger(atlas.p, alpha)
    record = FederatedRunRecord(seed=seed, config_digest=config_digest)
    for s in range(1, m + 1):
        view = env.task_view(s)
        rng = substream(seed, STREAM_EXPLORE, s)
        explore_count = min(int(schedule.counts[s - 1]), n)
        drawn = [int(rng.integers(env.grid_size)) for _ in range(explore_count)]
        drawn_y = [view.observe(idx) for idx in drawn]
        if explore_count:
            vote = client_fit(
                atlas,
                grid[drawn],
                drawn_y,
                lam,
                omega,
                client=s,
                tol=solver_tol,
                max_iter=solver_max_iter,
            )
        else:
            vote = ClientVote(client=s, indices=(), explore_count=0)
        if vote.failed:
            record.events.append((s, "solver"))
        ledger.add(vote)
        selected = server_vote(ledger)
        if selected:
            estimate = KernelEstimate(p=atlas.p, selected=selected)
        else:
            estimate = KernelEstimate.full(atlas.p)
            record.events.append((s, "fallback"))
        agent = make_agent(atlas, estimate)
        actions = np.empty(n, dtype=int)
        rewards = np.empty(n)
        regrets = np.empty(n)
        explored = np.zeros(n, dtype=bool)
        for i, (idx, y) in enumerate(zip(drawn, drawn_y)):
            agent.observe(idx, y, grid)
            actions[i] = idx
            rewards[i] = y
            regrets[i] = view.regret(idx)
            explored[i] = True
        for i in range(explore_count, n):
            idx = agent.select(grid)
            y = view.observe(idx)
            agent.observe(idx, y, grid)
            actions[i] = idx
            rewards[i] = y
            regrets[i] = view.regret(idx)
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
        record.votes.append(vote)
        record.server_sets.append(selected)
    record.final_kernel = record.tasks[-1].kernel
    return record
