"""Acceptance gate: nine end-to-end checks, one test per criterion.

Each test prints a single ``[criterion N] PASS/FAIL`` line (visible under
``pytest -s``, and in the captured output of any failure). The checks cover
solver-versus-grid-oracle agreement, support recovery at benchmark scale,
primal/dual posterior equivalence, the information-gain bound, the regret
ordering study, exploration-schedule laws, federated vote semantics,
run determinism, and the environment's sampling contracts.
"""

import time

import numpy as np
import pytest

from lifelong_bandits.environment import (
    SyntheticEnvironment,
    SyntheticSpec,
    sample_coefficients,
    sample_support,
)
from lifelong_bandits.features import BasisFamily, FeatureAtlas
from lifelong_bandits.federated import ClientVote, VoteLedger, run_federated, server_vote
from lifelong_bandits.gp_ucb import PosteriorState, UcbConfig
from lifelong_bandits.group_lasso import (
    PooledDesign,
    fit_group_lasso,
    kkt_residuals,
    pooled_loss,
)
from lifelong_bandits.harness import build_config, parse_config, run_experiment
from lifelong_bandits.lifelong import (
    ScheduleMode,
    default_solver_factory,
    integerize,
    run_baseline,
    run_lifelong,
    schedule_rates,
)
from lifelong_bandits.seeding import STREAM_NOISE, substream
from lifelong_bandits.selection import recovery_trial


def _report(criterion: int, ok: bool, detail: str) -> None:
    print(f"[criterion {criterion}] {'PASS' if ok else 'FAIL'} {detail}")


# ---------------------------------------------------------------------------
# criterion 1: solver objective matches a dense grid oracle on small problems


def _loss_on_grid(design: PooledDesign, lam: float, B: np.ndarray) -> np.ndarray:
    """Pooled objective at many coefficient vectors, task-major layout."""
    m, d, N = design.m, design.d, design.total_rows
    quad = np.zeros(B.shape[0])
    for s in range(m):
        beta_s = B[:, s * d : (s + 1) * d]
        resid = design.rewards[s][None, :] - beta_s @ design.features[s].T
        quad += np.sum(resid * resid, axis=1)
    pen = np.zeros(B.shape[0])
    for j in range(d):
        cols = B[:, j::d] if d > 1 else B
        pen += np.sqrt(np.sum(cols * cols, axis=1))
    return quad / N + lam * pen


def _dense_grid_min(design: PooledDesign, lam: float) -> float:
    """Brute-force minimum over [-3,3]^(m*d) at step 2e-3; m*d <= 2 only."""
    step, bound = 2e-3, 3.0
    axis = np.arange(-bound, bound + step / 2, step)
    md = design.m * design.d
    if md == 1:
        return float(np.min(_loss_on_grid(design, lam, axis[:, None])))
    best = np.inf
    for chunk in np.array_split(axis, 64):
        u, v = np.meshgrid(chunk, axis, indexing="ij")
        B = np.stack([u.ravel(), v.ravel()], axis=1)
        best = min(best, float(np.min(_loss_on_grid(design, lam, B))))
    return best


def _draw_instance(rng: np.random.Generator, m: int, p: int):
    """One small random problem with bounded quadratic curvature."""
    features, rewards = [], []
    for _ in range(m):
        n_s = int(rng.integers(2, 9))
        phi = rng.standard_normal((n_s, p))
        # cap each task's spectral norm so the pooled Hessian stays <= 1;
        # keeps the grid's 1e-3 rounding error well inside the tolerance
        cap = np.sqrt(n_s / 2.0)
        top = np.linalg.norm(phi, 2)
        if top > cap:
            phi *= cap / top
        beta = rng.standard_normal(p) * (rng.random(p) < 0.7)
        rewards.append(phi @ beta + 0.1 * rng.standard_normal(n_s))
        features.append(phi)
    lam = float(rng.uniform(0.05, 0.6))
    return PooledDesign(features, rewards, (1,) * p), lam


def test_criterion_1_solver_matches_dense_grid_oracle():
    t0 = time.time()
    rng = np.random.default_rng(20260822)
    shapes = [(1, 1)] * 4 + [(1, 2)] * 5 + [(2, 1)] * 5
    while len(shapes) < 50:
        shapes.append((int(rng.integers(1, 4)), int(rng.integers(1, 5))))
    worst_gap, worst_kkt = 0.0, 0.0
    for m, p in shapes:
        for _ in range(50):  # redraw until the minimizer is grid-interior
            design, lam = _draw_instance(rng, m, p)
            coeffs, report = fit_group_lasso(design, lam, tol=1e-10)
            if np.max(np.abs(coeffs.values)) < 2.5:
                break
        assert report.converged
        worst_kkt = max(worst_kkt, float(np.max(kkt_residuals(design, coeffs, lam))))
        if m * p <= 2:
            gap = abs(pooled_loss(design, coeffs, lam) - _dense_grid_min(design, lam))
            worst_gap = max(worst_gap, gap)
    elapsed = time.time() - t0
    ok = worst_gap <= 1e-6 and worst_kkt <= 1e-6 and elapsed < 60
    detail = (
        f"grid gap {worst_gap:.2e} (tol 1e-06), kkt {worst_kkt:.2e} (tol 1e-06), "
        f"{elapsed:.1f}s over 50 instances"
    )
    _report(1, ok, detail)
    assert ok, detail


# ---------------------------------------------------------------------------
# criterion 2: exact support recovery at benchmark scale


def test_criterion_2_support_recovery_at_scale():
    t0 = time.time()
    spec = SyntheticSpec()
    hits30 = sum(
        recovery_trial(spec, 30, 10, 0.25, 0.25, seed).exact for seed in range(20)
    )
    hits5 = sum(
        recovery_trial(spec, 5, 10, 0.25, 0.25, seed).exact for seed in range(20)
    )
    elapsed = time.time() - t0
    ok = hits30 >= 18 and hits30 > hits5 and elapsed < 300
    detail = (
        f"m=30 recovered {hits30}/20 (need >=18), m=5 recovered {hits5}/20, "
        f"{elapsed:.1f}s"
    )
    _report(2, ok, detail)
    assert ok, detail


# ---------------------------------------------------------------------------
# criterion 3: primal posterior equals the kernel-space (dual) formulas


def _dual_mean_var(Phi: np.ndarray, y: np.ndarray, phi: np.ndarray, lam: float):
    K = Phi @ Phi.T
    kx = Phi @ phi
    A = K + lam * lam * np.eye(len(y))
    sol = np.linalg.solve(A, np.stack([y, kx], axis=1))
    return float(kx @ sol[:, 0]), float(phi @ phi - kx @ sol[:, 1])


def test_criterion_3_primal_dual_posterior_equivalence():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        dim = int(rng.integers(1, 9))
        lam = float(rng.uniform(0.05, 2.0))
        n_obs = int(rng.integers(1, 21))
        Phi = rng.standard_normal((n_obs, dim))
        y = rng.standard_normal(n_obs)
        state = PosteriorState(dim, lam)
        for i in range(n_obs):
            state.observe(Phi[i], float(y[i]))
        phi = rng.standard_normal(dim)
        mean_p, var_p = state.mean_var(phi)
        mean_d, var_d = _dual_mean_var(Phi, y, phi, lam)
        worst = max(worst, abs(mean_p - mean_d), abs(var_p - var_d))
    ok = worst <= 1e-8
    detail = f"worst primal/dual deviation {worst:.2e} over 100 states (tol 1e-08)"
    _report(3, ok, detail)
    assert ok, detail


# ---------------------------------------------------------------------------
# criteria 4 and 5 share one 20-seed regret study


@pytest.fixture(scope="module")
def regret_study():
    spec = SyntheticSpec()
    factory = default_solver_factory(UcbConfig(nu=10.0, lam=0.1))
    m, n = 20, 100
    records = {"oracle": [], "naive": [], "learned": [], "federated": []}
    t0 = time.time()
    for seed in range(20):
        env = SyntheticEnvironment(spec, n_tasks=m, master_seed=seed)
        records["oracle"].append(
            run_baseline(env, "oracle", m, n, solver_factory=factory, seed=seed)
        )
        records["naive"].append(
            run_baseline(env, "full", m, n, solver_factory=factory, seed=seed)
        )
        records["learned"].append(
            run_lifelong(
                env, m, n, 0.25, 0.5,
                lam_policy="inv_sqrt", solver_factory=factory, seed=seed,
            )
        )
        records["federated"].append(
            run_federated(env, m, n, 0.25, 0.2, 0.25, solver_factory=factory, seed=seed)
        )
    records["elapsed"] = time.time() - t0
    return records


def test_criterion_4_information_gain_bound(regret_study):
    slack = max(
        rec.max_gain_slack
        for key in ("oracle", "naive", "learned", "federated")
        for rec in regret_study[key]
    )
    ok = slack <= 1e-9
    detail = f"max realized-gain slack {slack:.2e} over 80 runs (tol 1e-09)"
    _report(4, ok, detail)
    assert ok, detail


def _mean_final(records) -> float:
    return float(np.mean([rec.final_regret for rec in records]))


def _mean_last3(records) -> float:
    return float(
        np.mean([sum(t.regrets.sum() for t in rec.tasks[-3:]) for rec in records])
    )


def test_criterion_5_regret_ordering(regret_study):
    oracle = _mean_final(regret_study["oracle"])
    naive = _mean_final(regret_study["naive"])
    learned = _mean_final(regret_study["learned"])
    fed = _mean_final(regret_study["federated"])
    l3_oracle = _mean_last3(regret_study["oracle"])
    l3_learned = _mean_last3(regret_study["learned"])
    elapsed = regret_study["elapsed"]

    order_ok = oracle < learned < naive
    within_ok = abs(l3_learned - l3_oracle) <= 0.25 * l3_oracle
    fed_ok = learned < fed < naive
    time_ok = elapsed < 1200
    ok = order_ok and within_ok and fed_ok and time_ok
    detail = (
        f"final means oracle {oracle:.0f} < learned {learned:.0f} < naive {naive:.0f} "
        f"[{'ok' if order_ok else 'VIOLATED'}]; last-3 learned {l3_learned:.1f} vs "
        f"oracle {l3_oracle:.1f}, ratio {l3_learned / l3_oracle:.2f} "
        f"[{'ok' if within_ok else 'outside 25%'}]; federated {fed:.0f} between "
        f"[{'ok' if fed_ok else 'NO'}]; {elapsed:.0f}s"
    )
    _report(5, ok, detail)
    assert ok, detail


# ---------------------------------------------------------------------------
# criterion 6: exploration schedule laws


def test_criterion_6_schedule_laws():
    hand = integerize(np.full(4, 2.5))
    hand_ok = hand.tolist() == [2, 3, 2, 3]

    rng = np.random.default_rng(11)
    prefix_worst = 0.0
    for _ in range(200):
        rates = rng.uniform(0.0, 9.0, size=int(rng.integers(1, 40)))
        counts = integerize(rates)
        dev = np.abs(np.cumsum(counts) - np.cumsum(rates))
        prefix_worst = max(prefix_worst, float(dev.max()))
    prefix_ok = prefix_worst < 1.0

    rate_worst = 0.0
    for n, m in ((100, 20), (9, 7), (400, 1)):
        got = schedule_rates(n, m, ScheduleMode.DECREASING)
        want = np.sqrt(n) / np.arange(1, m + 1) ** 0.25
        rate_worst = max(rate_worst, float(np.max(np.abs(got - want))))
    rate_ok = rate_worst <= 1e-12

    ok = hand_ok and prefix_ok and rate_ok
    detail = (
        f"hand trace {hand.tolist()} [{'ok' if hand_ok else 'WRONG'}]; "
        f"worst prefix deviation {prefix_worst:.3f} (<1); "
        f"rate error {rate_worst:.1e} (tol 1e-12)"
    )
    _report(6, ok, detail)
    assert ok, detail


# ---------------------------------------------------------------------------
# criterion 7: federated vote semantics


def _ledger_from(votes, p, alpha):
    ledger = VoteLedger(p, alpha)
    for k, idx in enumerate(votes):
        ledger.add(ClientVote(client=k + 1, indices=tuple(idx), explore_count=1))
    return ledger


def test_criterion_7_vote_semantics():
    rng = np.random.default_rng(13)

    votes = [rng.choice(8, size=rng.integers(1, 5), replace=False) + 1
             for _ in range(6)]
    union = tuple(sorted({int(j) for v in votes for j in v}))
    inter = tuple(sorted(set(int(j) for j in votes[0]).intersection(
        *[set(int(j) for j in v) for v in votes[1:]])))
    union_ok = server_vote(_ledger_from(votes, 8, 0.0)) == union
    inter_ok = server_vote(_ledger_from(votes, 8, 1.0)) == inter

    hand_ok = server_vote(_ledger_from([(1,), (2,), (1,), (1,)], 2, 0.5)) == (1,)

    perm_ok = True
    for _ in range(1000):
        p = int(rng.integers(1, 10))
        alpha = float(rng.random())
        vs = [rng.choice(p, size=rng.integers(0, p + 1), replace=False) + 1
              for _ in range(int(rng.integers(1, 8)))]
        base = server_vote(_ledger_from(vs, p, alpha))
        order = rng.permutation(len(vs))
        if server_vote(_ledger_from([vs[i] for i in order], p, alpha)) != base:
            perm_ok = False
            break

    ok = union_ok and inter_ok and hand_ok and perm_ok
    detail = (
        f"union [{'ok' if union_ok else 'NO'}], intersection "
        f"[{'ok' if inter_ok else 'NO'}], hand count {{1}} "
        f"[{'ok' if hand_ok else 'NO'}], 1000-ledger permutation invariance "
        f"[{'ok' if perm_ok else 'BROKEN'}]"
    )
    _report(7, ok, detail)
    assert ok, detail


# ---------------------------------------------------------------------------
# criterion 8: determinism and config digest stability


def test_criterion_8_determinism_and_digests(tmp_path):
    pairs = {
        "p": "6", "support_size": "2", "norm_bound": "5.0", "m": "2", "n": "8",
        "grid": "30", "seeds": "0,1", "out": str(tmp_path / "run"),
    }
    config = build_config("lifelong", pairs)
    run_experiment(config)
    first = {
        f.name: f.read_bytes() for f in sorted((tmp_path / "run").iterdir())
        if f.name.startswith("trace_")
    }
    run_experiment(config)
    second = {
        f.name: f.read_bytes() for f in sorted((tmp_path / "run").iterdir())
        if f.name.startswith("trace_")
    }
    traces_ok = first and first == second

    text = config.serialize()
    lines = text.splitlines()
    reordered = "\n".join(["# shuffled copy"] + lines[::-1])
    digest_ok = parse_config(reordered).digest() == config.digest()

    ok = bool(traces_ok) and digest_ok
    detail = (
        f"{len(first)} trace files byte-identical across reruns "
        f"[{'ok' if traces_ok else 'NO'}]; digest stable under reordering "
        f"[{'ok' if digest_ok else 'NO'}]"
    )
    _report(8, ok, detail)
    assert ok, detail


# ---------------------------------------------------------------------------
# criterion 9: environment sampling contracts


def test_criterion_9_environment_contracts():
    spec = SyntheticSpec()
    atlas = FeatureAtlas(BasisFamily.COSINE_1D, spec.p)
    rng = np.random.default_rng(17)
    min_block, max_norm = np.inf, 0.0
    for _ in range(10_000):
        support = sample_support(spec, rng)
        beta = sample_coefficients(spec, support, atlas, rng)
        blocks = [np.linalg.norm(beta[atlas.group_slice(j)]) for j in support]
        min_block = min(min_block, min(blocks))
        max_norm = max(max_norm, float(np.linalg.norm(beta)))
    norms_ok = min_block >= spec.beta_min - 1e-12 and max_norm <= spec.norm_bound + 1e-9

    env = SyntheticEnvironment(spec, n_tasks=1, master_seed=3)
    X = np.tile(env.grid[5], (100_000, 1))
    y = env.reward_continuous(1, X, substream(3, STREAM_NOISE, 1))
    var = float(np.var(y - env.values[5, 0], ddof=1))
    noise_ok = abs(var - spec.noise**2) <= 0.05 * spec.noise**2

    ok = norms_ok and noise_ok
    detail = (
        f"min block norm {min_block:.3f} (>=0.5), max total norm {max_norm:.3f} "
        f"(<=10) over 1e4 draws [{'ok' if norms_ok else 'NO'}]; noise variance "
        f"{var:.5f} vs {spec.noise**2:.3f} [{'ok' if noise_ok else 'NO'}]"
    )
    _report(9, ok, detail)
    assert ok, detail
