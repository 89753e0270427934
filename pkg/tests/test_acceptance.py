"""Acceptance criteria 1-10, each at its stated tolerance.

Every test records a verdict through the ``criterion`` fixture; the terminal
summary prints one PASS/FAIL line per criterion.
"""

import math
import time

import numpy as np
import pytest
from scipy import stats

from budgetmab import seeding
from budgetmab.analysis import calibrate, delta_gap, n_star, regret_bound, xi, xi_integral_bound
from budgetmab.cli import main
from budgetmab.confidence import IntervalQuery, wilson_interval
from budgetmab.environments import BanditInstance
from budgetmab.policies import ArmStats, PolicyConfig, make_policy, omega_index, omega_index_array
from budgetmab.simulator import RunConfig, checkpoint_grid, run_episode, run_experiment

pytestmark = pytest.mark.slow

RHO_GRID = (0.125, 0.25, 0.5, 1.0)
COMPETITORS = ("m_ucb", "c_ucb", "i_ucb")


def textbook_wilson(n, p, z):
    denom = 1 + z * z / n
    centre = p + z * z / (2 * n)
    adj = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    return (centre - adj) / denom, (centre + adj) / denom


@pytest.fixture(scope="module")
def desk_experiment():
    policies = [PolicyConfig("omega_ucb", rho=r) for r in RHO_GRID]
    policies += [PolicyConfig(k) for k in COMPETITORS]
    cfg = RunConfig("S-Br-10", tuple(policies), budget_multiplier=1e4, repetitions=20,
                    checkpoints=50, master_seed=0)
    start = time.perf_counter()
    curve = run_experiment(cfg)
    return curve, time.perf_counter() - start


def test_c1_wilson_recovery(criterion):
    rng = np.random.default_rng(2024)
    n = rng.integers(1, 1001, 10**4)
    mean = rng.uniform(0, 1, 10**4)
    z = rng.uniform(0, 5, 10**4)
    start = time.perf_counter()
    worst = 0.0
    for i in range(10**4):
        iv = wilson_interval(IntervalQuery(int(n[i]), float(mean[i]), float(z[i])))
        lo, hi = textbook_wilson(int(n[i]), float(mean[i]), float(z[i]))
        worst = max(worst, abs(iv.lower - lo), abs(iv.upper - hi))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 1.0
    criterion(1, "Wilson recovery", ok, f"max abs diff {worst:.2e}, {elapsed:.2f}s")
    assert ok


def test_c2_two_arm_worked_example(criterion):
    arm1 = ArmStats.from_means(1000, 0.8, 0.2)
    arm2 = ArmStats.from_means(1000, 0.1, 0.1)
    om1, om2 = omega_index(arm1, 10**4, 1.0), omega_index(arm2, 10**4, 1.0)
    # independent scalar oracle: reward upper / cost lower of the textbook interval
    z = math.sqrt(2 * math.log(10**4))
    oracle1 = textbook_wilson(1000, 0.8, z)[1] / textbook_wilson(1000, 0.2, z)[0]
    oracle2 = textbook_wilson(1000, 0.1, z)[1] / textbook_wilson(1000, 0.1, z)[0]

    def decide(cfg):
        policy = make_policy(cfg, 2, np.random.default_rng(0))
        for arm, s in ((0, arm1), (1, arm2)):
            policy.counts[arm] = s.n
            policy.reward_sum[arm] = s.reward_sum
            policy.reward_sq_sum[arm] = s.reward_sq_sum
            policy.cost_sum[arm] = s.cost_sum
            policy.cost_sq_sum[arm] = s.cost_sq_sum
        policy._initialized = True
        return policy.step(10**4)

    om_dec = decide(PolicyConfig("omega_ucb", rho=1.0))
    m_dec = decide(PolicyConfig("m_ucb", alpha=1.0))
    checks = {
        "oracle": abs(om1 - oracle1) <= 1e-3 and abs(om2 - oracle2) <= 1e-3,
        "published": abs(om1 - 5.5) <= 0.25 and abs(om2 - 2.1) <= 0.25,
        "omega picks arm 1": om_dec.arm == 0,
        "m-UCB arm 2 index": abs(m_dec.index_values[1] - 48.6) <= 0.5,
        "m-UCB picks arm 2": m_dec.arm == 1,
    }
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    criterion(2, "Two-arm worked example", ok,
              f"omega=({om1:.4f}, {om2:.4f}) m-UCB arm2={m_dec.index_values[1]:.3f}"
              + (f" failed: {failed}" if failed else ""))
    assert ok, failed


def test_c3_coverage_calibration(criterion):
    start = time.perf_counter()
    rep = calibrate(10**4, 100, 0.99, ["omega_ucb"], seeding.stream(0, seeding.ROLE_CALIBRATION))
    elapsed = time.perf_counter() - start
    rate = rep.violation_rate["omega_ucb"]
    ok = rate <= 0.015 and elapsed < 10.0
    criterion(3, "Coverage calibration", ok, f"violation rate {rate:.4f}, {elapsed:.2f}s")
    assert ok


def test_c4_no_invalid_values(criterion):
    rng = np.random.default_rng(7)
    size = 10**6
    n = rng.integers(1, 10**7, size)
    # sums of [0, 1] observations: anything in [0, n], with boundaries over-represented
    frac_r = np.where(rng.random(size) < 0.1, rng.integers(0, 2, size), rng.random(size))
    frac_c = np.where(rng.random(size) < 0.1, rng.integers(0, 2, size), rng.random(size))
    mean_r, mean_c = frac_r.astype(float), frac_c.astype(float)
    t = rng.integers(2, 10**9, size)
    omega = np.empty(size)
    for rho in (0.125, 0.25, 1.0, 4.0):
        sel = rng.random(size) < 0.5 if rho != 4.0 else np.ones(size, bool)
        omega[sel] = omega_index_array(n[sel], mean_r[sel], mean_c[sel], t[sel], rho)
    bad = int(np.isnan(omega).sum() + (omega < 0).sum())
    # also through ArmStats objects on a subsample
    for i in range(2000):
        s = ArmStats(int(n[i]), n[i] * frac_r[i], n[i] * frac_r[i], n[i] * frac_c[i],
                     n[i] * frac_c[i])
        v = omega_index(s, int(t[i]), 0.25)
        bad += int(math.isnan(v) or v < 0)
    ok = bad == 0
    criterion(4, "No invalid index values", ok, f"{bad} NaN/negative of {size + 2000}")
    assert ok


def test_c5_regret_ordering(criterion, desk_experiment):
    curve, elapsed = desk_experiment
    final = curve.final()
    labels = curve.labels
    omega = final[labels.index(PolicyConfig("omega_ucb", rho=0.25).label)]
    parts, ok = [f"omega(1/4)={omega.mean():.1f}"], elapsed < 300
    for kind in COMPETITORS:
        other = final[labels.index(PolicyConfig(kind).label)]
        p = stats.ttest_rel(omega, other, alternative="less").pvalue
        below = omega.mean() < other.mean() and p < 0.05
        ok &= bool(below)
        parts.append(f"{kind}={other.mean():.1f} (p={p:.3f})")
    criterion(5, "Regret ordering S-Br-10", ok, ", ".join(parts) + f", {elapsed:.0f}s")
    assert ok


def test_c6_sensitivity_minimum(criterion, desk_experiment):
    curve, _ = desk_experiment
    final = curve.final()
    rows = [final[curve.labels.index(PolicyConfig("omega_ucb", rho=r).label)] for r in RHO_GRID]
    means = [r.mean() for r in rows]
    best = int(np.argmin(means))
    quarter = RHO_GRID.index(0.25)
    if best == quarter:
        ok, note = True, "argmin at rho=1/4"
    else:
        p = stats.ttest_rel(rows[quarter], rows[best]).pvalue
        ok, note = p >= 0.05, f"argmin rho={RHO_GRID[best]}, paired p={p:.3f}"
    criterion(6, "Sensitivity minimum", ok,
              note + "; means " + ", ".join(f"{r}:{m:.1f}" for r, m in zip(RHO_GRID, means)))
    assert ok


def test_c7_logarithmic_shape(criterion, desk_experiment):
    curve, _ = desk_experiment
    mean = curve.mean()[curve.labels.index(PolicyConfig("omega_ucb", rho=1.0).label)]
    cps = curve.checkpoints
    last = (cps >= cps[-1] / 10) & (cps <= cps[-1])
    fit = stats.linregress(np.log(cps[last]), mean[last])
    r2 = fit.rvalue**2
    ok = r2 >= 0.95
    criterion(7, "Logarithmic regret shape", ok,
              f"R^2={r2:.4f} over {int(last.sum())} checkpoints, slope {fit.slope:.1f}")
    assert ok


def test_c8_bound_validity(criterion):
    inst = BanditInstance.bernoulli([0.8, 0.1], [0.2, 0.1])
    multiplier, reps = 1e4, 20
    budget = multiplier * float(inst.mu_c.min())
    grid = checkpoint_grid(multiplier, 10)
    cfg = PolicyConfig("omega_ucb", rho=1.0)
    finals = []
    for rep in range(reps):
        policy = make_policy(cfg, 2, seeding.stream(0, rep, seeding.ROLE_DECISIONS))
        res = run_episode(inst, policy, budget, grid, seeding.stream(0, rep, seeding.ROLE_OUTCOMES))
        finals.append(res.final_regret)
    measured = float(np.mean(finals))
    bound = regret_bound(inst, budget, 1.0)
    omitted_order = budget / inst.mu_c.min() * math.exp(-0.5 * budget * inst.mu_c.min())
    ok = measured <= bound.bound_total and omitted_order < 1
    criterion(8, "Bound validity", ok,
              f"measured {measured:.1f} <= bound {bound.bound_total:.1f} (B={budget:g})")
    assert ok


def test_c9_theory_scalars(criterion):
    d = delta_gap(0.8, 0.2, 0.1, 0.1)
    ns = n_star(10**4, 1.0, d, 0.1, 0.1)
    x = xi(3, 2, 1.0)
    # brute-force scalar evaluations, straight from the definitions
    d_ref = 3.0 / (3.0 + 1.0 / 0.1)
    ns_ref = 8.0 * math.log(10**4) * max(0.1 / 0.9, 0.9 / 0.1) / d_ref**2
    x_ref = (3 - 2) * (2 - math.sqrt(1 - 3 ** -1.0)) - math.sqrt(1 - 3 ** -1.0)
    scalars_ok = (abs(d - d_ref) <= 1e-6 and abs(ns - ns_ref) <= 1e-6 and abs(x - x_ref) <= 1e-6
                  and abs(d - 3 / 13) <= 1e-6 and abs(ns - 12452.38) <= 0.01
                  and abs(x - 0.36700) <= 1e-5)
    violations = 0
    for tau in np.unique(np.geomspace(4, 2 * 10**4, 10).astype(int)):
        for rho in np.geomspace(0.05, 4.0, 10):
            violations += xi(int(tau), 3, float(rho)) > xi_integral_bound(int(tau), 3, float(rho))
    ok = scalars_ok and violations == 0
    criterion(9, "Theory scalars", ok,
              f"delta={d:.6f} n*={ns:.4f} xi={x:.6f}; {violations} bound violations on 100 points")
    assert ok


def test_c10_determinism(criterion, tmp_path):
    cfg = tmp_path / "exp.yaml"
    cfg.write_text(
        "schema_version: 1\n"
        "runs:\n"
        "  - setting: S-GBr-5\n"
        "    repetitions: 3\n"
        "    budget_multiplier: 300\n"
        "    checkpoints: 10\n"
        "    master_seed: 11\n"
        "    policies: [{kind: omega_ucb}, {kind: omega_star_ucb}, {kind: bts}, {kind: m_ucb}]\n")
    a, b = tmp_path / "a", tmp_path / "b"
    codes = (main(["run", str(cfg), "--out", str(a)]), main(["run", str(cfg), "--out", str(b)]))
    names = sorted(p.name for p in a.iterdir())
    same = all((a / n).read_bytes() == (b / n).read_bytes() for n in names)
    ok = codes == (0, 0) and same and sorted(p.name for p in b.iterdir()) == names
    criterion(10, "Determinism", ok, f"{len(names)} files byte-identical={same}")
    assert ok
