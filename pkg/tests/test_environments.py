import numpy as np
import pytest

from budgetmab.environments import (
    GBR_SUPPORT,
    ArmSampler,
    ArmSpec,
    BanditInstance,
    Bernoulli,
    Beta,
    DatasetError,
    GeneralizedBernoulli,
    campaign_instances,
    gen_synthetic,
    load_campaigns,
    parse_setting_id,
    pull,
    read_campaign_table,
)

HEADER = "ad_id,xyz_campaign_id,gender,age,Clicks,Spent,Approved_Conversion\n"
# group M/30-34: per-click (reward, cost) = (0.2, 0.5), (0.05, 1.0), (0.5, 0.25); ad 4 has no clicks
FIXTURE = HEADER + (
    "1,916,M,30-34,10,5.0,2\n"
    "2,916,M,30-34,20,20.0,1\n"
    "3,916,M,30-34,4,1.0,2\n"
    "4,916,M,30-34,0,0.0,0\n"
    "5,916,F,30-34,7,3.5,1\n"
)


@pytest.fixture
def campaign_csv(tmp_path):
    path = tmp_path / "ads.csv"
    path.write_text(FIXTURE)
    return path


@pytest.mark.parametrize("setting", ["S-Br", "S-GBr", "S-Bt"])
def test_seeded_determinism(setting):
    a = gen_synthetic(setting, 10, np.random.default_rng(0))
    b = gen_synthetic(setting, 10, np.random.default_rng(0))
    assert a == b
    np.testing.assert_array_equal(a.mu_r, b.mu_r)
    ra, rb = np.random.default_rng(3), np.random.default_rng(3)
    assert [pull(a, k % 10, ra) for k in range(50)] == [pull(b, k % 10, rb) for k in range(50)]


def test_bernoulli_setting_means():
    inst = gen_synthetic("S-Br", 10, np.random.default_rng(1))
    for arm, r, c in zip(inst.arms, inst.mu_r, inst.mu_c):
        assert isinstance(arm.reward_dist, Bernoulli)
        assert arm.reward_dist.p == r and arm.cost_dist.p == c


def test_beta_setting_means():
    inst = gen_synthetic("S-Bt", 20, np.random.default_rng(2))
    for arm in inst.arms:
        for d in (arm.reward_dist, arm.cost_dist):
            assert isinstance(d, Beta)
            assert d.mean == pytest.approx(d.a / (d.a + d.b), abs=1e-12)
    assert (inst.mu_c >= 1e-6).all()


def test_gbr_weights_and_support():
    inst = gen_synthetic("S-GBr", 10, np.random.default_rng(3))
    rng = np.random.default_rng(4)
    for arm in inst.arms:
        w = np.asarray(arm.reward_dist.weights)
        assert (w >= 0).all() and abs(w.sum() - 1) <= 1e-12
        assert arm.reward_dist.mean == pytest.approx(float(np.dot(w, GBR_SUPPORT)), abs=1e-12)
        draws = arm.cost_dist.sample(rng, 1000)
        assert set(np.unique(draws)) <= set(GBR_SUPPORT)


def test_gaps_consistent():
    inst = gen_synthetic("S-Br", 50, np.random.default_rng(5))
    ratios = inst.mu_r / inst.mu_c
    assert inst.best_arm == int(np.argmax(ratios))
    np.testing.assert_allclose(inst.gaps, ratios.max() - ratios, atol=1e-12)
    assert inst.gaps[inst.best_arm] == 0 and (inst.gaps >= 0).all()


def test_degenerate_cost_always_one():
    inst = BanditInstance.bernoulli([0.5, 0.5], [1.0, 0.5])
    rng = np.random.default_rng(0)
    assert all(pull(inst, 0, rng)[1] == 1.0 for _ in range(100))


@pytest.mark.parametrize("p", [0.05, 0.3, 0.5, 0.9])
def test_bernoulli_pull_mean_clt(p):
    inst = BanditInstance.bernoulli([p, 0.5], [0.5, 0.5])
    sampler = ArmSampler(inst, np.random.default_rng(7))
    n = 10**5
    mean = sum(sampler.pull(0)[0] for _ in range(n)) / n
    assert abs(mean - p) <= 4 * np.sqrt(p * (1 - p) / n)


def test_invalid_instances():
    with pytest.raises(ValueError):
        BanditInstance.bernoulli([0.5, 0.5], [0.0, 0.5])
    with pytest.raises(ValueError):
        BanditInstance.bernoulli([0.5], [0.5])
    with pytest.raises(ValueError):
        GeneralizedBernoulli((0.5, 0.5, 0.1, 0.0, 0.0))


def test_parse_setting_id():
    assert parse_setting_id("S-Br-10") == ("S-Br", 10)
    assert parse_setting_id("S-GBr") == ("S-GBr", None)
    assert parse_setting_id("FB-Bt") == ("FB-Bt", None)
    for bad in ("S-Xx-10", "FB-Br-3", "S-Br-1"):
        with pytest.raises(ValueError):
            parse_setting_id(bad)


def test_campaign_fixture_hand_computed(campaign_csv):
    groups = read_campaign_table(campaign_csv)
    assert sorted(groups) == [("F", "30-34"), ("M", "30-34")]
    assert len(groups[("M", "30-34")]) == 3
    (inst,) = load_campaigns(campaign_csv, "bernoulli")
    np.testing.assert_allclose(inst.mu_r, [0.4, 0.1, 1.0], atol=1e-15)
    np.testing.assert_allclose(inst.mu_c, [0.5, 1.0, 0.25], atol=1e-15)
    assert inst.mu_c.max() == 1.0
    assert inst.setting_id == "FB-Br[M/30-34]"


def test_campaign_beta_mode(campaign_csv):
    (inst,) = load_campaigns(campaign_csv, "beta", np.random.default_rng(0))
    np.testing.assert_allclose(inst.mu_r, [0.4, 0.1, 1.0], atol=1e-12)
    np.testing.assert_allclose(inst.mu_c, [0.5, 1.0, 0.25], atol=1e-12)
    # expectation 1 has no Beta representative
    assert isinstance(inst.arms[2].reward_dist, Bernoulli)


def test_beta_parameterization_identity():
    b = 3.0
    mu = 0.25
    d = Beta(b * mu / (1 - mu), b)
    assert d.a == pytest.approx(1.0) and d.mean == pytest.approx(0.25, abs=1e-15)


def test_campaign_grouping_configurable(campaign_csv):
    groups = read_campaign_table(campaign_csv, group_by=("xyz_campaign_id",))
    assert list(groups) == [("916",)]
    insts = campaign_instances(groups, "bernoulli")
    assert insts[0].n_arms == 4


def test_dataset_errors(tmp_path):
    with pytest.raises(DatasetError):
        read_campaign_table(tmp_path / "missing.csv")
    bad = tmp_path / "bad.csv"
    bad.write_text("ad_id,gender,age,Clicks\n1,M,30-34,3\n")
    with pytest.raises(DatasetError, match="missing columns"):
        read_campaign_table(bad)
    bad.write_text(HEADER + "1,916,M,30-34,ten,5.0,2\n")
    with pytest.raises(DatasetError, match=":2:"):
        read_campaign_table(bad)
    bad.write_text(HEADER + "1,916,M,30-34,10,5.0,2\n")
    with pytest.raises(DatasetError, match="no campaign"):
        load_campaigns(bad)


def test_arm_spec_means():
    spec = ArmSpec(Beta(2.0, 6.0), GeneralizedBernoulli((0.0, 0.0, 1.0, 0.0, 0.0)))
    assert spec.mu_r == pytest.approx(0.25) and spec.mu_c == pytest.approx(0.5)
