import json

import pytest

from patchwork import economics, sim, theorems
from patchwork.errors import ConfigError


def test_honest_thirty_days():
    report = sim.run_scenario(theorems.demo_scenario(1).model_copy(update={"days": 30}))
    trial = report["body"]["trials"][0]
    assert trial["days_run"] == 30
    assert trial["fraud_events"] == 0 and not trial["value_collapsed"]
    assert trial["custody_ok"] and trial["fee_balance"] == pytest.approx(0, abs=1e-9)
    assert report["body"]["aggregate"]["payments"]["attempted"] > 0


def test_swap_attack_report():
    trial = sim.run_scenario(theorems.swap_scenario(trials=1, seed=3))["body"]["trials"][0]
    swap = trial["swap"]
    assert swap["completed"] and swap["violations"] == 0
    assert swap["original_accepts"] == 0 and swap["copy_accepts"] > 0
    assert any(e["kind"] == "swap" for e in trial["events"])


def test_same_seed_same_body():
    config = theorems.demo_scenario(5)
    assert sim.body_json(sim.run_scenario(config)) == sim.body_json(sim.run_scenario(config))


def test_different_seed_different_body():
    a = sim.run_scenario(theorems.demo_scenario(5))
    b = sim.run_scenario(theorems.demo_scenario(6))
    assert sim.body_json(a) != sim.body_json(b)


def test_single_trial_campaign_matches_run():
    config = theorems.demo_scenario(9)
    run = sim.run_scenario(config)["body"]
    camp = sim.run_campaign(config, trials=1)["body"]
    assert run["trials"] == camp["trials"]
    assert run["aggregate"] == camp["aggregate"]


def test_parallel_campaign_matches_serial():
    config = theorems.demo_scenario(2).model_copy(update={"days": 5})
    serial = sim.run_campaign(config, trials=4, workers=1)["body"]
    parallel = sim.run_campaign(config, trials=4, workers=2)["body"]
    assert json.dumps(serial, sort_keys=True) == json.dumps(parallel, sort_keys=True)


def test_completeness_campaign_three_banks():
    result = theorems.check_completeness(3, 100, verifications=100_000, seed=4)
    assert result.passed
    assert result.details["completeness_error"] == pytest.approx(1 - 0.99**3, abs=0.003)


def test_exposure_day_mean():
    config = theorems.exposure_scenario(100, 0.05, 10_000, seed=8)
    agg = sim.run_campaign(config)["body"]["aggregate"]["exposure"]
    expected = economics.expected_exposure_days(100, 0.05)
    assert agg["exposed_trials"] == 10_000
    assert abs(agg["mean_day"] - expected) / expected <= 0.05


def test_fraud_run_net_tracks_profit():
    params = theorems.FRAUD_PARAMS
    agg = sim.run_campaign(sim.fraud_scenario(params, seed=1, trials=100))["body"]["aggregate"]
    b = economics.bank_profit(params)
    lo, hi = agg["coalition_net"]["ci99"]
    assert lo - 0.05 * b <= b <= hi + 0.05 * b


def test_replay_detects_tampering():
    report = sim.run_scenario(theorems.demo_scenario(3))
    assert sim.replay(report) == (True, "")
    report["body"]["trials"][0]["fraud_events"] = 7
    same, diff = sim.replay(report)
    assert not same and "fraud_events" in diff


def test_config_errors_are_field_level():
    with pytest.raises(ConfigError) as err:
        sim.load_config({"banks": [{"prefix": "B", "count": 2}], "days": -3, "bogus": 1})
    text = str(err.value)
    assert "days" in text and "bogus" in text


def test_config_rejects_poly_bound_violation():
    with pytest.raises(ConfigError) as err:
        sim.load_config({"banks": [{"prefix": "B", "count": 3}], "scheme": {"p_n": 5}})
    assert "2m" in str(err.value)


def test_config_rejects_unknown_signer():
    with pytest.raises(ConfigError):
        sim.load_config({"banks": [{"id": "B1"}], "signers": ["ghost"]})


def test_sweep_sign_change_at_boundary():
    rows = sim.sweep("scenarios/econ_grid.json")
    for row in rows:
        if row["b"] != 0:
            assert (row["b"] < 0) == row["relaxed_security"]
    assert {r["b"] > 0 for r in rows} == {True, False}
    assert sim.sweep_csv(rows).splitlines()[0].endswith("b,relaxed_security,simulated_b,exposure_days_mean")


@pytest.mark.parametrize("path", ["honest", "reissue_swap", "fraud_campaign", "self_interested",
                                  "econ_grid"])
def test_bundled_scenarios_validate(path):
    sim.load_config(f"scenarios/{path}.json")
