"""Bundled Monte Carlo checks of the scheme's security and economic claims.

Every check returns a :class:`CheckResult`; ``run_suite`` runs them all.
Sample sizes default to the acceptance levels; ``scale`` shrinks them for
smoke runs.
"""

from __future__ import annotations

import json
import math
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import economics, protocols, sim, stats
from .actors import HonestBank, PassiveUser, coalition_copy
from .economics import EconomicParams
from .errors import LemmaPreconditionError
from .token_model import SchemeParams, amplify, required_verifications
from .world import World


@dataclass
class CheckResult:
    name: str
    passed: bool
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        brief = ", ".join(f"{k}={_fmt(v)}" for k, v in self.details.items() if not isinstance(v, (list, dict)))
        return f"[{status}] {self.name}: {brief}"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def bank_world(m: int, params: SchemeParams, seed: int, users: int = 1, **kwargs) -> World:
    world = World(params, sim.trial_rng(seed, 0), **kwargs)
    for i in range(1, m + 1):
        world.add_actor(f"B{i}", "bank", HonestBank())
    for i in range(1, users + 1):
        world.add_actor(f"U{i}", "user", PassiveUser())
    return world


# -- completeness of the composite token ------------------------------------------


def check_completeness(m: int, p_n: float, verifications: int = 100_000, seed: int = 0,
                       tokens: int = 20) -> CheckResult:
    params = SchemeParams(security_param=20, completeness_error=1.0 / p_n)
    world = bank_world(m, params, seed, repeated_checks=True, keep_transcripts=False)
    minted = protocols.generate_patchwork(world, list(world.banks), tokens)
    accepted = sum(protocols.composite_verify(world, minted[i % tokens]) for i in range(verifications))
    rate = accepted / verifications
    expected = (1.0 - 1.0 / p_n) ** m
    lo, hi = stats.binomial_interval(expected, verifications)
    return CheckResult(
        f"completeness m={m} p(n)={p_n:g}",
        lo <= rate <= hi and 1.0 - rate < 0.5,
        {"rate": rate, "expected": expected, "ci_lo": lo, "ci_hi": hi,
         "completeness_error": 1.0 - rate},
    )


# -- copies by bank coalitions ------------------------------------------------------


def coalition_acceptance(m: int, coalition_size: int, params: SchemeParams, attempts: int,
                         seed: int) -> tuple[int, int]:
    """Protocol-2 acceptances of fresh coalition copies by an outside verifier."""
    world = bank_world(m, params, seed, repeated_checks=False, keep_transcripts=False)
    banks = list(world.banks)
    coalition = banks[:coalition_size]
    leader = coalition[0]
    original = protocols.generate_patchwork(world, banks, 1, assembler=banks[-1])[0]
    accepted = 0
    for _ in range(attempts):
        copy = coalition_copy(world, coalition, original, caller=leader)
        world.add_token(copy, leader)
        if protocols.verify_patchwork(world, leader, "U1", copy) == protocols.ACCEPTED:
            accepted += 1
        world.remove_token(copy)
    return accepted, attempts


def honest_acceptance(m: int, params: SchemeParams, attempts: int, seed: int) -> tuple[int, int]:
    world = bank_world(m, params, seed, users=2, repeated_checks=False, keep_transcripts=False)
    token = protocols.generate_patchwork(world, list(world.banks), 1)[0]
    world.move_token(token, "U1")
    accepted = 0
    for _ in range(attempts):
        other = "U2" if token.holder == "U1" else "U1"
        accepted += protocols.verify_patchwork(world, token.holder, other, token) == protocols.ACCEPTED
    return accepted, attempts


def check_tight_security(m: int = 4, p_n: float = 20.0, error: float = 1e-3,
                         attempts: int = 100_000, seed: int = 0) -> list[CheckResult]:
    params = SchemeParams(security_param=20, completeness_error=1.0 / p_n,
                          soundness_error=error, copy_resistance_error=error)
    k, n = coalition_acceptance(m, m - 2, params, attempts, seed)
    bound = stats.upper_slack(error, n)
    partial = CheckResult(f"tight security: {m - 2}-of-{m} coalition copies", k / n <= bound,
                          {"accepted": k, "attempts": n, "rate": k / n, "bound": bound})

    kc, nc = coalition_acceptance(m, m, params, attempts, seed + 1)
    kh, nh = honest_acceptance(m, params, attempts, seed + 2)
    expected = (1.0 - 1.0 / p_n) ** (2 * m)
    lo, hi = stats.binomial_interval(expected, nc)
    pooled = (kc + kh) / (nc + nh)
    z = abs(kc / nc - kh / nh) / math.sqrt(pooled * (1 - pooled) * (1 / nc + 1 / nh))
    full = CheckResult(
        f"tight security: full {m}-bank coalition copies",
        lo <= kc / nc <= hi and lo <= kh / nh <= hi and z < 2.5758,
        {"copy_rate": kc / nc, "honest_rate": kh / nh, "expected": expected, "ci_lo": lo,
         "ci_hi": hi, "z": z},
    )
    return [partial, full]


# -- the reissue swap ---------------------------------------------------------------


def swap_scenario(m: int = 3, trials: int = 10_000, seed: int = 0, probes: int = 20,
                  p_n: float = 10.0) -> sim.ScenarioConfig:
    return sim.load_config({
        "name": "reissue_swap", "seed": seed, "trials": trials, "days": 1,
        "scheme": {"security_param": 20, "p_n": p_n},
        "banks": [{"prefix": "A", "count": m - 1,
                   "strategy": {"kind": "copy_coalition", "swap_attack": True}},
                  {"id": "H1"}],
        "users": [{"id": "U1", "tokens": 1, "strategy": {"kind": "passive"}}],
        "repeated_checks": False,
        "probe_verifications": probes,
    })


def check_swap(trials: int = 10_000, seed: int = 0, m: int = 3) -> CheckResult:
    config = swap_scenario(m, trials, seed)
    agg = sim.run_campaign(config)["body"]["aggregate"]["swap"]
    lam = config.scheme.to_params().soundness_error
    probes = agg["completed"] * config.probe_verifications
    rate = agg["original_accept_rate_post_swap"] or 0.0
    bound = stats.upper_slack(lam, probes) if probes else lam
    return CheckResult(
        f"reissue swap ({m - 1}-of-{m} coalition)",
        agg["runs_without_violation"] == agg["runs"] == trials and rate <= bound,
        {"runs": agg["runs"], "runs_without_violation": agg["runs_without_violation"],
         "completed": agg["completed"], "original_accept_rate": rate, "bound": bound,
         "copy_accept_rate": agg["copy_accept_rate_post_swap"]},
    )


# -- economics -------------------------------------------------------------------


def random_econ_grid(points: int, seed: int) -> list[EconomicParams]:
    rng = np.random.default_rng(seed)
    grid = []
    for _ in range(points):
        grid.append(EconomicParams(
            num_banks=int(rng.integers(1, 20)), threshold=float(rng.uniform(0, 50)),
            token_value=float(rng.uniform(0.01, 1000)), reissue_prob=float(rng.uniform(0, 1)),
            total_user_tokens=float(rng.uniform(1, 1e5)), cost_coefficient=float(rng.uniform(0, 2)),
            revenue_coefficient=float(rng.uniform(0.01, 3)), copies_per_day=float(rng.uniform(0, 2000)),
        ))
    return grid


def check_sign_consistency(points: int = 10_000, seed: int = 0) -> CheckResult:
    violations = boundary = 0
    for p in random_econ_grid(points, seed):
        b = economics.bank_profit(p)
        scale = p.token_value * (p.copies_per_day + p.reserve_value / p.token_value + 1)
        if abs(b) <= 1e-9 * scale:
            boundary += 1
            continue
        if (b < 0) != economics.relaxed_security_holds(p):
            violations += 1
    return CheckResult("profit sign vs relaxed-security condition", violations == 0,
                       {"points": points, "violations": violations, "boundary": boundary})


FRAUD_PARAMS = EconomicParams(num_banks=2, threshold=5, token_value=10.0, reissue_prob=0.1,
                              total_user_tokens=200, cost_coefficient=0.5,
                              revenue_coefficient=1.0, copies_per_day=60)


def check_profit_agreement(trials: int = 1000, seed: int = 0,
                           params: EconomicParams = FRAUD_PARAMS) -> CheckResult:
    alpha = sim.calibrate_alpha(params, trials=20, days=30, seed=seed + 7)
    target = economics.bank_profit(params.replace(revenue_coefficient=alpha))
    config = sim.fraud_scenario(params, seed=seed, trials=trials)
    agg = sim.run_campaign(config)["body"]["aggregate"]["coalition_net"]
    rel = abs(agg["mean"] - target) / abs(target)
    return CheckResult("simulated coalition net vs closed-form profit", rel <= 0.05 and agg["trials"] == trials,
                       {"trials": agg["trials"], "simulated": agg["mean"], "closed_form": target,
                        "alpha": alpha, "relative_error": rel})


def exposure_scenario(copies: int, rho: float, trials: int, seed: int) -> sim.ScenarioConfig:
    econ = EconomicParams(num_banks=1, threshold=1, token_value=1.0, reissue_prob=rho,
                          total_user_tokens=0, copies_per_day=copies)
    return sim.fraud_scenario(econ, seed=seed, trials=trials, max_days=1000, honest_holders=False)


def check_exposure(copies: int, rho: float, trials: int = 10_000, seed: int = 0) -> CheckResult:
    agg = sim.run_campaign(exposure_scenario(copies, rho, trials, seed))["body"]["aggregate"]["exposure"]
    passed = agg["exposed_trials"] == trials and agg["ks_statistic"] < agg["ks_critical_1pct"]
    return CheckResult(f"exposure day ~ Geometric (Y={copies}, rho={rho})", passed,
                       {"ks": agg["ks_statistic"], "critical": agg["ks_critical_1pct"],
                        "mean_day": agg["mean_day"], "model_mean_day": agg["model_mean_day"]})


# -- amplification & verification counts ------------------------------------------------


def check_lemma_plumbing() -> CheckResult:
    failures = []
    try:
        amplify(SchemeParams(completeness_error=0.4, copy_resistance_error=0.5), 3)
        failures.append("amplify accepted delta >= 1 - 2*eps")
    except LemmaPreconditionError:
        pass
    for eps, delta, q in [(0.25, 0.1, 10), (0.0, 0.0, 4), (0.1, 0.3, 20)]:
        out = amplify(SchemeParams(completeness_error=eps, copy_resistance_error=delta), q)
        if out.completeness_error != 2.0**-q or not out.copy_resistance_error > delta / (1 - 2 * eps):
            failures.append(f"amplify({eps}, {delta}, {q})")
    for (q, a), n in {(2, 3): 9, (2, 1): 1, (101, 2): 400, (10, 1.5): 21, (7, 2.5): 38}.items():
        if required_verifications(q, a) != n:
            failures.append(f"required_verifications({q}, {a})")
    return CheckResult("amplification and verification-count formulas", not failures,
                       {"failures": len(failures)})


# -- self-interested banks ------------------------------------------------------------


def self_interested_scenario(params: EconomicParams, days: int, seed: int) -> sim.ScenarioConfig:
    y = int(params.copies_per_day)
    return sim.load_config({
        "name": "self_interested", "seed": seed, "days": days,
        "scheme": {"completeness_error": 0.0},
        "banks": [{"prefix": "B", "count": params.num_banks, "tokens": int(params.threshold),
                   "strategy": {"kind": "self_interested"}}],
        "users": [{"prefix": "U", "count": max(y, 1), "wealth": 1e6, "copy_buyer": True,
                   "strategy": {"kind": "periodic_reissue", "scope": "new_receipts",
                                "reissue_prob_per_token_day": params.reissue_prob}}],
        "economics": {"threshold": params.threshold, "token_value": params.token_value,
                      "cost_coefficient": params.cost_coefficient,
                      "revenue_coefficient": params.revenue_coefficient,
                      "reissue_prob": params.reissue_prob,
                      "total_user_tokens": params.total_user_tokens, "copies_per_day": y},
        "repeated_checks": False,
        "stop_on_exposure": True,
    })


def check_self_interested(days: int = 1000, seed: int = 0) -> list[CheckResult]:
    losing = EconomicParams(num_banks=2, threshold=50, token_value=10, reissue_prob=0.1,
                            total_user_tokens=100, cost_coefficient=0.5, copies_per_day=20)
    winning = losing.replace(copies_per_day=200)
    out = []
    trial = sim.run_scenario(self_interested_scenario(losing, days, seed))["body"]["trials"][0]
    out.append(CheckResult("self-interested banks with b < 0 never copy",
                           trial["fraud_events"] == 0 and trial["days_run"] == days,
                           {"b": economics.bank_profit(losing), "days": trial["days_run"],
                            "fraud_events": trial["fraud_events"]}))
    trial = sim.run_scenario(self_interested_scenario(winning, days, seed))["body"]["trials"][0]
    out.append(CheckResult("self-interested banks with b > 0 copy on day 1",
                           trial["first_fraud_day"] == 1,
                           {"b": economics.bank_profit(winning),
                            "first_fraud_day": trial["first_fraud_day"]}))
    return out


# -- determinism & replay -----------------------------------------------------------------


def demo_scenario(seed: int = 42) -> sim.ScenarioConfig:
    return sim.load_config({
        "name": "demo", "seed": seed, "days": 20,
        "scheme": {"security_param": 20, "p_n": 20},
        "banks": [{"prefix": "B", "count": 3, "tokens": 2}],
        "users": [{"prefix": "U", "count": 6, "tokens": 2, "wealth": 100,
                   "strategy": {"kind": "periodic_reissue", "reissue_prob_per_token_day": 0.05}}],
        "economics": {"token_value": 10, "cost_coefficient": 0.1},
        "payments_per_day": 4,
        "signers": ["U001"],
    })


def check_determinism(seed: int = 42) -> CheckResult:
    config = demo_scenario(seed)
    first = sim.run_scenario(config)
    second = sim.run_scenario(config)
    identical = sim.body_json(first) == sim.body_json(second)
    with tempfile.TemporaryDirectory() as tmp:
        path = sim.write_report(first, Path(tmp))
        same, _ = sim.replay(json.loads(path.read_text()))
    return CheckResult("determinism and replay", identical and same,
                       {"identical_bodies": identical, "replay_clean": same})


# -- promotion & demotion ---------------------------------------------------------------


def _token_layout(world: World) -> list:
    layout = []
    for tid in sorted(world.tokens):
        token = world.tokens[tid]
        layout.append([(s.issuer, s.expected_version,
                        sorted(world.registry.record(s.scheme_id).attestations)) for s in token.slots])
    return layout


def check_lifecycle(seed: int = 0) -> list[CheckResult]:
    params = SchemeParams(security_param=20, completeness_error=0.02)
    worlds = []
    for mode in ("sign", "promote"):
        world = bank_world(3, params, seed, users=2, repeated_checks=False)
        tokens = protocols.generate_patchwork(world, list(world.banks), 4)
        world.move_token(tokens[0], "U1")
        if mode == "sign":
            protocols.sign_patchwork(world, "U2")
        else:
            protocols.promote_user(world, "U2", 0)
        worlds.append(world)
    same = _token_layout(worlds[0]) == _token_layout(worlds[1])
    promoted = "U2" in worlds[1].banks
    first = CheckResult("zero-threshold promotion equals signing", same and promoted,
                        {"identical_layout": same, "joined_banks": promoted})

    world = bank_world(2, params, seed, users=1, repeated_checks=False)
    tokens = protocols.generate_patchwork(world, list(world.banks), 3)
    for token in tokens:
        world.move_token(token, "U1")
    world.token_value = 5.0
    for bank in list(world.banks):
        protocols.demote_bank(world, bank, threshold=1)
    second = CheckResult("demoting the last bank collapses value",
                         not world.banks and world.collapsed and world.token_value == 0,
                         {"banks_left": len(world.banks), "token_value": world.token_value})
    return [first, second]


# -- suite --------------------------------------------------------------------------


def run_suite(seed: int = 42, scale: float = 1.0, echo=None) -> list[CheckResult]:
    """Run every bundled check; ``scale`` < 1 shrinks sample sizes for smoke runs."""

    def n(x: int) -> int:
        return max(50, int(x * scale))

    results: list[CheckResult] = []

    def record(items):
        for item in items if isinstance(items, list) else [items]:
            results.append(item)
            if echo:
                echo(item.line())

    for m, p_n in [(2, 5), (3, 10), (5, 20)]:
        record(check_completeness(m, p_n, n(100_000), seed))
    record(check_tight_security(attempts=n(100_000), seed=seed))
    record(check_swap(trials=n(10_000), seed=seed))
    record(check_sign_consistency(n(10_000), seed))
    record(check_profit_agreement(trials=n(1000), seed=seed))
    for copies, rho in [(10, 0.1), (100, 0.05)]:
        record(check_exposure(copies, rho, n(10_000), seed))
    record(check_lemma_plumbing())
    record(check_self_interested(seed=seed))
    record(check_determinism(seed))
    record(check_lifecycle(seed))
    return results
