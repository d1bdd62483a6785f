"""Scenario loading, the per-trial event loop, campaigns, sweeps and reports.

A scenario is a JSON document validated by :class:`ScenarioConfig`. One
trial builds a fresh :class:`~patchwork.world.World`, mints the day-zero
money supply with the generation protocol and then steps day by day. Within
a day actors decide in ascending id order and each actor's actions run
before the next actor decides.
"""

from __future__ import annotations

import csv
import hashlib
import heapq
import io
import itertools
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import actors as act_mod
from . import economics, protocols, stats
from .economics import EconomicParams
from .errors import ConfigError, PaymentError
from .token_model import SchemeParams
from .world import World

# -- configuration -------------------------------------------------------------


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SchemeConfig(_Strict):
    security_param: int = Field(20, ge=1)
    p_n: float | None = Field(None, gt=0, description="completeness error is 1/p_n")
    completeness_error: float | None = Field(None, ge=0, lt=0.5)
    soundness_error: float | None = Field(None, ge=0, lt=1)
    copy_resistance_error: float | None = Field(None, ge=0, lt=1)
    damage_model: Literal["none", "sqrt_epsilon_drift"] = "none"

    @model_validator(mode="after")
    def _one_epsilon(self):
        if self.p_n is not None and self.completeness_error is not None:
            raise ValueError("give either p_n or completeness_error, not both")
        if self.p_n is not None and self.p_n <= 2:
            raise ValueError("p_n must exceed 2 so that the completeness error is below 1/2")
        return self

    @property
    def epsilon(self) -> float:
        if self.p_n is not None:
            return 1.0 / self.p_n
        return self.completeness_error or 0.0

    def to_params(self) -> SchemeParams:
        return SchemeParams(
            security_param=self.security_param,
            completeness_error=self.epsilon,
            soundness_error=self.soundness_error,
            copy_resistance_error=self.copy_resistance_error,
            damage_model=self.damage_model,
        )


class StrategyConfig(_Strict):
    kind: Literal["honest", "passive", "forging", "periodic_reissue",
                  "copy_coalition", "self_interested"] = "honest"
    reissue_prob_per_token_day: float = Field(0.0, ge=0, le=1)
    scope: Literal["holdings", "new_receipts"] = "holdings"
    costed: bool = True
    copies_per_day: int = Field(0, ge=0)
    swap_attack: bool = False
    attack_day: int = Field(1, ge=1)


class ActorGroup(_Strict):
    """One actor (``id``) or ``count`` actors named ``prefix`` + zero-padded index."""

    id: str | None = None
    prefix: str | None = None
    count: int = Field(1, ge=1)
    strategy: StrategyConfig = StrategyConfig()
    tokens: int = Field(0, ge=0, description="tokens held at day zero (bank reserve for banks)")
    wealth: float = Field(0.0, ge=0, description="cash on top of the value of held tokens")
    copy_buyer: bool = False

    @model_validator(mode="after")
    def _named(self):
        if (self.id is None) == (self.prefix is None):
            raise ValueError("set exactly one of id or prefix")
        if self.id is not None and self.count != 1:
            raise ValueError("count applies to prefix groups only")
        return self

    def ids(self) -> list[str]:
        if self.id is not None:
            return [self.id]
        width = max(3, len(str(self.count)))
        return [f"{self.prefix}{i:0{width}d}" for i in range(1, self.count + 1)]


class EconomicsConfig(_Strict):
    threshold: float = Field(0.0, ge=0)
    token_value: float = Field(1.0, ge=0)
    cost_coefficient: float = Field(0.0, ge=0)
    revenue_coefficient: float = Field(1.0, ge=0)
    revenue_per_copy: float | None = Field(None, ge=0)
    # profit-model inputs; derived from the actor roster when left unset
    reissue_prob: float | None = Field(None, ge=0, le=1)
    total_user_tokens: float | None = Field(None, ge=0)
    copies_per_day: float | None = Field(None, ge=0)


class PromotionConfig(_Strict):
    user: str
    day: int = Field(1, ge=1)


class SweepConfig(_Strict):
    grid: dict[str, list[float]]
    simulate_trials: int = Field(0, ge=0)
    max_days: int = Field(200, ge=1)


class ScenarioConfig(_Strict):
    name: str = "scenario"
    seed: int = Field(0, ge=0)
    trials: int = Field(1, ge=1)
    days: int = Field(30, ge=0)
    scheme: SchemeConfig = SchemeConfig()
    banks: list[ActorGroup]
    users: list[ActorGroup] = []
    economics: EconomicsConfig = EconomicsConfig()
    max_retries: int = Field(100, ge=0)
    repeated_checks: bool = True
    standard_score: float = Field(1.0, gt=0)
    enforce_poly_bound: bool = True
    assembler: str | None = None
    lost_shard_on_abort: bool = False
    shared_fraud_awareness: bool = True
    value_collapse_on_exposure: bool = True
    stop_on_exposure: bool = False
    horizon_days: int = Field(1, ge=0)
    payments_per_day: int = Field(0, ge=0)
    signers: list[str] = []
    promotions: list[PromotionConfig] = []
    audit_thresholds: bool = False
    probe_verifications: int = Field(0, ge=0)
    keep_transcripts: bool = False
    workers: int = Field(1, ge=1)
    sweep: SweepConfig | None = None

    @model_validator(mode="after")
    def _consistent(self):
        bank_ids = [i for g in self.banks for i in g.ids()]
        user_ids = [i for g in self.users for i in g.ids()]
        everyone = bank_ids + user_ids
        if not bank_ids:
            raise ValueError("banks: at least one bank is required")
        if len(set(everyone)) != len(everyone):
            raise ValueError("actor ids must be unique")
        m = len(bank_ids)
        eps = self.scheme.epsilon
        if self.enforce_poly_bound and eps > 0 and 1.0 / eps <= 2 * m:
            raise ValueError(f"scheme: p(n) = {1.0 / eps:g} must exceed 2m = {2 * m} "
                             "(set enforce_poly_bound=false for negative tests)")
        if self.assembler is not None and self.assembler not in bank_ids:
            raise ValueError(f"assembler: {self.assembler} is not a bank")
        for name in self.signers:
            if name not in user_ids:
                raise ValueError(f"signers: {name} is not a user")
        for promo in self.promotions:
            if promo.user not in user_ids:
                raise ValueError(f"promotions: {promo.user} is not a user")
        for group in self.users:
            if group.strategy.kind in ("copy_coalition", "self_interested", "forging"):
                raise ValueError(f"users: strategy {group.strategy.kind} is for banks only")
        return self

    def bank_ids(self) -> list[str]:
        return [i for g in self.banks for i in g.ids()]

    def economic_params(self) -> EconomicParams:
        """Profit-model view of the scenario, filling gaps from the actor roster."""
        e = self.economics
        holders = [g for g in self.users if g.strategy.kind == "periodic_reissue" and not g.copy_buyer]
        rho = e.reissue_prob
        if rho is None:
            rho = holders[0].strategy.reissue_prob_per_token_day if holders else 0.0
        u = e.total_user_tokens
        if u is None:
            u = sum(g.tokens * g.count for g in self.users if not g.copy_buyer)
        y = e.copies_per_day
        if y is None:
            y = max((g.strategy.copies_per_day for g in self.banks), default=0)
        return EconomicParams(
            num_banks=len(self.bank_ids()), threshold=e.threshold, token_value=e.token_value,
            reissue_prob=rho, total_user_tokens=u, cost_coefficient=e.cost_coefficient,
            revenue_coefficient=e.revenue_coefficient, copies_per_day=y,
            revenue_per_copy=e.revenue_per_copy,
        )


def load_config(source) -> ScenarioConfig:
    """Validate a scenario from a path, JSON text or dict."""
    try:
        if isinstance(source, ScenarioConfig):
            return source
        if isinstance(source, (str, Path)) and not str(source).lstrip().startswith("{"):
            data = json.loads(Path(source).read_text())
        elif isinstance(source, str):
            data = json.loads(source)
        else:
            data = source
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        diagnostics = [f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}"
                       for err in exc.errors()]
        raise ConfigError("scenario failed validation", diagnostics) from None
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read scenario: {exc}") from None


# -- one trial -------------------------------------------------------------------


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, trial])))


def _strategy(cfg: StrategyConfig, group_ids: list[str], config: ScenarioConfig):
    if cfg.kind == "honest":
        return act_mod.HonestBank()
    if cfg.kind == "passive":
        return act_mod.PassiveUser()
    if cfg.kind == "forging":
        return act_mod.ForgingBank()
    if cfg.kind == "periodic_reissue":
        return act_mod.PeriodicReissueUser(cfg.reissue_prob_per_token_day, cfg.scope, cfg.costed)
    members = frozenset(i for g in config.banks if g.strategy.kind == cfg.kind for i in g.ids())
    if cfg.kind == "copy_coalition":
        return act_mod.CopyCoalition(members, cfg.copies_per_day, cfg.swap_attack, cfg.attack_day)
    return act_mod.SelfInterestedBank(config.economic_params(), members)


class Trial:
    """Event loop and metric collection for one seeded run."""

    # phase order within a day
    DECIDE, PAYMENTS, AUDIT, PROMOTE, DAY_END = 1, 2, 3, 4, 9

    def __init__(self, config: ScenarioConfig, trial: int):
        self.config = config
        self.trial = trial
        self.rng = trial_rng(config.seed, trial)
        self.world = World(
            config.scheme.to_params(), self.rng,
            max_retries=config.max_retries,
            repeated_checks=config.repeated_checks,
            standard_score=config.standard_score,
            enforce_poly_bound=config.enforce_poly_bound,
            lost_shard_on_abort=config.lost_shard_on_abort,
            shared_fraud_awareness=config.shared_fraud_awareness,
            collapse_on_exposure=config.value_collapse_on_exposure,
            token_value=config.economics.token_value,
            keep_transcripts=config.keep_transcripts,
        )
        self.econ = config.economic_params()
        self.buyers: list[str] = []
        self._buyer_cursor = 0
        self.initial_wealth: dict[str, float] = {}
        self.fraud_events = 0
        self.fraud_days: list[int] = []
        self.copies_sold = 0
        self.payments = [0, 0]
        self.reissues = {"accepted": 0, "terminated": 0}
        self.daily_fee_revenue: list[float] = []
        self.swap: dict | None = None
        self.custody_ok = True
        self._queue: list = []
        self._seq = itertools.count()

    # setup

    def setup(self) -> None:
        w, cfg = self.world, self.config
        for group in cfg.banks:
            ids = group.ids()
            for actor_id in ids:
                w.add_actor(actor_id, "bank", _strategy(group.strategy, ids, cfg), group.wealth)
        for group in cfg.users:
            ids = group.ids()
            for actor_id in ids:
                w.add_actor(actor_id, "user", _strategy(group.strategy, ids, cfg), group.wealth)
                if group.copy_buyer:
                    self.buyers.append(actor_id)

        allocation = [(i, g.tokens) for g in cfg.banks + cfg.users for i in g.ids() if g.tokens]
        total = sum(n for _, n in allocation)
        tokens = protocols.generate_patchwork(w, list(w.banks), total, cfg.assembler) if total else []
        it = iter(tokens)
        for actor_id, n in allocation:
            for _ in range(n):
                token = next(it)
                if token.holder != actor_id:
                    w.move_token(token, actor_id)
        for actor_id in sorted(w.actors):
            actor = w.actors[actor_id]
            actor.wealth += len(actor.holdings) * w.token_value
            self.initial_wealth[actor_id] = actor.wealth
        for user in cfg.signers:
            protocols.sign_patchwork(w, user)

    # event queue

    def push(self, day: int, phase: int, order: int, kind: str, payload=None) -> None:
        heapq.heappush(self._queue, (day, phase, order, next(self._seq), kind, payload))

    def schedule_day(self, day: int) -> None:
        for order, actor_id in enumerate(sorted(self.world.actors)):
            self.push(day, self.DECIDE, order, "decide", actor_id)
        if self.config.payments_per_day:
            self.push(day, self.PAYMENTS, 0, "payments")
        if self.config.audit_thresholds:
            self.push(day, self.AUDIT, 0, "audit")
        for promo in self.config.promotions:
            if promo.day == day:
                self.push(day, self.PROMOTE, 0, "promote", promo.user)
        self.push(day, self.DAY_END, 0, "day_end")

    def run(self) -> dict:
        self.setup()
        if self.config.days > 0:
            self.schedule_day(1)
        stop_after: int | None = None
        while self._queue:
            day, phase, order, _, kind, payload = heapq.heappop(self._queue)
            self.world.day = day
            if kind == "decide":
                actor = self.world.actors[payload]
                obs = self.world.observation(payload)
                for action in act_mod.act(actor, obs, self.rng):
                    self.push(day, phase, order, "action", action)
            elif kind == "action":
                self.execute(payload)
            elif kind == "payments":
                self.run_payments()
            elif kind == "audit":
                for bank in sorted(self.world.banks):
                    protocols.demote_bank(self.world, bank, self.econ.threshold)
            elif kind == "promote":
                protocols.promote_user(self.world, payload, self.econ.threshold)
            elif kind == "day_end":
                self.end_of_day(day)
                if (self.config.stop_on_exposure and self.world.fraud_exposed
                        and stop_after is None):
                    stop_after = day + self.config.horizon_days
                last = self.config.days if stop_after is None else stop_after
                if day < last:
                    self.schedule_day(day + 1)
        return self.report()

    # actions

    def execute(self, action: act_mod.Action) -> None:
        handler = getattr(self, f"do_{action.kind}")
        handler(action)

    def do_reissue(self, action) -> None:
        w = self.world
        token = w.tokens.get(action.args["token"])
        if token is None or token.holder != action.actor:
            return
        index = action.args["broken_index"]
        bank = w.model.holder_of(token.slots[index].scheme_id)
        fee = self.econ.cost_coefficient * w.token_value if action.args.get("costed") else 0.0
        try:
            outcome = protocols.reissue(w, action.actor, token, index, action.args.get("costed", False), fee)
        except PaymentError:
            w.log_event("payment_failed", actor=action.actor)
            return
        self.reissues[outcome] += 1
        if outcome == protocols.ACCEPTED and w.collapsed and action.args.get("costed"):
            w.forgone_fees[bank] += self.econ.cost_coefficient * w.pre_collapse_value

    def _template(self, leader: str):
        w = self.world
        held = sorted(w.actors[leader].holdings)
        if held:
            return w.tokens[held[0]]
        return w.tokens[min(w.tokens)] if w.tokens else None

    def do_distribute_copies(self, action) -> None:
        w = self.world
        leader = action.actor
        template = self._template(leader)
        if template is None or not self.buyers:
            w.log_event("copies_skipped", actor=leader)
            return
        revenue = self.econ.copy_revenue
        for _ in range(int(action.args["count"])):
            buyer = self.buyers[self._buyer_cursor % len(self.buyers)]
            self._buyer_cursor += 1
            copy = act_mod.coalition_copy(w, action.args["coalition"], template, caller=leader)
            w.add_token(copy, leader)
            self.fraud_events += 1
            outcome = protocols.verify_patchwork(w, leader, buyer, copy)
            if outcome == protocols.ACCEPTED:
                self.copies_sold += 1
                w.actors[leader].credit(w.day, "copy_sale", revenue)
            else:
                w.remove_token(copy)
        self.fraud_days.append(w.day)
        w.log_event("copies_distributed", actor=leader, count=int(action.args["count"]))

    def do_swap_attack(self, action) -> None:
        """Copy a victim's token, then have honest banks reissue the shards the coalition lacks."""
        w = self.world
        coalition = set(action.args["coalition"])
        leader = action.actor
        victims = [t for t in sorted(w.tokens) if w.tokens[t].holder not in coalition
                   and not w.tokens[t].is_copy]
        if not victims:
            return
        original = w.tokens[victims[0]]
        copy = act_mod.coalition_copy(w, coalition, original, caller=leader)
        w.add_token(copy, leader)
        self.fraud_events += 1
        self.fraud_days.append(w.day)
        self.swap = {"original": original.instance_id, "copy": copy.instance_id,
                     "checks": 0, "violations": 0, "completed": False,
                     "reissue_attempts": 0}
        self._check_swap()
        missing = [i for i, s in enumerate(copy.slots)
                   if w.model.holder_of(s.scheme_id) not in coalition]
        for index in missing:
            for _ in range(w.max_retries + 1):
                self.swap["reissue_attempts"] += 1
                outcome = protocols.reissue(w, leader, copy, index)
                self._check_swap()
                if outcome == protocols.ACCEPTED:
                    break
        self.swap["completed"] = w.is_current(copy)
        probes = self.config.probe_verifications
        hits = {"original": 0, "copy": 0}
        for _ in range(probes):
            hits["original"] += protocols.composite_verify(w, original)
            hits["copy"] += protocols.composite_verify(w, copy)
        self.swap.update(probes=probes, original_accepts=hits["original"],
                         copy_accepts=hits["copy"])
        self._check_swap()
        w.log_event("swap", original=original.instance_id, copy=copy.instance_id,
                    original_current=w.is_current(original), copy_current=self.swap["completed"])

    def _check_swap(self) -> None:
        if self.swap is None:
            return
        w = self.world
        current = [w.is_current(w.tokens[self.swap[k]]) for k in ("original", "copy")
                   if self.swap[k] in w.tokens]
        self.swap["checks"] += 1
        if sum(current) > 1:
            self.swap["violations"] += 1

    def run_payments(self) -> None:
        w = self.world
        users = sorted(a for a in w.actors if not w.actors[a].is_bank)
        if len(users) < 2:
            return
        for _ in range(self.config.payments_per_day):
            holders = [u for u in users if w.actors[u].holdings]
            if not holders:
                return
            sender = holders[int(self.rng.integers(len(holders)))]
            receiver = users[int(self.rng.integers(len(users)))]
            if receiver == sender:
                continue
            token = w.tokens[min(w.actors[sender].holdings)]
            self.payments[1] += 1
            if protocols.verify_patchwork(w, sender, receiver, token) == protocols.ACCEPTED:
                self.payments[0] += 1

    def end_of_day(self, day: int) -> None:
        w = self.world
        fee_today = sum(a for b in w.banks for d, k, a in w.actors[b].ledger if d == day and k == "fee")
        self.daily_fee_revenue.append(fee_today)
        economics.apply_value_collapse(w)
        self._check_swap()
        if not w.shard_custody_ok():
            self.custody_ok = False

    # report

    def coalition_members(self) -> list[str]:
        return sorted(a for a, s in self.world.actors.items()
                      if s.strategy.kind in ("copy_coalition", "self_interested"))

    def report(self) -> dict:
        w = self.world
        coalition = self.coalition_members()
        copy_revenue = sum(w.actors[a].total("copy_sale") for a in coalition)
        reserve_loss = -sum(w.actors[a].total("reserve_loss") for a in coalition)
        forgone = sum(w.forgone_fees[a] for a in coalition)
        fees = {a: w.actors[a].total("fee") for a in sorted(w.actors)}
        sessions: dict[str, dict[str, int]] = {}
        for (protocol, outcome), n in sorted(w.session_outcomes.items()):
            sessions.setdefault(protocol, {})[outcome] = n
        registry = w.registry.snapshot()
        registry_digest = hashlib.sha256(json.dumps(registry, sort_keys=True).encode()).hexdigest()
        out = {
            "trial": self.trial,
            "seed": [self.config.seed, self.trial],
            "days_run": w.day,
            "banks": list(w.banks),
            "token_value": w.token_value,
            "value_collapsed": w.collapsed,
            "fraud_events": self.fraud_events,
            "first_fraud_day": self.fraud_days[0] if self.fraud_days else None,
            "copies_sold": self.copies_sold,
            "fraud_exposed": w.fraud_exposed,
            "exposure_day": w.exposure_day,
            "payments": {"attempted": self.payments[1], "accepted": self.payments[0]},
            "reissues": dict(self.reissues),
            "verifications": {"calls": w.model.stats.calls, "accepted": w.model.stats.accepted,
                              "by_provenance": dict(sorted(w.model.stats.by_provenance.items()))},
            "sessions": sessions,
            "wealth_delta": {a: round(w.actors[a].wealth - self.initial_wealth[a], 9)
                             for a in sorted(w.actors)},
            "fee_balance": round(sum(fees.values()), 9),
            "daily_fee_revenue": self.daily_fee_revenue,
            "coalition": {"members": coalition, "copy_revenue": copy_revenue,
                          "reserve_loss": reserve_loss, "forgone_fees": forgone,
                          "net": copy_revenue - reserve_loss - forgone},
            "events": w.events,
            "custody_ok": self.custody_ok,
            "registry_digest": registry_digest,
            "registry_schemes": len(registry),
            "transcript_digest": w.transcript_digest(),
        }
        if self.swap is not None:
            out["swap"] = dict(self.swap)
        if self.config.trials == 1:
            out["registry"] = registry
        if self.config.keep_transcripts:
            out["transcripts"] = [
                {"id": s.session_id, "protocol": s.protocol, "outcome": s.outcome,
                 "messages": [list(m) for m in s.transcript]} for s in w.sessions]
        return out


# -- campaigns & reports -----------------------------------------------------------


def _run_trial(args) -> dict:
    config_data, trial = args
    return Trial(ScenarioConfig.model_validate(config_data), trial).run()


def run_trials(config: ScenarioConfig, trials: int, workers: int = 1) -> list[dict]:
    if workers <= 1 or trials == 1:
        return [Trial(config, i).run() for i in range(trials)]
    data = config.model_dump(mode="json")
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map preserves submission order, so aggregation is independent of completion order
        return list(pool.map(_run_trial, [(data, i) for i in range(trials)], chunksize=16))


def aggregate(config: ScenarioConfig, trials: list[dict]) -> dict:
    n = len(trials)
    agg: dict = {"trials": n}
    calls = sum(t["verifications"]["calls"] for t in trials)
    accepted = sum(t["verifications"]["accepted"] for t in trials)
    agg["shard_verifications"] = {"calls": calls, "accepted": accepted}
    pay_n = sum(t["payments"]["attempted"] for t in trials)
    pay_k = sum(t["payments"]["accepted"] for t in trials)
    lo, hi = stats.proportion_ci(pay_k, pay_n)
    agg["payments"] = {"attempted": pay_n, "accepted": pay_k,
                       "rate": pay_k / pay_n if pay_n else None, "ci99": [lo, hi]}
    agg["fraud_events"] = sum(t["fraud_events"] for t in trials)
    agg["value_collapses"] = sum(t["value_collapsed"] for t in trials)
    agg["fee_balance_max_abs"] = max(abs(t["fee_balance"]) for t in trials)
    agg["custody_ok"] = all(t["custody_ok"] for t in trials)

    days = [t["exposure_day"] if t["exposure_day"] is not None else math.inf for t in trials]
    exposed = [d for d in days if math.isfinite(d)]
    econ = config.economic_params()
    buyer_rho = [g.strategy.reissue_prob_per_token_day for g in config.users if g.copy_buyer]
    exposure = {"exposed_trials": len(exposed),
                "mean_day": float(np.mean(exposed)) if exposed else None}
    if buyer_rho and econ.copies_per_day > 0:
        p = economics.exposure_probability_per_day(econ.copies_per_day, buyer_rho[0])
        d, crit = stats.geometric_ks(days, p)
        exposure.update(model_p=p, model_mean_day=1.0 / p if p else None,
                        ks_statistic=d, ks_critical_1pct=crit)
    agg["exposure"] = exposure

    nets = [t["coalition"]["net"] for t in trials if t["fraud_exposed"]]
    mean, lo, hi = stats.mean_ci(nets)
    agg["coalition_net"] = {"trials": len(nets), "mean": None if not nets else mean,
                            "ci99": None if len(nets) < 2 else [lo, hi],
                            "closed_form_b": economics.bank_profit(econ)}
    fee_days = [f for t in trials for f in t["daily_fee_revenue"]]
    agg["mean_daily_fee_revenue"] = float(np.mean(fee_days)) if fee_days else None

    swaps = [t["swap"] for t in trials if "swap" in t]
    if swaps:
        probes = sum(s["probes"] for s in swaps)
        orig = sum(s["original_accepts"] for s in swaps if s["completed"])
        orig_probes = sum(s["probes"] for s in swaps if s["completed"])
        agg["swap"] = {
            "runs": len(swaps),
            "completed": sum(s["completed"] for s in swaps),
            "runs_without_violation": sum(s["violations"] == 0 for s in swaps),
            "probes": probes,
            "original_accept_rate_post_swap": orig / orig_probes if orig_probes else None,
            "copy_accept_rate_post_swap": (sum(s["copy_accepts"] for s in swaps if s["completed"])
                                           / orig_probes if orig_probes else None),
        }
    return agg


def _body(config: ScenarioConfig, mode: str, trials: list[dict]) -> dict:
    return {
        "mode": mode,
        "config": config.model_dump(mode="json"),
        "seed": config.seed,
        "trials": trials,
        "aggregate": aggregate(config, trials),
    }


def run_scenario(config) -> dict:
    """Run trial 0 of a scenario; returns ``{"body": ..., "meta": ...}``."""
    config = load_config(config)
    start = time.perf_counter()
    trial = Trial(config.model_copy(update={"trials": 1}), 0).run()
    body = _body(config, "run", [trial])
    return {"body": body, "meta": _meta(start)}


def run_campaign(config, trials: int | None = None, workers: int | None = None) -> dict:
    config = load_config(config)
    if trials is not None:
        config = config.model_copy(update={"trials": trials})
    start = time.perf_counter()
    results = run_trials(config, config.trials, workers or config.workers)
    return {"body": _body(config, "campaign", results), "meta": _meta(start)}


def _meta(start: float) -> dict:
    return {"generated_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "elapsed_seconds": round(time.perf_counter() - start, 3)}


def body_json(report: dict) -> str:
    """Canonical serialization of a report body; identical runs give identical text."""
    return json.dumps(report["body"], sort_keys=True, indent=1, allow_nan=True)


def write_report(report: dict, out_dir: Path, stem: str = "report") -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{stem}.json"
    path.write_text(json.dumps({"body": report["body"], "meta": report["meta"]},
                               sort_keys=True, indent=1))
    return path


def trials_csv(report: dict) -> str:
    """Flat per-trial table of the headline metrics."""
    buf = io.StringIO()
    cols = ["trial", "days_run", "fraud_events", "copies_sold", "exposure_day", "value_collapsed",
            "payments_attempted", "payments_accepted", "coalition_net", "fee_balance"]
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for t in report["body"]["trials"]:
        writer.writerow([t["trial"], t["days_run"], t["fraud_events"], t["copies_sold"],
                         "" if t["exposure_day"] is None else t["exposure_day"],
                         int(t["value_collapsed"]), t["payments"]["attempted"],
                         t["payments"]["accepted"], repr(t["coalition"]["net"]), t["fee_balance"]])
    return buf.getvalue()


def replay(report: dict) -> tuple[bool, str]:
    """Re-run a report's embedded config and seed; returns (identical, unified diff)."""
    import difflib

    body = report["body"]
    config = load_config(body["config"])
    again = run_scenario(config) if body["mode"] == "run" else run_campaign(config)
    old = body_json(report).splitlines()
    new = body_json(again).splitlines()
    if old == new:
        return True, ""
    diff = "\n".join(difflib.unified_diff(old, new, "recorded", "replayed", lineterm="", n=1))
    return False, diff


# -- economic scenarios & sweeps -----------------------------------------------------


def fraud_scenario(econ: EconomicParams, *, seed: int = 0, trials: int = 1, max_days: int = 200,
                   fraud: bool = True, honest_holders: bool = True,
                   scheme: SchemeConfig | None = None) -> ScenarioConfig:
    """Scenario for the profit accounting: a unanimous coalition sells copies until exposed.

    Honest holders carry the ``u`` user tokens and reissue them at rate
    ``rho``; copy buyers check each newly received token once with the same
    rate. The run stops one day after exposure so forgone fees are observed.
    """
    m = econ.num_banks
    y = int(round(econ.copies_per_day))
    t = int(round(econ.threshold))
    u = int(round(econ.total_user_tokens))
    strategy = (StrategyConfig(kind="copy_coalition", copies_per_day=y) if fraud
                else StrategyConfig(kind="honest"))
    users = []
    if honest_holders and u:
        users.append(ActorGroup(prefix="H", count=u, tokens=1, wealth=1e6,
                                strategy=StrategyConfig(kind="periodic_reissue",
                                                        reissue_prob_per_token_day=econ.reissue_prob)))
    if fraud and y:
        users.append(ActorGroup(prefix="U", count=y, wealth=1e6, copy_buyer=True,
                                strategy=StrategyConfig(kind="periodic_reissue", scope="new_receipts",
                                                        reissue_prob_per_token_day=econ.reissue_prob)))
    return ScenarioConfig(
        name="fraud" if fraud else "honest_fees",
        seed=seed, trials=trials, days=max_days,
        scheme=scheme or SchemeConfig(completeness_error=0.0),
        banks=[ActorGroup(prefix="B", count=m, tokens=t, strategy=strategy)],
        users=users,
        economics=EconomicsConfig(threshold=econ.threshold, token_value=econ.token_value,
                                  cost_coefficient=econ.cost_coefficient,
                                  revenue_coefficient=econ.revenue_coefficient,
                                  revenue_per_copy=econ.revenue_per_copy,
                                  reissue_prob=econ.reissue_prob, total_user_tokens=econ.total_user_tokens,
                                  copies_per_day=econ.copies_per_day),
        repeated_checks=False,
        stop_on_exposure=True,
        horizon_days=1,
    )


def calibrate_alpha(econ: EconomicParams, *, trials: int = 20, days: int = 30, seed: int = 0) -> float:
    """Measured reissue revenue per day over its nominal value ``rho*c*V*u`` (no fraud)."""
    nominal = econ.reissue_prob * econ.cost_coefficient * econ.token_value * econ.total_user_tokens
    if nominal == 0:
        return 1.0
    config = fraud_scenario(econ, seed=seed, trials=trials, max_days=days, fraud=False)
    report = run_campaign(config)
    return report["body"]["aggregate"]["mean_daily_fee_revenue"] / nominal


SWEEP_COLUMNS = ["b", "relaxed_security", "simulated_b", "exposure_days_mean"]
PARAM_FIELDS = ["num_banks", "threshold", "token_value", "reissue_prob", "total_user_tokens",
                "cost_coefficient", "revenue_coefficient", "copies_per_day"]


def sweep(config) -> list[dict]:
    """Evaluate the profit model over the config's parameter grid."""
    config = load_config(config)
    if config.sweep is None:
        raise ConfigError("scenario has no sweep section", ["sweep: field required for sweeps"])
    base = config.economic_params()
    names = sorted(config.sweep.grid)
    for name in names:
        if name not in PARAM_FIELDS:
            raise ConfigError("bad sweep grid", [f"sweep.grid.{name}: unknown parameter"])
    rows = []
    for point, values in enumerate(itertools.product(*(config.sweep.grid[k] for k in names))):
        changes = dict(zip(names, values))
        if "num_banks" in changes:
            changes["num_banks"] = int(changes["num_banks"])
        econ = base.replace(**changes)
        row = {f: getattr(econ, f) for f in PARAM_FIELDS}
        row["b"] = economics.bank_profit(econ)
        try:
            row["relaxed_security"] = economics.relaxed_security_holds(econ)
        except Exception:
            row["relaxed_security"] = None
        row["simulated_b"] = None
        row["exposure_days_mean"] = None
        if config.sweep.simulate_trials:
            scen = fraud_scenario(econ, seed=config.seed + point, trials=config.sweep.simulate_trials,
                                  max_days=config.sweep.max_days)
            agg = run_campaign(scen)["body"]["aggregate"]
            row["simulated_b"] = agg["coalition_net"]["mean"]
            row["exposure_days_mean"] = agg["exposure"]["mean_day"]
        rows.append(row)
    return rows


def sweep_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(PARAM_FIELDS + SWEEP_COLUMNS)
    for row in rows:
        writer.writerow([_cell(row[c]) for c in PARAM_FIELDS + SWEEP_COLUMNS])
    return buf.getvalue()


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    return repr(value) if isinstance(value, float) else value
