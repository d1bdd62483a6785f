"""Closed-form economics of fraud by self-interested banks.

Symbols follow the usual profit accounting: ``m`` banks each hold a reserve
of ``t`` tokens of value ``V``; users hold ``u`` tokens and reissue each with
probability ``rho`` per day at a fee of ``c*V``; the coalition can hand out
``Y`` copies per day and ``alpha`` scales the reissue revenue it expects.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from typing import TYPE_CHECKING

from .errors import ParameterDomainError

if TYPE_CHECKING:
    from .world import World


@dataclass(frozen=True)
class EconomicParams:
    num_banks: int = 1
    threshold: float = 0.0
    token_value: float = 1.0
    reissue_prob: float = 0.0
    total_user_tokens: float = 0.0
    cost_coefficient: float = 0.0
    revenue_coefficient: float = 1.0
    copies_per_day: float = 0.0
    revenue_per_copy: float | None = None

    def __post_init__(self):
        if self.num_banks < 1:
            raise ParameterDomainError("num_banks must be at least 1")
        for name, value in asdict(self).items():
            if name == "revenue_per_copy" and value is None:
                continue
            if value < 0:
                raise ParameterDomainError(f"{name} must be non-negative, got {value}")
        if self.reissue_prob > 1:
            raise ParameterDomainError("reissue_prob is a probability")

    def replace(self, **changes) -> EconomicParams:
        return replace(self, **changes)

    @property
    def copy_revenue(self) -> float:
        """Revenue the coalition books per copy; the token value unless overridden."""
        return self.token_value if self.revenue_per_copy is None else self.revenue_per_copy

    @property
    def reserve_value(self) -> float:
        return self.num_banks * self.threshold * self.token_value

    @property
    def forgone_reissue_revenue(self) -> float:
        """Expected reissue fees lost over one day once the money is worthless."""
        return (self.revenue_coefficient * self.reissue_prob * self.cost_coefficient
                * self.token_value * self.total_user_tokens)


def bank_profit(p: EconomicParams) -> float:
    """Net gain of circulating copies: revenue minus reserve and forgone fee losses."""
    return p.copies_per_day * p.copy_revenue - (p.reserve_value + p.forgone_reissue_revenue)


def relaxed_security_holds(p: EconomicParams) -> bool:
    """True when the user-chosen reissue rate and fee make copying unprofitable."""
    if p.revenue_coefficient <= 0 or p.total_user_tokens <= 0:
        raise ParameterDomainError("needs revenue_coefficient > 0 and total_user_tokens > 0")
    lhs = (p.copies_per_day - p.num_banks * p.threshold) / (p.revenue_coefficient * p.total_user_tokens)
    return lhs < p.reissue_prob * p.cost_coefficient


def minimum_cost_coefficient(p: EconomicParams) -> float:
    """Smallest fee coefficient above which copying loses money (0 when reserves suffice)."""
    if p.num_banks * p.threshold > p.copies_per_day:
        return 0.0
    if p.reissue_prob == 0:
        return math.inf
    return (p.copies_per_day - p.num_banks * p.threshold) / (
        p.revenue_coefficient * p.total_user_tokens * p.reissue_prob)


def exposure_probability_per_day(copies_per_day: float, reissue_prob: float) -> float:
    if not 0 <= reissue_prob <= 1 or copies_per_day < 0:
        raise ParameterDomainError("need 0 <= reissue_prob <= 1 and copies_per_day >= 0")
    return 1.0 - (1.0 - reissue_prob) ** copies_per_day


def expected_exposure_days(copies_per_day: float, reissue_prob: float) -> float:
    """Mean of the geometric exposure day; ``math.inf`` when copies are never exposed."""
    p = exposure_probability_per_day(copies_per_day, reissue_prob)
    return math.inf if p == 0 else 1.0 / p


def apply_value_collapse(world: World, reason: str | None = None) -> World:
    """Zero the token value once fraud is exposed or the last bank has left.

    Loss entries are booked at the pre-collapse value. Without a trigger the
    world is returned untouched.
    """
    if world.collapsed:
        return world
    if reason is None:
        if not world.banks:
            reason = "no_banks"
        elif world.fraud_exposed and world.collapse_on_exposure:
            reason = "fraud_exposed"
        else:
            return world
    value = world.token_value
    for actor_id in sorted(world.actors):
        actor = world.actors[actor_id]
        held = len(actor.holdings)
        if held and value:
            kind = "reserve_loss" if actor.is_bank else "value_collapse"
            actor.credit(world.day, kind, -held * value)
    world.pre_collapse_value = value
    world.token_value = 0.0
    world.collapsed = True
    world.log_event("value_collapse", reason=reason, pre_collapse_value=value)
    return world
