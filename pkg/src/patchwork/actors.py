"""Bank and user strategies, including the adversaries the security claims quantify over.

A strategy is a pure decision function of the actor's state, what it can
observe, the day and the shared generator. It returns :class:`Action`
records; the event loop in :mod:`patchwork.sim` executes them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

from .economics import EconomicParams, bank_profit
from .token_model import KeyPair, Shard

if TYPE_CHECKING:
    import numpy as np

    from .protocols import PatchworkToken
    from .world import World


@dataclass
class Action:
    kind: str
    actor: str
    args: dict[str, Any] = field(default_factory=dict)


@dataclass
class Observation:
    """What an actor can see when it decides: the public board plus its own holdings."""

    day: int
    banks: tuple[str, ...]
    token_value: float
    fraud_exposed: bool
    holdings: list[PatchworkToken]


class Strategy:
    kind = "base"
    reports_fraud = True

    def act(self, actor: ActorState, obs: Observation, rng: np.random.Generator) -> list[Action]:
        return []

    def provide_shard(self, world: World, actor_id: str, key: KeyPair) -> Shard:
        """Shard this actor hands over in token generation."""
        return world.model.mint(key, actor_id)

    def describe(self) -> dict:
        return {"kind": self.kind}


class HonestBank(Strategy):
    kind = "honest"


class PassiveUser(Strategy):
    kind = "passive"


class ForgingBank(Strategy):
    """Sends forged shards during generation instead of minting."""

    kind = "forging"
    reports_fraud = False

    def provide_shard(self, world, actor_id, key):
        return world.model.forge(key.scheme_id)


@dataclass
class PeriodicReissueUser(Strategy):
    """Runs costed reissue on held tokens to monitor the banks.

    ``scope="holdings"`` draws once per held token per day.
    ``scope="new_receipts"`` draws only for tokens received that day.
    """

    reissue_prob: float = 0.1
    scope: str = "holdings"
    costed: bool = True
    kind = "periodic_reissue"

    def act(self, actor, obs, rng):
        actions = []
        for token in obs.holdings:
            if self.scope == "new_receipts" and token.received_day != obs.day:
                continue
            if not token.slots:
                continue
            if rng.random() < self.reissue_prob:
                index = int(rng.integers(len(token.slots)))
                actions.append(
                    Action("reissue", actor.actor_id,
                           {"token": token.instance_id, "broken_index": index, "costed": self.costed})
                )
        return actions

    def describe(self):
        return {"kind": self.kind, "reissue_prob_per_token_day": self.reissue_prob,
                "scope": self.scope, "costed": self.costed}


def coalition_leader(obs: Observation, members) -> str | None:
    live = sorted(m for m in members if m in obs.banks)
    return live[0] if live else None


@dataclass
class CopyCoalition(Strategy):
    """Member of a bank coalition that copies tokens.

    The lowest-id live member speaks for the coalition, so the coalition as a
    whole emits at most one distribution action (of ``copies_per_day``
    copies) per day. With ``swap_attack`` the coalition instead runs the
    copy-then-reissue attack once, on ``attack_day``.
    """

    members: frozenset[str] = frozenset()
    copies_per_day: int = 0
    swap_attack: bool = False
    attack_day: int = 1
    kind = "copy_coalition"
    reports_fraud = False

    def act(self, actor, obs, rng):
        if coalition_leader(obs, self.members) != actor.actor_id or obs.fraud_exposed:
            return []
        if self.swap_attack:
            if obs.day == self.attack_day:
                return [Action("swap_attack", actor.actor_id, {"coalition": sorted(self.members)})]
            return []
        if self.copies_per_day > 0 and obs.token_value > 0:
            return [Action("distribute_copies", actor.actor_id,
                           {"count": self.copies_per_day, "coalition": sorted(self.members)})]
        return []

    def describe(self):
        return {"kind": self.kind, "members": sorted(self.members),
                "copies_per_day": self.copies_per_day, "swap_attack": self.swap_attack}


@dataclass
class SelfInterestedBank(Strategy):
    """Copies only while its ex-ante profit estimate is strictly positive."""

    profit_model: EconomicParams = None
    members: frozenset[str] = frozenset()
    kind = "self_interested"
    reports_fraud = False

    def expected_profit(self, obs: Observation) -> float:
        live = [m for m in obs.banks if m in self.members]
        params = self.profit_model.replace(num_banks=max(len(obs.banks), 1),
                                           token_value=obs.token_value)
        if len(live) < len(obs.banks):
            # honest banks refuse to mint, so the copies are worthless
            return bank_profit(params.replace(copies_per_day=0))
        return bank_profit(params)

    def act(self, actor, obs, rng):
        if coalition_leader(obs, self.members) != actor.actor_id or obs.fraud_exposed:
            return []
        if self.expected_profit(obs) <= 0:
            return []
        return [Action("distribute_copies", actor.actor_id,
                       {"count": self.profit_model.copies_per_day, "coalition": sorted(self.members)})]

    def describe(self):
        return {"kind": self.kind, "members": sorted(self.members)}


@dataclass
class ActorState:
    actor_id: str
    kind: str
    strategy: Strategy
    wealth: float = 0.0
    holdings: set[str] = field(default_factory=set)
    aware_of_fraud: bool = False
    # money ids this actor has put a signature shard on
    signed: set[str] = field(default_factory=set)
    ledger: list[tuple[int, str, float]] = field(default_factory=list)

    @property
    def is_bank(self) -> bool:
        return self.kind == "bank"

    def credit(self, day: int, kind: str, amount: float) -> None:
        self.wealth += amount
        self.ledger.append((day, kind, amount))

    def total(self, kind: str) -> float:
        return sum(a for _, k, a in self.ledger if k == kind)


def act(actor: ActorState, obs: Observation, rng) -> list[Action]:
    return actor.strategy.act(actor, obs, rng)


def coalition_copy(world: World, coalition, token: PatchworkToken, caller: str | None = None):
    """Build a copy of ``token`` with what the coalition can mint.

    Members mint fresh current-version shards of their own schemes; every
    other shard can only be attempted without the private key. Returns the
    copy, not yet registered in the world.
    """
    from .protocols import PatchworkToken, ShardSlot

    coalition = set(coalition)
    caller = caller or min(coalition)
    slots = []
    for slot in token.slots:
        holder = world.model.holder_of(slot.scheme_id)
        if holder in coalition:
            shard = world.model.mint_for(slot.scheme_id, holder)
        else:
            source = [slot.shard] if slot.shard is not None else []
            shard = world.model.attempt_copy(source, slot.scheme_id, caller)[-1]
        version = world.registry.current_version(slot.scheme_id)
        slots.append(ShardSlot(slot.scheme_id, slot.issuer, version, shard))
    return PatchworkToken(token.money_id, slots, holder=caller, signers=list(token.signers),
                          instance_id=world.next_instance_id(), is_copy=True)
