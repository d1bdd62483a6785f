import numpy as np

from patchwork import actors, protocols
from patchwork.actors import (
    ActorState,
    CopyCoalition,
    HonestBank,
    Observation,
    PeriodicReissueUser,
    SelfInterestedBank,
    coalition_copy,
)
from patchwork.economics import EconomicParams
from patchwork.protocols import ACCEPTED, TERMINATED
from patchwork.theorems import bank_world

from .conftest import scheme

RNG = np.random.default_rng(0)


def obs(day=1, banks=("B1", "B2"), value=1.0, exposed=False, holdings=()):
    return Observation(day, banks, value, exposed, list(holdings))


def test_honest_bank_is_idle():
    actor = ActorState("B1", "bank", HonestBank())
    assert actors.act(actor, obs(), RNG) == []


def test_coalition_leader_speaks_once():
    strat = CopyCoalition(members=frozenset({"B1", "B2"}), copies_per_day=5)
    lead = strat.act(ActorState("B1", "bank", strat), obs(), RNG)
    other = strat.act(ActorState("B2", "bank", strat), obs(), RNG)
    assert [a.kind for a in lead] == ["distribute_copies"] and other == []
    assert strat.act(ActorState("B1", "bank", strat), obs(exposed=True), RNG) == []


def test_self_interested_bank_follows_profit_sign():
    losing = EconomicParams(num_banks=2, threshold=50, token_value=10, reissue_prob=0.1,
                            total_user_tokens=100, cost_coefficient=0.5, copies_per_day=20)
    strat = SelfInterestedBank(profit_model=losing, members=frozenset({"B1", "B2"}))
    actor = ActorState("B1", "bank", strat)
    assert strat.act(actor, obs(value=10), RNG) == []
    strat = SelfInterestedBank(profit_model=losing.replace(copies_per_day=200),
                               members=frozenset({"B1", "B2"}))
    assert [a.kind for a in strat.act(actor, obs(value=10), RNG)] == ["distribute_copies"]
    # an honest bank outside the coalition makes copying pointless
    assert strat.act(actor, obs(banks=("B1", "B2", "B3"), value=10), RNG) == []


def test_periodic_user_scope_new_receipts():
    world = bank_world(2, scheme(), 0)
    tokens = protocols.generate_patchwork(world, list(world.banks), 2)
    strat = PeriodicReissueUser(reissue_prob=1.0, scope="new_receipts")
    world.day = 3
    world.move_token(tokens[0], "U1")
    tokens[1].received_day = 1
    out = strat.act(world.actors["U1"], obs(day=3, holdings=tokens), RNG)
    assert [a.args["token"] for a in out] == [tokens[0].instance_id]


def test_reissuing_user_learns_of_fraud():
    world = bank_world(3, scheme(), 0, users=2, repeated_checks=False)
    (token,) = protocols.generate_patchwork(world, list(world.banks), 1)
    world.actors["U1"].strategy = PeriodicReissueUser()
    copy = coalition_copy(world, ["B1", "B2", "B3"], token, caller="B1")
    world.add_token(copy, "U1")
    world.move_token(token, "U2")
    # the original's owner reissues first; the copy's scheme moves on
    world.shared_fraud_awareness = False
    world.actors["U2"].strategy = PassiveLike()
    assert protocols.reissue(world, "U2", token, 2) == ACCEPTED
    assert world.actors["U1"].aware_of_fraud
    assert protocols.reissue(world, "U1", copy, 0) == TERMINATED


class PassiveLike(actors.PassiveUser):
    reports_fraud = False


def test_partial_coalition_copy_contains_copy_attempts():
    world = bank_world(3, scheme(), 0, repeated_checks=False)
    (token,) = protocols.generate_patchwork(world, list(world.banks), 1)
    copy = coalition_copy(world, ["B1"], token, caller="B1")
    kinds = [s.shard.provenance.value for s in copy.slots]
    assert kinds == ["valid_mint", "copy_attempt", "copy_attempt"]
    assert copy.is_copy and copy.money_id == token.money_id
