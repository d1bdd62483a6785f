import pytest

from patchwork import protocols
from patchwork.actors import ForgingBank, PeriodicReissueUser, coalition_copy
from patchwork.errors import ContractViolation, GenerationFailure, ParameterDomainError, PaymentError
from patchwork.protocols import ACCEPTED, TERMINATED, ProtocolSession
from patchwork.stats import binomial_interval
from patchwork.theorems import bank_world

from .conftest import scheme


def world_with_tokens(m=3, eps=0.0, tokens=1, users=2, seed=0, **kw):
    kw.setdefault("repeated_checks", False)
    world = bank_world(m, scheme(eps), seed, users=users, **kw)
    minted = protocols.generate_patchwork(world, list(world.banks), tokens)
    return world, minted


def test_single_bank_token_is_plain_money():
    world, _ = world_with_tokens(m=1, eps=0.05, tokens=10)
    tokens = list(world.tokens.values())
    n = 50_000
    ok = sum(protocols.composite_verify(world, tokens[i % 10]) for i in range(n))
    lo, hi = binomial_interval(0.95, n)
    assert lo <= ok / n <= hi


def test_three_bank_completeness_error():
    world, tokens = world_with_tokens(m=3, eps=0.01, tokens=10)
    n = 100_000
    ok = sum(protocols.composite_verify(world, tokens[i % 10]) for i in range(n))
    lo, hi = binomial_interval(0.99**3, n)
    assert lo <= ok / n <= hi
    assert 1 - ok / n == pytest.approx(1 - 0.99**3, abs=0.003)


def test_forging_bank_exhausts_retry_budget():
    world = bank_world(2, scheme(0.0), 0, repeated_checks=False, max_retries=5)
    world.add_actor("F", "bank", ForgingBank())
    with pytest.raises(GenerationFailure):
        protocols.generate_patchwork(world, list(world.banks), 1, assembler="B1")
    restarts = [t for s in world.sessions for t in s.transcript if t[1] == "restart"]
    assert len(restarts) == 6
    assert not world.tokens


def test_generation_requires_poly_bound():
    world = bank_world(3, scheme(0.2), 0)
    with pytest.raises(ParameterDomainError):
        protocols.generate_patchwork(world, list(world.banks), 1)


def test_repeated_checks_count():
    world = bank_world(2, scheme(0.0), 0, repeated_checks=True, standard_score=2.0)
    protocols.generate_patchwork(world, list(world.banks), 1, assembler="B1")
    checks = [t for t in world.sessions[0].transcript if t[1] == "check"]
    # one other bank, ceil(2^2 * (4 - 1)) = 12 checks
    assert len(checks) == 12


def test_tokens_are_fully_attested():
    world, (token,) = world_with_tokens(m=3)
    for slot in token.slots:
        rec = world.registry.record(slot.scheme_id)
        assert rec.attestations == set(world.banks) == rec.required


def test_verify_moves_token_when_all_valid():
    world, (token,) = world_with_tokens(m=3)
    world.move_token(token, "U1")
    assert protocols.verify_patchwork(world, "U1", "U2", token) == ACCEPTED
    assert token.holder == "U2"
    assert token.instance_id in world.actors["U2"].holdings


def test_verify_rejects_copy_shard():
    world, (token,) = world_with_tokens(m=3)
    rejected = 0
    for _ in range(200):
        copy = coalition_copy(world, ["B1", "B2"], token, caller="B1")
        world.add_token(copy, "B1")
        rejected += protocols.verify_patchwork(world, "B1", "U1", copy) == TERMINATED
        world.remove_token(copy)
    assert rejected == 200


def test_two_phase_acceptance_rate():
    world, (token,) = world_with_tokens(m=4, eps=0.05, users=2)
    world.move_token(token, "U1")
    n = 20_000
    ok = 0
    for _ in range(n):
        other = "U2" if token.holder == "U1" else "U1"
        ok += protocols.verify_patchwork(world, token.holder, other, token) == ACCEPTED
    lo, hi = binomial_interval(0.95**8, n)
    assert lo <= ok / n <= hi


def test_rejected_transfer_returns_shards_by_default():
    world, (token,) = world_with_tokens(m=2)
    world.move_token(token, "U1")
    world.model.republish(token.slots[1].scheme_id, "B2")
    world.registry.sign(token.slots[1].scheme_id, 1, "B1")
    world.registry.sign(token.slots[1].scheme_id, 1, "B2")
    assert protocols.verify_patchwork(world, "U1", "U2", token) == TERMINATED
    assert token.holder == "U1"
    assert all(s.shard is not None for s in token.slots)


def test_lost_shard_on_abort_strands_rejected_shard():
    world, (token,) = world_with_tokens(m=2, lost_shard_on_abort=True)
    world.move_token(token, "U1")
    # inspection passes, then the transfer-phase check of the second shard fails
    calls = iter([True, True, True, False])
    real = world.model.verify
    world.model.verify = lambda *a: real(*a) and next(calls)
    assert protocols.verify_patchwork(world, "U1", "U2", token) == TERMINATED
    assert token.slots[1].shard is None
    assert world.lost_shards[0]["at"] == "U2"
    assert world.shard_custody_ok()


def test_session_enforces_step_graph():
    session = ProtocolSession("verify", ("a", "b"))
    with pytest.raises(ContractViolation):
        session.advance("transfer")
    session.advance("inspect")
    session.close(TERMINATED)
    with pytest.raises(ContractViolation):
        session.send("x", "a", "b")


def test_sign_adds_signature_shard_and_rejects_unsigned_copies():
    world, tokens = world_with_tokens(m=2, tokens=3, users=2)
    outcomes = protocols.sign_patchwork(world, "U1")
    assert outcomes == [ACCEPTED] * 3
    for token in tokens:
        assert len(token.slots) == 3 and token.slots[-1].issuer == "U1"
    # a full bank coalition copies the original two shards but cannot mint U1's
    original = tokens[0]
    stripped = coalition_copy(world, ["B1", "B2"], original, caller="B1")
    stripped.slots = stripped.slots[:2]
    world.add_token(stripped, "B1")
    assert protocols.verify_patchwork(world, "B1", "U1", stripped) == TERMINATED
    with_attempt = coalition_copy(world, ["B1", "B2"], original, caller="B1")
    world.add_token(with_attempt, "B1")
    assert protocols.verify_patchwork(world, "B1", "U1", with_attempt) == TERMINATED


def test_sign_with_no_tokens_is_noop():
    world = bank_world(2, scheme(), 0)
    assert protocols.sign_patchwork(world, "U1") == []


def test_reissue_happy_path():
    world, (token,) = world_with_tokens(m=3)
    world.move_token(token, "U1")
    old = token.slots[1].shard
    sid = token.slots[1].scheme_id
    assert protocols.reissue(world, "U1", token, 1) == ACCEPTED
    assert world.registry.current_version(sid) == 1
    assert token.slots[1].expected_version == 1
    assert world.model.acceptance_probability(sid, old) == world.params.soundness_error
    assert world.is_current(token)


def test_reissue_of_circulating_copy_exposes_fraud():
    world, (token,) = world_with_tokens(m=3, users=2)
    world.actors["U2"].strategy = PeriodicReissueUser()
    copy = coalition_copy(world, ["B1", "B2", "B3"], token, caller="B1")
    world.add_token(copy, "U2")
    world.move_token(token, "U1")
    assert protocols.reissue(world, "U1", token, 0) == ACCEPTED
    # U2 sees its copy's scheme superseded on the board
    assert world.actors["U2"].aware_of_fraud and world.fraud_exposed
    # and reissuing another shard of the now-stale copy fails
    assert protocols.reissue(world, "U2", copy, 1) == TERMINATED


def test_costed_reissue_moves_fee():
    world, (token,) = world_with_tokens(m=2)
    world.move_token(token, "U1")
    world.actors["U1"].wealth = 10.0
    bank = world.model.holder_of(token.slots[0].scheme_id)
    protocols.reissue(world, "U1", token, 0, costed=True, fee=0.02 * 100)
    assert world.actors["U1"].wealth == pytest.approx(8.0)
    assert world.actors[bank].wealth == pytest.approx(2.0)


def test_costed_reissue_requires_funds():
    world, (token,) = world_with_tokens(m=2)
    world.move_token(token, "U1")
    with pytest.raises(PaymentError):
        protocols.reissue(world, "U1", token, 0, costed=True, fee=1.0)


def test_promotion_below_threshold_terminates():
    world, tokens = world_with_tokens(m=2, tokens=3)
    world.move_token(tokens[0], "U1")
    world.move_token(tokens[1], "U1")
    assert protocols.promote_user(world, "U1", 3) == TERMINATED
    assert world.banks == ["B1", "B2"]


def test_promotion_at_threshold_adds_bank_and_shards():
    world, tokens = world_with_tokens(m=2, tokens=3)
    for t in tokens:
        world.move_token(t, "U1")
    assert protocols.promote_user(world, "U1", 3) == ACCEPTED
    assert world.banks == ["B1", "B2", "U1"]
    assert all(len(t.slots) == 3 for t in tokens)


def test_demotion_strips_shards():
    world, tokens = world_with_tokens(m=3, tokens=2)
    for t in tokens:
        world.move_token(t, "U1")
    assert protocols.demote_bank(world, "B2", threshold=1) == ACCEPTED
    assert world.banks == ["B1", "B3"]
    for t in tokens:
        assert [s.issuer for s in t.slots] == ["B1", "B3"]
    assert protocols.verify_patchwork(world, "U1", "U2", tokens[0]) == ACCEPTED
    assert not world.collapsed


def test_demotion_boundary():
    world, tokens = world_with_tokens(m=2, tokens=2)
    world.move_token(tokens[0], "U1")
    held = len(world.actors["B1"].holdings) + len(world.actors["B2"].holdings)
    assert held == 1
    holder = tokens[1].holder
    assert protocols.demote_bank(world, holder, threshold=1) == TERMINATED
