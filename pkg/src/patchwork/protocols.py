"""The seven patchwork-money protocols as explicit step machines.

Each call opens a :class:`ProtocolSession`, walks its step graph and closes
it as ``accepted`` or ``terminated``. Retry loops that the protocols leave
unbounded are capped by ``world.max_retries``; exhausting the cap is reported
rather than looping forever.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from . import economics
from .errors import (
    ContractViolation,
    GenerationFailure,
    ParameterDomainError,
    PaymentError,
)
from .token_model import Shard, required_verifications

ACCEPTED = "accepted"
TERMINATED = "terminated"
RUNNING = "running"

# allowed phase transitions per protocol; "start" is the entry phase
STEP_GRAPH: dict[str, dict[str, set[str]]] = {
    "generate": {"start": {"shards"}, "shards": {"accept"}, "accept": {"shards", "combine"},
                 "combine": set()},
    "verify": {"start": {"inspect"}, "inspect": {"transfer"}, "transfer": set()},
    "sign": {"start": {"inspect"}, "inspect": {"signature"}, "signature": {"attest"},
             "attest": set()},
    "promote": {"start": {"threshold"}, "threshold": {"inspect"}, "inspect": {"signature"},
                "signature": {"attest"}, "attest": set()},
    "demote": {"start": {"check"}, "check": {"erase"}, "erase": {"exclude"}, "exclude": set()},
    "reissue": {"start": {"remaining"}, "remaining": {"new_shard"}, "new_shard": {"complete"},
                "complete": set()},
    "reissue_costed": {"start": {"remaining"}, "remaining": {"new_shard"},
                       "new_shard": {"complete"}, "complete": set()},
}


@dataclass
class ShardSlot:
    scheme_id: str
    issuer: str
    expected_version: int
    shard: Shard | None


@dataclass
class PatchworkToken:
    money_id: str
    slots: list[ShardSlot]
    holder: str
    signers: list[str] = field(default_factory=list)
    instance_id: str = ""
    # ground truth for reporting only; strategies never read it
    is_copy: bool = False
    received_day: int = 0

    def structure(self) -> list[tuple[str, int]]:
        return [(s.issuer, s.expected_version) for s in self.slots]


@dataclass
class ProtocolSession:
    protocol: str
    participants: tuple[str, ...]
    session_id: int = 0
    phase: str = "start"
    transcript: list = field(default_factory=list)
    outcome: str = RUNNING
    on_close: Callable | None = None

    def advance(self, phase: str) -> None:
        if self.outcome != RUNNING:
            raise ContractViolation(f"session {self.session_id} already {self.outcome}")
        if phase not in STEP_GRAPH[self.protocol][self.phase]:
            raise ContractViolation(f"{self.protocol}: no step from {self.phase} to {phase}")
        self.phase = phase

    def send(self, kind: str, sender: str, receiver: str, item: str = "") -> None:
        if self.outcome != RUNNING:
            raise ContractViolation(f"session {self.session_id} takes no further messages")
        self.transcript.append((self.phase, kind, sender, receiver, item))

    def close(self, outcome: str) -> str:
        if self.outcome != RUNNING:
            raise ContractViolation(f"session {self.session_id} already {self.outcome}")
        self.outcome = outcome
        if self.on_close is not None:
            self.on_close(self)
        return outcome


def _verify_slot(world, slot: ShardSlot, session, sender: str, verifier: str, kind: str,
                 check_attestation: bool = True) -> bool:
    session.send(kind, sender, verifier, slot.shard.shard_id if slot.shard else "-")
    record = world.registry.record(slot.scheme_id)
    if check_attestation and not world.registry.is_fully_attested(
        slot.scheme_id, record.version, record.required
    ):
        session.send("unattested", verifier, sender, slot.scheme_id)
        return False
    ok = world.model.verify(slot.scheme_id, slot.expected_version, slot.shard, world.rng)
    session.send("accept" if ok else "reject", verifier, sender, slot.scheme_id)
    return ok


def _check_poly_bound(world, m: int) -> None:
    eps = world.params.completeness_error
    if world.enforce_poly_bound and eps > 0 and 1.0 / eps <= 2 * m:
        raise ParameterDomainError(f"p(n) = {1.0 / eps:g} must exceed 2m = {2 * m}")


def generate_patchwork(world, banks: list[str], count: int, assembler: str | None = None):
    """Mint ``count`` patchwork tokens, one shard per bank.

    The assembler receives every other bank's shard and checks it; any
    rejection restarts shard generation. With ``repeated_checks`` each
    shard must survive ``required_verifications(2m, standard_score)`` checks.
    """
    banks = list(banks)
    m = len(banks)
    if m < 1:
        raise ContractViolation("generation needs at least one bank")
    if assembler is not None and assembler not in banks:
        raise ContractViolation(f"assembler {assembler} is not a bank")
    _check_poly_bound(world, m)
    checks = required_verifications(2 * m, world.standard_score) if world.repeated_checks else 1

    tokens = []
    for _ in range(count):
        chooser = assembler or world.next_assembler(banks)
        session = world.open_session("generate", banks)
        for attempt in range(world.max_retries + 1):
            session.advance("shards")
            slots = []
            for bank in banks:
                key = world.model.key_gen(world.params, bank, required=set(banks))
                shard = world.actors[bank].strategy.provide_shard(world, bank, key)
                slots.append(ShardSlot(key.scheme_id, bank, 0, shard))
                if bank != chooser:
                    session.send("shard", bank, chooser, shard.shard_id)
            session.advance("accept")
            ok = True
            for slot in slots:
                if slot.issuer == chooser:
                    continue
                for _ in range(checks):
                    # keys are signed only once the token is assembled
                    if not _verify_slot(world, slot, session, slot.issuer, chooser, "check",
                                        check_attestation=False):
                        ok = False
                        break
                if not ok:
                    break
            if ok:
                break
            session.send("restart", chooser, "*", str(attempt + 1))
        else:
            session.close(TERMINATED)
            raise GenerationFailure(f"shards rejected {world.max_retries + 1} times in a row")
        session.advance("combine")
        for slot in slots:
            for bank in banks:
                world.registry.sign(slot.scheme_id, 0, bank)
        token = PatchworkToken(world.next_money_id(), slots, chooser,
                               instance_id=world.next_instance_id())
        world.add_token(token, chooser)
        session.close(ACCEPTED)
        tokens.append(token)
    return tokens


def composite_verify(world, token: PatchworkToken) -> bool:
    """One pass of Ver over every shard; accepted only if all shards accept."""
    for slot in token.slots:
        if not world.model.verify(slot.scheme_id, slot.expected_version, slot.shard, world.rng):
            return False
    return bool(token.slots)


def verify_patchwork(world, sender: str, verifier: str, token: PatchworkToken) -> str:
    """Inspect every shard with return, then transfer them one by one.

    On acceptance the verifier becomes the holder. A rejection terminates the
    session; already transferred shards go back to the sender unless
    ``world.lost_shard_on_abort`` is set, in which case the rejected shard is
    stranded at the verifier.
    """
    if token.holder != sender:
        raise ContractViolation(f"{sender} does not hold {token.instance_id}")
    session = world.open_session("verify", (sender, verifier))
    session.advance("inspect")
    if token.money_id in world.actors[verifier].signed and not any(
        s.issuer == verifier for s in token.slots
    ):
        session.send("missing_own_signature", verifier, sender)
        return session.close(TERMINATED)
    if not token.slots:
        return session.close(TERMINATED)
    for slot in token.slots:
        if not _verify_slot(world, slot, session, sender, verifier, "inspect"):
            return session.close(TERMINATED)
        session.send("return", verifier, sender)
    session.advance("transfer")
    for index, slot in enumerate(token.slots):
        if not _verify_slot(world, slot, session, sender, verifier, "transfer"):
            if world.lost_shard_on_abort and slot.shard is not None:
                world.lost_shards.append({"shard_id": slot.shard.shard_id, "at": verifier,
                                          "token": token.instance_id, "index": index})
                slot.shard = None
                session.send("stranded", verifier, sender, str(index))
            else:
                session.send("return_all", verifier, sender, str(index))
            return session.close(TERMINATED)
        session.send("keep", verifier, sender)
    world.move_token(token, verifier)
    return session.close(ACCEPTED)


def _add_signature_shard(world, user: str, token: PatchworkToken,
                         attesters: list[str], session) -> str:
    sender = token.holder
    session.advance("inspect")
    for slot in token.slots:
        if not _verify_slot(world, slot, session, sender, user, "inspect"):
            return session.close(TERMINATED)
        session.send("return", user, sender)
    session.advance("signature")
    key = world.model.key_gen(world.params, user, required=set(attesters))
    for _ in range(world.max_retries + 1):
        shard = world.model.mint(key, user)
        slot = ShardSlot(key.scheme_id, user, 0, shard)
        if _verify_slot_unattested(world, slot, session, user, sender):
            break
        session.send("retry", sender, user)
    else:
        return session.close(TERMINATED)
    token.slots.append(slot)
    world.index_slot(token, key.scheme_id)
    session.advance("attest")
    for signer in attesters:
        world.registry.sign(key.scheme_id, 0, signer)
        session.send("attest", signer, "*", key.scheme_id)
    token.signers.append(user)
    world.actors[user].signed.add(token.money_id)
    return session.close(ACCEPTED)


def _verify_slot_unattested(world, slot, session, sender, verifier) -> bool:
    # attestation happens only after the holder has accepted the new shard
    session.send("signature", sender, verifier, slot.shard.shard_id)
    ok = world.model.verify(slot.scheme_id, slot.expected_version, slot.shard, world.rng)
    session.send("accept" if ok else "reject", verifier, sender, slot.scheme_id)
    return ok


def sign_patchwork(world, user: str, tokens=None, signers=None) -> list[str]:
    """A nonbank user adds its signature shard to every token.

    Banks and earlier signers of the token attest the new key. Returns one
    session outcome per token.
    """
    actor = world.actors[user]
    if actor.is_bank:
        raise ContractViolation(f"{user} is a bank; banks do not sign")
    if tokens is None:
        tokens = [world.tokens[t] for t in sorted(world.tokens)]
    outcomes = []
    for token in tokens:
        banks = list(signers) if signers is not None else list(world.banks)
        attesters = banks + [s for s in token.signers if s not in banks]
        session = world.open_session("sign", [token.holder, user])
        outcomes.append(_add_signature_shard(world, user, token, attesters, session))
    return outcomes


def promote_user(world, user: str, threshold: float) -> str:
    """Admit a user into the bank set once its holdings reach ``threshold``."""
    actor = world.actors[user]
    if actor.is_bank:
        raise ContractViolation(f"{user} is already a bank")
    tokens = [world.tokens[t] for t in sorted(world.tokens)]
    outer = world.open_session("promote", [*world.banks, user])
    outer.advance("threshold")
    outer.send("holdings", user, "*", str(len(actor.holdings)))
    if len(actor.holdings) < threshold:
        return outer.close(TERMINATED)
    for token in tokens:
        session = world.open_session("promote", [token.holder, user])
        session.advance("threshold")
        _add_signature_shard(world, user, token, list(world.banks), session)
    outer.advance("inspect")
    outer.advance("signature")
    outer.advance("attest")
    actor.kind = "bank"
    world.banks.append(user)
    world.log_event("promoted", actor=user)
    return outer.close(ACCEPTED)


def demote_bank(world, bank: str, threshold: float) -> str:
    """Drop a bank whose holdings fell below ``threshold`` and strip its shards."""
    if bank not in world.banks:
        raise ContractViolation(f"{bank} is not a bank")
    actor = world.actors[bank]
    session = world.open_session("demote", [bank])
    session.advance("check")
    held = len(actor.holdings)
    session.send("holdings", "*", "*", f"{bank}:{held}")
    if held >= threshold:
        return session.close(TERMINATED)
    session.advance("erase")
    # every user reads the ledger entry; signatures are ideal so reads cannot disagree
    session.send("announce", "*", "*", bank)
    for token in world.tokens.values():
        kept = []
        for slot in token.slots:
            if slot.issuer == bank:
                world.index_slot(token, slot.scheme_id, present=False)
            else:
                kept.append(slot)
        token.slots = kept
    session.advance("exclude")
    world.banks.remove(bank)
    actor.kind = "user"
    world.log_event("demoted", actor=bank)
    outcome = session.close(ACCEPTED)
    if not world.banks:
        economics.apply_value_collapse(world, "no_banks")
    return outcome


def reissue(world, user: str, token: PatchworkToken, broken_index: int,
            costed: bool = False, fee: float = 0.0) -> str:
    """Replace one shard with a fresh mint under the next public-key version.

    The issuer of the broken shard first checks every remaining shard;
    any rejection ends the session and the old shard stays in place.
    """
    if token.holder != user:
        raise ContractViolation(f"{user} does not hold {token.instance_id}")
    if not 0 <= broken_index < len(token.slots):
        raise ContractViolation(f"no shard at index {broken_index}")
    payer = world.actors[user]
    if costed and payer.wealth < fee:
        raise PaymentError(f"{user} cannot pay the reissue fee {fee}")
    broken = token.slots[broken_index]
    bank = world.model.holder_of(broken.scheme_id)
    session = world.open_session("reissue_costed" if costed else "reissue", (user, bank))
    session.advance("remaining")
    for index, slot in enumerate(token.slots):
        if index == broken_index:
            continue
        if not _verify_slot(world, slot, session, user, bank, "remaining"):
            current = world.registry.current_version(slot.scheme_id)
            if slot.expected_version < current and payer.strategy.reports_fraud:
                world.expose_fraud(user, scheme_id=slot.scheme_id)
            return session.close(TERMINATED)
        session.send("return", bank, user)
    session.advance("new_shard")
    version = world.model.republish(broken.scheme_id, bank, required=set(world.banks))
    for _ in range(world.max_retries + 1):
        shard = world.model.mint_for(broken.scheme_id, bank)
        session.send("new_shard", bank, user, shard.shard_id)
        ok = world.model.verify(broken.scheme_id, version, shard, world.rng)
        session.send("accept" if ok else "reject", user, bank, broken.scheme_id)
        if ok:
            break
    else:
        return session.close(TERMINATED)
    session.advance("complete")
    for signer in world.banks:
        world.registry.sign(broken.scheme_id, version, signer)
    if costed:
        payer.credit(world.day, "fee", -fee)
        world.actors[bank].credit(world.day, "fee", fee)
        session.send("fee", user, bank, f"{fee:.6g}")
    broken.shard = shard
    broken.expected_version = version
    world.observe_supersession(broken.scheme_id, reissuer=user)
    return session.close(ACCEPTED)
