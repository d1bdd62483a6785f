"""Mutable state of one simulation run."""

from __future__ import annotations

import hashlib
import json
from collections import Counter, defaultdict

import numpy as np

from .actors import ActorState, Observation, Strategy
from .registry import Registry
from .token_model import SchemeParams, TokenModel


class World:
    def __init__(
        self,
        params: SchemeParams,
        rng: np.random.Generator,
        *,
        max_retries: int = 100,
        repeated_checks: bool = False,
        standard_score: float = 1.0,
        enforce_poly_bound: bool = True,
        lost_shard_on_abort: bool = False,
        shared_fraud_awareness: bool = True,
        collapse_on_exposure: bool = True,
        token_value: float = 1.0,
        keep_transcripts: bool = True,
    ):
        self.params = params
        self.rng = rng
        self.max_retries = max_retries
        self.repeated_checks = repeated_checks
        self.standard_score = standard_score
        self.enforce_poly_bound = enforce_poly_bound
        self.lost_shard_on_abort = lost_shard_on_abort
        self.shared_fraud_awareness = shared_fraud_awareness
        self.collapse_on_exposure = collapse_on_exposure
        self.keep_transcripts = keep_transcripts

        self.registry = Registry()
        self.model = TokenModel(self.registry)
        self.actors: dict[str, ActorState] = {}
        self.banks: list[str] = []
        self.tokens: dict = {}
        self._by_scheme: dict[str, set[str]] = defaultdict(set)
        self.lost_shards: list[dict] = []

        self.token_value = token_value
        self.pre_collapse_value = token_value
        self.collapsed = False
        self.fraud_exposed = False
        self.exposure_day: int | None = None
        self.day = 0
        self.events: list[dict] = []
        self.forgone_fees: Counter = Counter()

        self.sessions = []
        self.session_outcomes: Counter = Counter()
        self._transcript_hash = hashlib.sha256()
        self._next_session = 0
        self._next_instance = 0
        self._next_money = 0
        self._assembler_cursor = 0

    # -- actors -------------------------------------------------------------

    def add_actor(self, actor_id: str, kind: str, strategy: Strategy, wealth: float = 0.0) -> ActorState:
        if actor_id in self.actors:
            raise ValueError(f"duplicate actor id {actor_id}")
        actor = ActorState(actor_id, kind, strategy, wealth=wealth)
        self.actors[actor_id] = actor
        if kind == "bank":
            self.banks.append(actor_id)
        return actor

    def next_assembler(self, banks: list[str]) -> str:
        chosen = banks[self._assembler_cursor % len(banks)]
        self._assembler_cursor += 1
        return chosen

    def observation(self, actor_id: str) -> Observation:
        actor = self.actors[actor_id]
        held = [self.tokens[t] for t in sorted(actor.holdings)]
        return Observation(self.day, tuple(self.banks), self.token_value, self.fraud_exposed, held)

    # -- tokens -------------------------------------------------------------

    def next_instance_id(self) -> str:
        self._next_instance += 1
        return f"t{self._next_instance:07d}"

    def next_money_id(self) -> str:
        self._next_money += 1
        return f"M{self._next_money:06d}"

    def add_token(self, token, holder: str) -> None:
        token.holder = holder
        token.received_day = self.day
        self.tokens[token.instance_id] = token
        self.actors[holder].holdings.add(token.instance_id)
        for slot in token.slots:
            self._by_scheme[slot.scheme_id].add(token.instance_id)

    def remove_token(self, token) -> None:
        self.tokens.pop(token.instance_id, None)
        if token.holder in self.actors:
            self.actors[token.holder].holdings.discard(token.instance_id)
        for slot in token.slots:
            self._by_scheme[slot.scheme_id].discard(token.instance_id)

    def move_token(self, token, new_holder: str) -> None:
        self.actors[token.holder].holdings.discard(token.instance_id)
        token.holder = new_holder
        token.received_day = self.day
        self.actors[new_holder].holdings.add(token.instance_id)

    def index_slot(self, token, scheme_id: str, present: bool = True) -> None:
        if present:
            self._by_scheme[scheme_id].add(token.instance_id)
        else:
            self._by_scheme[scheme_id].discard(token.instance_id)

    def tokens_with_scheme(self, scheme_id: str) -> list:
        return [self.tokens[t] for t in sorted(self._by_scheme.get(scheme_id, ()))]

    def is_current(self, token) -> bool:
        """Every shard is a genuine mint at its scheme's current key version."""
        from .token_model import Provenance

        if not token.slots:
            return False
        for slot in token.slots:
            shard = slot.shard
            if shard is None or shard.provenance is not Provenance.VALID_MINT:
                return False
            if shard.minted_version != self.registry.current_version(slot.scheme_id):
                return False
        return True

    # -- fraud monitoring ---------------------------------------------------

    def observe_supersession(self, scheme_id: str, reissuer: str) -> list[str]:
        """Holders of tokens left stale by a reissue notice it on the public board.

        Returns the actor ids that became aware of fraud.
        """
        current = self.registry.current_version(scheme_id)
        detectors = []
        for token in self.tokens_with_scheme(scheme_id):
            if token.holder == reissuer:
                continue
            stale = any(s.scheme_id == scheme_id and s.expected_version < current for s in token.slots)
            if not stale:
                continue
            holder = self.actors[token.holder]
            if holder.strategy.reports_fraud and not holder.aware_of_fraud:
                holder.aware_of_fraud = True
                detectors.append(holder.actor_id)
        if detectors:
            self.expose_fraud(detectors[0], scheme_id=scheme_id)
        return detectors

    def expose_fraud(self, detector: str, **details) -> None:
        self.actors[detector].aware_of_fraud = True
        if self.fraud_exposed:
            return
        self.fraud_exposed = True
        self.exposure_day = self.day
        self.log_event("fraud_exposed", detector=detector, **details)
        if self.shared_fraud_awareness:
            for actor in self.actors.values():
                if actor.strategy.reports_fraud:
                    actor.aware_of_fraud = True

    # -- bookkeeping ---------------------------------------------------------

    def log_event(self, kind: str, **details) -> None:
        self.events.append({"day": self.day, "kind": kind, **details})

    def open_session(self, protocol: str, participants):
        from .protocols import ProtocolSession

        self._next_session += 1
        return ProtocolSession(protocol, tuple(participants), session_id=self._next_session,
                               on_close=self._close_session)

    def _close_session(self, session) -> None:
        self.session_outcomes[(session.protocol, session.outcome)] += 1
        self._transcript_hash.update(
            json.dumps([session.session_id, session.protocol, session.outcome, session.transcript],
                       separators=(",", ":")).encode()
        )
        if self.keep_transcripts:
            self.sessions.append(session)

    def transcript_digest(self) -> str:
        return self._transcript_hash.hexdigest()

    def shard_custody_ok(self) -> bool:
        """No shard handle sits in two places at once."""
        seen = set()
        for token in self.tokens.values():
            for slot in token.slots:
                if slot.shard is None:
                    continue
                if slot.shard.shard_id in seen:
                    return False
                seen.add(slot.shard.shard_id)
        for lost in self.lost_shards:
            if lost["shard_id"] in seen:
                return False
            seen.add(lost["shard_id"])
        return True
