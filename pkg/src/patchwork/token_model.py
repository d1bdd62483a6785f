"""Black-box public-key quantum token scheme.

Tokens are opaque handles tracked by id. Nothing here simulates quantum
state: no-cloning holds because only the private-key holder can reach the
code path that produces ``VALID_MINT`` shards, and every other way of making
a shard yields a ``FORGED`` or ``COPY_ATTEMPT`` handle whose acceptance
probability is capped by the soundness or copy-resistance error.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import (
    AuthorizationError,
    ContractViolation,
    LemmaPreconditionError,
    ParameterDomainError,
    RegistryError,
)
from .registry import Registry


class DamageModel(str, Enum):
    NONE = "none"
    SQRT_EPSILON_DRIFT = "sqrt_epsilon_drift"


class Provenance(str, Enum):
    VALID_MINT = "valid_mint"
    FORGED = "forged"
    COPY_ATTEMPT = "copy_attempt"


@dataclass(frozen=True)
class SchemeParams:
    """Error profile of one token scheme.

    ``soundness_error`` and ``copy_resistance_error`` default to
    ``2**-security_param`` when left as ``None``.
    """

    security_param: int = 20
    completeness_error: float = 0.0
    soundness_error: float | None = None
    copy_resistance_error: float | None = None
    damage_model: DamageModel = DamageModel.NONE

    def __post_init__(self):
        if self.security_param < 1:
            raise ParameterDomainError("security_param must be a positive integer")
        negligible = 2.0 ** -self.security_param
        if self.soundness_error is None:
            object.__setattr__(self, "soundness_error", negligible)
        if self.copy_resistance_error is None:
            object.__setattr__(self, "copy_resistance_error", negligible)
        object.__setattr__(self, "damage_model", DamageModel(self.damage_model))
        eps = self.completeness_error
        if not 0.0 <= eps < 0.5:
            raise ParameterDomainError(f"completeness error must lie in [0, 1/2), got {eps}")
        for name in ("soundness_error", "copy_resistance_error"):
            value = getattr(self, name)
            if not 0.0 <= value < 1.0:
                raise ParameterDomainError(f"{name} must lie in [0, 1), got {value}")

    @classmethod
    def from_poly(cls, p_n: float, **kwargs) -> SchemeParams:
        """Params with completeness error ``1/p_n``."""
        if p_n <= 0:
            raise ParameterDomainError("p(n) must be positive")
        return cls(completeness_error=1.0 / p_n, **kwargs)

    @property
    def max_drift(self) -> float:
        """Largest per-verification damage step (zero when damage is off)."""
        if self.damage_model is DamageModel.NONE:
            return 0.0
        return math.sqrt(self.completeness_error)


@dataclass
class KeyPair:
    scheme_id: str
    private_key: str
    holder: str
    params: SchemeParams
    public_key_version: int = 0


@dataclass
class Shard:
    shard_id: str
    scheme_id: str
    minted_version: int
    provenance: Provenance
    damage: float = 0.0


@dataclass
class VerificationStats:
    calls: int = 0
    accepted: int = 0
    by_provenance: Counter = field(default_factory=Counter)


def amplify(params: SchemeParams, q_n: int, margin: float = 1e-9) -> SchemeParams:
    """Parameters of the amplified scheme with completeness error ``2**-q_n``.

    The new copy-resistance error is the smallest representable value
    strictly above ``delta / (1 - 2*eps)``; ``margin`` sets the gap.
    """
    if q_n < 1:
        raise ParameterDomainError("q(n) must be a positive integer")
    eps = params.completeness_error
    delta = params.copy_resistance_error
    if delta >= 1.0 - 2.0 * eps:
        raise LemmaPreconditionError(
            f"amplification needs delta < 1 - 2*eps (delta={delta}, eps={eps})"
        )
    bound = delta / (1.0 - 2.0 * eps)
    new_delta = max(bound + margin, math.nextafter(bound, math.inf))
    if new_delta >= 1.0:
        raise LemmaPreconditionError("amplified copy-resistance error would reach 1")
    return replace(params, completeness_error=2.0**-q_n, copy_resistance_error=new_delta)


def required_verifications(q_n: int, standard_score: float) -> int:
    """Consecutive successes needed to bound the completeness error below ``1/q_n``."""
    if q_n < 2:
        raise ParameterDomainError("q(n) must be at least 2")
    if standard_score <= 0:
        raise ParameterDomainError("standard score must be positive")
    # round first so that e.g. 3.0**2 * 1 does not land on 9.000000000000002
    return math.ceil(round(standard_score**2 * (q_n - 1), 9))


class TokenModel:
    """Owns every key pair and shard handle of one simulated world."""

    def __init__(self, registry: Registry):
        self.registry = registry
        self._keys: dict[str, KeyPair] = {}
        self._next_scheme = 0
        self._next_shard = 0
        # (scheme_id, version) -> number of mint calls; backs the no-cloning audit
        self.mint_counts: Counter = Counter()
        self.stats = VerificationStats()

    def _shard_id(self) -> str:
        self._next_shard += 1
        return f"sh{self._next_shard:07d}"

    def key_gen(
        self, params: SchemeParams, issuer: str, required: frozenset[str] | set[str] = frozenset()
    ) -> KeyPair:
        if not isinstance(params, SchemeParams):
            raise ParameterDomainError("key_gen expects SchemeParams")
        self._next_scheme += 1
        scheme_id = f"k{self._next_scheme:06d}"
        key = KeyPair(scheme_id, f"priv:{scheme_id}", issuer, params)
        self._keys[scheme_id] = key
        self.registry.register_scheme(scheme_id, issuer)
        self.registry.publish(scheme_id, issuer, required)
        return key

    def params_of(self, scheme_id: str) -> SchemeParams:
        try:
            return self._keys[scheme_id].params
        except KeyError:
            raise RegistryError(f"unknown scheme {scheme_id}") from None

    def holder_of(self, scheme_id: str) -> str:
        return self._keys[scheme_id].holder

    def mint(self, key: KeyPair, caller: str) -> Shard:
        if caller != key.holder or self._keys.get(key.scheme_id) is not key:
            raise AuthorizationError(f"{caller} does not hold the private key of {key.scheme_id}")
        version = self.registry.current_version(key.scheme_id)
        self.mint_counts[(key.scheme_id, version)] += 1
        return Shard(self._shard_id(), key.scheme_id, version, Provenance.VALID_MINT)

    def mint_for(self, scheme_id: str, caller: str) -> Shard:
        """Mint through the key ring; the caller must still be the holder."""
        key = self._keys.get(scheme_id)
        if key is None:
            raise RegistryError(f"unknown scheme {scheme_id}")
        return self.mint(key, caller)

    def republish(self, scheme_id: str, caller: str, required=frozenset()) -> int:
        """Publish the next public-key version (reissue); returns it."""
        key = self._keys.get(scheme_id)
        if key is None:
            raise RegistryError(f"unknown scheme {scheme_id}")
        if caller != key.holder:
            raise AuthorizationError(f"{caller} cannot reissue keys of {scheme_id}")
        record = self.registry.publish(scheme_id, caller, required)
        key.public_key_version = record.version
        return record.version

    def forge(self, scheme_id: str) -> Shard:
        """A shard built from public information alone."""
        version = self.registry.current_version(scheme_id)
        return Shard(self._shard_id(), scheme_id, version, Provenance.FORGED)

    def acceptance_probability(self, scheme_id: str, shard: Shard | None) -> float:
        params = self.params_of(scheme_id)
        if shard is None:
            return 0.0
        if shard.provenance is Provenance.COPY_ATTEMPT:
            return params.copy_resistance_error
        current = self.registry.current_version(scheme_id)
        if (
            shard.provenance is Provenance.VALID_MINT
            and shard.scheme_id == scheme_id
            and shard.minted_version == current
        ):
            return max(0.0, 1.0 - params.completeness_error - shard.damage)
        # forged, foreign-scheme or superseded-version shards
        return params.soundness_error

    def verify(
        self,
        scheme_id: str,
        claimed_version: int | None,
        shard: Shard | None,
        rng: np.random.Generator,
    ) -> bool:
        """One run of Ver against the current public key of ``scheme_id``.

        A missing shard (``None``) is always rejected and draws no randomness.
        """
        current = self.registry.current_version(scheme_id)
        if claimed_version is not None and claimed_version > current:
            raise RegistryError(f"{scheme_id} has no version {claimed_version} yet")
        if shard is None:
            self.stats.calls += 1
            return False
        p = self.acceptance_probability(scheme_id, shard)
        accepted = bool(rng.random() < p)
        drift = self._keys[scheme_id].params.max_drift
        if drift:
            shard.damage += drift
        self.stats.calls += 1
        self.stats.accepted += accepted
        self.stats.by_provenance[shard.provenance.value] += 1
        return accepted

    def count_accepted(self, scheme_id: str, version: int | None, shards, rng) -> int:
        return sum(self.verify(scheme_id, version, s, rng) for s in shards)

    def attempt_copy(self, shards: list[Shard], scheme_id: str, caller: str) -> list[Shard]:
        """Try to turn ``len(shards)`` tokens into one more without the private key."""
        key = self._keys.get(scheme_id)
        if key is None:
            raise RegistryError(f"unknown scheme {scheme_id}")
        if key.holder == caller:
            raise ContractViolation("the private-key holder makes exact copies with mint")
        version = self.registry.current_version(scheme_id)
        copy = Shard(self._shard_id(), scheme_id, version, Provenance.COPY_ATTEMPT)
        return list(shards) + [copy]

    def keys_held_by(self, actor: str) -> list[str]:
        return [sid for sid, k in self._keys.items() if k.holder == actor]
