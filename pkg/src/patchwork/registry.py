"""Global bulletin board of public keys, their versions and bank attestations.

Signatures are ideal: an attestation from an actor exists exactly when that
actor called :meth:`Registry.sign`. Every actor reads the same board with no
propagation delay.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import AuthorizationError, RegistryError


@dataclass
class KeyRecord:
    scheme_id: str
    version: int
    issuer: str
    attestations: set[str] = field(default_factory=set)
    superseded: bool = False
    # signers whose attestation verifiers insist on for this record
    required: frozenset[str] = frozenset()

    def to_dict(self) -> dict:
        return {
            "scheme_id": self.scheme_id,
            "version": self.version,
            "issuer": self.issuer,
            "attestations": sorted(self.attestations),
            "required": sorted(self.required),
            "superseded": self.superseded,
        }


class Registry:
    def __init__(self) -> None:
        self._records: dict[str, list[KeyRecord]] = {}
        self._issuers: dict[str, str] = {}

    def register_scheme(self, scheme_id: str, issuer: str) -> None:
        """Bind a scheme id to the actor allowed to publish under it."""
        if scheme_id in self._issuers:
            raise RegistryError(f"scheme {scheme_id} already registered")
        self._issuers[scheme_id] = issuer

    def publish(
        self, scheme_id: str, issuer: str, required: frozenset[str] | set[str] = frozenset()
    ) -> KeyRecord:
        owner = self._issuers.get(scheme_id)
        if owner is None:
            raise RegistryError(f"unknown scheme {scheme_id}")
        if owner != issuer:
            raise AuthorizationError(f"{issuer} cannot publish keys for {scheme_id}")
        history = self._records.setdefault(scheme_id, [])
        if history:
            history[-1].superseded = True
        record = KeyRecord(scheme_id, len(history), issuer, required=frozenset(required))
        history.append(record)
        return record

    def sign(self, scheme_id: str, version: int, signer: str) -> KeyRecord:
        record = self.record(scheme_id, version)
        record.attestations.add(signer)
        return record

    def is_fully_attested(self, scheme_id: str, version: int, required) -> bool:
        try:
            record = self.record(scheme_id, version)
        except RegistryError:
            return False
        return set(required) <= record.attestations

    def record(self, scheme_id: str, version: int | None = None) -> KeyRecord:
        history = self._records.get(scheme_id)
        if not history:
            raise RegistryError(f"unknown scheme {scheme_id}")
        if version is None:
            return history[-1]
        if not 0 <= version < len(history):
            raise RegistryError(f"scheme {scheme_id} has no version {version}")
        return history[version]

    def current_version(self, scheme_id: str) -> int:
        return self.record(scheme_id).version

    def has_scheme(self, scheme_id: str) -> bool:
        return bool(self._records.get(scheme_id))

    def issuer_of(self, scheme_id: str) -> str:
        try:
            return self._issuers[scheme_id]
        except KeyError:
            raise RegistryError(f"unknown scheme {scheme_id}") from None

    def snapshot(self) -> dict[str, dict]:
        """Current record of every scheme, keyed by scheme id."""
        return {sid: hist[-1].to_dict() for sid, hist in sorted(self._records.items())}

    def __len__(self) -> int:
        return len(self._records)
