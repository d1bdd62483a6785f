"""Exception hierarchy shared by the simulator modules."""


class PatchworkError(Exception):
    """Base class for every error raised by this package."""


class ParameterDomainError(PatchworkError, ValueError):
    """A scheme or economic parameter lies outside its allowed domain."""


class LemmaPreconditionError(ParameterDomainError):
    """Amplification was requested for parameters that do not admit it."""


class AuthorizationError(PatchworkError):
    """An actor tried to use a capability it does not hold."""


class ContractViolation(PatchworkError):
    """A caller broke an operation's precondition."""


class RegistryError(PatchworkError, KeyError):
    """Unknown scheme id or key version."""


class GenerationFailure(PatchworkError):
    """Token generation exhausted its retry budget."""


class PaymentError(PatchworkError):
    """A costed reissue could not be paid for."""


class ConfigError(PatchworkError):
    """A scenario file failed validation."""

    def __init__(self, message: str, diagnostics: list[str] | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or []

    def __str__(self) -> str:
        base = super().__str__()
        if not self.diagnostics:
            return base
        return base + "\n" + "\n".join(f"  - {d}" for d in self.diagnostics)
