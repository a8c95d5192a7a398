"""Exception types shared across the package."""


class ReflocalError(Exception):
    """Base class for all package errors."""


class DomainError(ReflocalError, ValueError):
    """An argument lies outside the domain where the quantity is finite or defined."""


class ConvergenceError(ReflocalError, RuntimeError):
    """A root iteration failed to converge within its iteration budget."""


class ConfigError(ReflocalError, ValueError):
    """A simulation or experiment configuration violates its invariants."""


class UnknownFunctional(ReflocalError, KeyError):
    """The requested Monte-Carlo functional is not registered."""


class VarianceError(ReflocalError, RuntimeError):
    """Plain Monte-Carlo is too noisy for the requested estimate."""


class InsufficientTailSamples(ReflocalError, RuntimeError):
    """Too few paths landed in the tail event to estimate its probability."""
