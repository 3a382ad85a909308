"""Exception hierarchy shared by all weakwalk modules."""


class WeakWalkError(Exception):
    """Base class for every error raised by this package."""


class NonHermitian(WeakWalkError, ValueError):
    def __init__(self, deviation, tol):
        self.deviation = deviation
        self.tol = tol
        super().__init__(
            f"matrix is not Hermitian: max |H - H^dagger| = {deviation:.3e} > {tol:.1e}"
        )


class DimensionMismatch(WeakWalkError, ValueError):
    pass


class InvalidSpec(WeakWalkError, ValueError):
    pass


class EtaOutOfRange(WeakWalkError, ValueError):
    def __init__(self, eta, allow_zero=False):
        self.eta = eta
        interval = "[0, 1]" if allow_zero else "(0, 1]"
        super().__init__(f"coupling eta={eta!r} outside {interval}")


class InitialStateNotInSubspace(WeakWalkError, ValueError):
    pass


class NonUnitaryBasis(WeakWalkError, ValueError):
    pass


class ConsistencyError(WeakWalkError, ArithmeticError):
    """Two routes to the same quantity disagree beyond tolerance."""


class NoConvergence(WeakWalkError, RuntimeError):
    pass


class SingularResolvent(WeakWalkError, ArithmeticError):
    pass


class QuadratureNotConverged(WeakWalkError, RuntimeError):
    pass


class NormLoss(WeakWalkError, ArithmeticError):
    pass


class InvalidArgs(WeakWalkError, ValueError):
    pass


class ConfigError(WeakWalkError, ValueError):
    """Invalid run configuration; ``field`` names the offending entry."""

    def __init__(self, message, field=None, line=None):
        self.message = message
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
