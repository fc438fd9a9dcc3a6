"""Exception hierarchy shared by all modules."""


class RefSpreadError(Exception):
    """Base class for every error raised by this package."""


class NonFiniteState(RefSpreadError):
    pass


class SingularImpactGeometry(RefSpreadError):
    """Delassus matrix of the closing contacts is numerically singular."""


class SingularConstraintSystem(RefSpreadError):
    pass


class SingularTaskJacobian(RefSpreadError):
    pass


class Unreachable(RefSpreadError):
    pass


class NearSingular(RefSpreadError):
    pass


class QPError(RefSpreadError):
    pass


class Infeasible(QPError):
    pass


class Unbounded(QPError):
    pass


class MaxIterations(QPError):
    pass


class SchemaMismatch(RefSpreadError):
    pass
