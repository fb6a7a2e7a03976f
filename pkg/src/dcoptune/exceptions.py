"""Error types raised across the package.

Grouped by the stage that raises them: case parsing, network assembly,
solvers, sensitivity, training, and file round-trip validation.
"""


class DcoptuneError(Exception):
    """Base class for all package errors."""


# ---- case parsing / network assembly ----

class MissingTable(DcoptuneError):
    """A required table (bus, gen, branch, gencost) is absent from the case file."""


class MalformedRow(DcoptuneError):
    """A table row has the wrong arity or a non-numeric entry."""


class DuplicateBusId(DcoptuneError):
    """The same bus id appears twice in the bus table."""


class UnsupportedCostModel(DcoptuneError):
    """Generator cost is not a polynomial of degree <= 2."""


class NoReferenceBus(DcoptuneError):
    """The case does not define exactly one reference (slack) bus."""


class IslandedNetwork(DcoptuneError):
    """The in-service network is not connected."""


class ZeroImpedance(DcoptuneError):
    """A branch has r = x = 0 and no admittance can be formed."""


# ---- solvers ----

class PrimalInfeasible(DcoptuneError):
    """The dispatch problem admits no feasible point."""


class MaxIterations(DcoptuneError):
    """Iteration cap reached before the convergence test passed."""


class NumericalFailure(DcoptuneError):
    """A linear solve produced NaN/Inf or a singular system."""


class NotConverged(DcoptuneError):
    """Power flow mismatch failed to reach tolerance."""


# ---- sensitivity ----

class NotOptimal(DcoptuneError):
    """Sensitivity was requested at a point that does not satisfy optimality."""


class SingularKkt(DcoptuneError):
    """The reduced optimality system is singular (dependent active rows)."""


# ---- training ----

class LowerLevelInfeasible(DcoptuneError):
    """A dispatch solve failed inside the loss; carries the scenario id."""

    def __init__(self, scenario_id, message=""):
        self.scenario_id = scenario_id
        super().__init__(message or f"dispatch solve failed on scenario {scenario_id}")


class LineSearchFailed(DcoptuneError):
    """Step length underflowed without satisfying the acceptance conditions."""


class BadConfig(DcoptuneError):
    """A configuration value violates its documented range."""


# ---- persisted files ----

class SchemaVersionMismatch(DcoptuneError):
    """File header declares a schema version this code does not read."""


class LengthMismatch(DcoptuneError):
    """A persisted vector's length disagrees with the header dimensions."""


class CrossReferenceError(DcoptuneError):
    """Two files that must describe the same system/scenarios do not."""


class EmptyEvaluation(DcoptuneError):
    """No usable (scenario, label) pairs remain after filtering."""
