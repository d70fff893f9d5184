"""Exception hierarchy shared across the package."""


class RoomsmithError(Exception):
    """Base class for all package-specific errors."""


# --- geometry ---------------------------------------------------------------

class EmptyMesh(RoomsmithError):
    pass


class DegenerateMesh(RoomsmithError):
    """Mesh has fewer than 3 non-collinear vertices."""


# --- scene / assets ---------------------------------------------------------

class UnknownObjkey(RoomsmithError):
    pass


class DuplicateObjkey(RoomsmithError):
    pass


class AssetGenerationFailed(RoomsmithError):
    pass


class JudgeFailure(RoomsmithError):
    pass


# --- grids ------------------------------------------------------------------

class CellSizeTooLarge(RoomsmithError):
    """Grid would have fewer than 2x2 usable interior cells."""


class PlannerRejected(RoomsmithError):
    """Planner kept violating placement constraints after all retries."""


class InsufficientSpace(RoomsmithError):
    pass


class FootprintExceedsCells(RoomsmithError):
    """Item footprint does not fit the assigned cells even at minimum rescale."""


class ParentTooSmall(RoomsmithError):
    pass


class ScaleAdaptiveNotApplicable(RoomsmithError):
    """Item is not large enough to qualify for sparse-grid planning."""


# --- prompts ----------------------------------------------------------------

class MissingVisuals(RoomsmithError):
    pass


class MissingReferences(RoomsmithError):
    pass


class ParseFailure(RoomsmithError):
    """Structured response failed validation.

    Carries enough context to build a corrective retry message.
    """

    def __init__(self, reason: str, position: int = -1):
        super().__init__(reason)
        self.reason = reason
        self.position = position


class ConstraintViolation(RoomsmithError):
    """A parsed response was well-formed but violated a placement constraint."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class RetryBudgetExhausted(RoomsmithError):
    pass


# --- o2o search -------------------------------------------------------------

class EmbeddingFailure(RoomsmithError):
    pass


class ClassifierFailure(RoomsmithError):
    pass


# --- backend ----------------------------------------------------------------

class TransportError(RoomsmithError):
    pass


class AuthError(RoomsmithError):
    pass


class ReplayMiss(RoomsmithError):
    """Replay backend has no (remaining) recorded exchange for a prompt digest."""

    def __init__(self, digest: str):
        super().__init__(f"no recorded exchange for digest {digest}")
        self.digest = digest


class IoError(RoomsmithError):
    pass


# --- renderer ---------------------------------------------------------------

class UnknownTarget(RoomsmithError):
    pass


# --- evaluation -------------------------------------------------------------

class EmptyPlanSet(RoomsmithError):
    pass


class MissingFrontal(RoomsmithError):
    pass


# --- orchestrator / service -------------------------------------------------

class UserClarificationNeeded(RoomsmithError):
    pass


class BusySession(RoomsmithError):
    pass
