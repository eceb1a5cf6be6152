"""Exception types shared across the package."""


class DetPomdpError(Exception):
    """Base class for all library errors."""


class ModelFormatError(DetPomdpError):
    """Raised when a model document cannot be parsed or violates the schema.

    ``problems`` lists one message per offending field.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class PreconditionError(DetPomdpError):
    """An action was applied to a belief containing a state outside its precondition."""

    def __init__(self, action, state):
        self.action = action
        self.state = state
        super().__init__(f"action {action} not applicable at state {state}")


class ImpossibleObservationError(DetPomdpError):
    """An observation inconsistent with every state of the progressed belief."""


class BudgetExceededError(DetPomdpError):
    """A search or enumeration exceeded its node budget.

    ``count`` is the number of nodes processed before giving up.
    """

    def __init__(self, count, what="nodes"):
        self.count = count
        super().__init__(f"budget exceeded after {count} {what}")


class ClosureError(DetPomdpError):
    """A policy is not closed: execution reached a belief outside its domain."""

    def __init__(self, belief):
        self.belief = belief
        super().__init__(f"policy undefined at reachable belief {belief}")


class WrongVariantError(DetPomdpError):
    """An operation restricted to one model variant was called on another."""


class WrongClassError(DetPomdpError):
    """The model is outside the class an analysis requires."""


class SolutionInvalidError(DetPomdpError):
    """A candidate solution subgraph violates a structural condition (1), (2) or (3)."""

    def __init__(self, condition, detail):
        self.condition = condition
        super().__init__(f"solution violates condition ({condition}): {detail}")
