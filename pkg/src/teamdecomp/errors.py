"""Exception types shared across the library."""

from __future__ import annotations


class TeamDecompError(Exception):
    """Base class for all library errors."""


class InvalidGameError(TeamDecompError):
    """A game failed validation; carries the violation report."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations[:8])
        more = "" if len(self.violations) <= 8 else f" (+{len(self.violations) - 8} more)"
        super().__init__(f"invalid game: {lines}{more}")


class HeterogeneousClassError(TeamDecompError):
    """A merged team-view class mixes incompatible nodes."""


class EfgParseError(TeamDecompError):
    """EFG-JSON file could not be parsed; message carries field context."""


class InternalError(TeamDecompError):
    """An internal consistency check failed (indicates an upstream bug)."""


class MarginalMismatchError(TeamDecompError):
    """Per-bag distributions disagree on a shared-variable marginal."""


class FeasibleSetExplosionError(TeamDecompError):
    """Total feasible-set size exceeded the resource cap."""

    def __init__(self, bag: int, partial_sum: int, cap: int):
        self.bag = bag
        self.partial_sum = partial_sum
        self.cap = cap
        super().__init__(
            f"feasible-set enumeration exceeded cap {cap} at bag {bag} "
            f"(partial sum {partial_sum})"
        )


class EmptyBagError(TeamDecompError):
    """A bag enumerated to an empty feasible set (upstream bug)."""


class LpError(TeamDecompError):
    """Base class for LP construction/solve errors."""


class InfeasibleError(LpError):
    """The LP has no feasible point."""


class UnboundedError(LpError):
    """The LP objective is unbounded."""


class NumericalBreakdownError(LpError):
    """Float-mode solve failed numerically; try exact mode or export."""


class InfeasibleLambdaError(LpError):
    """Candidate lambda values violate the polytope rows beyond tolerance."""


class CapExceededError(TeamDecompError):
    """Brute-force enumeration would exceed the configured cap."""
