"""Exception taxonomy shared by the library, service and CLI."""


class ChartValidationError(ValueError):
    """Bad input: unknown chart, malformed definition, out-of-range config."""


class NumericalError(RuntimeError):
    """Computation-level failure (maps to CLI exit code 2)."""


class DegenerateMetricError(NumericalError):
    """First fundamental form not positive definite at a sampled point."""


class NonMinimalChartError(NumericalError):
    """Trace of the second fundamental form exceeds tolerance."""

    def __init__(self, point, trace_norm):
        self.point = tuple(float(x) for x in point)
        self.trace_norm = float(trace_norm)
        super().__init__(
            f"chart is not minimal: |trace alpha^2| = {self.trace_norm:.3e} at (u, v) = {self.point}"
        )


class GaugeError(NumericalError):
    """Frame field lost continuity along a grid sweep."""


class InconsistentFlagError(NumericalError):
    """Normal-space rank exceeds two at some level (non-minimal or mislabeled chart)."""


class CompatibilityError(NumericalError):
    """Connection tables fail the flatness residual threshold."""
