"""Package exception types."""


class BlackstartError(Exception):
    """Base class for all package errors."""


class CircuitError(BlackstartError):
    """Invalid circuit element, parameter or topology operation."""


class SingularNetworkError(CircuitError):
    """Nodal matrix is singular: some nodes have no path to ground."""

    def __init__(self, floating_nodes):
        self.floating_nodes = tuple(floating_nodes)
        super().__init__(
            "network matrix is singular; nodes with no conductive path to ground: "
            + ", ".join(self.floating_nodes)
        )


class SolverDivergedError(BlackstartError):
    """NaN or linear-solve failure during time stepping."""

    def __init__(self, step, time_s, detail="NaN detected in node voltages"):
        self.step = step
        self.time_s = time_s
        super().__init__(f"{detail} at step {step} (t = {time_s:.9g} s)")


class ScenarioError(BlackstartError):
    """Invalid case definition or event schedule."""


class ScenarioFormatError(BlackstartError):
    """Scenario file cannot be parsed or fails semantic validation."""

    def __init__(self, message, line_no=None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
