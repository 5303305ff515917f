"""Error hierarchy shared by all modules.

Validation problems (bad inputs, bad schema, bad flags) exit with code 2;
numerical failures (separation, rank collapse, unsupported arms, bootstrap
exhaustion) exit with code 3.
"""


class DynmteError(Exception):
    """Base class for all package errors."""

    exit_code = 3


class ValidationError(DynmteError):
    """Malformed input: schema, ranges, configuration, CLI arguments."""

    exit_code = 2


class NumericalError(DynmteError):
    """Estimation failed for numerical reasons."""

    exit_code = 3


class SeparationError(NumericalError):
    """Logistic fit diverged (perfectly separated response)."""


class SingularDesignError(NumericalError):
    """Weighted normal equations singular beyond recovery."""


class InsufficientSupportError(NumericalError):
    """Too few observations in a treatment-sequence arm to fit its surface."""

    def __init__(self, seq, n_arm, n_required):
        self.seq = tuple(seq)
        self.n_arm = n_arm
        self.n_required = n_required
        label = "".join(str(int(b)) for b in self.seq)
        super().__init__(
            f"sequence {label}: {n_arm} arm rows, need at least {n_required}"
        )


class BootstrapFailureError(NumericalError):
    """Bootstrap redraw budget exhausted."""

    def __init__(self, n_failed, n_attempts, budget):
        self.n_failed = n_failed
        self.n_attempts = n_attempts
        self.budget = budget
        super().__init__(
            f"bootstrap exhausted {n_attempts} of {budget} attempts "
            f"with {n_failed} failed replicates"
        )


class HarnessError(NumericalError):
    """Monte Carlo run unusable (replicate failure rate above threshold)."""
