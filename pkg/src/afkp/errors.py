"""Exception hierarchy shared by the solver, the many-body layer and the CLI."""


class AFKPError(Exception):
    """Base class for all package errors."""


class ConfigError(AFKPError, ValueError):
    """Invalid physical parameters or run configuration."""


class SolverError(AFKPError, RuntimeError):
    """The eigensolver or an oracle failed to converge."""


class BudgetExceeded(AFKPError, RuntimeError):
    """A combinatorial or truncation budget was exhausted."""


class CutoffError(BudgetExceeded):
    """No orbital cutoff below the hard cap reaches the requested completeness."""

    def __init__(self, message, achieved_defect=None, n_cols=None):
        super().__init__(message)
        self.achieved_defect = achieved_defect
        self.n_cols = n_cols
