"""Exception types raised by the solvers and the experiment harness."""

from __future__ import annotations

import numpy as np


class MixedLinearError(Exception):
    """Base class for all package errors."""


class DimensionError(MixedLinearError, ValueError):
    """Shapes or component counts are incompatible."""


class ConstructionError(MixedLinearError, ValueError):
    """Requested parameters cannot be constructed (e.g. infeasible spacing)."""


class NumericalError(MixedLinearError):
    """A numerical step failed; the CLI maps these to exit code 2."""


class RankDeficiencyError(NumericalError):
    """The k-th retained eigenvalue of the second moment is too small to whiten."""

    def __init__(self, message: str, spectrum: np.ndarray, floor: float):
        super().__init__(message)
        self.spectrum = np.asarray(spectrum)
        self.floor = floor


class DecompositionError(NumericalError):
    """Every power-method restart degenerated to the zero vector."""
