from dataclasses import dataclass, field

import numpy as np

from ._validation import check_series
from .errors import DomainError


@dataclass(frozen=True)
class TimeSeries:
    """A regularly sampled, finite real-valued sequence.

    ``sample_step`` is the number of physical time units per sample (for
    hourly data measured in hours this is 1). Arrays are accepted wherever
    a ``TimeSeries`` is, so this wrapper only matters when the step or the
    phase of the first sample has to travel with the data.
    """

    values: np.ndarray
    sample_step: float = 1.0
    start_phase: int = 0
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "values", check_series(self.values, allow_multivariate=True))
        if not self.sample_step > 0:
            raise DomainError(f"sample_step must be positive, got {self.sample_step}")

    def __len__(self):
        return len(self.values)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)
