"""IGD and its dynamic variants MIGD and DMIGD."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .core import DimensionError


def igd(reference, approx) -> float:
    """Mean distance from each reference point to its nearest approximation point."""
    ref = np.asarray(getattr(reference, "points", reference), dtype=float)
    approx = np.asarray(approx, dtype=float)
    if ref.size == 0 or approx.size == 0:
        raise ValueError("igd needs nonempty reference and approximation sets")
    ref = np.atleast_2d(ref)
    approx = np.atleast_2d(approx)
    if ref.shape[1] != approx.shape[1]:
        raise DimensionError(f"{ref.shape[1]} vs {approx.shape[1]} objectives")
    return float(cdist(ref, approx).min(axis=1).mean())


def migd(igd_series: Sequence[float]) -> float:
    values = np.asarray(igd_series, dtype=float)
    if values.size == 0:
        raise ValueError("migd of an empty series")
    return float(values.mean())


def dmigd(migd_by_config: Sequence[float]) -> float:
    values = np.asarray(migd_by_config, dtype=float)
    if values.size == 0:
        raise ValueError("dmigd of an empty sequence")
    return float(values.mean())


@dataclass(frozen=True)
class MetricRecord:
    config: str
    igd_series: tuple[float, ...]

    @property
    def migd(self) -> float:
        return migd(self.igd_series)
