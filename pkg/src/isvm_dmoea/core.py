"""Problem abstraction, time model and Pareto dominance."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class DimensionError(ValueError):
    pass


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class EnvironmentConfig:
    """Severity ``n_t``, change frequency ``tau_t`` and horizon ``tau_T``."""

    name: str
    n_t: int
    tau_t: int
    tau_T: int

    @property
    def n_changes(self) -> int:
        return self.tau_T // self.tau_t


@dataclass(frozen=True)
class TimeContext:
    generation: int
    config: EnvironmentConfig

    def __post_init__(self):
        if not 0 <= self.generation <= self.config.tau_T:
            raise ValueError(f"generation {self.generation} outside [0, {self.config.tau_T}]")


def time_index(ctx: TimeContext) -> float:
    """t = (1/n_t) * floor(tau / tau_t) for the current generation counter tau."""
    cfg = ctx.config
    return (ctx.generation // cfg.tau_t) / cfg.n_t


@dataclass(frozen=True, eq=False)
class DynamicProblem:
    """A box-bounded problem whose objectives depend on a time value ``t``.

    ``evaluator(X, t)`` maps an ``(N, n)`` array to an ``(N, m)`` array.
    """

    name: str
    n_var: int
    n_obj: int
    lower: np.ndarray
    upper: np.ndarray
    evaluator: Callable[[np.ndarray, float], np.ndarray] = field(repr=False)
    change_type: str = ""

    def in_bounds(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.all((X >= self.lower) & (X <= self.upper), axis=1)

    def clip(self, X: np.ndarray) -> np.ndarray:
        return np.clip(X, self.lower, self.upper)

    def evaluate(self, X: np.ndarray, t: float) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.n_var:
            raise DimensionError(f"{self.name} expects {self.n_var} variables, got {X.shape[1]}")
        if not np.all(self.in_bounds(X)):
            raise ValueError(f"{self.name}: decision vector outside box bounds")
        F = self.evaluator(X, float(t))
        return F[0] if single else F

    def random(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(count, self.n_var))


@dataclass
class Individual:
    decision: np.ndarray
    objectives: np.ndarray
    rank: int = 0
    crowding: float = 0.0


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionError(f"objective vectors of length {a.size} and {b.size}")
    return bool(np.all(a <= b) and np.any(a < b))


def domination_matrix(F: np.ndarray) -> np.ndarray:
    """D[i, j] is True when row i dominates row j."""
    F = np.asarray(F, dtype=float)
    le = np.all(F[:, None, :] <= F[None, :, :], axis=2)
    lt = np.any(F[:, None, :] < F[None, :, :], axis=2)
    return le & lt


def nondominated_mask(F: np.ndarray) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    if len(F) == 0:
        return np.zeros(0, dtype=bool)
    return ~domination_matrix(F).any(axis=0)


def nondominated_indices(X: np.ndarray, F: np.ndarray) -> np.ndarray:
    """Indices of nondominated rows, keeping the first of any duplicate decision vectors."""
    idx = np.flatnonzero(nondominated_mask(F))
    if idx.size == 0:
        return idx
    _, first = np.unique(np.asarray(X)[idx], axis=0, return_index=True)
    return idx[np.sort(first)]


def nondominated_subset(pop: Sequence[Individual]) -> list[Individual]:
    if len(pop) == 0:
        return []
    X = np.array([ind.decision for ind in pop])
    F = np.array([ind.objectives for ind in pop])
    return [pop[i] for i in nondominated_indices(X, F)]
