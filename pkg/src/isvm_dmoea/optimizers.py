"""Population-based multi-objective optimizers: NSGA-II and MOPSO.

Both run a fixed number of generations on a problem frozen at one time value
and return the final population together with its Pareto-set approximation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import DynamicProblem, Individual, domination_matrix, nondominated_indices

NSGA2 = "NSGA2"
MOPSO = "MOPSO"
OPTIMIZERS = (NSGA2, MOPSO)


@dataclass(frozen=True)
class OptimizerConfig:
    pop_size: int = 100
    generations: int = 50
    crossover_prob: float = 0.9
    eta_c: float = 20.0
    eta_m: float = 20.0
    mutation_prob: Optional[float] = None  # None -> 1/n
    # MOPSO
    archive_size: Optional[int] = None  # None -> 2 * pop_size
    inertia: float = 0.4
    c1: float = 1.0
    c2: float = 1.0
    grid_divisions: int = 10
    mutation_fraction: float = 0.1
    velocity_fraction: float = 0.2

    def archive_capacity(self) -> int:
        return self.archive_size if self.archive_size is not None else 2 * self.pop_size


@dataclass
class Population:
    X: np.ndarray
    F: np.ndarray
    t: float
    rank: Optional[np.ndarray] = field(default=None, repr=False)
    crowding: Optional[np.ndarray] = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.X)

    def individuals(self) -> list[Individual]:
        rank = self.rank if self.rank is not None else np.zeros(len(self), dtype=int)
        crowd = self.crowding if self.crowding is not None else np.zeros(len(self))
        return [Individual(x, f, int(r), float(c)) for x, f, r, c in zip(self.X, self.F, rank, crowd)]

    def nondominated(self) -> "Population":
        idx = nondominated_indices(self.X, self.F)
        return Population(self.X[idx], self.F[idx], self.t)


def evaluate_population(problem: DynamicProblem, X: np.ndarray, t: float) -> Population:
    return Population(X, problem.evaluate(X, t), t)


# -- ranking -----------------------------------------------------------------

def nondominated_sort(F) -> list[np.ndarray]:
    """Fronts as ascending index arrays; front 0 is the nondominated set."""
    F = np.asarray(F, dtype=float)
    if len(F) == 0:
        return []
    D = domination_matrix(F)
    count = D.sum(axis=0)
    remaining = np.ones(len(F), dtype=bool)
    fronts = []
    while remaining.any():
        front = np.flatnonzero(remaining & (count == 0))
        fronts.append(front)
        remaining[front] = False
        count = count - D[front].sum(axis=0)
    return fronts


def crowding_distance(F) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    n, m = F.shape
    if n <= 2:
        return np.full(n, np.inf)
    dist = np.zeros(n)
    for k in range(m):
        order = np.argsort(F[:, k], kind="stable")
        vals = F[order, k]
        span = vals[-1] - vals[0]
        if span <= 0:
            continue
        dist[order[0]] = np.inf
        dist[order[-1]] = np.inf
        dist[order[1:-1]] += (vals[2:] - vals[:-2]) / span
    return dist


def rank_and_crowding(F) -> tuple[np.ndarray, np.ndarray]:
    rank = np.empty(len(F), dtype=int)
    crowd = np.empty(len(F))
    for r, front in enumerate(nondominated_sort(F)):
        rank[front] = r
        crowd[front] = crowding_distance(F[front])
    return rank, crowd


# -- variation -----------------------------------------------------------------

def sbx_crossover(P1, P2, lower, upper, eta, prob, rng):
    """Bounded simulated binary crossover applied row-wise to parent pairs."""
    n_pairs, n = P1.shape
    C1, C2 = P1.copy(), P2.copy()
    do_pair = rng.random(n_pairs) < prob
    do_var = rng.random((n_pairs, n)) < 0.5
    u = rng.random((n_pairs, n))
    swap = rng.random((n_pairs, n)) < 0.5
    mask = do_pair[:, None] & do_var & (np.abs(P1 - P2) > 1e-14)
    if not mask.any():
        return C1, C2
    y1 = np.minimum(P1, P2)
    y2 = np.maximum(P1, P2)
    diff = np.where(mask, y2 - y1, 1.0)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        def spread(beta):
            alpha = 2.0 - beta ** -(eta + 1.0)
            return np.where(
                u <= 1.0 / alpha,
                (u * alpha) ** (1.0 / (eta + 1.0)),
                (1.0 / (2.0 - u * alpha)) ** (1.0 / (eta + 1.0)),
            )
        bq1 = spread(1.0 + 2.0 * (y1 - lower) / diff)
        bq2 = spread(1.0 + 2.0 * (upper - y2) / diff)
    c1 = np.clip(0.5 * ((y1 + y2) - bq1 * diff), lower, upper)
    c2 = np.clip(0.5 * ((y1 + y2) + bq2 * diff), lower, upper)
    lo, hi = np.where(swap, c2, c1), np.where(swap, c1, c2)
    C1 = np.where(mask, lo, C1)
    C2 = np.where(mask, hi, C2)
    return C1, C2


def polynomial_mutation(X, lower, upper, eta, prob, rng):
    """Bounded polynomial mutation; each variable mutates with probability ``prob``."""
    X = X.copy()
    mask = rng.random(X.shape) < prob
    u = rng.random(X.shape)
    span = upper - lower
    d1 = (X - lower) / span
    d2 = (upper - X) / span
    mpow = 1.0 / (eta + 1.0)
    low = u < 0.5
    xy = np.where(low, 1.0 - d1, 1.0 - d2)
    val = np.where(
        low,
        2.0 * u + (1.0 - 2.0 * u) * xy ** (eta + 1.0),
        2.0 * (1.0 - u) + 2.0 * (u - 0.5) * xy ** (eta + 1.0),
    )
    dq = np.where(low, val ** mpow - 1.0, 1.0 - val ** mpow)
    X = np.where(mask, X + dq * span, X)
    return np.clip(X, lower, upper)


def _tournament(rank, crowd, count, rng):
    a = rng.integers(0, len(rank), count)
    b = rng.integers(0, len(rank), count)
    a_wins = (rank[a] < rank[b]) | ((rank[a] == rank[b]) & (crowd[a] >= crowd[b]))
    return np.where(a_wins, a, b)


def _survivors(F, size):
    chosen = []
    for front in nondominated_sort(F):
        if len(chosen) + len(front) <= size:
            chosen.extend(front)
            continue
        crowd = crowding_distance(F[front])
        order = np.argsort(-crowd, kind="stable")
        chosen.extend(front[order[: size - len(chosen)]])
        break
    return np.array(chosen, dtype=int)


def nsga2(problem: DynamicProblem, t: float, init: Population, cfg: OptimizerConfig,
          rng: np.random.Generator, callback: Callable | None = None) -> Population:
    lower, upper = problem.lower, problem.upper
    pm = cfg.mutation_prob if cfg.mutation_prob is not None else 1.0 / problem.n_var
    X, F = init.X.copy(), init.F.copy()
    N = len(X)
    rank, crowd = rank_and_crowding(F)
    for gen in range(cfg.generations):
        n_pairs = (N + 1) // 2
        parents = _tournament(rank, crowd, 2 * n_pairs, rng)
        C1, C2 = sbx_crossover(X[parents[:n_pairs]], X[parents[n_pairs:]], lower, upper,
                               cfg.eta_c, cfg.crossover_prob, rng)
        Q = np.vstack([C1, C2])[:N]
        Q = polynomial_mutation(Q, lower, upper, cfg.eta_m, pm, rng)
        FQ = problem.evaluate(Q, t)
        XX, FF = np.vstack([X, Q]), np.vstack([F, FQ])
        keep = _survivors(FF, N)
        X, F = XX[keep], FF[keep]
        rank, crowd = rank_and_crowding(F)
        if callback is not None:
            callback(gen, Population(X, F, t, rank, crowd))
    return Population(X, F, t, rank, crowd)


# -- MOPSO -------------------------------------------------------------------------

def _grid_cells(F, divisions):
    lo, hi = F.min(axis=0), F.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    cell = np.floor((F - lo) / span * divisions).astype(int)
    cell = np.clip(cell, 0, divisions - 1)
    return np.ravel_multi_index(cell.T, (divisions,) * F.shape[1])


def _select_leaders(AF, count, divisions, rng):
    """Roulette over occupied hypercubes weighted by 10 / occupancy, then a random member."""
    cells = _grid_cells(AF, divisions)
    occupied, inverse, counts = np.unique(cells, return_inverse=True, return_counts=True)
    fitness = 10.0 / counts
    cube = rng.choice(len(occupied), size=count, p=fitness / fitness.sum())
    leaders = np.empty(count, dtype=int)
    r = rng.random(count)
    for i, c in enumerate(cube):
        members = np.flatnonzero(inverse == c)
        leaders[i] = members[int(r[i] * len(members))]
    return leaders


def _update_archive(AX, AF, X, F, capacity, divisions, rng):
    XX = np.vstack([AX, X])
    FF = np.vstack([AF, F])
    idx = nondominated_indices(XX, FF)
    AX, AF = XX[idx], FF[idx]
    while len(AX) > capacity:
        cells = _grid_cells(AF, divisions)
        occupied, inverse, counts = np.unique(cells, return_inverse=True, return_counts=True)
        crowded = np.flatnonzero(inverse == int(np.argmax(counts)))
        excess = min(len(AX) - capacity, len(crowded) - 1) or 1
        drop = rng.choice(crowded, size=excess, replace=False)
        keep = np.setdiff1d(np.arange(len(AX)), drop)
        AX, AF = AX[keep], AF[keep]
    return AX, AF


@dataclass
class SwarmState:
    X: np.ndarray
    F: np.ndarray
    archive_X: np.ndarray
    archive_F: np.ndarray


def mopso(problem: DynamicProblem, t: float, init: Population, cfg: OptimizerConfig,
          rng: np.random.Generator, callback: Callable | None = None) -> tuple[Population, Population]:
    """Returns the final swarm and the external archive."""
    lower, upper = problem.lower, problem.upper
    vmax = cfg.velocity_fraction * (upper - lower)
    pm = cfg.mutation_prob if cfg.mutation_prob is not None else 1.0 / problem.n_var
    capacity = cfg.archive_capacity()
    X, F = init.X.copy(), init.F.copy()
    N, n = X.shape
    V = np.zeros_like(X)
    PX, PF = X.copy(), F.copy()
    AX, AF = _update_archive(X[:0], F[:0], X, F, capacity, cfg.grid_divisions, rng)
    n_mut = int(np.ceil(cfg.mutation_fraction * N))
    for gen in range(cfg.generations):
        leaders = _select_leaders(AF, N, cfg.grid_divisions, rng)
        r1 = rng.random((N, n))
        r2 = rng.random((N, n))
        V = cfg.inertia * V + cfg.c1 * r1 * (PX - X) + cfg.c2 * r2 * (AX[leaders] - X)
        V = np.clip(V, -vmax, vmax)
        X = X + V
        out = (X < lower) | (X > upper)
        V = np.where(out, -V, V)
        X = np.clip(X, lower, upper)
        mutants = rng.choice(N, size=n_mut, replace=False)
        X[mutants] = polynomial_mutation(X[mutants], lower, upper, cfg.eta_m, pm, rng)
        F = problem.evaluate(X, t)
        AX, AF = _update_archive(AX, AF, X, F, capacity, cfg.grid_divisions, rng)
        # personal best: replace when dominated, keep when dominating, else coin flip
        new_le = np.all(F <= PF, axis=1)
        new_dom = new_le & np.any(F < PF, axis=1)
        old_dom = np.all(PF <= F, axis=1) & np.any(PF < F, axis=1)
        coin = rng.random(N) < 0.5
        replace = new_dom | (~old_dom & ~new_dom & coin)
        PX[replace], PF[replace] = X[replace], F[replace]
        if callback is not None:
            callback(gen, SwarmState(X, F, AX, AF))
    return Population(X, F, t), Population(AX, AF, t)


def run_optimizer(kind: str, problem: DynamicProblem, t: float, init: Population,
                  cfg: OptimizerConfig, rng: np.random.Generator,
                  callback: Callable | None = None) -> tuple[Population, Population]:
    """Run ``cfg.generations`` at fixed ``t``; returns (final population, POS approximation)."""
    if len(init) == 0:
        raise ValueError("empty initial population")
    if not np.all(problem.in_bounds(init.X)):
        raise ValueError("initial population outside box bounds")
    if kind == NSGA2:
        final = nsga2(problem, t, init, cfg, rng, callback)
        return final, final.nondominated()
    if kind == MOPSO:
        return mopso(problem, t, init, cfg, rng, callback)
    raise ValueError(f"unknown optimizer {kind!r}")
