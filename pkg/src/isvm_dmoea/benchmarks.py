"""Dynamic test problems (FDA4, FDA5, DIMP2, dMOP2, HE7, HE9) and environment settings."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from math import comb
from pathlib import Path

import numpy as np

from .core import ConfigurationError, DynamicProblem, EnvironmentConfig

ENVIRONMENTS = {
    "C1": (10, 5, 100),
    "C2": (10, 10, 200),
    "C3": (10, 25, 500),
    "C4": (10, 50, 1000),
    "C5": (1, 10, 200),
    "C6": (1, 50, 1000),
    "C7": (20, 10, 200),
    "C8": (20, 50, 1000),
}

# name -> (n_var, n_obj, change type)
BENCHMARKS = {
    "FDA4": (12, 3, "I"),
    "FDA5": (12, 3, "II"),
    "DIMP2": (10, 2, "I"),
    "dMOP2": (10, 2, "II"),
    "HE7": (10, 2, "III"),
    "HE9": (10, 2, "III"),
}


def environment_config(name: str) -> EnvironmentConfig:
    try:
        n_t, tau_t, tau_T = ENVIRONMENTS[name]
    except KeyError:
        raise ConfigurationError(f"unknown environment config {name!r}") from None
    return EnvironmentConfig(name, n_t, tau_t, tau_T)


def _resolve(name: str) -> str:
    for key in BENCHMARKS:
        if key.lower() == name.lower():
            return key
    raise ConfigurationError(f"unknown benchmark {name!r}")


# --- time-dependent terms -------------------------------------------------

def _fda_G(t):
    return abs(np.sin(0.5 * np.pi * t))


def _fda5_F(t):
    return 1.0 + 100.0 * np.sin(0.5 * np.pi * t) ** 4


def _dmop2_G(t):
    return np.sin(0.5 * np.pi * t)


def _H(t):
    return 0.75 * np.sin(0.5 * np.pi * t) + 1.25


def _dimp2_G(t, n):
    i = np.arange(2, n + 1)
    return np.sin(0.5 * np.pi * t + 2.0 * np.pi * i / (n + 1)) ** 2


# --- objective functions, vectorised over rows ---------------------------

def _sphere_front(angles, radius):
    """Three-objective spherical mapping used by FDA4/FDA5."""
    a1 = angles[:, 0] * np.pi / 2
    a2 = angles[:, 1] * np.pi / 2
    return np.column_stack([
        radius * np.cos(a1) * np.cos(a2),
        radius * np.cos(a1) * np.sin(a2),
        radius * np.sin(a1),
    ])


def fda4(X, t):
    G = _fda_G(t)
    g = np.sum((X[:, 2:] - G) ** 2, axis=1)
    return _sphere_front(X[:, :2], 1.0 + g)


def fda5(X, t):
    G = _fda_G(t)
    g = G + np.sum((X[:, 2:] - G) ** 2, axis=1)
    Y = X[:, :2] ** _fda5_F(t)
    return _sphere_front(Y, 1.0 + g)


def dimp2(X, t):
    n = X.shape[1]
    d = X[:, 1:] - _dimp2_G(t, n)
    g = 1.0 + 2.0 * (n - 1) + np.sum(d ** 2 - 2.0 * np.cos(3.0 * np.pi * d), axis=1)
    f1 = X[:, 0]
    return np.column_stack([f1, g * (1.0 - np.sqrt(f1 / g))])


def dmop2(X, t):
    g = 1.0 + 9.0 * np.sum((X[:, 1:] - _dmop2_G(t)) ** 2, axis=1)
    f1 = X[:, 0]
    return np.column_stack([f1, g * (1.0 - (f1 / g) ** _H(t))])


def _he_split(n):
    j = np.arange(2, n + 1)
    return j[j % 2 == 1], j[j % 2 == 0]


def he7_optimum(x1, n):
    """POS coordinates x_2..x_n of HE7 for given x1 values, shape (len(x1), n - 1)."""
    x1 = np.asarray(x1, dtype=float)[:, None]
    j = np.arange(2, n + 1)[None, :]
    amp = 0.3 * x1 ** 2 * np.cos(24 * np.pi * x1 + 4 * j * np.pi / n) + 0.6 * x1
    phase = 6 * np.pi * x1 + j * np.pi / n
    return np.where(j % 2 == 1, amp * np.cos(phase), amp * np.sin(phase))


def he9_optimum(x1, n):
    x1 = np.asarray(x1, dtype=float)[:, None]
    j = np.arange(2, n + 1)[None, :]
    return np.sin(6 * np.pi * x1 + j * np.pi / n) * np.ones_like(j, dtype=float)


def _he(X, t, optimum, base):
    n = X.shape[1]
    x1 = X[:, 0]
    J1, J2 = _he_split(n)
    sq = (X[:, 1:] - optimum(x1, n)) ** 2
    f1 = x1 + 2.0 / len(J1) * sq[:, J1 - 2].sum(axis=1)
    g = base(x1) + 2.0 / len(J2) * sq[:, J2 - 2].sum(axis=1)
    return np.column_stack([f1, g * (1.0 - (f1 / g) ** _H(t))])


def he7(X, t):
    return _he(X, t, he7_optimum, lambda x1: 2.0 - np.sqrt(x1))


def he9(X, t):
    return _he(X, t, he9_optimum, lambda x1: 2.0 - x1 ** 2)


_EVALUATORS = {"FDA4": fda4, "FDA5": fda5, "DIMP2": dimp2, "dMOP2": dmop2, "HE7": he7, "HE9": he9}


def _bounds(name, n):
    lower, upper = np.zeros(n), np.ones(n)
    if name == "DIMP2":
        lower[1:], upper[1:] = -2.0, 2.0
    elif name in ("HE7", "HE9"):
        lower[1:] = -1.0
    return lower, upper


def make_problem(name: str) -> DynamicProblem:
    name = _resolve(name)
    n, m, kind = BENCHMARKS[name]
    lower, upper = _bounds(name, n)
    lower.flags.writeable = False
    upper.flags.writeable = False
    return DynamicProblem(name, n, m, lower, upper, _EVALUATORS[name], kind)


def optimal_decisions(name: str, t: float, count: int) -> np.ndarray:
    """Points of the Pareto-optimal set at time t, with the free coordinates on a uniform sweep.

    Only the first coordinate (two-objective problems) or the first two
    (three-objective problems) are swept; coordinates that the front does
    not depend on are placed at their optimum.
    """
    name = _resolve(name)
    n, m, _ = BENCHMARKS[name]
    lower, upper = _bounds(name, n)
    if m == 3:
        side = int(np.ceil(np.sqrt(count)))
        a, b = np.meshgrid(np.linspace(0, 1, side), np.linspace(0, 1, side), indexing="ij")
        free = np.column_stack([a.ravel(), b.ravel()])[:count]
        G = _fda_G(t)
        return np.column_stack([free, np.full((len(free), n - 2), G)])
    x1 = np.linspace(0, 1, count)
    if name == "DIMP2":
        rest = np.tile(_dimp2_G(t, n), (count, 1))
    elif name == "dMOP2":
        rest = np.full((count, n - 1), np.clip(_dmop2_G(t), lower[1], upper[1]))
    elif name == "HE7":
        rest = he7_optimum(x1, n)
    else:
        rest = he9_optimum(x1, n)
    return np.column_stack([x1, rest])


def simplex_lattice(count: int) -> np.ndarray:
    """``count`` points of a uniform lattice on the unit 2-simplex.

    Uses the smallest lattice with at least ``count`` points and keeps an
    evenly spaced subset of it (all lattice points when the count is a
    triangular number, e.g. 990).
    """
    h = 1
    while comb(h + 2, 2) < count:
        h += 1
    pts = [(i, j, h - i - j) for i in range(h + 1) for j in range(h + 1 - i)]
    W = np.array(pts, dtype=float) / h
    if len(W) > count:
        W = W[np.round(np.linspace(0, len(W) - 1, count)).astype(int)]
    return W


@dataclass(frozen=True)
class ReferenceFront:
    t: float
    points: np.ndarray

    @property
    def cardinality(self) -> int:
        return len(self.points)

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"f{i + 1}" for i in range(self.points.shape[1])])
            for row in self.points:
                w.writerow([repr(float(v)) for v in row])


def default_reference_count(name: str) -> int:
    return 990 if BENCHMARKS[_resolve(name)][1] == 3 else 500


def sample_reference_pof(name: str, t: float, count: int | None = None) -> ReferenceFront:
    name = _resolve(name)
    if count is None:
        count = default_reference_count(name)
    if count < 2:
        raise ValueError("reference front needs at least two points")
    if name in ("FDA4", "FDA5"):
        W = simplex_lattice(count)
        radius = 1.0 if name == "FDA4" else 1.0 + _fda_G(t)
        P = radius * W / np.linalg.norm(W, axis=1, keepdims=True)
        return ReferenceFront(float(t), P)

    u = np.linspace(0.0, 1.0, count)
    if name == "DIMP2":
        f2 = 1.0 - np.sqrt(u)
    elif name == "dMOP2":
        G = _dmop2_G(t)
        # the optimum G(t) can leave [0, 1]; the attainable g is then > 1
        g = 1.0 + 9.0 * (BENCHMARKS[name][0] - 1) * (np.clip(G, 0.0, 1.0) - G) ** 2
        f2 = g * (1.0 - (u / g) ** _H(t))
    elif name == "HE7":
        g = 2.0 - np.sqrt(u)
        f2 = g * (1.0 - (u / g) ** _H(t))
    else:
        g = 2.0 - u ** 2
        f2 = g * (1.0 - (u / g) ** _H(t))
    return ReferenceFront(float(t), np.column_stack([u, f2]))
