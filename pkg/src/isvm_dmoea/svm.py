"""Soft-margin Gaussian-kernel SVM trained by exact incremental (adiabatic) updates.

Each new example is added by growing its coefficient while the margin
support vectors and the bias are moved along the direction that keeps every
previously stored example in its KKT condition.  Whenever an example changes
set (margin S, error E, remaining R) the cached inverse of the bordered
margin-set kernel matrix is expanded or contracted by a rank-one update.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .core import DimensionError

log = logging.getLogger(__name__)

MARGIN, ERROR, REMAINING = "S", "E", "R"
KKT_TOL = 1e-6
SINGULAR_COND = 1e12
_EPS = 1e-12
_BOUND_SNAP = 1e-12
_REFRESH_EVERY = 32
_H_TOL = 1e-11  # refinement targets, well inside the KKT tolerances
_G_TOL = 1e-10


class TrainingError(ValueError):
    pass


@dataclass(frozen=True)
class KernelConfig:
    """Gaussian kernel bandwidth ``scale`` and soft-margin penalty ``penalty``."""

    scale: float = 1.0
    penalty: float = 10.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("kernel scale must be positive")
        if not self.penalty > 0:
            raise ValueError("regularization penalty must be positive")


def gaussian_kernel(A, B, scale: float) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise DimensionError(f"kernel inputs of dimension {A.shape[1]} and {B.shape[1]}")
    return np.exp(-cdist(A, B, "sqeuclidean") / (2.0 * scale * scale))


def kernel_eval(cfg: KernelConfig, a, b) -> float:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise DimensionError(f"kernel inputs of dimension {a.size} and {b.size}")
    d2 = float(np.dot(a - b, a - b))
    return float(np.exp(-d2 / (2.0 * cfg.scale * cfg.scale)))


class IncrementalSVC:
    """Binary classifier whose dual solution is updated one example at a time.

    Labels are +1/-1.  ``increment`` keeps 0 <= alpha_i <= penalty,
    sum(y * alpha) = 0 and the KKT case of every stored sample after each call.
    """

    def __init__(self, config: KernelConfig = KernelConfig(), tol: float = KKT_TOL):
        self.config = config
        self.tol = tol
        self._X = np.empty((0, 0))
        self._y = np.empty(0)
        self._alpha = np.empty(0)
        self._g = np.empty(0)
        self._tags = np.empty(0, dtype="<U1")
        self.n = 0
        self.b = 0.0
        self.margin: list[int] = []
        self._Rinv = np.zeros((1, 1))
        self._reset_kernel_cache()
        self._since_refresh = 0
        self.n_fallbacks = 0
        self._froze = False

    # -- views ------------------------------------------------------------
    @property
    def X(self) -> np.ndarray:
        return self._X[: self.n]

    @property
    def y(self) -> np.ndarray:
        return self._y[: self.n]

    @property
    def alpha(self) -> np.ndarray:
        return self._alpha[: self.n]

    @property
    def g(self) -> np.ndarray:
        return self._g[: self.n]

    @property
    def tags(self) -> np.ndarray:
        return self._tags[: self.n]

    @property
    def margin_inverse(self) -> np.ndarray:
        return self._Rinv

    def __len__(self) -> int:
        return self.n

    # -- storage ----------------------------------------------------------
    def _append(self, x: np.ndarray, label: float) -> int:
        if self.n == 0:
            d = x.size
            self._X = np.empty((16, d))
            self._y = np.empty(16)
            self._alpha = np.zeros(16)
            self._g = np.zeros(16)
            self._tags = np.full(16, REMAINING, dtype="<U1")
            self._reset_kernel_cache()
        elif x.size != self._X.shape[1]:
            raise DimensionError(f"sample of dimension {x.size}, machine has {self._X.shape[1]}")
        if self.n == len(self._y):
            cap = 2 * len(self._y)
            self._X = np.resize(self._X, (cap, self._X.shape[1]))
            self._y = np.resize(self._y, cap)
            self._alpha = np.concatenate([self._alpha, np.zeros(cap - len(self._alpha))])
            self._g = np.resize(self._g, cap)
            self._tags = np.resize(self._tags, cap)
            self._slot = np.concatenate([self._slot, np.full(cap - len(self._slot), -1)])
            KC = np.empty((cap, self._KC.shape[1]))
            KC[: self._KC.shape[0]] = self._KC
            self._KC = KC
        c = self.n
        self._X[c] = x
        self._y[c] = label
        self._alpha[c] = 0.0
        self._tags[c] = REMAINING
        self.n += 1
        return c

    def _slots_for(self, idx) -> np.ndarray:
        """Column slots of the kernel block for the given samples, computing missing ones.

        The block holds K(x_i, x_k) for every stored i and every sample k that
        has ever been needed as a column (margin or support vectors).
        """
        idx = np.asarray(idx, dtype=int)
        n = self.n
        if self._rows < n and self._nslots:
            ids = self._slot_ids[: self._nslots]
            self._KC[self._rows : n, : self._nslots] = gaussian_kernel(
                self._X[self._rows : n], self._X[ids], self.config.scale)
        self._rows = n
        missing = [int(k) for k in np.unique(idx) if self._slot[k] < 0]
        if missing:
            need = self._nslots + len(missing)
            if need > self._KC.shape[1] or n > self._KC.shape[0]:
                rows = max(self._KC.shape[0], len(self._y))
                cols = max(need, 2 * self._KC.shape[1], 16)
                KC = np.empty((rows, cols))
                KC[: self._KC.shape[0], : self._nslots] = self._KC[:, : self._nslots]
                self._KC = KC
                self._slot_ids = np.resize(self._slot_ids, cols)
            new = slice(self._nslots, need)
            self._KC[:n, new] = gaussian_kernel(self._X[:n], self._X[missing], self.config.scale)
            self._slot_ids[new] = missing
            self._slot[missing] = np.arange(self._nslots, need)
            self._nslots = need
        return self._slot[idx]

    def _kcol(self, k: int) -> np.ndarray:
        slot = self._slots_for([k])[0]
        return self._KC[: self.n, slot]

    def _krow(self, k: int, idx: Sequence[int]) -> np.ndarray:
        """K(x_k, x_j) for j in idx."""
        if len(idx) == 0:
            return np.zeros(0)
        slots = self._slots_for(idx)  # may reallocate the block
        return self._KC[k, slots]

    def _kmv(self, idx: Sequence[int], w: np.ndarray) -> np.ndarray:
        """sum_j K(x_i, x_j) w_j for every stored i, without copying the block."""
        if len(idx) == 0:
            return np.zeros(self.n)
        slots = self._slots_for(idx)
        full = np.zeros(self._nslots)
        full[slots] = w
        return self._KC[: self.n, : self._nslots] @ full

    def _reset_kernel_cache(self) -> None:
        self._KC = np.empty((len(self._y), 0))
        self._slot = np.full(len(self._y), -1)
        self._slot_ids = np.empty(0, dtype=int)
        self._nslots = 0
        self._rows = 0

    # -- KKT quantities -----------------------------------------------------
    def _support(self) -> np.ndarray:
        return np.flatnonzero(self.alpha > 0)

    def _recompute_g(self, rows=None) -> np.ndarray:
        """g for all samples, or for the given row indices only."""
        sv = self._support()
        y = self.y
        rows = slice(None) if rows is None else np.asarray(rows, dtype=int)
        if sv.size == 0:
            return y[rows] * self.b - 1.0
        slots = self._slots_for(sv)
        w = np.zeros(self._nslots)
        w[slots] = self.alpha[sv] * y[sv]
        block = self._KC[: self.n, : self._nslots]
        if isinstance(rows, np.ndarray) and 8 * rows.size < self.n:
            f = block[rows] @ w
        else:
            f = (block @ w)[rows]  # cheaper than gathering many rows
        return y[rows] * (f + self.b) - 1.0

    def _sensitivity(self, c: int):
        """beta = d[b, alpha_S]/d alpha_c and gamma = d g / d alpha_c for all samples."""
        y = self.y
        S = self.margin
        yS = y[S]
        v = np.concatenate([[y[c]], yS * y[c] * self._krow(c, S)])
        beta = -self._Rinv @ v
        gamma = y * y[c] * self._kcol(c) + y * self._kmv(S, yS * beta[1:]) + y * beta[0]
        return beta, gamma

    def _expand(self, k: int) -> None:
        y = self.y
        S = self.margin
        if not S:
            self._Rinv = np.array([[-1.0, y[k]], [y[k], 0.0]])
            self.margin = [k]
            return
        v = np.concatenate([[y[k]], y[S] * y[k] * self._krow(k, S)])
        beta = -self._Rinv @ v
        gamma_k = 1.0 + float(v[1:] @ beta[1:]) + y[k] * beta[0]
        if gamma_k < SINGULAR_COND ** -1:
            raise np.linalg.LinAlgError(f"margin system singular (pivot {gamma_k:.3e})")
        m = len(beta)
        R = np.zeros((m + 1, m + 1))
        R[:m, :m] = self._Rinv
        u = np.append(beta, 1.0)
        R += np.outer(u, u) / gamma_k
        self._Rinv = R
        self.margin = S + [k]

    def _contract(self, k: int) -> None:
        if len(self.margin) == 1:
            self.margin = []
            self._Rinv = np.zeros((1, 1))
            return
        p = self.margin.index(k) + 1
        R = self._Rinv
        keep = [i for i in range(len(R)) if i != p]
        R = R[np.ix_(keep, keep)] - np.outer(R[keep, p], R[p, keep]) / R[p, p]
        self._Rinv = R
        self.margin = [i for i in self.margin if i != k]

    def _move_to(self, k: int, tag: str) -> None:
        if self._tags[k] == MARGIN and tag != MARGIN:
            self._contract(k)
        if tag == MARGIN and self._tags[k] != MARGIN:
            self._expand(k)
            self._g[k] = 0.0
        if tag == ERROR:
            self._alpha[k] = self.config.penalty
        elif tag == REMAINING:
            self._alpha[k] = 0.0
        self._tags[k] = tag

    # -- incremental learning ----------------------------------------------
    def increment(self, x, label) -> "IncrementalSVC":
        """Add one labelled example and restore the KKT conditions of all samples."""
        x = np.asarray(x, dtype=float).ravel()
        label = float(label)
        if label not in (1.0, -1.0):
            raise ValueError(f"label must be +1 or -1, got {label}")
        c = self._append(x, label)
        self._froze = False
        try:
            if self._learn(c) and self.margin:
                return self  # outside the margin: nothing moved
            if self._froze:
                # frozen samples were not tracked along the whole path; verify them
                self._g[: self.n] = self._recompute_g()
                if self._violations(self.g):
                    raise np.linalg.LinAlgError("a frozen sample left its KKT case")
        except np.linalg.LinAlgError as err:
            log.info("incremental update failed (%s); retraining %d samples in batch", err, self.n)
            self.n_fallbacks += 1
            self._retrain()
        self._finish()
        return self

    def _learn(self, c: int) -> bool:
        """Adiabatic update for sample ``c``; True when it already satisfied KKT."""
        y = self.y
        l = self.config.penalty
        self._g[c] = self._recompute_g_one(c)
        if self._g[c] >= 0:
            return True
        # samples whose admission to the margin set would make it singular; they
        # already sit at g ~ 0 and simply stay on their bound for this update
        frozen: set[int] = set()
        stalled = 0
        for _ in range(10 * self.n + 100):
            if stalled > 2 * len(self.margin) + 20:
                raise np.linalg.LinAlgError("incremental update is cycling on zero-length steps")
            g = self.g
            alpha = self.alpha
            tags = self.tags
            if not self.margin:
                # bias-only move: alpha_c cannot grow without a margin vector balancing h
                s_best, k_best = -g[c], c
                cand = np.flatnonzero(
                    ((tags == ERROR) & (y * y[c] > 0)) | ((tags == REMAINING) & (y * y[c] < 0))
                )
                cand = cand[(cand != c) & ~np.isin(cand, list(frozen))]
                if cand.size:
                    steps = np.where(tags[cand] == ERROR, -g[cand], g[cand])
                    j = int(np.argmin(steps))
                    if steps[j] < s_best:
                        s_best, k_best = steps[j], int(cand[j])
                s_best = max(s_best, 0.0)
                self.b += y[c] * s_best
                self._g[: self.n] += y * y[c] * s_best
                if k_best == c:
                    self._g[c] = 0.0
                    if alpha[c] > 0:
                        self._move_to(c, MARGIN)
                    return
                if self._admit_or_freeze(k_best, frozen):
                    frozen.clear()
                continue

            beta, gamma = self._sensitivity(c)
            S = np.array(self.margin)
            # candidate step lengths in alpha_c; (step, sample, new tag)
            best = (l - alpha[c], c, ERROR)
            if gamma[c] > _EPS:
                step = -g[c] / gamma[c]
                if step < best[0]:
                    best = (step, c, MARGIN)
            bS = beta[1:]
            up = bS > _EPS
            if up.any():
                steps = (l - alpha[S[up]]) / bS[up]
                j = int(np.argmin(steps))
                if steps[j] < best[0]:
                    best = (steps[j], int(S[up][j]), ERROR)
            down = bS < -_EPS
            if down.any():
                steps = -alpha[S[down]] / bS[down]
                j = int(np.argmin(steps))
                if steps[j] < best[0]:
                    best = (steps[j], int(S[down][j]), REMAINING)
            others = np.flatnonzero(
                ((tags == ERROR) & (gamma > _EPS)) | ((tags == REMAINING) & (gamma < -_EPS))
            )
            others = others[(others != c) & ~np.isin(others, list(frozen))]
            if others.size:
                steps = -g[others] / gamma[others]
                j = int(np.argmin(steps))
                if steps[j] < best[0]:
                    best = (steps[j], int(others[j]), MARGIN)

            step, k, tag = best
            step = max(step, 0.0)
            stalled = stalled + 1 if step == 0.0 else 0
            self._alpha[c] += step
            self._alpha[S] += bS * step
            self.b += beta[0] * step
            self._g[: self.n] += gamma * step
            self._g[S] = 0.0
            if k == c:
                if tag == MARGIN:
                    self._g[c] = 0.0
                    self._move_to(c, MARGIN)
                else:
                    self._alpha[c] = l
                    self._tags[c] = ERROR
                return
            if tag != MARGIN:
                self._move_to(k, tag)
                frozen.clear()
            elif self._admit_or_freeze(k, frozen):
                frozen.clear()  # a freeze only holds for the margin set it was tested against
        raise np.linalg.LinAlgError("incremental update did not terminate")

    def _admit_or_freeze(self, k: int, frozen: set) -> bool:
        try:
            self._move_to(k, MARGIN)
            return True
        except np.linalg.LinAlgError:
            log.debug("sample %d is dependent on the margin set; kept on its bound", k)
            frozen.add(k)
            self._froze = True
            return False

    def _violations(self, g: np.ndarray) -> int:
        tol = 0.1 * self.tol
        tags = self.tags
        bad = ((tags == ERROR) & (g > tol)) | ((tags == REMAINING) & (g < -tol))
        bad[self.margin] = np.abs(g[self.margin]) > tol
        return int(bad.sum())

    def _recompute_g_one(self, c: int) -> float:
        return float(self._recompute_g([c])[0])

    def _finish(self) -> None:
        """Drop margin vectors sitting exactly on a box bound and settle a free bias."""
        l = self.config.penalty
        snap = _BOUND_SNAP * l
        for k in list(self.margin):
            if self._alpha[k] <= snap:
                self._move_to(k, REMAINING)
            elif self._alpha[k] >= l - snap:
                self._move_to(k, ERROR)
        if self.margin:
            self._refine()
        elif self.n:
            self._center_bias()
        self._since_refresh += 1
        if self._since_refresh >= _REFRESH_EVERY or not self.margin:
            self._g[: self.n] = self._recompute_g()
            self._since_refresh = 0
        self._g[self.margin] = 0.0

    def _refine(self, sweeps: int = 2) -> None:
        """Remove round-off in h and in g over the margin set using the cached inverse.

        On a nearly singular margin set the Newton correction is unusable; h is
        then restored by the smallest change of the margin coefficients, which
        moves g by about |h|.
        """
        if not self._refine_sweeps(sweeps):
            self._project_h()

    def _refine_sweeps(self, sweeps: int) -> bool:
        S = self.margin
        l = self.config.penalty
        for _ in range(sweeps):
            r = self._margin_residual()
            if abs(r[0]) <= _H_TOL and np.abs(r[1:]).max() <= _G_TOL:
                return True
            delta = -self._Rinv @ r
            new = self._alpha[S] + delta[1:]
            if np.any(new <= 0) or np.any(new >= l):
                return False
            self._alpha[S] = new
            self.b += delta[0]
        r = self._margin_residual()
        return abs(r[0]) <= _H_TOL and np.abs(r[1:]).max() <= _G_TOL

    def _margin_residual(self) -> np.ndarray:
        return np.concatenate([[float(self.y @ self.alpha)], self._recompute_g(self.margin)])

    def _project_h(self) -> None:
        S = np.array(self.margin)
        h = float(self.y @ self.alpha)
        if abs(h) <= _H_TOL:
            return
        l = self.config.penalty
        y = self.y[S]
        # alpha_S - h y_S / |S| has zero h; only coefficients with room take part
        room = np.where(h * y > 0, self._alpha[S], l - self._alpha[S]) > 2 * abs(h)
        if room.any():
            self._alpha[S[room]] -= h * y[room] / room.sum()

    def _center_bias(self) -> None:
        """With no margin vectors the bias is only bounded; use the middle of its feasible interval."""
        y = self.y
        g = self._recompute_g()
        f = g + 1.0 - y * self.b  # y_i * sum_j alpha_j y_j K_ij
        rem = self.tags == REMAINING
        err = self.tags == ERROR
        # REMAINING: y b >= 1 - f ; ERROR: y b <= 1 - f
        lower = np.concatenate([(1 - f)[rem & (y > 0)], -(1 - f)[err & (y < 0)]])
        upper = np.concatenate([(1 - f)[err & (y > 0)], -(1 - f)[rem & (y < 0)]])
        lo = lower.max() if lower.size else None
        hi = upper.min() if upper.size else None
        if lo is not None and hi is not None:
            self.b = 0.5 * (lo + hi)
        elif lo is not None:
            self.b = lo
        elif hi is not None:
            self.b = hi

    def _retrain(self) -> None:
        """Batch solve of the dual over all stored samples, then rebuild the sets."""
        X, y = self.X, self.y
        l = self.config.penalty
        K = gaussian_kernel(X, X, self.config.scale)
        alpha = solve_dual_smo(K, y, l)
        snap = 1e-13 * l
        alpha[alpha < snap] = 0.0
        alpha[alpha > l - snap] = l
        self._alpha[: self.n] = alpha
        self._reset_kernel_cache()
        self.margin = []
        self._Rinv = np.zeros((1, 1))
        self._tags[: self.n] = np.where(alpha >= l, ERROR, REMAINING)
        free = np.flatnonzero((alpha > 0) & (alpha < l))
        if free.size:
            grad = y * (K @ (alpha * y)) - 1.0
            self.b = float(np.mean(-grad[free] * y[free]))
        for k in free:
            self._admit_reducing(int(k))
        if not self.margin:
            self._center_bias()

    def _admit_reducing(self, k: int) -> None:
        """Add a free sample to the margin set; if it is linearly dependent on
        the set, slide along the null direction until some coefficient hits a bound."""
        l = self.config.penalty
        while True:
            try:
                self._move_to(k, MARGIN)
                return
            except np.linalg.LinAlgError:
                pass
            S = np.array(self.margin)
            y = self.y
            v = np.concatenate([[y[k]], y[S] * y[k] * self._krow(k, self.margin)])
            beta = -self._Rinv @ v
            coef = np.concatenate([[1.0], beta[1:]])
            idx = np.concatenate([[k], S])
            a = self._alpha[idx]
            best = None
            for sign in (1.0, -1.0):
                d = sign * coef
                with np.errstate(divide="ignore", invalid="ignore"):
                    t = np.where(d > _EPS, (l - a) / d, np.where(d < -_EPS, -a / d, np.inf))
                j = int(np.argmin(t))
                if best is None or t[j] < best[0]:
                    best = (t[j], j, sign)
            t, j, sign = best
            self._alpha[idx] = np.clip(a + sign * coef * t, 0.0, l)
            self.b += sign * beta[0] * t
            hit = int(idx[j])
            tag = ERROR if self._alpha[hit] > 0.5 * l else REMAINING
            if hit == k:
                self._alpha[k] = l if tag == ERROR else 0.0
                self._tags[k] = tag
                return
            self._move_to(hit, tag)

    # -- prediction ---------------------------------------------------------
    def decision_function(self, X) -> np.ndarray:
        if self.n == 0:
            raise TrainingError("decision value of an empty machine")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        sv = self._support()
        if sv.size == 0:
            return np.full(len(X), self.b)
        K = gaussian_kernel(X, self.X[sv], self.config.scale)
        return K @ (self.alpha[sv] * self.y[sv]) + self.b

    def predict(self, X) -> np.ndarray:
        return np.where(self.decision_function(X) > 0, 1, -1)

    def to_json(self) -> str:
        return json.dumps({
            "scale": self.config.scale,
            "penalty": self.config.penalty,
            "X": self.X.tolist(),
            "y": self.y.tolist(),
            "alpha": self.alpha.tolist(),
            "b": self.b,
            "tags": self.tags.tolist(),
        })


# -- module-level operations ---------------------------------------------------

def train_batch(X, y, config: KernelConfig = KernelConfig(), tol: float = KKT_TOL) -> IncrementalSVC:
    """Train from scratch by inserting the samples one by one in the given order."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if len(X) != len(y):
        raise DimensionError("X and y lengths differ")
    if not (np.any(y == 1) and np.any(y == -1)):
        raise TrainingError("training needs samples of both labels")
    svc = IncrementalSVC(config, tol)
    for xi, yi in zip(X, y):
        svc.increment(xi, yi)
    return svc


def increment(state: IncrementalSVC, x, label) -> IncrementalSVC:
    return state.increment(x, label)


def decision_value(state: IncrementalSVC, x) -> float:
    return float(state.decision_function(np.asarray(x, dtype=float).reshape(1, -1))[0])


@dataclass(frozen=True)
class MarginReport:
    g: np.ndarray
    h: float
    tags: np.ndarray


def kkt_partition(state: IncrementalSVC) -> MarginReport:
    """Recompute g and h from the stored alphas and classify every sample."""
    if state.n == 0:
        raise TrainingError("empty machine")
    X, y, alpha = state.X, state.y, state.alpha
    K = gaussian_kernel(X, X, state.config.scale)
    g = y * (K @ (alpha * y)) + y * state.b - 1.0
    l = state.config.penalty
    tags = np.where(alpha <= 0, REMAINING, np.where(alpha >= l, ERROR, MARGIN))
    return MarginReport(g=g, h=float(np.dot(y, alpha)), tags=tags)


def kkt_violations(state: IncrementalSVC, tol: float = KKT_TOL) -> int:
    """Number of samples whose (alpha, g) pair violates its KKT case by more than tol."""
    rep = kkt_partition(state)
    l = state.config.penalty
    a = state.alpha
    bad = (a < 0) | (a > l)
    S = rep.tags == MARGIN
    E = rep.tags == ERROR
    R = rep.tags == REMAINING
    bad |= S & (np.abs(rep.g) > tol)
    bad |= E & (rep.g > tol)
    bad |= R & (rep.g < -tol)
    return int(bad.sum())


def solve_dual_smo(K: np.ndarray, y: np.ndarray, penalty: float, tol: float = 1e-12,
                   max_iter: int = 1_000_000) -> np.ndarray:
    """SMO with second-order working-set selection for the soft-margin dual."""
    n = len(y)
    Q = (y[:, None] * y[None, :]) * K
    alpha = np.zeros(n)
    grad = -np.ones(n)
    for _ in range(max_iter):
        up = ((y > 0) & (alpha < penalty)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < penalty))
        score = -y * grad
        if not up.any() or not low.any():
            break
        i = int(np.flatnonzero(up)[np.argmax(score[up])])
        m_up = score[i]
        m_low = score[low].min()
        if m_up - m_low < tol:
            break
        b = m_up - score
        a = Q[i, i] + np.diag(Q) - 2 * y[i] * y * Q[i]
        a = np.where(a > 0, a, 1e-12)
        cand = low & (score < m_up)
        obj = np.where(cand, -(b ** 2) / a, np.inf)
        j = int(np.argmin(obj))
        # analytic two-variable update along y_i d_i + y_j d_j = 0
        quad = max(a[j], 1e-12)
        delta = b[j] / quad
        ai, aj = alpha[i], alpha[j]
        # move alpha_i by +y_i t, alpha_j by -y_j t
        t_max_i = (penalty - ai) if y[i] > 0 else ai
        t_max_j = aj if y[j] > 0 else (penalty - aj)
        t = min(delta, t_max_i, t_max_j)
        alpha[i] = ai + y[i] * t
        alpha[j] = aj - y[j] * t
        grad += Q[:, i] * (alpha[i] - ai) + Q[:, j] * (alpha[j] - aj)
    return np.clip(alpha, 0.0, penalty)


def median_distance(X) -> float:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if len(X) < 2:
        return 1.0
    d = pdist(X)
    med = float(np.median(d))
    return med if med > 0 else 1.0


def default_scale_grid(X) -> list[float]:
    med = median_distance(X)
    return [med * 2.0 ** k for k in range(-4, 5)]


def _folds(y: np.ndarray, k: int) -> np.ndarray:
    """Stratified round-robin fold assignment in sample order."""
    fold = np.empty(len(y), dtype=int)
    for label in (1.0, -1.0):
        idx = np.flatnonzero(y == label)
        fold[idx] = np.arange(len(idx)) % k
    return fold


def cv_accuracy(X, y, scale: float, folds: int = 5, penalty: float = 10.0) -> float:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    fold = _folds(y, folds)
    accs = []
    for f in range(folds):
        test = fold == f
        train = ~test
        if not test.any():
            continue
        ytr = y[train]
        if np.all(ytr == ytr[0]):
            pred = np.full(test.sum(), ytr[0])
        else:
            svc = train_batch(X[train], ytr, KernelConfig(scale, penalty))
            pred = svc.predict(X[test])
        accs.append(np.mean(pred == y[test]))
    return float(np.mean(accs))


def grid_search_scale(X, y, grid: Sequence[float] | None = None, folds: int = 5,
                      penalty: float = 10.0) -> float:
    """Kernel scale with the best cross-validated accuracy; ties go to the smallest scale."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if grid is None:
        grid = default_scale_grid(X)
    grid = sorted(float(s) for s in grid)
    if not grid:
        raise ValueError("empty scale grid")
    if folds < 2 or folds > len(y):
        raise ValueError(f"cannot split {len(y)} samples into {folds} folds")
    if len(grid) == 1:
        return grid[0]
    scores = [cv_accuracy(X, y, s, folds, penalty) for s in grid]
    return grid[int(np.argmax(scores))]
