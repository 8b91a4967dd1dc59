"""Classifier-filtered initial populations across environment changes.

After every environment the Pareto-set approximation is labelled +1 and an
equal number of uniform random vectors -1; the same incremental SVM absorbs
each new batch.  At the next change, random candidates that the classifier
accepts become the initial population of the optimizer.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol

import numpy as np

from .core import DynamicProblem, EnvironmentConfig, TimeContext, time_index
from .optimizers import OptimizerConfig, Population, evaluate_population, run_optimizer
from .svm import IncrementalSVC, KernelConfig, default_scale_grid, grid_search_scale

log = logging.getLogger(__name__)

# independent random streams per environment state
_INIT, _OPTIMIZER, _TRAINING = 0, 1, 2


class Classifier(Protocol):
    n: int

    def decision_function(self, X) -> np.ndarray: ...

    def increment(self, x, label): ...


@dataclass(frozen=True)
class SeedingConfig:
    candidate_mult: int = 10
    penalty: float = 10.0
    scale: Optional[float] = None  # None: grid search on the first training batch
    folds: int = 5

    def __post_init__(self):
        if self.candidate_mult < 1:
            raise ValueError("candidate multiplier must be >= 1")


@dataclass
class TrainingBatch:
    positives: np.ndarray
    negatives: np.ndarray

    def interleaved(self):
        """(x, label) pairs alternating positive and negative."""
        for p, q in zip(self.positives, self.negatives):
            yield p, 1.0
            yield q, -1.0

    def __len__(self) -> int:
        return len(self.positives) + len(self.negatives)


def _unique_rows(X: np.ndarray) -> np.ndarray:
    _, first = np.unique(X, axis=0, return_index=True)
    return X[np.sort(first)]


def build_training_batch(pos, problem: DynamicProblem, rng: np.random.Generator) -> TrainingBatch:
    pos = np.atleast_2d(np.asarray(pos, dtype=float))
    if pos.size == 0:
        raise ValueError("empty Pareto set")
    positives = _unique_rows(pos)
    negatives = problem.random(rng, len(positives))
    while True:
        clash = (negatives[:, None, :] == positives[None, :, :]).all(axis=2).any(axis=1)
        if not clash.any():
            break
        negatives[clash] = problem.random(rng, int(clash.sum()))
    return TrainingBatch(positives, negatives)


def generate_candidates(problem: DynamicProblem, count: int, rng: np.random.Generator) -> np.ndarray:
    if count < 1:
        raise ValueError("candidate count must be positive")
    return problem.random(rng, count)


def filter_candidates(classifier, candidates, target: int, problem: DynamicProblem, t: float,
                      rng: np.random.Generator) -> tuple[Population, int]:
    """Keep accepted candidates in order up to ``target``; top up with random vectors.

    Returns the evaluated population and the number of classifier-accepted members.
    """
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    score = classifier.decision_function(candidates)
    accepted = candidates[score > 0][:target]
    n_acc = len(accepted)
    if n_acc < target:
        accepted = np.vstack([accepted, problem.random(rng, target - n_acc)])
    return evaluate_population(problem, accepted, t), n_acc


def _stream(seed: int, change: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(change, purpose)))


@dataclass
class DynamicRunResult:
    times: list[float] = field(default_factory=list)
    pos: list[Population] = field(default_factory=list)
    classifier_sizes: list[int] = field(default_factory=list)
    accepted: list[int] = field(default_factory=list)
    classifier: Optional[object] = None


def isvm_dmoea_run(problem: DynamicProblem, env: EnvironmentConfig, kind: str,
                   opt_cfg: OptimizerConfig, seeding: Optional[SeedingConfig], seed: int,
                   classifier: Optional[Classifier] = None,
                   callback: Optional[Callable] = None) -> DynamicRunResult:
    """Solve every environment state of ``env`` in turn.

    With ``seeding=None`` each environment restarts from a uniform random
    population (the plain baseline).  Otherwise the initial population of
    every environment after the first is drawn from classifier-accepted
    candidates.  ``classifier`` replaces the incremental SVM (used in tests).
    ``callback(change, generation, state)`` is forwarded to the optimizer.
    """
    res = DynamicRunResult()
    pop = opt_cfg.pop_size
    for k in range(env.n_changes):
        t = time_index(TimeContext(k * env.tau_t, env))
        rng_init = _stream(seed, k, _INIT)
        if k == 0 or seeding is None or classifier is None:
            init = evaluate_population(problem, generate_candidates(problem, pop, rng_init), t)
            res.accepted.append(0)
        else:
            cand = generate_candidates(problem, seeding.candidate_mult * pop, rng_init)
            init, n_acc = filter_candidates(classifier, cand, pop, problem, t, rng_init)
            res.accepted.append(n_acc)
        hook = None if callback is None else (lambda gen, state, k=k: callback(k, gen, state))
        _, pos = run_optimizer(kind, problem, t, init, opt_cfg, _stream(seed, k, _OPTIMIZER), hook)
        res.times.append(t)
        res.pos.append(pos)

        if seeding is not None:
            batch = build_training_batch(pos.X, problem, _stream(seed, k, _TRAINING))
            if classifier is None:
                classifier = _new_classifier(batch, seeding)
            for x, label in batch.interleaved():
                classifier.increment(x, label)
        res.classifier_sizes.append(classifier.n if classifier is not None else 0)
    res.classifier = classifier
    return res


def _new_classifier(batch: TrainingBatch, seeding: SeedingConfig) -> IncrementalSVC:
    scale = seeding.scale
    if scale is None:
        X = np.vstack([batch.positives, batch.negatives])
        y = np.concatenate([np.ones(len(batch.positives)), -np.ones(len(batch.negatives))])
        scale = grid_search_scale(X, y, default_scale_grid(X), seeding.folds, seeding.penalty)
        log.debug("grid search picked kernel scale %.4g", scale)
    return IncrementalSVC(KernelConfig(scale, seeding.penalty))


class AcceptAll:
    """Classifier stand-in that accepts every candidate and ignores training data."""

    n = 0

    def decision_function(self, X) -> np.ndarray:
        return np.ones(len(np.atleast_2d(X)))

    def increment(self, x, label):
        self.n += 1
        return self
