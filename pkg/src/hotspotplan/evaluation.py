"""Policy rollout against ground-truth fields and the two map-quality metrics.

ENT is the posterior joint entropy of the original-scale measurements at the
still-unobserved cells; ERR is the mean-squared relative error of the
lognormal posterior-mean predictor over every cell of the domain, normalized
by the true field mean.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.stats import t as student_t

from .errors import DeadEnd, InsufficientData
from .field_model import PosteriorData, lgp_entropy, posterior
from .planners import Policy, Problem
from .world import TeamState, action_target, transition


@dataclass
class RolloutResult:
    final_data: PosteriorData
    path_cells: list
    ent: float
    err: float
    wall_time: float
    dead_ended: bool = False


def rollout(
    problem: Problem,
    policy: Policy,
    field: np.ndarray,
    d0: PosteriorData,
    s0: TeamState,
    stages: int,
) -> RolloutResult:
    """Execute a policy for ``stages`` single-observation stages.

    After each move the true log measurement at the new cell is revealed and
    appended to the history. ``wall_time`` covers planning (policy.act) only.
    A dead end truncates the rollout and is flagged on the result.
    """
    if field.shape != (problem.domain.rows, problem.domain.cols):
        raise ValueError("field shape must match the domain")
    policy.reset()
    s = s0
    d = d0
    paths = [[p.cell] for p in s0.poses]
    plan_time = 0.0
    dead = False
    for stage in range(stages):
        t0 = time.perf_counter()
        try:
            a = policy.act(s, d, stage)
        except DeadEnd:
            dead = True
            break
        finally:
            plan_time += time.perf_counter() - t0
        cell = action_target(s, a).cell
        s = transition(s, a, problem.domain)
        d = d.extended(cell, math.log(field[cell]))
        paths[a.robot_index].append(cell)
    ent = ent_metric(problem, d)
    err = err_metric(problem, d, field)
    return RolloutResult(d, paths, ent, err, plan_time, dead)


def ent_metric(problem: Problem, d: PosteriorData) -> float:
    """Posterior map entropy: joint log-GP entropy of all unobserved cells."""
    observed = d.observed_set()
    unobserved = [c for c in problem.domain.cells() if c not in observed]
    if not unobserved:
        raise ValueError("ent_metric needs at least one unobserved cell")
    return lgp_entropy(d, unobserved, problem.hyper)


def _predict_all(problem: Problem, d: PosteriorData) -> np.ndarray:
    cells = problem.domain.cells()
    g = posterior(d, cells, problem.hyper)
    pred = np.exp(g.mean + 0.5 * np.diag(g.covariance))
    return pred.reshape(problem.domain.rows, problem.domain.cols)


def err_metric(problem: Problem, d: PosteriorData, field: np.ndarray) -> float:
    """Mean-squared relative prediction error over every domain cell."""
    pred = _predict_all(problem, d)
    mu_bar = float(field.mean())
    return float(np.mean(((field - pred) / mu_bar) ** 2))


def error_map(problem: Problem, d: PosteriorData, field: np.ndarray) -> np.ndarray:
    """Per-cell absolute relative prediction error grid."""
    pred = _predict_all(problem, d)
    mu_bar = float(field.mean())
    return np.abs(field - pred) / mu_bar


def paired_ttest(a, b, alpha_sig: float = 0.1) -> tuple[float, bool]:
    """Two-sided paired t statistic and significance flag.

    Zero-variance differences degenerate to a statistic of 0 (identical
    lists, not significant) or +/-inf (constant nonzero difference,
    significant).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("need two equal-length 1-d samples")
    n = a.shape[0]
    if n < 5:
        raise InsufficientData(f"paired t-test needs >= 5 pairs, got {n}")
    diff = a - b
    mean = float(diff.mean())
    sd = float(diff.std(ddof=1))
    if sd == 0.0:
        stat = 0.0 if mean == 0.0 else math.copysign(math.inf, mean)
    else:
        stat = mean / (sd / math.sqrt(n))
    crit = float(student_t.ppf(1.0 - alpha_sig / 2.0, n - 1))
    return stat, abs(stat) > crit
