"""Gaussian-process machinery for log-scale field measurements.

The field of positive measurements ``y`` is modelled through its logs
``z = log y``, which form a GP with constant mean and an isotropic
squared-exponential covariance plus a nugget. Everything downstream
(entropies, predictors, samplers) is built on the posterior of that GP.
All entropies are in nats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.linalg.blas import dtrsm, dtrsv

from .errors import DegenerateCovariance, InsufficientData, SingularGram
from .world import Cell, GridDomain

LOG_2PI_E = math.log(2.0 * math.pi * math.e)

# Relative jitter added to the Gram diagonal when the nugget is zero; keeps
# the factorization stable and sits far below all test tolerances.
JITTER_FRACTION = 1e-10


@dataclass(frozen=True)
class Hyperparams:
    """Constant prior mean (log scale) and covariance structure."""

    mean: float
    signal_variance: float
    length_scale: float
    noise_variance: float = 0.0

    def __post_init__(self):
        if self.signal_variance <= 0:
            raise ValueError("signal_variance must be positive")
        if self.length_scale <= 0:
            raise ValueError("length_scale must be positive")
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be non-negative")

    @property
    def prior_variance(self) -> float:
        """Variance of a single measurement under the prior."""
        return self.signal_variance + self.noise_variance


class PosteriorData:
    """Ordered observation history: locations and log measurements.

    The first ``prior_len`` entries form the prior block fixed at
    construction; later entries are exploration observations in stage order.
    Instances are immutable; ``extended`` returns a new history.
    """

    __slots__ = ("locations", "z", "prior_len")

    def __init__(self, locations, z, prior_len=None):
        locations = tuple(tuple(c) for c in locations)
        z = np.asarray(z, dtype=float)
        if z.ndim != 1 or len(locations) != z.shape[0]:
            raise ValueError("locations and measurements must have equal length")
        if len(set(locations)) != len(locations):
            raise ValueError("duplicate observed locations")
        self.locations = locations
        self.z = z
        self.z.setflags(write=False)
        self.prior_len = len(locations) if prior_len is None else int(prior_len)
        if not (0 <= self.prior_len <= len(locations)):
            raise ValueError("prior_len out of range")

    def __len__(self) -> int:
        return len(self.locations)

    def extended(self, cell: Cell, z_value: float) -> "PosteriorData":
        if tuple(cell) in self.locations:
            raise ValueError(f"cell {cell} already observed")
        return PosteriorData(
            self.locations + (tuple(cell),),
            np.append(self.z, float(z_value)),
            self.prior_len,
        )

    def observed_set(self) -> frozenset:
        return frozenset(self.locations)

    def __repr__(self):
        return f"PosteriorData({len(self)} obs, prior_len={self.prior_len})"


@dataclass(frozen=True)
class PosteriorGaussian:
    """Joint Gaussian over target cells: mean vector and covariance matrix."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mean, dtype=float)
        c = np.asarray(self.covariance, dtype=float)
        if c.shape != (m.shape[0], m.shape[0]):
            raise ValueError("covariance shape must match target count")
        if not np.allclose(c, c.T, atol=1e-10 * (1.0 + np.abs(c).max(initial=0.0))):
            raise ValueError("covariance must be symmetric")
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "covariance", 0.5 * (c + c.T))


def covariance(x: Cell, u: Cell, h: Hyperparams) -> float:
    """Isotropic squared-exponential kernel plus nugget at identical cells."""
    dx = x[0] - u[0]
    dy = x[1] - u[1]
    value = h.signal_variance * math.exp(-(dx * dx + dy * dy) / (2.0 * h.length_scale**2))
    if x == u:
        value += h.noise_variance
    return value


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def cov_matrix(cells_a, cells_b, h: Hyperparams) -> np.ndarray:
    """Cross-covariance matrix between two cell lists (vectorized kernel)."""
    a = np.asarray(cells_a, dtype=float).reshape(-1, 2)
    b = np.asarray(cells_b, dtype=float).reshape(-1, 2)
    k = h.signal_variance * np.exp(-_sq_dists(a, b) / (2.0 * h.length_scale**2))
    if h.noise_variance > 0:
        ta = [tuple(c) for c in cells_a]
        tb = [tuple(c) for c in cells_b]
        for i, ca in enumerate(ta):
            for j, cb in enumerate(tb):
                if ca == cb:
                    k[i, j] += h.noise_variance
    return k


def _gram(cells, h: Hyperparams) -> np.ndarray:
    """Gram matrix of distinct observed cells, with stabilizing jitter."""
    k = cov_matrix(cells, cells, h)
    jitter = JITTER_FRACTION * h.signal_variance if h.noise_variance == 0 else 0.0
    if jitter:
        k[np.diag_indices_from(k)] += jitter
    return k


class GramCache:
    """Cholesky factors and target weights keyed by the location tuple.

    Histories grow one cell at a time, so a factor for ``locs[:-1]`` is
    extended by a single row instead of refactorized. Results are identical
    to from-scratch computation; the cache is a pure-function accelerator.
    """

    def __init__(self, h: Hyperparams):
        self.h = h
        self._chol: dict[tuple, np.ndarray] = {}
        self._weights: dict[tuple, tuple[np.ndarray, float]] = {}

    def chol(self, locs: tuple) -> np.ndarray:
        """Lower Cholesky factor of the Gram matrix for ``locs``."""
        found = self._chol.get(locs)
        if found is not None:
            return found
        if len(locs) == 0:
            L = np.zeros((0, 0))
        elif locs[:-1] in self._chol:
            L = self._extend(self._chol[locs[:-1]], locs)
        else:
            gram = _gram(locs, self.h)
            try:
                L = cholesky(gram, lower=True)
            except np.linalg.LinAlgError as exc:
                raise SingularGram(f"gram matrix not positive definite: {exc}") from exc
        self._chol[locs] = L
        return L

    def _extend(self, L_prev: np.ndarray, locs: tuple) -> np.ndarray:
        m = L_prev.shape[0]
        new = locs[-1]
        b = cov_matrix([new], locs[:-1], self.h).ravel()
        c = covariance(new, new, self.h)
        if self.h.noise_variance == 0:
            c += JITTER_FRACTION * self.h.signal_variance
        row = solve_triangular(L_prev, b, lower=True) if m else np.zeros(0)
        d2 = c - row @ row
        if d2 <= 0:
            raise SingularGram("gram extension lost positive definiteness")
        L = np.zeros((m + 1, m + 1))
        L[:m, :m] = L_prev
        L[m, :m] = row
        L[m, m] = math.sqrt(d2)
        return L

    def target_weights(self, locs: tuple, target: Cell) -> tuple[np.ndarray, float]:
        """Return ``(alpha, var)`` so that the posterior of ``target`` given
        observations at ``locs`` has mean ``mu + alpha @ (z - mu)`` and
        variance ``var`` (independent of the measurement values)."""
        key = (locs, tuple(target))
        found = self._weights.get(key)
        if found is not None:
            return found
        prior_var = covariance(target, target, self.h)
        if len(locs) == 0:
            result = (np.zeros(0), prior_var)
        else:
            L = self.chol(locs)
            kvec = cov_matrix(locs, [target], self.h).ravel()
            half = solve_triangular(L, kvec, lower=True)
            alpha = solve_triangular(L.T, half, lower=False)
            result = (alpha, prior_var - half @ half)
        self._weights[key] = result
        return result


class IncrementalPosterior:
    """Posterior evaluator over one growing observation sequence.

    Keeps the Cholesky factor of the Gram matrix and the whitened residual
    ``y = L^-1 (z - mean)`` in preallocated buffers, so appending one
    observation costs one triangular solve and target means/variances cost a
    single batched solve. Results match :func:`posterior` exactly; this class
    exists for planner hot loops (rollout bound initialization).
    """

    def __init__(self, h: Hyperparams, locs, z, capacity: int, L: np.ndarray | None = None):
        self.h = h
        m = len(locs)
        cap = max(capacity, m)
        self._L = np.zeros((cap, cap))
        self._y = np.zeros(cap)
        self._cells = np.zeros((cap, 2))
        self.m = m
        if m:
            self._L[:m, :m] = L if L is not None else cholesky(_gram(locs, h), lower=True)
            self._y[:m] = dtrsv(self._L[:m, :m], np.asarray(z, dtype=float) - h.mean, lower=1)
            self._cells[:m] = np.asarray(locs, dtype=float)
        self._jitter = JITTER_FRACTION * h.signal_variance if h.noise_variance == 0 else 0.0

    def batch(self, targets) -> tuple[np.ndarray, np.ndarray]:
        """Posterior means and variances at the target cells.

        Targets must be cells not yet in the sequence (the nugget cross-term
        for coinciding cells is not applied here).
        """
        h = self.h
        t = np.asarray(targets, dtype=float).reshape(-1, 2)
        prior = np.full(t.shape[0], h.prior_variance)
        m = self.m
        if m == 0:
            return np.full(t.shape[0], h.mean), prior
        k = h.signal_variance * np.exp(
            -_sq_dists(self._cells[:m], t) / (2.0 * h.length_scale**2)
        )
        half = dtrsm(1.0, self._L[:m, :m], k, lower=1)
        mu = h.mean + half.T @ self._y[:m]
        var = prior - np.einsum("ij,ij->j", half, half)
        return mu, var

    def extend(self, cell, z_value: float) -> None:
        """Append one observation in place."""
        h = self.h
        m = self.m
        c = np.asarray(cell, dtype=float)
        prior = h.prior_variance + self._jitter
        if m == 0:
            d2 = prior
            row = np.zeros(0)
        else:
            b = h.signal_variance * np.exp(
                -np.sum((self._cells[:m] - c) ** 2, axis=1) / (2.0 * h.length_scale**2)
            )
            row = dtrsv(self._L[:m, :m], b, lower=1)
            d2 = prior - row @ row
        if d2 <= 0:
            raise SingularGram("incremental extension lost positive definiteness")
        self._L[m, :m] = row
        self._L[m, m] = math.sqrt(d2)
        self._y[m] = (float(z_value) - h.mean - row @ self._y[:m]) / self._L[m, m]
        self._cells[m] = c
        self.m = m + 1


def posterior(d: PosteriorData, targets, h: Hyperparams) -> PosteriorGaussian:
    """Posterior mean vector and covariance matrix at the target cells.

    The covariance depends only on the observed locations, never on the
    measurement values; only the mean depends on ``d.z``.
    """
    targets = [tuple(t) for t in targets]
    if not targets:
        raise ValueError("need at least one target cell")
    k_tt = cov_matrix(targets, targets, h)
    if len(d) == 0:
        return PosteriorGaussian(np.full(len(targets), h.mean), k_tt)
    gram = _gram(d.locations, h)
    try:
        L = cholesky(gram, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularGram(f"gram matrix not positive definite: {exc}") from exc
    k_ot = cov_matrix(d.locations, targets, h)
    solved = cho_solve((L, True), k_ot)
    mean = h.mean + solved.T @ (d.z - h.mean)
    cov = k_tt - k_ot.T @ solved
    return PosteriorGaussian(mean, 0.5 * (cov + cov.T))


def gaussian_entropy(g: PosteriorGaussian) -> float:
    """Differential entropy ``log sqrt((2 pi e)^k det cov)`` in nats."""
    k = g.mean.shape[0]
    try:
        L = cholesky(g.covariance, lower=True)
    except np.linalg.LinAlgError as exc:
        raise DegenerateCovariance(f"covariance not positive definite: {exc}") from exc
    diag = np.diag(L)
    if np.any(diag <= 0):
        raise DegenerateCovariance("non-positive pivot in factorization")
    logdet = 2.0 * float(np.sum(np.log(diag)))
    return 0.5 * (k * LOG_2PI_E + logdet)


def lgp_entropy(d: PosteriorData, targets, h: Hyperparams) -> float:
    """Joint entropy of the original-scale measurements at the targets.

    Equals the Gaussian entropy of the log-scale posterior plus the sum of
    the posterior log-scale means. With targets = all unobserved cells this
    is the posterior map entropy (the ENT metric integrand).
    """
    g = posterior(d, targets, h)
    return gaussian_entropy(g) + float(np.sum(g.mean))


def sample_field(h: Hyperparams, domain: GridDomain, seed: int) -> np.ndarray:
    """Draw one field realization: exp of a joint GP sample over all cells.

    Returns a positive array of shape ``(rows, cols)``; deterministic in
    ``seed``.
    """
    cells = domain.cells()
    gram = _gram(cells, h)
    try:
        L = cholesky(gram, lower=True)
    except np.linalg.LinAlgError as exc:
        raise DegenerateCovariance(f"field covariance not factorizable: {exc}") from exc
    rng = np.random.default_rng(seed)
    z = h.mean + L @ rng.standard_normal(len(cells))
    return np.exp(z).reshape(domain.rows, domain.cols)


def lognormal_predictor(d: PosteriorData, x: Cell, h: Hyperparams) -> float:
    """Posterior mean of the original-scale measurement at ``x``."""
    g = posterior(d, [x], h)
    return float(np.exp(g.mean[0] + 0.5 * g.covariance[0, 0]))


def log_marginal_likelihood(d: PosteriorData, h: Hyperparams) -> float:
    """Gaussian log marginal likelihood of the log measurements."""
    n = len(d)
    gram = _gram(d.locations, h)
    try:
        L = cholesky(gram, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularGram(f"gram matrix not positive definite: {exc}") from exc
    resid = d.z - h.mean
    half = solve_triangular(L, resid, lower=True)
    logdet = 2.0 * float(np.sum(np.log(np.diag(L))))
    return -0.5 * (half @ half + logdet + n * math.log(2.0 * math.pi))


def default_grids(d: PosteriorData, domain: GridDomain, points: int = 20):
    """Log-spaced hyperparameter grids scaled to the sample variance.

    Length scales beyond half the domain extent are unidentifiable from
    in-domain data and drive wild extrapolation; signal variances far above
    the sample variance inflate the lognormal mean correction; and a nugget
    below one percent of the sample variance is indistinguishable from zero
    on small samples while letting interpolation weights blow up on
    clustered designs. The grids stay within those bounds.
    """
    var_z = max(float(np.var(d.z)), 1e-8)
    signal = np.geomspace(1e-2 * var_z, 4.0 * var_z, points)
    length = np.geomspace(0.5, max(domain.rows, domain.cols) / 2.0, points)
    noise = np.geomspace(1e-2 * var_z, var_z, points)
    return signal, length, noise


def fit_hyperparams(
    observations: PosteriorData,
    domain: GridDomain,
    signal_grid=None,
    length_grid=None,
    noise_grid=None,
    grid_points: int = 20,
) -> Hyperparams:
    """Maximum-likelihood hyperparameters over a log-spaced grid.

    The mean is fixed at the sample mean of the log measurements; the grid
    search is exhaustive, so the returned candidate has likelihood at least
    that of every other grid point. Ties go to the first candidate in
    (signal, length, noise) iteration order.
    """
    if len(observations) < 5:
        raise InsufficientData(f"need >= 5 observations, got {len(observations)}")
    sg, lg, ng = default_grids(observations, domain, grid_points)
    signal_grid = sg if signal_grid is None else np.asarray(signal_grid, dtype=float)
    length_grid = lg if length_grid is None else np.asarray(length_grid, dtype=float)
    noise_grid = ng if noise_grid is None else np.asarray(noise_grid, dtype=float)
    mean = float(np.mean(observations.z))

    cells = np.asarray(observations.locations, dtype=float)
    sq = _sq_dists(cells, cells)
    resid = observations.z - mean
    n = len(observations)

    best = None
    best_ll = -np.inf
    for ell in length_grid:
        corr = np.exp(-sq / (2.0 * ell**2))
        for sv in signal_grid:
            base = sv * corr
            for nv in noise_grid:
                gram = base.copy()
                gram[np.diag_indices_from(gram)] += nv
                try:
                    L = cholesky(gram, lower=True)
                except np.linalg.LinAlgError:
                    continue
                half = solve_triangular(L, resid, lower=True)
                ll = -0.5 * (
                    half @ half
                    + 2.0 * float(np.sum(np.log(np.diag(L))))
                    + n * math.log(2.0 * math.pi)
                )
                if ll > best_ll:
                    best_ll = ll
                    best = (sv, ell, nv)
    if best is None:
        raise SingularGram("no grid candidate yielded a positive definite gram")
    return Hyperparams(mean, best[0], best[1], best[2])
