"""Exploration planners over the grid world and GP/log-GP field models.

The strictly adaptive problem takes one new observation per stage over
stages ``0..t`` (so ``t + 1`` observations total, ``t = k*n - 1`` for ``k``
robots with per-robot budget ``n``). Expectations over the continuous
measurement outcome are handled three ways:

* ``exact_dp``     - Gauss-Legendre quadrature over the truncated outcome;
* ``bounded_dp``   - generalized Jensen (lower) or Edmundson-Madansky
                     (upper) weighted sums, solved exhaustively;
* ``urtdp``        - anytime trial-based solver that maintains lower/upper
                     value tables for the Jensen and EM problems and tightens
                     them along simulated paths.

All solvers share one vectorized tree recursion parameterized by the
standardized outcome points, and a Gram-factor cache keyed by the observed
location tuple (posterior covariances never depend on measurement values).
Non-adaptive baselines (maximum entropy sampling, MI-based greedy) commit
their paths from the prior data alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky as _cholesky, solve_triangular as _solve_tri

from .discretization import standardized_rule, truncated_quadrature_rule
from .errors import DeadEnd, DegenerateCovariance, InstanceTooLarge
from .field_model import (
    LOG_2PI_E,
    GramCache,
    Hyperparams,
    IncrementalPosterior,
    PosteriorData,
    cov_matrix,
    gaussian_entropy,
    posterior,
)
from .world import (
    MOVES,
    MOVE_DELTA,
    ConstrainedJointAction,
    GridDomain,
    TeamState,
    action_target,
    apply_joint_move,
    constrained_actions,
    full_joint_actions,
    move_target,
    transition,
)

MODELS = ("gp", "lgp")

# exhaustive-solver tractability guards
EXACT_MAX_HORIZON = 4
EXACT_MAX_CELLS = 16
BOUNDED_MAX_LEAVES = 5e8


@dataclass(frozen=True)
class Problem:
    """A planning instance: grid, fitted hyperparameters, measurement model."""

    domain: GridDomain
    hyper: Hyperparams
    model: str = "lgp"

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}")

    @property
    def is_lgp(self) -> bool:
        return self.model == "lgp"


@dataclass(frozen=True)
class PlannerConfig:
    """Common planner knobs. ``horizon`` is the last stage index t."""

    horizon: int
    nu: int = 4
    truncation_m: float = 4.0
    alpha: float = 1e-3
    max_simulated_paths: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")
        if self.nu < 1 or self.truncation_m <= 0 or self.alpha <= 0:
            raise ValueError("nu, truncation_m and alpha must be positive")
        if self.max_simulated_paths < 1:
            raise ValueError("max_simulated_paths must be positive")


@dataclass
class ValueBounds:
    lower: float
    upper: float

    def __post_init__(self):
        if self.lower > self.upper + 1e-9:
            raise ValueError(f"bounds crossed: {self.lower} > {self.upper}")

    @property
    def gap(self) -> float:
        return self.upper - self.lower


def state_key(stage: int, s: TeamState, d: PosteriorData) -> tuple:
    """Canonical hashable encoding of a planning state.

    Measurement values enter at full precision: adaptive values genuinely
    depend on them. The visited set is implied by the location tuple.
    """
    return (stage, s.poses, s.steps, d.locations, d.z.tobytes())


def action_new_cells(s: TeamState, a) -> list:
    """Cells newly observed by a constrained action or a full joint move."""
    if isinstance(a, ConstrainedJointAction):
        return [action_target(s, a).cell]
    return [move_target(s.poses[i], m).cell for i, m in enumerate(a)]


def stagewise_reward(problem: Problem, s: TeamState, a, d: PosteriorData) -> float:
    """Entropy of the measurement(s) revealed by taking ``a`` in ``s``.

    Log-scale Gaussian entropy for the GP model; plus the posterior means for
    the log-GP model (original-scale entropy). The cost depends on the history
    length only, never on the domain size.
    """
    cells = action_new_cells(s, a)
    g = posterior(d, cells, problem.hyper)
    reward = gaussian_entropy(g)
    if problem.is_lgp:
        reward += float(np.sum(g.mean))
    return reward


def _single_cell_reward(problem: Problem, mu: float | np.ndarray, var: float):
    base = 0.5 * (LOG_2PI_E + math.log(var))
    return base + mu if problem.is_lgp else base


# ---------------------------------------------------------------------------
# Exhaustive tree solver (exact quadrature / Jensen lower / EM upper)
# ---------------------------------------------------------------------------


class _TreeSolver:
    """Exhaustive strictly-adaptive DP with a fixed standardized outcome rule.

    The measurement branches are vectorized: at recursion depth ``j`` values
    are arrays of shape ``(B,)**j`` where ``B`` is the number of outcome
    points. Posterior weight vectors are cached per location tuple, so only
    cheap affine arithmetic runs inside the branch tensor.
    """

    def __init__(self, problem, weights, points, n_actions, cache=None):
        self.problem = problem
        self.w = np.asarray(weights, dtype=float)
        self.zeta = np.asarray(points, dtype=float)
        self.n_actions = n_actions
        self.cache = cache if cache is not None else GramCache(problem.hyper)
        self._z0 = None

    def solve(self, s: TeamState, d: PosteriorData):
        """Return (value, [(action, q)]) at the root state."""
        self._z0 = d.z
        acts = constrained_actions(s, self.problem.domain)
        q_list = []
        for a in acts:
            q = self._q(s, d.locations, [], 0, a)
            q_list.append((a, float(q)))
        value = max((q for _, q in q_list), default=0.0)
        return value, q_list

    def _mu(self, alpha, zs, depth):
        h = self.problem.hyper
        p = self._z0.shape[0]
        mu = h.mean + float(alpha[:p] @ (self._z0 - h.mean))
        for j, zarr in enumerate(zs):
            aj = alpha[p + j]
            if aj != 0.0:
                mu = mu + aj * (zarr.reshape(zarr.shape + (1,) * (depth - j - 1)) - h.mean)
        return mu

    def _q(self, s, locs, zs, depth, a):
        shape = (self.zeta.shape[0],) * depth
        x = action_target(s, a).cell
        alpha, var = self.cache.target_weights(locs, x)
        if var <= 0:
            raise DegenerateCovariance(f"non-positive posterior variance at {x}")
        mu = self._mu(alpha, zs, depth)
        reward = _single_cell_reward(self.problem, mu, var)
        if depth == self.n_actions - 1:
            return np.broadcast_to(np.asarray(reward, dtype=float), shape)
        mu_full = np.broadcast_to(np.asarray(mu, dtype=float), shape)
        z_child = mu_full[..., None] + math.sqrt(var) * self.zeta
        child = self._value(
            transition(s, a, self.problem.domain), locs + (x,), zs + [z_child], depth + 1
        )
        return reward + np.tensordot(child, self.w, axes=(-1, 0))

    def _value(self, s, locs, zs, depth):
        shape = (self.zeta.shape[0],) * depth
        acts = constrained_actions(s, self.problem.domain)
        if not acts:
            # dead end: remaining stages contribute nothing
            return np.zeros(shape)
        best = None
        for a in acts:
            q = self._q(s, locs, zs, depth, a)
            best = q if best is None else np.maximum(best, q)
        return np.broadcast_to(best, shape)


def _check_bounded_size(config, points: int, k: int):
    # branch arrays reach points**horizon elements across (3k)**horizon subtrees
    leaves = (3.0 * k * points) ** config.horizon * 3.0 * k
    if leaves > BOUNDED_MAX_LEAVES:
        raise InstanceTooLarge(
            f"exhaustive bounded solve would touch ~{leaves:.2e} branches"
        )


def exact_dp(
    problem: Problem,
    d0: PosteriorData,
    s0: TeamState,
    config: PlannerConfig,
    quadrature_order: int = 32,
) -> float:
    """Optimal strictly adaptive value with quadrature expectations.

    Each outcome expectation uses a composite quantile-panel rule on the same
    truncated support the bounded solvers use (``quadrature_order`` panels,
    four Gauss-Legendre nodes each), so the Jensen/EM values honor the
    sandwich around this oracle to quadrature accuracy. Restricted to tiny
    instances.
    """
    if config.horizon > EXACT_MAX_HORIZON or problem.domain.size > EXACT_MAX_CELLS:
        raise InstanceTooLarge(
            f"exact_dp limited to horizon <= {EXACT_MAX_HORIZON} and "
            f"<= {EXACT_MAX_CELLS} cells"
        )
    w, zeta = truncated_quadrature_rule(quadrature_order, config.truncation_m)
    if float(len(zeta)) ** config.horizon > 5e7:
        raise InstanceTooLarge(
            "quadrature branching exceeds memory budget; lower quadrature_order"
        )
    solver = _TreeSolver(problem, w, zeta, config.horizon + 1)
    value, _ = solver.solve(s0, d0)
    return value


def bounded_dp(
    problem: Problem,
    d0: PosteriorData,
    s0: TeamState,
    config: PlannerConfig,
    side: str = "lower",
):
    """Exhaustive solve of the Jensen-lower or EM-upper approximate problem.

    ``side="lower"`` also returns the induced greedy policy, which re-solves
    the lower problem from whatever state it is asked to act in.
    """
    if side not in ("lower", "upper"):
        raise ValueError("side must be 'lower' or 'upper'")
    rule = "jensen" if side == "lower" else "em"
    w, zeta = standardized_rule(config.nu, config.truncation_m, rule)
    _check_bounded_size(config, len(zeta), s0.k)
    solver = _TreeSolver(problem, w, zeta, config.horizon + 1)
    value, _ = solver.solve(s0, d0)
    if side == "lower":
        return value, BoundedLowerPolicy(problem, config)
    return value, None


# ---------------------------------------------------------------------------
# Policies
# ---------------------------------------------------------------------------


class Policy:
    """Maps (team state, history, stage) to a constrained joint action.

    Adaptive policies consult the history; non-adaptive ones replay a path
    committed from the prior data alone.
    """

    adaptive = True

    def act(self, s: TeamState, d: PosteriorData, stage: int) -> ConstrainedJointAction:
        raise NotImplementedError

    def reset(self):
        """Called before a fresh rollout; stateful planners may warm-start."""


class BoundedLowerPolicy(Policy):
    """Greedy policy induced by the Jensen-lower problem, solved exhaustively
    from the current state each time it acts."""

    def __init__(self, problem: Problem, config: PlannerConfig):
        self.problem = problem
        self.config = config
        self._w, self._zeta = standardized_rule(config.nu, config.truncation_m, "jensen")
        self._cache = GramCache(problem.hyper)

    def act(self, s, d, stage):
        remaining = self.config.horizon - stage + 1
        if remaining < 1:
            raise ValueError("policy asked to act beyond its horizon")
        solver = _TreeSolver(self.problem, self._w, self._zeta, remaining, self._cache)
        _, q_list = solver.solve(s, d)
        if not q_list:
            raise DeadEnd("no legal action")
        best_a, best_q = q_list[0]
        for a, q in q_list[1:]:
            if q > best_q:
                best_a, best_q = a, q
        return best_a


class GreedyPolicy(Policy):
    """Repeatedly takes the reward-maximizing action (zero-lookahead)."""

    def __init__(self, problem: Problem):
        self.problem = problem

    def act(self, s, d, stage):
        return greedy_adaptive(self.problem, d, s)


class NonAdaptivePolicy(Policy):
    """Replays a pre-committed sequence of constrained actions."""

    adaptive = False

    def __init__(self, actions):
        self.actions = list(actions)

    def act(self, s, d, stage):
        if stage >= len(self.actions):
            raise DeadEnd("pre-committed path exhausted")
        return self.actions[stage]


def greedy_adaptive(problem: Problem, d: PosteriorData, s: TeamState) -> ConstrainedJointAction:
    """Reward-maximizing single action; ties go to canonical action order."""
    acts = constrained_actions(s, problem.domain)
    if not acts:
        raise DeadEnd("no legal action")
    best = None
    best_r = -math.inf
    for a in acts:
        r = stagewise_reward(problem, s, a, d)
        if r > best_r:
            best, best_r = a, r
    return best


# ---------------------------------------------------------------------------
# URTDP: anytime solver with lower/upper value tables
# ---------------------------------------------------------------------------


def _fast_state(s: TeamState):
    return [(p.cell, p.heading) for p in s.poses], set(s.visited), list(s.steps), s.budget


def _fast_moves(poses, visited, steps, budget, rows, cols):
    """(robot, move, cell, heading) tuples in canonical action order."""
    out = []
    for i, (cell, hd) in enumerate(poses):
        if budget is not None and steps[i] >= budget:
            continue
        r, c = cell
        for mv in MOVES:
            dr, dc, nh = MOVE_DELTA[(hd, mv)]
            r2, c2 = r + dr, c + dc
            if 0 <= r2 < rows and 0 <= c2 < cols and (r2, c2) not in visited:
                out.append((i, mv, (r2, c2), nh))
    return out


def _greedy_ce_rollout(problem, inc, s, steps_count, record=False):
    """Greedy certainty-equivalent rollout; mutates ``inc`` in place.

    Each step takes the reward-maximizing move and feeds the posterior mean
    back as the observation. Returns the total reward and (optionally) the
    visited cell sequence for replay.
    """
    rows, cols = problem.domain.rows, problem.domain.cols
    poses, visited, steps, budget = _fast_state(s)
    total = 0.0
    seq = [] if record else None
    for _ in range(steps_count):
        moves = _fast_moves(poses, visited, steps, budget, rows, cols)
        if not moves:
            break
        cells = [m[2] for m in moves]
        mus, variances = inc.batch(cells)
        rewards = 0.5 * (LOG_2PI_E + np.log(variances))
        if problem.is_lgp:
            rewards = rewards + mus
        b = int(np.argmax(rewards))
        i, _, cell, nh = moves[b]
        total += float(rewards[b])
        inc.extend(cell, float(mus[b]))
        poses[i] = (cell, nh)
        visited.add(cell)
        steps[i] += 1
        if record:
            seq.append(cell)
    return total, seq


def _fixed_ce_value(problem, inc, cells):
    """Certainty-equivalent value of a fixed cell sequence (affine in the
    history measurements)."""
    total = 0.0
    for cell in cells:
        mus, variances = inc.batch([cell])
        r = 0.5 * (LOG_2PI_E + math.log(variances[0]))
        if problem.is_lgp:
            r += float(mus[0])
        total += r
        inc.extend(cell, float(mus[0]))
    return total


def _greedy_rollout_value(problem, cache, d_locs, z, s, stage, horizon):
    """Total reward of a certainty-equivalent greedy rollout from (d, s).

    Outcomes are replaced by their posterior means (the truncated mean), so
    the result lower-bounds the Jensen-problem value at the state.
    """
    remaining = horizon - stage + 1
    if remaining <= 0:
        return 0.0
    inc = IncrementalPosterior(
        problem.hyper, d_locs, z, len(d_locs) + remaining, L=cache.chol(d_locs)
    )
    total, _ = _greedy_ce_rollout(problem, inc, s, remaining)
    return total


def init_bounds(
    problem: Problem,
    d: PosteriorData,
    s: TeamState,
    stage: int,
    config: PlannerConfig,
    cache: GramCache | None = None,
) -> ValueBounds:
    """Informed initial heuristic bounds for the remaining stages.

    Upper: per-stage reward can never exceed the max-variance entropy term
    plus (for log-GP) the largest mean reachable inside the truncated
    support. Lower: the reward actually collected by a greedy
    certainty-equivalent rollout.
    """
    if stage > config.horizon:
        return ValueBounds(0.0, 0.0)
    h = problem.hyper
    remaining = config.horizon - stage + 1
    stage_max = 0.5 * (LOG_2PI_E + math.log(h.prior_variance))
    if problem.is_lgp:
        stage_max += h.mean + config.truncation_m * math.sqrt(h.prior_variance)
    upper = remaining * stage_max
    cache = cache if cache is not None else GramCache(h)
    lower = _greedy_rollout_value(problem, cache, d.locations, d.z, s, stage, config.horizon)
    return ValueBounds(min(lower, upper), upper)


class _UrtdpInstance:
    """Trial-based bound tables for one bounded approximate problem.

    ``rule="jensen"`` solves the lower (Jensen) problem; ``rule="em"`` the
    upper (EM) problem. Within an instance the two table entries bracket that
    problem's exhaustive value at every touched state.
    """

    def __init__(self, problem, config, rule, rng, cache=None):
        self.problem = problem
        self.config = config
        self.rule = rule
        self.rng = rng
        self.cache = cache if cache is not None else GramCache(problem.hyper)
        self.w, self.zeta = standardized_rule(config.nu, config.truncation_m, rule)
        self.tables: dict[tuple, list[float]] = {}
        self.expansions: dict[tuple, tuple] = {}
        self.paths_run = 0
        self.on_backup = None  # test hook: called with (key, lower, upper)
        h = problem.hyper
        self._stage_max = 0.5 * (LOG_2PI_E + math.log(h.prior_variance))
        if problem.is_lgp:
            self._stage_max += h.mean + config.truncation_m * math.sqrt(h.prior_variance)

    # -- state bookkeeping --------------------------------------------------

    def ensure(self, key, d, s, stage):
        if key not in self.tables:
            vb = init_bounds(self.problem, d, s, stage, self.config, self.cache)
            self.tables[key] = [vb.lower, vb.upper]
        return self.tables[key]

    def expand(self, key, s, d, stage):
        """Per-action rewards and child states; children get initialized."""
        found = self.expansions.get(key)
        if found is not None:
            return found
        problem = self.problem
        acts = constrained_actions(s, problem.domain)
        entries = []
        last = stage == self.config.horizon
        if acts:
            inc = IncrementalPosterior(
                problem.hyper, d.locations, d.z, len(d.locations), L=self.cache.chol(d.locations)
            )
            cells = [action_target(s, a).cell for a in acts]
            mus, variances = inc.batch(cells)
            if np.any(variances <= 0):
                raise DegenerateCovariance("non-positive posterior variance")
            rewards = 0.5 * (LOG_2PI_E + np.log(variances))
            if problem.is_lgp:
                rewards = rewards + mus
        for i, a in enumerate(acts):
            x = cells[i]
            mu, var, reward = float(mus[i]), float(variances[i]), float(rewards[i])
            if last:
                entries.append((a, reward, None, None, None))
                continue
            s2 = transition(s, a, problem.domain)
            z_children = mu + math.sqrt(var) * self.zeta
            child_keys = []
            child_states = []
            for zj in z_children:
                d2 = d.extended(x, zj)
                child_keys.append(state_key(stage + 1, s2, d2))
                child_states.append((s2, d2))
            self._init_children(d, s2, x, mu, z_children, child_keys, stage)
            entries.append((a, reward, child_keys, child_states, z_children))
        exp = (stage, entries)
        self.expansions[key] = exp
        return exp

    def _init_children(self, d, s2, x, mu, z_children, child_keys, stage):
        """Seed bounds for the children of one (state, action) pair.

        All children share locations, so one greedy rollout (at the mean
        outcome) fixes a feasible continuation whose certainty-equivalent
        value is affine in the outcome; evaluating that affine map at each
        child point gives an admissible lower bound without per-child
        rollouts. The stagewise upper bound is outcome independent.
        """
        missing = [j for j, ck in enumerate(child_keys) if ck not in self.tables]
        if not missing:
            return
        problem = self.problem
        remaining = self.config.horizon - stage  # actions from stage + 1 on
        upper = remaining * self._stage_max
        locs2 = d.locations + (x,)
        L2 = self.cache.chol(locs2)
        cap = len(locs2) + remaining
        inc_ref = IncrementalPosterior(problem.hyper, locs2, np.append(d.z, mu), cap, L=L2)
        v_ref, seq = _greedy_ce_rollout(problem, inc_ref, s2, remaining, record=True)
        slope = 0.0
        if problem.is_lgp and seq and len(z_children) > 1:
            z_alt = float(z_children[0] if z_children[0] != mu else z_children[-1])
            inc_alt = IncrementalPosterior(
                problem.hyper, locs2, np.append(d.z, z_alt), cap, L=L2
            )
            v_alt = _fixed_ce_value(problem, inc_alt, seq)
            slope = (v_alt - v_ref) / (z_alt - mu)
        for j in missing:
            lower = v_ref + slope * (float(z_children[j]) - mu)
            self.tables[child_keys[j]] = [min(lower, upper), upper]

    # -- bound arithmetic ----------------------------------------------------

    def q_values(self, entries):
        """(action, q_lower, q_upper) per action from current child tables."""
        out = []
        for a, reward, child_keys, _, _ in entries:
            if child_keys is None:
                out.append((a, reward, reward))
                continue
            lo = hi = 0.0
            for wj, ck in zip(self.w, child_keys):
                b = self.tables[ck]
                lo += wj * b[0]
                hi += wj * b[1]
            out.append((a, reward + lo, reward + hi))
        return out

    def _backup(self, key, entries):
        qs = self.q_values(entries)
        lower = max(q for _, q, _ in qs)
        upper = max(q for _, _, q in qs)
        self.tables[key] = [lower, upper]
        if self.on_backup is not None:
            self.on_backup(key, lower, upper)

    # -- the simulated path --------------------------------------------------

    def simulated_path(self, d0: PosteriorData, s0: TeamState, stage0: int = 0):
        """One descent/backtrack trial; tightens bounds along the path."""
        s, d, stage = s0, d0, stage0
        trail = []
        while True:
            key = state_key(stage, s, d)
            self.ensure(key, d, s, stage)
            _, entries = self.expand(key, s, d, stage)
            if not entries:
                self.tables[key] = [0.0, 0.0]
                if self.on_backup is not None:
                    self.on_backup(key, 0.0, 0.0)
                break
            if stage == self.config.horizon:
                leaf = max(reward for _, reward, _, _, _ in entries)
                self.tables[key] = [leaf, leaf]
                if self.on_backup is not None:
                    self.on_backup(key, leaf, leaf)
                break
            qs = self.q_values(entries)
            best_i = 0
            for i in range(1, len(qs)):
                if qs[i][2] > qs[best_i][2]:
                    best_i = i
            _, reward, child_keys, child_states, _ = entries[best_i]
            gaps = np.array(
                [max(self.tables[ck][1] - self.tables[ck][0], 0.0) for ck in child_keys]
            )
            weights = self.w * gaps
            total = weights.sum()
            if total <= 0:
                probs = np.full(len(child_keys), 1.0 / len(child_keys))
            else:
                probs = weights / total
            j = int(self.rng.choice(len(child_keys), p=probs))
            trail.append((key, entries))
            s, d = child_states[j]
            stage += 1
        for key, entries in reversed(trail):
            self._backup(key, entries)
        self.paths_run += 1

    def run(self, d, s, stage, alpha, budget):
        """Run trials until the root gap closes or the path budget is spent.

        Returns True if the gap criterion was met.
        """
        root = state_key(stage, s, d)
        self.ensure(root, d, s, stage)
        start = self.paths_run
        while self.tables[root][1] - self.tables[root][0] > alpha:
            if self.paths_run - start >= budget:
                return False
            self.simulated_path(d, s, stage)
        return True

    def root_bounds(self, d, s, stage) -> ValueBounds:
        b = self.ensure(state_key(stage, s, d), d, s, stage)
        return ValueBounds(b[0], b[1])


def simulated_path(instance: _UrtdpInstance, d: PosteriorData, s: TeamState, stage: int = 0):
    """Run one simulated path on an URTDP instance (exposed for tests)."""
    instance.simulated_path(d, s, stage)
    return instance.tables


class UrtdpPolicy(Policy):
    """Greedy-on-lower-bound policy; replans anytime from the current state."""

    def __init__(self, instance: _UrtdpInstance, config: PlannerConfig):
        self.instance = instance
        self.config = config

    def act(self, s, d, stage):
        acts = constrained_actions(s, self.instance.problem.domain)
        if not acts:
            raise DeadEnd("no legal action")
        self.instance.run(d, s, stage, self.config.alpha, self.config.max_simulated_paths)
        key = state_key(stage, s, d)
        _, entries = self.instance.expand(key, s, d, stage)
        qs = self.instance.q_values(entries)
        best_i = 0
        for i in range(1, len(qs)):
            if qs[i][1] > qs[best_i][1]:
                best_i = i
        return qs[best_i][0]


@dataclass
class UrtdpResult:
    bounds: ValueBounds
    policy: UrtdpPolicy
    lower_paths: int
    upper_paths: int
    exhausted: bool


def urtdp(problem: Problem, d0: PosteriorData, s0: TeamState, config: PlannerConfig) -> UrtdpResult:
    """Anytime bracketing of the strictly adaptive value plus a policy.

    Two trial-based instances run side by side: one on the Jensen (lower)
    problem and one on the EM (upper) problem, each until its own root gap
    falls under ``alpha`` or it spends ``max_simulated_paths`` trials. The
    returned root bounds are the Jensen instance's lower bound and the EM
    instance's upper bound, which bracket the exhaustive lower/upper problem
    values (and hence the true optimum) at all times. The policy is greedy on
    the lower-problem bound tables.
    """
    ss = np.random.SeedSequence(config.seed)
    rng_low, rng_up = (np.random.default_rng(child) for child in ss.spawn(2))
    cache = GramCache(problem.hyper)
    low = _UrtdpInstance(problem, config, "jensen", rng_low, cache)
    up = _UrtdpInstance(problem, config, "em", rng_up, cache)
    ok_low = low.run(d0, s0, 0, config.alpha, config.max_simulated_paths)
    ok_up = up.run(d0, s0, 0, config.alpha, config.max_simulated_paths)
    bounds = ValueBounds(
        low.root_bounds(d0, s0, 0).lower, up.root_bounds(d0, s0, 0).upper
    )
    policy = UrtdpPolicy(low, config)
    return UrtdpResult(bounds, policy, low.paths_run, up.paths_run, not (ok_low and ok_up))


# ---------------------------------------------------------------------------
# Non-adaptive baselines
# ---------------------------------------------------------------------------


def _serialize_joint_stages(s0: TeamState, combos) -> list[ConstrainedJointAction]:
    """Flatten stagewise joint moves into one-robot-per-stage actions."""
    actions = []
    for combo in combos:
        for i, move in enumerate(combo):
            actions.append(ConstrainedJointAction(i, move))
    return actions


def _paths_from_joint(s0: TeamState, domain, combos):
    paths = [[p.cell] for p in s0.poses]
    s = s0
    for combo in combos:
        for i, move in enumerate(combo):
            paths[i].append(move_target(s.poses[i], move).cell)
        s = apply_joint_move(s, combo, domain)
    return paths


@dataclass
class MesResult:
    value: float
    paths: list
    policy: NonAdaptivePolicy
    exact: bool
    nodes: int


class _BudgetExhausted(Exception):
    pass


def mes_nonadaptive(
    problem: Problem,
    d0: PosteriorData,
    s0: TeamState,
    n: int,
    node_budget: int | None = None,
) -> MesResult:
    """Maximum entropy sampling: joint paths maximizing H of the selected cells.

    Depth-first branch and bound over stagewise joint moves in lexicographic
    order; the admissible bound adds the largest prior-posterior entropy
    terms of the cells a continuation could still pick up (conditioning on
    more data never increases variance). Exceeding ``node_budget`` falls back
    to the best complete path found so far (``exact=False``); exhausting the
    tree certifies optimality. Joint entropies use the GP (log-scale) model.
    """
    domain = problem.domain
    h = problem.hyper
    k = s0.k
    s0 = TeamState(s0.poses, s0.visited, s0.steps, n)
    jitter_var = 1e-10 * h.signal_variance if h.noise_variance == 0 else 0.0

    prior_cells = list(d0.locations)
    unvisited = [c for c in domain.cells() if c not in s0.visited]
    if unvisited:
        g = posterior(d0, unvisited, h)
        prior_gain = {
            c: 0.5 * (LOG_2PI_E + math.log(g.covariance[i, i] + jitter_var))
            for i, c in enumerate(unvisited)
        }
    else:
        prior_gain = {}
    gain_sorted = sorted(prior_gain.items(), key=lambda kv: -kv[1])

    # incremental Cholesky over prior + chosen cells
    m_max = len(prior_cells) + k * n
    factor = np.zeros((m_max, m_max))
    cells_stack: list = list(prior_cells)
    if prior_cells:
        gram = cov_matrix(prior_cells, prior_cells, h)
        gram[np.diag_indices_from(gram)] += jitter_var
        factor[: len(prior_cells), : len(prior_cells)] = _cholesky(gram, lower=True)

    def push(cell) -> float:
        m = len(cells_stack)
        b = cov_matrix([cell], cells_stack, h).ravel() if m else np.zeros(0)
        c = cov_matrix([cell], [cell], h)[0, 0] + jitter_var
        row = _solve_tri(factor[:m, :m], b, lower=True) if m else np.zeros(0)
        d2 = c - row @ row
        if d2 <= 0:
            raise DegenerateCovariance("path cell duplicates observed data")
        factor[m, :m] = row
        factor[m, m] = math.sqrt(d2)
        cells_stack.append(cell)
        return 0.5 * (LOG_2PI_E + math.log(d2))

    def pop(count):
        for _ in range(count):
            cells_stack.pop()

    def reset_stack():
        del cells_stack[len(prior_cells):]

    def optimistic_tail(depth, chosen):
        need = (n - depth) * k
        if need <= 0:
            return 0.0
        total = 0.0
        got = 0
        for c, gval in gain_sorted:
            if c in chosen:
                continue
            total += gval
            got += 1
            if got == need:
                break
        return total

    # greedy incumbent: stagewise joint move maximizing the immediate gain
    def greedy_combos():
        s = s0
        out = []
        try:
            for _ in range(n):
                combos = full_joint_actions(s, domain)
                if not combos:
                    return None
                best = None
                for combo in combos:
                    cells = [move_target(s.poses[i], mv).cell for i, mv in enumerate(combo)]
                    inc = sum(push(c) for c in cells)
                    pop(len(cells))
                    if best is None or inc > best[0]:
                        best = (inc, combo, cells)
                _, combo, cells = best
                for c in cells:
                    push(c)
                out.append(combo)
                s = apply_joint_move(s, combo, domain)
            return out
        finally:
            reset_stack()

    greedy_seq = greedy_combos()
    best_val = -math.inf
    best_seq = None
    if greedy_seq is not None:
        val = 0.0
        count = 0
        s = s0
        for combo in greedy_seq:
            for i, mv in enumerate(combo):
                val += push(move_target(s.poses[i], mv).cell)
                count += 1
            s = apply_joint_move(s, combo, domain)
        pop(count)
        best_val = val - 1e-12  # epsilon under: DFS re-finds the true incumbent
        best_seq = greedy_seq

    nodes = 0
    budget = math.inf if node_budget is None else node_budget
    chosen: set = set()

    def dfs(s, depth, val, seq):
        nonlocal nodes, best_val, best_seq
        if depth == n:
            if val > best_val:
                best_val = val
                best_seq = list(seq)
            return
        for combo in full_joint_actions(s, domain):
            nodes += 1
            if nodes > budget:
                raise _BudgetExhausted
            cells = [move_target(s.poses[i], mv).cell for i, mv in enumerate(combo)]
            inc = sum(push(c) for c in cells)
            chosen.update(cells)
            child_val = val + inc
            if child_val + optimistic_tail(depth + 1, chosen) > best_val:
                seq.append(combo)
                dfs(apply_joint_move(s, combo, domain), depth + 1, child_val, seq)
                seq.pop()
            chosen.difference_update(cells)
            pop(len(cells))

    exact = True
    try:
        dfs(s0, 0, 0.0, [])
    except _BudgetExhausted:
        exact = False
    finally:
        reset_stack()
    if best_seq is None:
        raise DeadEnd("no complete joint path of the requested length exists")

    # recompute the incumbent value cleanly (the stored one may carry -1e-12)
    val = 0.0
    count = 0
    s = s0
    for combo in best_seq:
        for i, mv in enumerate(combo):
            val += push(move_target(s.poses[i], mv).cell)
            count += 1
        s = apply_joint_move(s, combo, domain)
    pop(count)

    actions = _serialize_joint_stages(s0, best_seq)
    paths = _paths_from_joint(s0, domain, best_seq)
    return MesResult(val, paths, NonAdaptivePolicy(actions), exact, nodes)


@dataclass
class MiResult:
    paths: list
    policy: NonAdaptivePolicy
    scores: list


def mi_greedy(problem: Problem, d0: PosteriorData, s0: TeamState, n: int) -> MiResult:
    """Non-adaptive mutual-information greedy path construction.

    Each step appends the reachable cell maximizing the entropy of that cell
    given the data selected so far minus its entropy given all the remaining
    unobserved cells. Only prior-data covariances enter, never measurement
    values, so the paths commit before exploration.
    """
    domain = problem.domain
    h = problem.hyper
    jitter_var = 1e-10 * h.signal_variance if h.noise_variance == 0 else 0.0
    s = TeamState(s0.poses, s0.visited, s0.steps, n)
    base = list(d0.locations)
    unobs0 = [c for c in domain.cells() if c not in d0.observed_set()]

    def cond_var(target, conditioning):
        prior = cov_matrix([target], [target], h)[0, 0] + jitter_var
        if not conditioning:
            return prior
        gram = cov_matrix(conditioning, conditioning, h)
        gram[np.diag_indices_from(gram)] += jitter_var
        kvec = cov_matrix(conditioning, [target], h).ravel()
        half = _solve_tri(_cholesky(gram, lower=True), kvec, lower=True)
        return prior - half @ half

    selected: list = []
    actions = []
    scores = []
    total = s.k * n
    for _ in range(total):
        acts = constrained_actions(s, domain)
        if not acts:
            raise DeadEnd("mi_greedy path construction blocked")
        best = None
        for a in acts:
            y = action_target(s, a).cell
            var_sel = cond_var(y, base + selected)
            rest = [c for c in unobs0 if c != y and c not in selected]
            var_rest = cond_var(y, base + rest)
            score = 0.5 * (math.log(var_sel) - math.log(var_rest))
            if best is None or score > best[0]:
                best = (score, a, y)
        score, a, y = best
        selected.append(y)
        actions.append(a)
        scores.append(score)
        s = transition(s, a, domain)
    paths = [[p.cell] for p in s0.poses]
    replay = TeamState(s0.poses, s0.visited, s0.steps, n)
    for a in actions:
        paths[a.robot_index].append(action_target(replay, a).cell)
        replay = transition(replay, a, domain)
    return MiResult(paths, NonAdaptivePolicy(actions), scores)
