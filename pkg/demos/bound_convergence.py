"""Jensen / Edmundson-Madansky bounds tightening around the adaptive value.

The strictly adaptive exploration value involves nested expectations over
continuous measurements. Replacing each expectation with the generalized
Jensen rule (interval conditional means) under-estimates it; the EM rule
(interval endpoints, lever-rule weights) over-estimates it. Refining the
partition monotonically tightens both sides around the exact value.

Run:  python3 demos/bound_convergence.py
"""

from hotspotplan import (
    GridDomain,
    Hyperparams,
    PlannerConfig,
    PosteriorData,
    Problem,
    RobotPose,
    TeamState,
    bounded_dp,
    exact_dp,
)

domain = GridDomain(4, 4)
h = Hyperparams(mean=0.3, signal_variance=1.0, length_scale=1.5, noise_variance=0.01)
problem = Problem(domain, h, "lgp")

d0 = PosteriorData([(1, 2), (3, 0), (0, 0)], [0.9, -0.2, 0.4])
s0 = TeamState((RobotPose((0, 0), "S"),), frozenset(d0.locations))

exact = exact_dp(problem, d0, s0, PlannerConfig(horizon=3))
print(f"exact strictly adaptive value (quadrature oracle): {exact:.6f}\n")
print(f"{'nu':>4} {'lower (Jensen)':>16} {'upper (EM)':>16} {'gap':>10}")
for nu in (1, 2, 4, 8, 16):
    cfg = PlannerConfig(horizon=3, nu=nu)
    lower, _ = bounded_dp(problem, d0, s0, cfg, "lower")
    upper, _ = bounded_dp(problem, d0, s0, cfg, "upper")
    print(f"{nu:>4} {lower:>16.6f} {upper:>16.6f} {upper - lower:>10.6f}")

print(
    "\nEach doubling of the partition tightens both sides; the exact value"
    "\nstays inside every bracket. The gap certifies the policy's regret."
)
