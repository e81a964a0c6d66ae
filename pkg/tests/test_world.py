import itertools

import numpy as np
import pytest

from hotspotplan.errors import IllegalAction
from hotspotplan.world import (
    GridDomain,
    RobotPose,
    TeamState,
    ConstrainedJointAction,
    apply_joint_move,
    constrained_actions,
    full_joint_actions,
    interior_heading,
    move_target,
    transition,
)


def state(poses, visited=None, budget=None):
    cells = {p.cell for p in poses}
    visited = cells if visited is None else set(visited) | cells
    return TeamState(tuple(poses), frozenset(visited), budget=budget)


def test_front_move_keeps_heading():
    p = RobotPose((2, 2), "N")
    q = move_target(p, "front")
    assert q.cell == (1, 2) and q.heading == "N"


def test_left_from_north_goes_west():
    q = move_target(RobotPose((2, 2), "N"), "left")
    assert q.cell == (2, 1) and q.heading == "W"


def test_right_from_south_goes_west():
    q = move_target(RobotPose((2, 2), "S"), "right")
    assert q.cell == (2, 1) and q.heading == "W"


def test_four_lefts_return_heading_tracing_distinct_cells():
    p = RobotPose((2, 2), "N")
    seen = []
    for _ in range(4):
        p = move_target(p, "left")
        seen.append(p.cell)
    assert p.heading == "N"
    assert p.cell == (2, 2)  # a 2x2 loop comes back home
    assert len(set(seen[:3])) == 3 and (2, 2) not in seen[:3]


def test_center_robot_has_three_actions():
    s = state([RobotPose((1, 1), "N")])
    acts = constrained_actions(s, GridDomain(3, 3))
    assert len(acts) == 3
    assert [a.move for a in acts] == ["front", "left", "right"]


def test_blocked_corner_has_no_actions():
    s = state([RobotPose((0, 0), "N")], visited={(0, 0), (0, 1)})
    assert constrained_actions(s, GridDomain(3, 3)) == []


def test_two_robots_disjoint_neighborhoods_give_six_actions():
    dom = GridDomain(7, 7)
    s = state([RobotPose((1, 1), "S"), RobotPose((5, 5), "N")])
    acts = constrained_actions(s, dom)
    # oracle: direct enumeration over robots and moves
    expected = []
    for i, pose in enumerate(s.poses):
        for move in ("front", "left", "right"):
            nxt = move_target(pose, move)
            if dom.contains(nxt.cell) and nxt.cell not in s.visited:
                expected.append((i, move))
    assert [(a.robot_index, a.move) for a in acts] == expected
    assert len(acts) == 6


def test_action_count_linear_in_team_size():
    rng = np.random.default_rng(3)
    dom = GridDomain(6, 6)
    for _ in range(50):
        k = int(rng.integers(1, 4))
        cells = [tuple(c) for c in rng.integers(0, 6, size=(k, 2))]
        if len(set(cells)) < k:
            continue
        poses = [RobotPose(c, "NESW"[rng.integers(4)]) for c in cells]
        extra = {tuple(c) for c in rng.integers(0, 6, size=(5, 2))}
        s = state(poses, visited=extra)
        assert len(constrained_actions(s, dom)) <= 3 * k


def test_transition_moves_one_robot_and_grows_visited():
    dom = GridDomain(4, 4)
    s = state([RobotPose((1, 1), "E"), RobotPose((3, 3), "N")])
    a = constrained_actions(s, dom)[0]
    s2 = transition(s, a, dom)
    assert len(s2.visited) == len(s.visited) + 1
    changed = [i for i in range(2) if s2.poses[i] != s.poses[i]]
    assert changed == [a.robot_index]
    assert s2.poses[a.robot_index].cell in s2.visited
    assert dom.contains(s2.poses[a.robot_index].cell)


def test_transition_rejects_illegal_moves():
    dom = GridDomain(3, 3)
    s = state([RobotPose((0, 0), "N")])
    with pytest.raises(IllegalAction):
        transition(s, ConstrainedJointAction(0, "front"), dom)  # leaves grid
    s2 = state([RobotPose((1, 1), "N")], visited={(0, 1)})
    with pytest.raises(IllegalAction):
        transition(s2, ConstrainedJointAction(0, "front"), dom)  # revisit


def test_budget_blocks_exhausted_robot():
    dom = GridDomain(4, 4)
    s = TeamState(
        (RobotPose((1, 1), "S"), RobotPose((3, 3), "N")),
        frozenset({(1, 1), (3, 3)}),
        steps=(1, 0),
        budget=1,
    )
    acts = constrained_actions(s, dom)
    assert all(a.robot_index == 1 for a in acts)
    with pytest.raises(IllegalAction):
        transition(s, ConstrainedJointAction(0, "front"), dom)


def test_random_walk_never_revisits():
    rng = np.random.default_rng(11)
    dom = GridDomain(5, 5)
    s = state([RobotPose((2, 2), "N")])
    for _ in range(20):
        acts = constrained_actions(s, dom)
        if not acts:
            break
        before = set(s.visited)
        s = transition(s, acts[rng.integers(len(acts))], dom)
        new = set(s.visited) - before
        assert len(new) == 1 and next(iter(new)) not in before


def test_full_joint_single_robot_matches_constrained():
    dom = GridDomain(3, 3)
    s = state([RobotPose((1, 1), "N")])
    joint = full_joint_actions(s, dom)
    cons = constrained_actions(s, dom)
    assert [c[0] for c in joint] == [a.move for a in cons]


def test_full_joint_two_robots_disjoint_gives_nine():
    dom = GridDomain(7, 7)
    s = state([RobotPose((1, 1), "S"), RobotPose((5, 5), "N")])
    joint = full_joint_actions(s, dom)
    # oracle: product of per-robot legal moves, no shared targets here
    per = []
    for pose in s.poses:
        legal = [
            m
            for m in ("front", "left", "right")
            if dom.contains(move_target(pose, m).cell)
            and move_target(pose, m).cell not in s.visited
        ]
        per.append(legal)
    assert joint == [c for c in itertools.product(*per)]
    assert len(joint) == 9


def test_full_joint_excludes_collisions():
    dom = GridDomain(3, 3)
    # both robots can reach (1, 1); that combination must be excluded
    s = state([RobotPose((0, 1), "S"), RobotPose((2, 1), "N")], visited={(0, 0), (0, 2), (2, 0), (2, 2)})
    joint = full_joint_actions(s, dom)
    cells = [
        tuple(move_target(s.poses[i], m).cell for i, m in enumerate(combo))
        for combo in joint
    ]
    assert all(len(set(cs)) == 2 for cs in cells)
    # oracle: filtered product
    per = []
    for pose in s.poses:
        legal = [
            m
            for m in ("front", "left", "right")
            if dom.contains(move_target(pose, m).cell)
            and move_target(pose, m).cell not in s.visited
        ]
        per.append(legal)
    expected = [
        combo
        for combo in itertools.product(*per)
        if len({move_target(s.poses[i], m).cell for i, m in enumerate(combo)}) == 2
    ]
    assert joint == expected


def test_apply_joint_move_moves_everyone():
    dom = GridDomain(5, 5)
    s = state([RobotPose((1, 1), "S"), RobotPose((3, 3), "N")])
    combo = full_joint_actions(s, dom)[0]
    s2 = apply_joint_move(s, combo, dom)
    assert len(s2.visited) == len(s.visited) + 2
    assert s2.steps == (1, 1)


def test_interior_heading_points_inward():
    dom = GridDomain(5, 5)
    assert interior_heading((0, 2), dom) == "S"
    assert interior_heading((4, 2), dom) == "N"
    assert interior_heading((2, 0), dom) == "E"
    assert interior_heading((2, 4), dom) == "W"
