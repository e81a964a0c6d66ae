"""Grid world: domain, robot poses, action spaces, deterministic transitions.

Cells are ``(row, col)`` integer pairs. A robot has a heading and may move to
the cell in front of it or to its left or right; the heading after a move is
the direction of travel. Moves onto cells that were already observed are
illegal, so every path is self-avoiding. With ``k`` robots the constrained
action set lets exactly one robot move per stage, keeping its size at most
``3k``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .errors import IllegalAction

Cell = tuple[int, int]

HEADINGS = ("N", "E", "S", "W")
MOVES = ("front", "left", "right")

# heading -> unit step (drow, dcol)
_STEP = {"N": (-1, 0), "E": (0, 1), "S": (1, 0), "W": (0, -1)}
# heading after turning left / right
_LEFT = {"N": "W", "W": "S", "S": "E", "E": "N"}
_RIGHT = {"N": "E", "E": "S", "S": "W", "W": "N"}

# (heading, move) -> (drow, dcol, new heading); planner hot loops index this
# directly instead of building pose objects
MOVE_DELTA = {}
for _h in HEADINGS:
    for _m in MOVES:
        _nh = _h if _m == "front" else (_LEFT[_h] if _m == "left" else _RIGHT[_h])
        _dr, _dc = _STEP[_nh]
        MOVE_DELTA[(_h, _m)] = (_dr, _dc, _nh)
del _h, _m, _nh, _dr, _dc


@dataclass(frozen=True)
class GridDomain:
    rows: int
    cols: int

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid dimensions must be positive")

    @property
    def size(self) -> int:
        return self.rows * self.cols

    def contains(self, cell: Cell) -> bool:
        r, c = cell
        return 0 <= r < self.rows and 0 <= c < self.cols

    def cells(self) -> list[Cell]:
        """All cells in row-major order."""
        return [(r, c) for r in range(self.rows) for c in range(self.cols)]


@dataclass(frozen=True)
class RobotPose:
    cell: Cell
    heading: str

    def __post_init__(self):
        if self.heading not in HEADINGS:
            raise ValueError(f"unknown heading {self.heading!r}")


@dataclass(frozen=True)
class ConstrainedJointAction:
    """One robot moves front/left/right; the rest stay put."""

    robot_index: int
    move: str

    def __post_init__(self):
        if self.move not in MOVES:
            raise ValueError(f"unknown move {self.move!r}")


@dataclass(frozen=True)
class TeamState:
    """Poses of all robots plus the set of cells observed so far.

    ``steps`` counts new cells each robot has taken; a robot whose count has
    reached ``budget`` may no longer move (per-robot path-length constraint).
    """

    poses: tuple[RobotPose, ...]
    visited: frozenset[Cell]
    steps: tuple[int, ...] = field(default=())
    budget: int | None = None

    def __post_init__(self):
        if len(self.poses) < 1:
            raise ValueError("need at least one robot")
        if not self.steps:
            object.__setattr__(self, "steps", (0,) * len(self.poses))
        if len(self.steps) != len(self.poses):
            raise ValueError("steps length must match pose count")
        for p in self.poses:
            if p.cell not in self.visited:
                raise ValueError("every robot pose must be an observed cell")

    @property
    def k(self) -> int:
        return len(self.poses)


def move_target(pose: RobotPose, move: str) -> RobotPose:
    """Pose after a front/left/right move, ignoring legality."""
    if move == "front":
        heading = pose.heading
    elif move == "left":
        heading = _LEFT[pose.heading]
    else:
        heading = _RIGHT[pose.heading]
    dr, dc = _STEP[heading]
    return RobotPose((pose.cell[0] + dr, pose.cell[1] + dc), heading)


def constrained_actions(s: TeamState, domain: GridDomain) -> list[ConstrainedJointAction]:
    """Legal one-robot moves, ordered by (robot_index, front<left<right)."""
    out = []
    for i, pose in enumerate(s.poses):
        if s.budget is not None and s.steps[i] >= s.budget:
            continue
        for move in MOVES:
            nxt = move_target(pose, move)
            if domain.contains(nxt.cell) and nxt.cell not in s.visited:
                out.append(ConstrainedJointAction(i, move))
    return out


def action_target(s: TeamState, a: ConstrainedJointAction) -> RobotPose:
    return move_target(s.poses[a.robot_index], a.move)


def transition(s: TeamState, a: ConstrainedJointAction, domain: GridDomain) -> TeamState:
    """Apply a constrained joint action; the new cell becomes observed."""
    if not (0 <= a.robot_index < s.k):
        raise IllegalAction(f"robot index {a.robot_index} out of range")
    if s.budget is not None and s.steps[a.robot_index] >= s.budget:
        raise IllegalAction("robot has exhausted its path budget")
    nxt = move_target(s.poses[a.robot_index], a.move)
    if not domain.contains(nxt.cell):
        raise IllegalAction(f"move leaves the grid: {nxt.cell}")
    if nxt.cell in s.visited:
        raise IllegalAction(f"cell already observed: {nxt.cell}")
    poses = list(s.poses)
    poses[a.robot_index] = nxt
    steps = list(s.steps)
    steps[a.robot_index] += 1
    return TeamState(tuple(poses), s.visited | {nxt.cell}, tuple(steps), s.budget)


def full_joint_actions(s: TeamState, domain: GridDomain) -> list[tuple[str, ...]]:
    """Simultaneous joint moves: one front/left/right move per robot.

    Returns tuples of per-robot move names; combinations sending two robots
    into the same cell are excluded.
    """
    per_robot: list[list[str]] = []
    for i, pose in enumerate(s.poses):
        if s.budget is not None and s.steps[i] >= s.budget:
            return []
        legal = []
        for move in MOVES:
            nxt = move_target(pose, move)
            if domain.contains(nxt.cell) and nxt.cell not in s.visited:
                legal.append(move)
        if not legal:
            return []
        per_robot.append(legal)
    out = []
    for combo in itertools.product(*per_robot):
        cells = [move_target(s.poses[i], m).cell for i, m in enumerate(combo)]
        if len(set(cells)) == len(cells):
            out.append(combo)
    return out


def apply_joint_move(s: TeamState, combo: tuple[str, ...], domain: GridDomain) -> TeamState:
    """Apply a full joint move (every robot moves once)."""
    poses = []
    cells = []
    for i, move in enumerate(combo):
        nxt = move_target(s.poses[i], move)
        if not domain.contains(nxt.cell) or nxt.cell in s.visited:
            raise IllegalAction(f"robot {i} move {move} illegal")
        poses.append(nxt)
        cells.append(nxt.cell)
    if len(set(cells)) != len(cells):
        raise IllegalAction("two robots entering one cell")
    steps = tuple(c + 1 for c in s.steps)
    if s.budget is not None and any(c > s.budget for c in steps):
        raise IllegalAction("path budget exceeded")
    return TeamState(tuple(poses), s.visited | set(cells), steps, s.budget)


def interior_heading(cell: Cell, domain: GridDomain) -> str:
    """Heading pointing toward the grid interior (row axis on ties)."""
    r, c = cell
    dr = (domain.rows - 1) / 2 - r
    dc = (domain.cols - 1) / 2 - c
    if abs(dr) >= abs(dc):
        return "S" if dr >= 0 else "N"
    return "E" if dc >= 0 else "W"
