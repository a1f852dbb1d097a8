"""Two-chef cooperative kitchen gridworld.

Chefs fetch onions, fill pots (3 onions per soup), wait for the cook timer,
pick the soup up with a dish and deliver it at a serving counter for a +20
team reward. States are immutable values and ``step`` is a pure transition,
so episodes replay bit-exactly from logged actions.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

# Cell kinds (grid legend)
WALL = "X"
FLOOR = " "
ONION_SOURCE = "O"
DISH_SOURCE = "D"
POT = "P"
SERVING = "S"
COUNTER = "C"
SPAWN_CHARS = ("1", "2")
CELL_KINDS = (WALL, FLOOR, ONION_SOURCE, DISH_SOURCE, POT, SERVING, COUNTER)

# Actions
UP, DOWN, LEFT, RIGHT, STAY, INTERACT = range(6)
N_ACTIONS = 6
ACTION_NAMES = ("up", "down", "left", "right", "stay", "interact")
MOVE_ACTIONS = (UP, DOWN, LEFT, RIGHT)

# Orientations (grid deltas are row, col with row growing downward)
NORTH, SOUTH, EAST, WEST = range(4)
ORIENT_NAMES = ("N", "S", "E", "W")
ORIENT_DELTA = {NORTH: (-1, 0), SOUTH: (1, 0), EAST: (0, 1), WEST: (0, -1)}
ACTION_ORIENT = {UP: NORTH, DOWN: SOUTH, LEFT: WEST, RIGHT: EAST}

# Held items
NOTHING, ONION, DISH, SOUP = "nothing", "onion", "dish", "soup"
ITEMS = (NOTHING, ONION, DISH, SOUP)

POT_CAPACITY = 3


class LayoutError(ValueError):
    """Raised when a layout file fails to parse or validate."""


class EpisodeOver(RuntimeError):
    """Raised when stepping a state whose tick already reached the horizon."""


@dataclass(frozen=True)
class Layout:
    name: str
    grid: tuple[str, ...]  # rows of cell characters, spawns replaced by floor
    spawn_points: tuple[tuple[int, int], tuple[int, int]]
    cook_time: int = 20
    horizon: int = 400

    @property
    def height(self) -> int:
        return len(self.grid)

    @property
    def width(self) -> int:
        return len(self.grid[0])

    def cell(self, pos: tuple[int, int]) -> str:
        r, c = pos
        # out-of-grid lookups act like walls so adjacency scans of boundary
        # cells need no special casing (negative indices must not wrap)
        if 0 <= r < self.height and 0 <= c < self.width:
            return self.grid[r][c]
        return WALL

    def cells_of(self, kind: str) -> tuple[tuple[int, int], ...]:
        return tuple(
            (r, c)
            for r, row in enumerate(self.grid)
            for c, ch in enumerate(row)
            if ch == kind
        )

    @property
    def pot_cells(self) -> tuple[tuple[int, int], ...]:
        return self.cells_of(POT)

    @property
    def counter_cells(self) -> tuple[tuple[int, int], ...]:
        return self.cells_of(COUNTER)

    @property
    def floor_cells(self) -> tuple[tuple[int, int], ...]:
        return self.cells_of(FLOOR)


@dataclass(frozen=True)
class RewardConfig:
    delivery_reward: float = 20.0
    onion_shaping: float = 3.0
    partner_delivery_penalty: float = -20.0
    shaping_enabled: bool = True


@dataclass(frozen=True)
class WorldState:
    """Complete simulation state. Pots hold (onion_count, ticks_remaining);
    the timer is None until the pot is full and 0 once the soup is ready."""

    positions: tuple[tuple[int, int], tuple[int, int]]
    orientations: tuple[int, int]
    held: tuple[str, str]
    pots: tuple[tuple[int, int | None], ...]
    counters: tuple[str | None, ...]
    tick: int = 0


@dataclass(frozen=True)
class Event:
    kind: str
    chef: int | None = None


def parse_layout(text: str) -> Layout:
    """Parse a layout file: ``key: value`` header, blank line, ASCII grid."""
    lines = text.split("\n")
    header: dict[str, str] = {}
    idx = 0
    for idx, line in enumerate(lines):
        if not line.strip():
            break
        if ":" not in line:
            raise LayoutError(f"line {idx + 1}: expected 'key: value', got {line!r}")
        key, value = line.split(":", 1)
        header[key.strip()] = value.strip()

    grid_lines = [ln for ln in lines[idx + 1 :] if ln.strip("\n")]
    while grid_lines and not grid_lines[-1].strip():
        grid_lines.pop()
    if not grid_lines:
        raise LayoutError("missing grid")

    if "name" not in header:
        raise LayoutError("line 1: missing 'name' header")
    name = header["name"]
    cook_time = int(header.get("cook_time", 20))
    horizon = int(header.get("horizon", 400))
    if cook_time <= 0 or horizon <= 0:
        raise LayoutError("cook_time and horizon must be positive")

    width = len(grid_lines[0])
    spawns: dict[str, tuple[int, int]] = {}
    rows: list[str] = []
    for r, raw in enumerate(grid_lines):
        if len(raw) != width:
            raise LayoutError(f"grid line {r + 1}: ragged row (len {len(raw)} != {width})")
        row = []
        for c, ch in enumerate(raw):
            if ch in SPAWN_CHARS:
                if ch in spawns:
                    raise LayoutError(f"grid line {r + 1}, column {c + 1}: duplicate spawn {ch!r}")
                spawns[ch] = (r, c)
                row.append(FLOOR)
            elif ch in CELL_KINDS:
                row.append(ch)
            else:
                raise LayoutError(f"grid line {r + 1}, column {c + 1}: unknown cell {ch!r}")
        rows.append("".join(row))

    if set(spawns) != set(SPAWN_CHARS):
        raise LayoutError(f"expected spawn markers 1 and 2, found {sorted(spawns)}")

    layout = Layout(
        name=name,
        grid=tuple(rows),
        spawn_points=(spawns["1"], spawns["2"]),
        cook_time=cook_time,
        horizon=horizon,
    )
    _validate(layout)
    return layout


def _validate(layout: Layout) -> None:
    for kind, label in (
        (POT, "pot"),
        (ONION_SOURCE, "onion dispenser"),
        (DISH_SOURCE, "dish dispenser"),
        (SERVING, "serving counter"),
    ):
        if not layout.cells_of(kind):
            raise LayoutError(f"missing {label}")
    h, w = layout.height, layout.width
    for r, row in enumerate(layout.grid):
        for c, ch in enumerate(row):
            on_edge = r in (0, h - 1) or c in (0, w - 1)
            if on_edge and ch == FLOOR:
                raise LayoutError(f"grid line {r + 1}, column {c + 1}: boundary must not be floor")
    for pos in layout.spawn_points:
        if layout.cell(pos) != FLOOR:
            raise LayoutError(f"spawn at {pos} is not a floor cell")
    if layout.spawn_points[0] == layout.spawn_points[1]:
        raise LayoutError("spawn points coincide")


def load_layout_file(path: str | Path) -> Layout:
    return parse_layout(Path(path).read_text())


def bundled_layout_names() -> list[str]:
    files = resources.files("pasd").joinpath("layouts")
    return sorted(p.name[: -len(".layout")] for p in files.iterdir() if p.name.endswith(".layout"))


def load_layout(name: str) -> Layout:
    """Load a bundled layout by name, or parse a layout file path."""
    candidate = resources.files("pasd").joinpath("layouts").joinpath(f"{name}.layout")
    if candidate.is_file():
        return parse_layout(candidate.read_text())
    path = Path(name)
    if path.is_file():
        return load_layout_file(path)
    raise LayoutError(f"unknown layout {name!r} (bundled: {', '.join(bundled_layout_names())})")


def reset(layout: Layout, seed: int = 0, swap_start: bool = False) -> WorldState:
    """Initial state: chefs on their spawn points, empty hands, empty pots.

    The transition dynamics are deterministic, so the seed does not alter the
    initial state; it is accepted for interface uniformity with the samplers.
    """
    del seed
    spawn = layout.spawn_points
    positions = (spawn[1], spawn[0]) if swap_start else (spawn[0], spawn[1])
    return WorldState(
        positions=positions,
        orientations=(SOUTH, SOUTH),
        held=(NOTHING, NOTHING),
        pots=tuple((0, None) for _ in layout.pot_cells),
        counters=tuple(None for _ in layout.counter_cells),
        tick=0,
    )


def _facing(layout: Layout, pos: tuple[int, int], orient: int) -> tuple[int, int] | None:
    dr, dc = ORIENT_DELTA[orient]
    r, c = pos[0] + dr, pos[1] + dc
    if 0 <= r < layout.height and 0 <= c < layout.width:
        return (r, c)
    return None


def step(
    layout: Layout,
    state: WorldState,
    actions: tuple[int, int],
    cfg: RewardConfig = RewardConfig(),
) -> tuple[WorldState, float, tuple[float, float], list[Event]]:
    """Advance one tick.

    Returns (next state, team reward, per-chef shaped rewards, events).
    Moves blocked by non-floor cells or the other chef only rotate the
    mover; contested targets (both chefs moving at, or interacting with,
    the same cell) block both.
    """
    if state.tick >= layout.horizon:
        raise EpisodeOver(f"episode over: tick {state.tick} >= horizon {layout.horizon}")
    for a in actions:
        if a not in range(N_ACTIONS):
            raise ValueError(f"invalid action {a}")

    positions = list(state.positions)
    orientations = list(state.orientations)
    held = list(state.held)
    pots = [list(p) for p in state.pots]
    counters = list(state.counters)
    events: list[Event] = []
    team_reward = 0.0
    shaped = [0.0, 0.0]

    # Cooking progresses before anyone acts, so a pot filled at tick t is
    # ready for pickup exactly cook_time ticks later.
    for i, (count, timer) in enumerate(pots):
        if timer is not None and timer > 0:
            pots[i][1] = timer - 1
            if pots[i][1] == 0:
                events.append(Event("soup_ready", None))

    # Movement: proposals first, then simultaneous conflict resolution.
    proposals = []
    for i, action in enumerate(actions):
        if action in MOVE_ACTIONS:
            orientations[i] = ACTION_ORIENT[action]
            dr, dc = ORIENT_DELTA[orientations[i]]
            target = (positions[i][0] + dr, positions[i][1] + dc)
            blocked = (
                layout.cell(target) != FLOOR
                or target == state.positions[1 - i]
            )
            proposals.append(positions[i] if blocked else target)
        else:
            proposals.append(positions[i])
    if proposals[0] == proposals[1]:
        proposals = positions  # contested cell: both stay put
    positions = proposals

    # Interactions, resolved against post-movement poses. A chef that
    # interacts did not move, so its facing cell is unambiguous.
    targets = [
        _facing(layout, positions[i], orientations[i]) if actions[i] == INTERACT else None
        for i in range(2)
    ]
    if targets[0] is not None and targets[0] == targets[1]:
        targets = [None, None]  # contested interact: both fail

    for i in range(2):
        target = targets[i]
        if target is None:
            continue
        kind = layout.cell(target)
        if kind == ONION_SOURCE and held[i] == NOTHING:
            held[i] = ONION
            events.append(Event("onion_pickup", i))
        elif kind == DISH_SOURCE and held[i] == NOTHING:
            held[i] = DISH
            events.append(Event("dish_pickup", i))
        elif kind == POT:
            pot_idx = layout.pot_cells.index(target)
            count, timer = pots[pot_idx]
            if held[i] == ONION and count < POT_CAPACITY:
                pots[pot_idx][0] = count + 1
                held[i] = NOTHING
                events.append(Event("onion_placed", i))
                if pots[pot_idx][0] == POT_CAPACITY:
                    pots[pot_idx][1] = layout.cook_time
                    events.append(Event("cooking_started", i))
            elif held[i] == DISH and count == POT_CAPACITY and timer == 0:
                held[i] = SOUP
                pots[pot_idx] = [0, None]
                events.append(Event("soup_pickup", i))
        elif kind == SERVING and held[i] == SOUP:
            held[i] = NOTHING
            team_reward += cfg.delivery_reward
            events.append(Event("delivery", i))
        elif kind == COUNTER:
            counter_idx = layout.counter_cells.index(target)
            if held[i] != NOTHING and counters[counter_idx] is None:
                counters[counter_idx] = held[i]
                held[i] = NOTHING
                events.append(Event("counter_put", i))
            elif held[i] == NOTHING and counters[counter_idx] is not None:
                held[i] = counters[counter_idx]
                counters[counter_idx] = None
                events.append(Event("counter_take", i))

    if cfg.shaping_enabled:
        for ev in events:
            if ev.kind == "onion_placed":
                shaped[ev.chef] += cfg.onion_shaping
            elif ev.kind == "delivery":
                shaped[1 - ev.chef] += cfg.partner_delivery_penalty

    next_state = WorldState(
        positions=(positions[0], positions[1]),
        orientations=(orientations[0], orientations[1]),
        held=(held[0], held[1]),
        pots=tuple((c, t) for c, t in pots),
        counters=tuple(counters),
        tick=state.tick + 1,
    )
    return next_state, team_reward, (shaped[0], shaped[1]), events


def obs_dim(layout: Layout) -> int:
    hw = layout.height * layout.width
    return 2 * hw + 2 * 4 + 2 * 4 + 2 * len(layout.pot_cells) + 3 * len(layout.counter_cells) + 1


def observe(layout: Layout, state: WorldState, viewer: int) -> np.ndarray:
    """Viewer-egocentric flat feature vector; length depends only on layout."""
    hw = layout.height * layout.width
    parts: list[np.ndarray] = []
    order = (viewer, 1 - viewer)
    for who in order:
        pos = np.zeros(hw)
        r, c = state.positions[who]
        pos[r * layout.width + c] = 1.0
        orient = np.zeros(4)
        orient[state.orientations[who]] = 1.0
        parts.extend((pos, orient))
    for who in order:
        held = np.zeros(4)
        held[ITEMS.index(state.held[who])] = 1.0
        parts.append(held)
    pot_feats = np.zeros(2 * len(layout.pot_cells))
    for i, (count, timer) in enumerate(state.pots):
        pot_feats[2 * i] = count / POT_CAPACITY
        pot_feats[2 * i + 1] = 0.0 if timer is None else timer / layout.cook_time
    parts.append(pot_feats)
    counter_feats = np.zeros(3 * len(layout.counter_cells))
    for i, item in enumerate(state.counters):
        if item is not None:
            counter_feats[3 * i + (ONION, DISH, SOUP).index(item)] = 1.0
    parts.append(counter_feats)
    parts.append(np.array([state.tick / layout.horizon]))
    return np.concatenate(parts)


def state_to_dict(state: WorldState) -> dict:
    return {
        "positions": [list(p) for p in state.positions],
        "orientations": list(state.orientations),
        "held": list(state.held),
        "pots": [[c, t] for c, t in state.pots],
        "counters": list(state.counters),
        "tick": state.tick,
    }


def state_from_dict(data: dict) -> WorldState:
    return WorldState(
        positions=tuple(tuple(p) for p in data["positions"]),
        orientations=tuple(data["orientations"]),
        held=tuple(data["held"]),
        pots=tuple((c, t) for c, t in data["pots"]),
        counters=tuple(data["counters"]),
        tick=data["tick"],
    )


def render_text(layout: Layout, state: WorldState) -> str:
    """ASCII snapshot for demos and debugging."""
    rows = [list(row) for row in layout.grid]
    for i, (r, c) in enumerate(state.positions):
        rows[r][c] = str(i)
    body = "\n".join("".join(row) for row in rows)
    held = ", ".join(f"chef{i}:{state.held[i]}" for i in range(2))
    pots = ", ".join(f"pot{i}=({c},{t})" for i, (c, t) in enumerate(state.pots))
    return f"{body}\ntick={state.tick} {held} {pots}"
