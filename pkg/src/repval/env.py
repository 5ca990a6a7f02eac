"""Seeded grid-world battle simulator with two armies.

Two teams of homogeneous agents fight on a rectangular grid.  Each agent
has 17 discrete actions: stay, move to one of the 8 neighbouring cells, or
attack one of the 8 neighbouring cells.  Combat is simultaneous; movement
is sequential in a seeded random order so conflicts resolve reproducibly.

Reward constants (per agent, per step):
  * -0.005 for every move attempt (blocked moves still pay),
  * +0.2  for an attack that lands on a cell holding a living enemy,
  * +5    for killing an enemy (split equally among simultaneous killers),
  * -0.1  for an attack on an empty, out-of-bounds or ally-occupied cell,
  * -0.1  each time the agent is attacked (killing blows included).

Everything is driven by a per-instance numpy Generator, so identical
(config, scenario, seed, actions) produce byte-identical trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

TEAM_A = "A"
TEAM_B = "B"

# Action indices: 0 = stay, 1-8 = moves, 9-16 = attacks, both clockwise
# from north.  Grid coordinates are (x, y) with y increasing downward, so
# "north" is (0, -1).
STAY = 0
MOVE_BASE = 1
ATTACK_BASE = 9
N_ACTIONS = 17
DIRECTIONS = (
    (0, -1),   # N
    (1, -1),   # NE
    (1, 0),    # E
    (1, 1),    # SE
    (0, 1),    # S
    (-1, 1),   # SW
    (-1, 0),   # W
    (-1, -1),  # NW
)

REWARD_MOVE = -0.005
REWARD_ATTACK_ENEMY = 0.2
REWARD_KILL = 5.0
REWARD_ATTACK_EMPTY = -0.1
REWARD_BE_ATTACKED = -0.1

SCENARIO_BATTLE = "battle"
SCENARIO_WILDWAR = "wildwar"


def is_move(action: int) -> bool:
    return MOVE_BASE <= action < ATTACK_BASE


def is_attack(action: int) -> bool:
    return ATTACK_BASE <= action < N_ACTIONS


def action_delta(action: int) -> tuple[int, int]:
    """Direction offset of a move or attack action."""
    if is_move(action):
        return DIRECTIONS[action - MOVE_BASE]
    if is_attack(action):
        return DIRECTIONS[action - ATTACK_BASE]
    raise ValueError(f"action {action} has no direction")


class ConfigError(ValueError):
    """Invalid configuration value or infeasible placement."""


@dataclass(frozen=True)
class GridConfig:
    """Static parameters of one battle environment."""

    width: int = 20
    height: int = 20
    agents_per_team: int = 8
    max_steps: int = 100
    hp_max: int = 10
    attack_damage: int = 2
    view_radius: int = 3
    neighbor_radius: int = 6
    seed: int = 0

    def validate(self) -> None:
        if self.width < 4 or self.height < 4:
            raise ConfigError("width and height must be >= 4")
        if self.agents_per_team < 1:
            raise ConfigError("agents_per_team must be >= 1")
        if 2 * self.agents_per_team > self.width * self.height:
            raise ConfigError("too many agents for the map")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")
        if self.hp_max < 1 or self.attack_damage < 1:
            raise ConfigError("hp_max and attack_damage must be >= 1")
        if self.view_radius < 0 or self.neighbor_radius < 0:
            raise ConfigError("radii must be >= 0")

    @property
    def obs_dim(self) -> int:
        side = 2 * self.view_radius + 1
        return 3 + N_ACTIONS + side * side * 3


#: 20x20, 8 vs 8 -- the default, sized for a laptop.
DESK_CONFIG = GridConfig()

#: 40x40, 64 vs 64, 400-step episodes -- the full-scale preset.
PAPER_CONFIG = GridConfig(width=40, height=40, agents_per_team=64, max_steps=400)


@dataclass
class AgentState:
    id: int
    team: str
    pos: tuple[int, int]
    hp: int
    last_action: int = STAY

    @property
    def alive(self) -> bool:
        return self.hp > 0


@dataclass
class StepOutcome:
    rewards: dict[int, float]
    kills: list[tuple[int, int]]
    terminal: bool
    winner: str | None


@dataclass
class Observation:
    """Per-agent view: own features plus a local window.

    self_features = [x / (w-1), y / (h-1), hp / hp_max, one-hot(last action)].
    local_view is a (2r+1, 2r+1, 3) block flattened in C order; channels are
    ally presence (own cell included), enemy presence, and occupant hp /
    hp_max.  Cells outside the map read as zero.  All entries lie in [0, 1].
    """

    self_features: np.ndarray
    local_view: np.ndarray

    @cached_property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.self_features, self.local_view])


class GridWorld:
    """Mutable simulation state for one episode.

    Single-threaded by design; distinct instances are fully independent.
    """

    def __init__(self, config: GridConfig, agents: list[AgentState], seed: int):
        self.config = config
        self.agents: dict[int, AgentState] = {a.id: a for a in agents}
        self.step_count = 0
        self._rng = np.random.default_rng(seed)
        self._occupied: dict[tuple[int, int], int] = {}
        for a in agents:
            if not a.alive:
                continue
            if a.pos in self._occupied:
                raise ConfigError(f"two agents share cell {a.pos}")
            if not self._in_bounds(a.pos):
                raise ConfigError(f"agent {a.id} placed out of bounds at {a.pos}")
            self._occupied[a.pos] = a.id
        self._grids: tuple[np.ndarray, ...] | None = None
        self._obs_cache: dict[int, Observation] = {}

    # -- construction ---------------------------------------------------

    @classmethod
    def new_scenario(cls, config: GridConfig, scenario: str, seed: int | None = None) -> "GridWorld":
        """Build a fresh episode.

        ``battle`` packs team A into the left quarter of the map and team B
        into the right quarter, row-major; ``wildwar`` scatters everyone
        uniformly over distinct cells.
        """
        config.validate()
        if seed is None:
            seed = config.seed
        scenario = scenario.lower()
        n = config.agents_per_team
        w, h = config.width, config.height
        rng = np.random.default_rng(seed)
        if scenario == SCENARIO_BATTLE:
            quarter = w // 4
            if n > quarter * h:
                raise ConfigError("battle placement infeasible: team does not fit its quarter")
            cells_a = [(x, y) for y in range(h) for x in range(quarter)]
            cells_b = [(x, y) for y in range(h) for x in range(w - quarter, w)]
            pos_a, pos_b = cells_a[:n], cells_b[:n]
        elif scenario == SCENARIO_WILDWAR:
            flat = rng.choice(w * h, size=2 * n, replace=False)
            cells = [(int(c % w), int(c // w)) for c in flat]
            pos_a, pos_b = cells[:n], cells[n:]
        else:
            raise ConfigError(f"unknown scenario {scenario!r}")
        agents = [AgentState(i, TEAM_A, pos_a[i], config.hp_max) for i in range(n)]
        agents += [AgentState(n + i, TEAM_B, pos_b[i], config.hp_max) for i in range(n)]
        return cls(config, agents, seed)

    @classmethod
    def from_positions(
        cls,
        config: GridConfig,
        placements: list[tuple[str, tuple[int, int]]],
        seed: int = 0,
        hp: int | None = None,
    ) -> "GridWorld":
        """Hand-placed world for scripted scenarios; skips size validation."""
        agents = [
            AgentState(i, team, pos, config.hp_max if hp is None else hp)
            for i, (team, pos) in enumerate(placements)
        ]
        return cls(config, agents, seed)

    # -- queries ----------------------------------------------------------

    def _in_bounds(self, pos: tuple[int, int]) -> bool:
        return 0 <= pos[0] < self.config.width and 0 <= pos[1] < self.config.height

    def living_ids(self) -> list[int]:
        return sorted(i for i, a in self.agents.items() if a.alive)

    def living_agents(self) -> list[AgentState]:
        return [self.agents[i] for i in self.living_ids()]

    def team_counts(self) -> tuple[int, int]:
        na = sum(1 for a in self.agents.values() if a.alive and a.team == TEAM_A)
        nb = sum(1 for a in self.agents.values() if a.alive and a.team == TEAM_B)
        return na, nb

    def is_terminal(self) -> tuple[bool, str | None]:
        na, nb = self.team_counts()
        if na == 0 or nb == 0 or self.step_count >= self.config.max_steps:
            if na > nb:
                return True, TEAM_A
            if nb > na:
                return True, TEAM_B
            return True, "Draw"
        return False, None

    # -- stepping ---------------------------------------------------------

    def step(self, actions: dict[int, int]) -> StepOutcome:
        """Advance one tick.

        Attacks resolve first, simultaneously, against pre-step positions;
        casualties are then removed (their queued moves never happen, their
        attacks already landed); surviving movers go one at a time in a
        seeded random order.  Kill credit is +5 split equally among every
        enemy whose attack hit the dying agent this step.
        """
        living = set(self.living_ids())
        for aid in actions:
            if aid not in living:
                raise ValueError(f"action submitted for dead or unknown agent {aid}")
        missing = living - actions.keys()
        if missing:
            raise ValueError(f"no action for living agents {sorted(missing)}")
        for aid, act in actions.items():
            if not 0 <= act < N_ACTIONS:
                raise ValueError(f"action {act} out of range for agent {aid}")
            self.agents[aid].last_action = act

        rewards = {aid: 0.0 for aid in actions}
        kills: list[tuple[int, int]] = []

        # Phase 1: simultaneous attacks against the pre-step board.
        hits: dict[int, list[int]] = {}
        for aid in sorted(actions):
            act = actions[aid]
            if not is_attack(act):
                continue
            attacker = self.agents[aid]
            dx, dy = action_delta(act)
            target = (attacker.pos[0] + dx, attacker.pos[1] + dy)
            victim_id = self._occupied.get(target)
            if victim_id is not None and self.agents[victim_id].team != attacker.team:
                rewards[aid] += REWARD_ATTACK_ENEMY
                rewards[victim_id] += REWARD_BE_ATTACKED
                hits.setdefault(victim_id, []).append(aid)
            else:
                rewards[aid] += REWARD_ATTACK_EMPTY

        # Phase 2: apply damage, remove casualties, grant kill credit.
        for victim_id, attackers in sorted(hits.items()):
            victim = self.agents[victim_id]
            victim.hp = max(0, victim.hp - self.config.attack_damage * len(attackers))
            if victim.hp == 0:
                del self._occupied[victim.pos]
                share = REWARD_KILL / len(attackers)
                for killer in attackers:
                    rewards[killer] += share
                    kills.append((killer, victim_id))

        # Phase 3: surviving movers, seeded random order.
        movers = [aid for aid in sorted(actions) if is_move(actions[aid]) and self.agents[aid].alive]
        for idx in self._rng.permutation(len(movers)):
            aid = movers[idx]
            rewards[aid] += REWARD_MOVE
            agent = self.agents[aid]
            dx, dy = action_delta(actions[aid])
            target = (agent.pos[0] + dx, agent.pos[1] + dy)
            if self._in_bounds(target) and target not in self._occupied:
                del self._occupied[agent.pos]
                self._occupied[target] = aid
                agent.pos = target

        self.step_count += 1
        self._grids = None
        self._obs_cache.clear()
        terminal, winner = self.is_terminal()
        return StepOutcome(rewards, kills, terminal, winner if terminal else None)

    # -- observation --------------------------------------------------------

    def _channel_grids(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Padded presence/hp grids, rebuilt lazily once per step."""
        if self._grids is None:
            r = self.config.view_radius
            shape = (self.config.height + 2 * r, self.config.width + 2 * r)
            ga = np.zeros(shape)
            gb = np.zeros(shape)
            gh = np.zeros(shape)
            for a in self.agents.values():
                if not a.alive:
                    continue
                x, y = a.pos
                (ga if a.team == TEAM_A else gb)[y + r, x + r] = 1.0
                gh[y + r, x + r] = a.hp / self.config.hp_max
            self._grids = (ga, gb, gh)
        return self._grids

    def observe(self, agent_id: int) -> Observation:
        agent = self.agents.get(agent_id)
        if agent is None or not agent.alive:
            raise ValueError(f"cannot observe dead or unknown agent {agent_id}")
        cached = self._obs_cache.get(agent_id)
        if cached is not None:
            return cached

        cfg = self.config
        x, y = agent.pos
        feats = np.zeros(3 + N_ACTIONS)
        feats[0] = x / max(1, cfg.width - 1)
        feats[1] = y / max(1, cfg.height - 1)
        feats[2] = agent.hp / cfg.hp_max
        feats[3 + agent.last_action] = 1.0

        r = cfg.view_radius
        ga, gb, gh = self._channel_grids()
        side = 2 * r + 1
        win = np.s_[y : y + side, x : x + side]
        ally, enemy = (ga, gb) if agent.team == TEAM_A else (gb, ga)
        view = np.stack([ally[win], enemy[win], gh[win]], axis=-1).ravel()

        obs = Observation(feats, view)
        self._obs_cache[agent_id] = obs
        return obs

    # -- rendering -----------------------------------------------------------

    def render(self, fmt: str = "ascii") -> bytes:
        """ASCII board or a binary P6 image, one cell per character/pixel."""
        w, h = self.config.width, self.config.height
        if fmt == "ascii":
            rows = []
            for y in range(h):
                row = []
                for x in range(w):
                    aid = self._occupied.get((x, y))
                    if aid is None:
                        row.append(".")
                    else:
                        a = self.agents[aid]
                        healthy = a.hp >= self.config.hp_max / 2
                        if a.team == TEAM_A:
                            row.append("a" if healthy else "A")
                        else:
                            row.append("b" if healthy else "B")
                rows.append("".join(row))
            return ("\n".join(rows) + "\n").encode()
        if fmt == "ppm":
            pixels = np.full((h, w, 3), 255, dtype=np.uint8)
            for a in self.agents.values():
                if not a.alive:
                    continue
                x, y = a.pos
                level = round(255 * a.hp / self.config.hp_max)
                pixels[y, x] = (level, 0, 0) if a.team == TEAM_A else (0, 0, level)
            return f"P6\n{w} {h}\n255\n".encode() + pixels.tobytes()
        raise ValueError(f"unknown render format {fmt!r}")
