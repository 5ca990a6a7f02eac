"""Elo-rated tournaments between trained players.

Random distinct pairings, deterministic per-match seeds, sequential Elo
folding (Elo is order-dependent), and CSV reports: a ranking table, a
pairwise wins-contrast table, and a plain win matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .env import TEAM_A, TEAM_B, GridConfig, GridWorld
from .learn import load_checkpoint

A_WINS = "A"
B_WINS = "B"
DRAW = "Draw"


@dataclass
class Player:
    name: str
    checkpoint: str | Path
    variant: str


@dataclass
class EloTable:
    k_factor: float = 32.0
    initial_rating: float = 1200.0
    ratings: dict[str, float] = field(default_factory=dict)

    def add(self, name: str) -> None:
        self.ratings.setdefault(name, self.initial_rating)

    def update(self, name_a: str, name_b: str, outcome: str) -> None:
        self.ratings[name_a], self.ratings[name_b] = elo_update(
            self.ratings[name_a], self.ratings[name_b], outcome, self.k_factor)


def elo_expected(r_a: float, r_b: float) -> float:
    """Logistic expected score of player a against player b."""
    return 1.0 / (1.0 + 10.0 ** ((r_b - r_a) / 400.0))


def elo_update(r_a: float, r_b: float, outcome: str, k: float) -> tuple[float, float]:
    """One rating exchange; a single delta is applied with opposite signs,
    so the exchange itself is exactly zero-sum."""
    if k <= 0:
        raise ValueError("k must be > 0")
    score = {A_WINS: 1.0, B_WINS: 0.0, DRAW: 0.5}[outcome]
    delta = k * (score - elo_expected(r_a, r_b))
    return r_a + delta, r_b - delta


def schedule(players: list[Player], n_games: int, seed: int
             ) -> list[tuple[str, str, int]]:
    """n_games uniformly random unordered distinct pairs with derived seeds."""
    if len(players) < 2:
        raise ValueError("a tournament needs at least 2 players")
    rng = np.random.default_rng(seed)
    names = [p.name for p in players]
    out = []
    for _ in range(n_games):
        i, j = rng.choice(len(names), size=2, replace=False)
        out.append((names[i], names[j], int(rng.integers(0, 2 ** 62))))
    return out


@dataclass
class MatchResult:
    player_a: str
    player_b: str
    winner: str          # A_WINS / B_WINS / DRAW
    kills_a: int         # enemies killed by player a's army
    kills_b: int
    steps: int
    seed: int


def play_policies(policy_a, policy_b, scenario: str, config: GridConfig,
                  seed: int, name_a: str = "a", name_b: str = "b",
                  on_frame=None) -> MatchResult:
    """Run one match between two acting policies (no learning).

    Army A follows policy_a, army B policy_b.  Each policy's sampling
    stream is reseeded from the match seed, so the whole match is a pure
    function of (policies, scenario, config, seed).  ``on_frame`` is
    called with the world before the first step and after every step.
    """
    world = GridWorld.new_scenario(config, scenario, seed)
    policy_a.reseed(seed * 2 + 1)
    policy_b.reseed(seed * 2 + 2)
    if on_frame is not None:
        on_frame(world)
    while True:
        actions = {}
        for aid in world.living_ids():
            agent = world.agents[aid]
            pol = policy_a if agent.team == TEAM_A else policy_b
            actions[aid] = pol.act(None, world, aid, explore=pol.eval_explore)
        outcome = world.step(actions)
        if on_frame is not None:
            on_frame(world)
        if outcome.terminal:
            break
    dead_a = sum(1 for a in world.agents.values() if a.team == TEAM_A and not a.alive)
    dead_b = sum(1 for a in world.agents.values() if a.team == TEAM_B and not a.alive)
    winner = {TEAM_A: A_WINS, TEAM_B: B_WINS}.get(outcome.winner, DRAW)
    return MatchResult(name_a, name_b, winner, dead_b, dead_a, world.step_count, seed)


def play_match(a: Player, b: Player, scenario: str, config: GridConfig,
               seed: int) -> MatchResult:
    """Load both checkpoints and run one evaluation match."""
    pol_a = load_checkpoint(a.checkpoint)
    pol_b = load_checkpoint(b.checkpoint)
    if pol_a.variant != a.variant:
        raise ValueError(f"player {a.name}: checkpoint variant {pol_a.variant} "
                         f"!= declared {a.variant}")
    if pol_b.variant != b.variant:
        raise ValueError(f"player {b.name}: checkpoint variant {pol_b.variant} "
                         f"!= declared {b.variant}")
    return play_policies(pol_a, pol_b, scenario, config, seed, a.name, b.name)


@dataclass
class StatsReport:
    players: list[str]
    rows: dict[str, dict]                 # per player: elo, kills, deaths, ...
    matrix: dict[str, dict[str, int]]     # wins of row player against column

    @classmethod
    def build(cls, players: list[Player], results: list[MatchResult],
              elo: EloTable) -> "StatsReport":
        names = [p.name for p in players]
        rows = {
            n: dict(elo=0.0, kills=0, deaths=0, wins=0, losses=0, draws=0, games=0)
            for n in names
        }
        matrix = {n: {m: 0 for m in names} for n in names}
        for r in results:
            ra, rb = rows[r.player_a], rows[r.player_b]
            ra["games"] += 1
            rb["games"] += 1
            ra["kills"] += r.kills_a
            ra["deaths"] += r.kills_b
            rb["kills"] += r.kills_b
            rb["deaths"] += r.kills_a
            if r.winner == A_WINS:
                ra["wins"] += 1
                rb["losses"] += 1
                matrix[r.player_a][r.player_b] += 1
            elif r.winner == B_WINS:
                rb["wins"] += 1
                ra["losses"] += 1
                matrix[r.player_b][r.player_a] += 1
            else:
                ra["draws"] += 1
                rb["draws"] += 1
        for n in names:
            row = rows[n]
            row["elo"] = elo.ratings[n]
            row["winrate"] = row["wins"] / row["games"] if row["games"] else 0.0
            row["kd_ratio"] = (row["kills"] / row["deaths"] if row["deaths"]
                               else float("inf") if row["kills"] else 0.0)
        return cls(names, rows, matrix)

    def ranking(self) -> list[str]:
        return sorted(self.players, key=lambda n: (-self.rows[n]["elo"], n))

    def ranking_csv(self) -> str:
        lines = ["rank,player,elo,kd_ratio,kills,winrate,games,draws"]
        for rank, name in enumerate(self.ranking(), start=1):
            r = self.rows[name]
            lines.append(
                f"{rank},{name},{r['elo']:.2f},{r['kd_ratio']:.4f},{r['kills']},"
                f"{r['winrate']:.4f},{r['games']},{r['draws']}"
            )
        return "\n".join(lines) + "\n"

    def pairwise_csv(self) -> str:
        """Wins-contrast table: cell = wins of row player : wins of column."""
        lines = ["player," + ",".join(self.players)]
        for a in self.players:
            cells = [f"{self.matrix[a][b]}:{self.matrix[b][a]}" if a != b else "-"
                     for b in self.players]
            lines.append(a + "," + ",".join(cells))
        return "\n".join(lines) + "\n"

    def winmatrix_csv(self) -> str:
        """Plain win counts: cell = wins of row player against column player."""
        lines = ["player," + ",".join(self.players)]
        for a in self.players:
            lines.append(a + "," + ",".join(str(self.matrix[a][b]) for b in self.players))
        return "\n".join(lines) + "\n"


def run_tournament(players: list[Player], scenario: str, config: GridConfig,
                   n_games: int, seed: int, k_factor: float = 32.0,
                   initial_rating: float = 1200.0, workers: int = 1
                   ) -> tuple[StatsReport, EloTable, list[MatchResult]]:
    """Schedule, play and score a whole tournament.

    Matches are independent (parallelizable across ``workers``); the Elo
    fold always runs serially in schedule order, so results are identical
    for any worker count.
    """
    games = schedule(players, n_games, seed)
    by_name = {p.name: p for p in players}
    jobs = [(by_name[a], by_name[b], scenario, config, s) for a, b, s in games]
    if workers > 1 and len(jobs) > 1:
        import multiprocessing

        with multiprocessing.Pool(workers) as pool:
            results = pool.starmap(play_match, jobs)
    else:
        results = [play_match(*job) for job in jobs]
    elo = EloTable(k_factor=k_factor, initial_rating=initial_rating)
    for p in players:
        elo.add(p.name)
    for r in results:
        elo.update(r.player_a, r.player_b, r.winner)
    return StatsReport.build(players, results, elo), elo, results
