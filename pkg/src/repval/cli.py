"""Command-line entry point: train, tournament, render, verify.

Every leaf of the JSON config is also a flat override flag, e.g.
``repval train --config run.json --episodes 0 --variant RFAC``.  All
outputs (CSV tables, checkpoints, frames) are byte-reproducible given the
same config and seed.

Output directory layout::

    <out>/checkpoints/   MLPCKPT binaries + JSON sidecars
    <out>/logs/          per-run training CSVs
    <out>/reports/       ranking.csv, pairwise.csv, winmatrix.csv
    <out>/frames/        frame_0000.ppm ... and ascii.txt
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import aggregate, config as cfgmod, learn, nn, tourney
from .env import ConfigError, GridConfig, GridWorld, TEAM_A


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _parse_int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def _add_override_flags(parser: argparse.ArgumentParser, command: str) -> None:
    defaults = {"env": GridConfig(), "algo": cfgmod.AlgoConfig(),
                "train": cfgmod.TrainConfig(), "tournament": cfgmod.TournamentConfig()}
    for section, f in cfgmod.override_fields(command):
        default = getattr(defaults[section], f.name)
        if isinstance(default, bool):
            typ = _parse_bool
        elif isinstance(default, int):
            typ = int
        elif isinstance(default, float):
            typ = float
        elif isinstance(default, list):
            typ = _parse_int_list
        else:
            typ = str
        flag = "--" + f.name.replace("_", "-")
        parser.add_argument(flag, dest=f.name, type=typ, default=None,
                            help=f"override {section}.{f.name}")
    parser.add_argument("--out", default=None, help="override out_dir")
    parser.add_argument("--workers", type=int, default=None,
                        help="parallel match workers (tournament only)")


def _out_dirs(out_dir: str) -> dict[str, Path]:
    root = Path(out_dir)
    dirs = {name: root / name for name in ("checkpoints", "logs", "reports", "frames")}
    for d in dirs.values():
        d.mkdir(parents=True, exist_ok=True)
    return dirs


def make_learner(cfg: cfgmod.RunConfig):
    """Build the configured learner sized for the configured environment."""
    algo = cfg.algo
    obs_dim = cfg.env.obs_dim
    common = dict(gamma=algo.gamma, hidden=tuple(algo.hidden),
                  embed_dim=algo.embed_dim, leaky_slope=algo.leaky_slope,
                  seed=cfg.train.seed)
    if algo.variant in learn.Q_VARIANTS:
        return learn.QLearner(
            algo.variant, obs_dim, beta=algo.beta, lr=algo.lr, tau=algo.tau,
            buffer_capacity=algo.buffer_capacity, batch_size=algo.batch_size,
            update_every=algo.update_every, paper_sign=algo.paper_sign,
            backup=algo.backup, **common)
    if algo.variant in learn.AC_VARIANTS:
        return learn.ACLearner(
            algo.variant, obs_dim, actor_lr=algo.actor_lr,
            critic_lr=algo.critic_lr,
            advantage_baseline=algo.advantage_baseline, **common)
    raise ConfigError(f"unknown key 'algo.variant' value {algo.variant!r}")


# -- subcommands -----------------------------------------------------------


def cmd_train(args) -> int:
    cfg = cfgmod.load_config(args.config)
    cfg = cfgmod.apply_overrides(cfg, "train", vars(args))
    cfg.env.validate()
    dirs = _out_dirs(cfg.out_dir)
    learner = make_learner(cfg)
    log = learn.train(
        learner, dataclasses.replace(cfg.env, seed=cfg.train.seed),
        cfg.train.scenario, cfg.train.episodes, cfg.train.seed,
        checkpoint_dir=dirs["checkpoints"],
        checkpoint_interval=cfg.train.checkpoint_interval,
        verbose=True)
    log_path = dirs["logs"] / f"train_{cfg.algo.variant}.csv"
    log_path.write_text(log.to_csv())
    print(f"wrote {log_path} ({len(log.rows)} episodes)")
    return 0


def cmd_tournament(args) -> int:
    cfg = cfgmod.load_config(args.config)
    cfg = cfgmod.apply_overrides(cfg, "tournament", vars(args))
    cfg.env.validate()
    if len(cfg.tournament.players) < 2:
        raise ConfigError("tournament.players needs at least 2 entries")
    players = []
    for entry in cfg.tournament.players:
        missing = {"name", "checkpoint", "variant"} - set(entry)
        if missing:
            raise ConfigError(f"tournament player entry missing {sorted(missing)}")
        player = tourney.Player(entry["name"], entry["checkpoint"], entry["variant"])
        if not Path(player.checkpoint).exists():
            print(f"error: missing checkpoint for player {player.name}: "
                  f"{player.checkpoint}", file=sys.stderr)
            return 1
        players.append(player)
    dirs = _out_dirs(cfg.out_dir)
    t = cfg.tournament
    report, elo, _ = tourney.run_tournament(
        players, t.scenario, dataclasses.replace(cfg.env, seed=t.seed),
        t.n_games, t.seed, t.k_factor, t.initial_rating, workers=cfg.workers)
    outputs = {
        "ranking.csv": report.ranking_csv(),
        "pairwise.csv": report.pairwise_csv(),
        "winmatrix.csv": report.winmatrix_csv(),
    }
    for fname, text in outputs.items():
        (dirs["reports"] / fname).write_text(text)
    print(outputs["ranking.csv"], end="")
    print(f"wrote {', '.join(str(dirs['reports'] / f) for f in outputs)}")
    return 0


def cmd_render(args) -> int:
    cfg = cfgmod.load_config(args.config)
    cfg.env.validate()
    pol_a = learn.load_checkpoint(args.checkpoint_a)
    pol_b = learn.load_checkpoint(args.checkpoint_b)
    out = Path(args.out if args.out is not None else cfg.out_dir) / "frames"
    out.mkdir(parents=True, exist_ok=True)
    frames: list[bytes] = []
    ascii_parts: list[str] = []

    def on_frame(world: GridWorld) -> None:
        frames.append(world.render("ppm"))
        ascii_parts.append(f"step {world.step_count}\n"
                           + world.render("ascii").decode())

    result = tourney.play_policies(
        pol_a, pol_b, args.scenario, dataclasses.replace(cfg.env, seed=args.seed),
        args.seed, on_frame=on_frame)
    for i, frame in enumerate(frames):
        (out / f"frame_{i:04d}.ppm").write_bytes(frame)
    (out / "ascii.txt").write_text("\n".join(ascii_parts))
    print(f"{result.steps} steps, winner={result.winner}; "
          f"wrote {len(frames)} frames to {out}")
    return 0


# -- verify -----------------------------------------------------------------


def _check_first_order(seed: int, n: int) -> tuple[bool, str]:
    """Centered deltas cancel the first-order term and the decomposition
    closes exactly."""
    rng = np.random.default_rng(seed)
    oracle = aggregate.SmoothQOracle.random(10, 1.0, seed)
    worst_delta = worst_first = worst_close = 0.0
    for _ in range(n):
        zj, w, zs = aggregate._sample_config(rng, 6, 4, int(rng.integers(1, 9)))
        rep = aggregate.taylor_decompose(oracle, zj, w, zs)
        order = sorted(w.weights)
        wts = w.as_array(order)
        centered = wts @ np.stack(rep.deltas)
        worst_delta = max(worst_delta, float(np.abs(centered).max()))
        worst_first = max(worst_first, abs(rep.first_order))
        worst_close = max(worst_close, abs(
            rep.exact - (rep.zeroth + rep.first_order + rep.remainder)))
    ok = worst_delta <= 1e-12 and worst_first <= 1e-10 and worst_close <= 1e-12
    return ok, (f"max|sum w*delta|={worst_delta:.2e} "
                f"max|first_order|={worst_first:.2e} closure={worst_close:.2e}")


def _check_remainder_bounds(samples: int, seed: int, factor: float
                            ) -> tuple[bool, str, str]:
    reports = []
    for i, m in enumerate((0.0, 0.5, 1.0, 2.0)):
        oracle = aggregate.SmoothQOracle.random(10, m, seed + i)
        reports.append(aggregate.remainder_bound_check(
            oracle, 6, 4, samples, seed=seed + i, bound_factor=factor))
    ok = all(r["violations"] == 0 for r in reports)
    detail = " ".join(f"M={r['M']:g}:max={r['max_abs_remainder']:.3f}" for r in reports)
    return ok, detail, aggregate.bound_report_csv(reports)


def _check_gradients(seed: int, trials: int) -> tuple[bool, str]:
    """Backprop vs central finite differences on random small nets."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        dims = [int(rng.integers(2, 7)) for _ in range(3)]
        net = nn.Mlp.init(dims, rng)
        x = rng.normal(size=dims[0])
        up = rng.normal(size=dims[-1])
        grads, _ = net.backward(x, up)
        h = 1e-5
        for li in range(net.n_layers):
            w = net.weights[li]
            for _ in range(3):
                i, j = rng.integers(w.shape[0]), rng.integers(w.shape[1])
                old = w[i, j]
                w[i, j] = old + h
                fp = float(net.forward(x) @ up)
                w[i, j] = old - h
                fm = float(net.forward(x) @ up)
                w[i, j] = old
                num = (fp - fm) / (2 * h)
                ana = grads.weights[li][i, j]
                worst = max(worst, abs(num - ana) / max(1.0, abs(num), abs(ana)))
    return worst < 1e-4, f"max rel err {worst:.2e} over {trials} nets"


def _check_elo() -> tuple[bool, str]:
    ra, rb = tourney.elo_update(1200.0, 1200.0, tourney.A_WINS, 32.0)
    exact = (ra, rb) == (1216.0, 1184.0)
    gap = abs(tourney.elo_expected(1200.0, 1600.0) - 1.0 / 11.0)
    rng = np.random.default_rng(7)
    conserved = 0.0
    for _ in range(200):
        x, y = rng.uniform(500, 2500, size=2)
        outcome = (tourney.A_WINS, tourney.B_WINS, tourney.DRAW)[int(rng.integers(3))]
        nx, ny = tourney.elo_update(x, y, outcome, 32.0)
        conserved = max(conserved, abs((nx + ny) - (x + y)))
    esum = abs(tourney.elo_expected(1000.0, 1400.0)
               + tourney.elo_expected(1400.0, 1000.0) - 1.0)
    ok = exact and gap < 1e-12 and conserved < 1e-9 and esum < 1e-12
    return ok, (f"equal-ratings exact={exact} |E-1/11|={gap:.1e} "
                f"max|sum drift|={conserved:.1e} |Ea+Eb-1|={esum:.1e}")


def cmd_verify(args) -> int:
    if args.samples == 0:
        print("WARN zero samples requested; remainder checks are vacuous")
    checks: list[tuple[str, bool, str]] = []
    n_first = 1000 if args.samples > 0 else 0
    ok, detail = _check_first_order(args.seed, n_first)
    checks.append(("first_order_cancellation", ok, detail))
    if args.samples > 0:
        ok, detail, csv_text = _check_remainder_bounds(
            args.samples, args.seed, args.bound_factor)
        checks.append(("remainder_bound", ok, detail))
    else:
        csv_text = aggregate.bound_report_csv([])
    checks.append(("gradient_check", *_check_gradients(args.seed, args.grad_trials)))
    checks.append(("elo_identities", *_check_elo()))
    failed = False
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        failed = failed or not ok
    print(csv_text, end="")
    return 1 if failed else 0


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="repval",
        description="Many-agent battle RL workbench: train, evaluate, verify.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="self-play training run")
    p_train.add_argument("--config", default=None, help="JSON config path")
    _add_override_flags(p_train, "train")
    p_train.set_defaults(func=cmd_train)

    p_tour = sub.add_parser("tournament", help="Elo tournament between checkpoints")
    p_tour.add_argument("--config", required=True, help="JSON config with players")
    _add_override_flags(p_tour, "tournament")
    p_tour.set_defaults(func=cmd_tournament)

    p_render = sub.add_parser("render", help="play one match and dump frames")
    p_render.add_argument("--config", default=None, help="JSON config path")
    p_render.add_argument("--checkpoint-a", required=True)
    p_render.add_argument("--checkpoint-b", required=True)
    p_render.add_argument("--scenario", default="battle")
    p_render.add_argument("--seed", type=int, default=0)
    p_render.add_argument("--out", default=None)
    p_render.set_defaults(func=cmd_render)

    p_verify = sub.add_parser("verify", help="numerical checks of the theory layer")
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--samples", type=int, default=10000)
    p_verify.add_argument("--grad-trials", type=int, default=50)
    p_verify.add_argument("--bound-factor", type=float, default=4.0,
                          help="remainder bound as a multiple of M "
                               "(lower it below 1 as a negative control)")
    p_verify.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
