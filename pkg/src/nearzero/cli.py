"""Command line entry point: ``nearzero <subcommand> ...``.

Exit status is 0 on success, 1 on invalid input and 2 on numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .dynamics import (
    ExplorationRates,
    approximate_nash_gap,
    integrate,
    qre_residual,
    qre_solve,
    trap_radius,
)
from .game import (
    InvalidInputError,
    MpdBound,
    NumericalError,
    dumps_game,
    is_zero_sum,
    load_game,
    mpd_bound_2norm,
    mpd_bound_abs,
    mpd_exact,
    random_interior_strategy,
    uniform_strategy,
)
from .projection import nearest_nzsg


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _temps(text):
    try:
        vals = [float(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}")
    return vals[0] if len(vals) == 1 else vals


def _ints(text):
    vals = [int(t) for t in text.split(",")]
    return vals[0] if len(vals) == 1 else vals


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _initial(game, args):
    if args.uniform:
        return uniform_strategy(game)
    return random_interior_strategy(game, np.random.default_rng(args.seed))


def _emit(obj, out: Path | None, name: str):
    text = ex.dumps_json(obj)
    if out is not None:
        ex.write_text(out / name, text)
    sys.stdout.write(text)


def _mpd_report(g1, g2) -> dict:
    report = {"abs_entry_bound": mpd_bound_abs(g1, g2).value,
              "two_norm_bound": mpd_bound_2norm(g1, g2).value}
    report["exact"] = mpd_exact(g1, g2).value
    return report


# ---------------------------------------------------------------- commands


def cmd_generate(args):
    if args.kind == "conflict_preset":
        game = ex.conflict_preset()
    else:
        spec = ex.GeneratorSpec(kind=args.kind, agents=args.agents, actions=args.actions,
                                seed=args.seed, graph=args.graph, edge_prob=args.edge_prob,
                                entry_range=(args.low, args.high))
        game = ex.generate(spec)
    out = _out_dir(args)
    ex.write_text(out / "game.json", dumps_game(game))
    print(out / "game.json")


def cmd_perturb(args):
    game = load_game(args.game)
    eps = args.epsilon if args.epsilon is not None else ex.epsilon_for_delta(game, args.delta)
    noisy, cert = ex.perturb_game(game, eps, args.seed)
    out = _out_dir(args)
    ex.write_text(out / "perturbed.json", dumps_game(noisy))
    report = {"epsilon": eps, "seed": args.seed, "delta_certificate": cert.value,
              "realized": _mpd_report(game, noisy)}
    _emit(report, out, "certificate.json")


def cmd_project(args):
    game = load_game(args.game)
    res = nearest_nzsg(game)
    out = _out_dir(args)
    ex.write_text(out / "projected.json", dumps_game(res.projected))
    cert = res.certificate()
    cert["delta_exact"] = mpd_exact(game, res.projected).value
    _emit(cert, out, "certificate.json")


def cmd_mpd(args):
    g1, g2 = load_game(args.game), load_game(args.other)
    _emit(_mpd_report(g1, g2), _out_dir(args) if args.out else None, "mpd.json")


def cmd_qre(args):
    game = load_game(args.game)
    rates = ExplorationRates.coerce(args.temp, game.n_agents)
    p = qre_solve(game, rates, damping=args.damping)
    report = {"temperatures": rates.tolist(), "qre": [pk.tolist() for pk in p],
              "residual": qre_residual(game, p, rates),
              "nash_gap": approximate_nash_gap(game, p)}
    _emit(report, _out_dir(args), "qre.json")


def cmd_simulate(args):
    game = load_game(args.game)
    rates = ExplorationRates.coerce(args.temp, game.n_agents)
    reference = delta = radius = None
    ref_game = load_game(args.reference) if args.reference else (game if is_zero_sum(game) else None)
    if ref_game is not None:
        if not is_zero_sum(ref_game):
            raise InvalidInputError("the reference game must be network zero-sum")
        reference = qre_solve(ref_game, rates)
        delta = MpdBound(args.delta, "given") if args.delta is not None else mpd_exact(game, ref_game)
        radius = trap_radius(game.n_agents, delta, rates)
    traj = integrate(game, _initial(game, args), rates, args.horizon, args.step,
                     reference=reference, delta=delta, record_every=args.record_every)
    out = _out_dir(args)
    ex.write_text(out / "trajectory.csv", ex.trajectory_csv(traj))
    manifest = ex.run_manifest(game, rates, args.step, args.horizon, args.seed, delta, radius,
                               record_every=args.record_every, uniform_start=args.uniform)
    if reference is not None:
        manifest["reference_game_sha256"] = ex.game_hash(ref_game)
        manifest["final_kl_p_x"] = float(traj.kl_p_x[-1])
    ex.write_text(out / "manifest.json", ex.dumps_json(manifest))
    print(out / "trajectory.csv")


def cmd_noisy_sim(args):
    game = load_game(args.game)
    if not is_zero_sum(game):
        raise InvalidInputError("noisy runs perturb a network zero-sum base game")
    rates = ExplorationRates.coerce(args.temp, game.n_agents)
    eps = args.epsilon if args.epsilon is not None else ex.epsilon_for_delta(game, args.delta)
    traj = ex.noisy_run(game, rates, eps, args.period, args.horizon, args.step, args.seed,
                        _initial(game, args), record_every=args.record_every)
    delta = ex.delta_for_epsilon(game, eps)
    out = _out_dir(args)
    ex.write_text(out / "trajectory.csv", ex.trajectory_csv(traj))
    manifest = ex.run_manifest(game, rates, args.step, args.horizon, args.seed, delta,
                               traj.radius, epsilon=eps, noise_period=args.period,
                               record_every=args.record_every, uniform_start=args.uniform)
    ex.write_text(out / "manifest.json", ex.dumps_json(manifest))
    print(out / "trajectory.csv")


def cmd_embed(args):
    game = load_game(args.game)
    if not is_zero_sum(game):
        raise InvalidInputError("the embedding is drawn around the QRE of a network zero-sum game")
    if any(n != 2 for n in game.action_counts):
        raise InvalidInputError("the logit embedding needs two actions per agent")
    rates = ExplorationRates.coerce(args.temp, game.n_agents)
    p = qre_solve(game, rates)
    spec = ex.EmbeddingSpec.random(game.n_agents, args.seed, args.extent, args.resolution)
    kl = ex.embedding_kl(p, ex.logit_embedding(spec))
    radius = trap_radius(game.n_agents, args.delta, rates)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["alpha", "beta", "kl_p_z", "inside"])
    for i, a in enumerate(spec.alphas):
        for j, b in enumerate(spec.betas):
            w.writerow([ex.fmt(a), ex.fmt(b), ex.fmt(kl[i, j]), int(kl[i, j] <= radius)])
    out = _out_dir(args)
    ex.write_text(out / "embedding.csv", buf.getvalue())
    manifest = {"game_sha256": ex.game_hash(game), "seed": args.seed, "delta": args.delta,
                "temperatures": rates.tolist(), "trap_radius": radius,
                "u": spec.u.tolist(), "v": spec.v.tolist(),
                "qre": [pk.tolist() for pk in p]}
    ex.write_text(out / "manifest.json", ex.dumps_json(manifest))
    print(out / "embedding.csv")


def cmd_campaign(args):
    spec = ex.CampaignSpec.load(args.spec)
    if args.workers is not None:
        spec.workers = args.workers
    report = ex.campaign(spec, args.out)
    sys.stdout.write(ex.dumps_json(report))


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nearzero", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, game=True, temp=False, sim=False, out=True):
        if game:
            p.add_argument("--game", required=True, help="game JSON file")
        p.add_argument("--seed", type=int, default=0)
        if temp:
            p.add_argument("--temp", type=_temps, default=0.75,
                           help="exploration rate, or comma-separated per-agent rates")
        if sim:
            p.add_argument("--step", type=float, default=0.01)
            p.add_argument("--horizon", type=float, default=500.0)
            p.add_argument("--record-every", type=int, default=10)
            p.add_argument("--uniform", action="store_true",
                           help="start from uniform play instead of a seeded random point")
        if out:
            p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("generate", help="write a random or preset game")
    common(p, game=False)
    p.add_argument("--kind", default="nzsg_random",
                   choices=["nzsg_random", "chain", "complete", "conflict_network", "conflict_preset"])
    p.add_argument("--agents", type=int, default=3)
    p.add_argument("--actions", type=_ints, default=2)
    p.add_argument("--graph", default="chain", choices=list(ex.GRAPHS))
    p.add_argument("--edge-prob", type=float, default=0.5)
    p.add_argument("--low", type=float, default=-1.0)
    p.add_argument("--high", type=float, default=1.0)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("perturb", help="add bounded uniform noise with an MPD certificate")
    common(p)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--epsilon", type=float)
    g.add_argument("--delta", type=float, help="target MPD certificate")
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("project", help="nearest network zero-sum game")
    common(p)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("mpd", help="MPD between two games (exact and bounds)")
    common(p, out=False)
    p.add_argument("--other", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_mpd)

    p = sub.add_parser("qre", help="quantal response equilibrium")
    common(p, temp=True)
    p.add_argument("--damping", type=float, default=0.5)
    p.set_defaults(func=cmd_qre)

    p = sub.add_parser("simulate", help="integrate the Q-Learning dynamics")
    common(p, temp=True, sim=True)
    p.add_argument("--reference", help="zero-sum game whose QRE anchors the diagnostics")
    p.add_argument("--delta", type=float, help="MPD bound to the reference (default: exact)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("noisy-sim", help="integrate with payoff noise redrawn periodically")
    common(p, temp=True, sim=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--epsilon", type=float)
    g.add_argument("--delta", type=float)
    p.add_argument("--period", type=int, default=50, help="integrator steps between redraws")
    p.set_defaults(func=cmd_noisy_sim)

    p = sub.add_parser("embed", help="KL landscape on the logit plane")
    common(p, temp=True)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--extent", type=float, default=5.0)
    p.add_argument("--resolution", type=int, default=101)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("campaign", help="run a seeded simulation campaign from a JSON spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_campaign)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
