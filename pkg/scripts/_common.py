"""Shared helpers for the figure scripts."""

import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")


def parser(description, default_out):
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--out", default=default_out, type=Path)
    p.add_argument("--seed", type=int, default=0)
    return p


def prepare(args):
    args.out.mkdir(parents=True, exist_ok=True)
    return args.out


def nzsg(seed, n, graph="chain", actions=2):
    from nearzero.experiments import GeneratorSpec, generate_nzsg

    return generate_nzsg(GeneratorSpec(agents=n, actions=actions, seed=seed, graph=graph))
