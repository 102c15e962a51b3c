"""Nearest network zero-sum game in the least-squares sense.

The feasible set is the pairwise constant-sum games whose edge constants add
up to zero:

    min  sum_e ||Ahat^{kl} - A^{kl}||_F^2 + ||Ahat^{lk} - A^{lk}||_F^2
    s.t. Ahat^{kl}_ij + Ahat^{lk}_ji = c_kl,   sum_e c_kl = 0.

For fixed constants each pair of entries moves by half the constraint gap, so
only a one-dimensional Lagrange condition on the constants remains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .game import (
    InvalidInputError,
    MpdBound,
    NetworkGame,
    edge_sum_matrices,
    is_zero_sum,
    mpd_bound_2norm,
    mpd_bound_abs,
    zero_sum_components,
    zero_sum_residual,
)


@dataclass(frozen=True)
class ProjectionResult:
    projected: NetworkGame
    constants: np.ndarray
    objective: float
    multiplier: float  # the scalar lambda of the sum-to-zero constraint
    delta_abs: MpdBound
    delta_2norm: MpdBound

    def certificate(self) -> dict:
        return {
            "objective": self.objective,
            "constants": [float(c) for c in self.constants],
            "lambda": self.multiplier,
            "delta_abs": self.delta_abs.value,
            "delta_2norm": self.delta_2norm.value,
            "zero_sum_residual": zero_sum_residual(self.projected),
        }


def nearest_nzsg(game: NetworkGame) -> ProjectionResult:
    """Closed-form solution of the projection problem above."""
    if not game.edges:
        raise InvalidInputError("a game without edges has nothing to project")
    sums = edge_sum_matrices(game)
    sizes = np.array([s.size for s in sums], dtype=float)
    totals = np.array([s.sum() for s in sums])
    lam = float(np.sum(totals / sizes) / np.sum(1.0 / sizes))
    consts = (totals - lam) / sizes

    new = []
    objective = 0.0
    for (a, b), s, c in zip(game.payoffs, sums, consts):
        shift = (c - s) / 2.0
        new.append((a + shift, b + shift.T))
        objective += float(np.sum((c - s) ** 2)) / 2.0
    projected = NetworkGame(game.action_counts, game.edges, tuple(new))
    return ProjectionResult(
        projected,
        consts,
        objective,
        lam,
        mpd_bound_abs(game, projected),
        mpd_bound_2norm(game, projected),
    )


def kkt_residual(game: NetworkGame, result: ProjectionResult) -> float:
    """Largest violation of the optimality conditions of the projection.

    Constraint rows ``Ahat^{kl}_ij + Ahat^{lk}_ji = c_kl`` share one multiplier
    ``mu_ij``; stationarity in ``Ahat`` asks ``2 (Ahat^{kl} - A^{kl}) = mu =
    2 (Ahat^{lk} - A^{lk})^T`` and stationarity in ``c`` asks ``sum_ij mu_ij``
    to be the same on every edge.
    """
    proj = result.projected
    if not proj.same_structure(game) or len(result.constants) != len(game.edges):
        raise InvalidInputError("projection result does not match the game")
    worst = abs(float(np.sum(result.constants)))
    mu_totals = []
    for (a, b), (ah, bh), c in zip(game.payoffs, proj.payoffs, result.constants):
        worst = max(worst, float(np.max(np.abs(ah + bh.T - c))))
        da, db = ah - a, (bh - b).T
        mu = da + db
        worst = max(worst, float(np.max(np.abs(2 * da - mu))), float(np.max(np.abs(2 * db - mu))))
        mu_totals.append(float(mu.sum()))
    mu_totals = np.array(mu_totals)
    worst = max(worst, float(np.max(np.abs(mu_totals - mu_totals.mean()))))
    return worst


def constant_sum_decompose(game_zs: NetworkGame, tol: float = 1e-8) -> ProjectionResult:
    """Pairwise constant-sum form of a network zero-sum game with identical payoffs.

    Every edge's sum matrix ``s^{kl} = A^{kl} + (A^{lk})^T`` splits into its
    mean, a row effect, a column effect and an interaction.  Zero-sum means
    the interactions vanish and, per agent, the own-action effects of its
    edges cancel, so removing them edge by edge changes no agent's payoff
    while leaving ``s^{kl}`` equal to its mean ``c_kl``.
    """
    if not is_zero_sum(game_zs, tol):
        raise InvalidInputError("game is not network zero-sum")
    # the total-payoff constant is within tol of zero; spread it over the edges
    const, _, _ = zero_sum_components(game_zs)
    spread = const / len(game_zs.edges)
    new = []
    consts = []
    for (a, b), s in zip(game_zs.payoffs, edge_sum_matrices(game_zs)):
        mu = s.mean()
        rows = s.mean(axis=1) - mu
        cols = s.mean(axis=0) - mu
        new.append((a - rows[:, None] - spread, b - cols[:, None]))
        consts.append(mu - spread)
    consts = np.array(consts)
    projected = NetworkGame(game_zs.action_counts, game_zs.edges, tuple(new))
    objective = float(sum(np.sum((ah - a) ** 2) + np.sum((bh - b) ** 2)
                          for (a, b), (ah, bh) in zip(game_zs.payoffs, projected.payoffs)))
    return ProjectionResult(
        projected,
        consts,
        objective,
        float("nan"),
        mpd_bound_abs(game_zs, projected),
        mpd_bound_2norm(game_zs, projected),
    )
