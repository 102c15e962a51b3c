"""Polymatrix (network) games: payoffs, rewards, the zero-sum test and the
Maximum Pairwise Difference (MPD) between two games.

A joint strategy is a list with one probability vector per agent.  Internally
most routines work on the flat concatenation of those vectors; ``offsets``
gives the slice of every agent.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

SIMPLEX_TOL = 1e-12
EPS_FLOOR = 1e-12
ZERO_SUM_TOL = 1e-9
# above this many opponent profiles the enumeration routines refuse to run
ENUMERATION_CAP = 10**6


class InvalidInputError(ValueError):
    """Malformed game, strategy or mismatched game structures."""


class NumericalError(RuntimeError):
    """A numerical routine failed (divergence, no convergence, ...)."""


class BoundaryError(InvalidInputError):
    """A strategy touches the boundary of the simplex where a log is needed."""


@dataclass(frozen=True)
class NetworkGame:
    """Network game with one pair of payoff matrices per undirected edge.

    ``edges[e] = (k, l)`` with ``k < l`` and ``payoffs[e] = (A_kl, A_lk)``,
    where ``A_kl`` has shape ``(n_k, n_l)`` and is agent k's payoff against l.
    Use :meth:`from_edges` to build a game from edges in arbitrary order.
    """

    action_counts: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]
    payoffs: tuple[tuple[np.ndarray, np.ndarray], ...] = field(repr=False)

    def __post_init__(self):
        counts = tuple(int(n) for n in self.action_counts)
        object.__setattr__(self, "action_counts", counts)
        if len(counts) < 2:
            raise InvalidInputError("a network game needs at least two agents")
        if any(n < 2 for n in counts):
            raise InvalidInputError(f"every agent needs at least two actions, got {counts}")
        if len(self.edges) != len(self.payoffs):
            raise InvalidInputError("edges and payoffs differ in length")
        seen = set()
        mats = []
        for (k, l), (a, b) in zip(self.edges, self.payoffs):
            if not (0 <= k < len(counts) and 0 <= l < len(counts)):
                raise InvalidInputError(f"edge ({k}, {l}) references an unknown agent")
            if k >= l:
                raise InvalidInputError(f"edge ({k}, {l}) must be stored with k < l")
            if (k, l) in seen:
                raise InvalidInputError(f"duplicate edge ({k}, {l})")
            seen.add((k, l))
            a = np.array(a, dtype=float)
            b = np.array(b, dtype=float)
            if a.shape != (counts[k], counts[l]) or b.shape != (counts[l], counts[k]):
                raise InvalidInputError(
                    f"edge ({k}, {l}): expected shapes {(counts[k], counts[l])} and "
                    f"{(counts[l], counts[k])}, got {a.shape} and {b.shape}"
                )
            if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
                raise InvalidInputError(f"edge ({k}, {l}) has non-finite payoffs")
            a.flags.writeable = False
            b.flags.writeable = False
            mats.append((a, b))
        object.__setattr__(self, "edges", tuple((int(k), int(l)) for k, l in self.edges))
        object.__setattr__(self, "payoffs", tuple(mats))

    @classmethod
    def from_edges(cls, action_counts, edge_matrices):
        """Build from ``{(k, l): (A_kl, A_lk)}`` or an iterable of ``(k, l, A_kl, A_lk)``."""
        items = edge_matrices.items() if isinstance(edge_matrices, dict) else (
            ((k, l), (a, b)) for k, l, a, b in edge_matrices
        )
        entries = {}
        for (k, l), (a, b) in items:
            if k == l:
                raise InvalidInputError(f"self-loop on agent {k}")
            if k > l:
                k, l, a, b = l, k, b, a
            if (k, l) in entries:
                raise InvalidInputError(f"duplicate edge ({k}, {l})")
            entries[(k, l)] = (a, b)
        keys = sorted(entries)
        return cls(tuple(action_counts), tuple(keys), tuple(entries[e] for e in keys))

    @property
    def n_agents(self) -> int:
        return len(self.action_counts)

    @cached_property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.action_counts)]).astype(int)

    @property
    def dim(self) -> int:
        return int(self.offsets[-1])

    @cached_property
    def neighbours(self) -> tuple[tuple[int, ...], ...]:
        nbrs = [[] for _ in range(self.n_agents)]
        for k, l in self.edges:
            nbrs[k].append(l)
            nbrs[l].append(k)
        return tuple(tuple(sorted(n)) for n in nbrs)

    def matrix(self, k: int, l: int) -> np.ndarray:
        """Payoff matrix of agent ``k`` against neighbour ``l``."""
        if k < l:
            return self.payoffs[self._edge_index[(k, l)]][0]
        return self.payoffs[self._edge_index[(l, k)]][1]

    @cached_property
    def _edge_index(self):
        return {e: i for i, e in enumerate(self.edges)}

    @cached_property
    def block_matrix(self) -> np.ndarray:
        """Flat reward operator: ``r = block_matrix @ x_flat``."""
        off = self.offsets
        m = np.zeros((self.dim, self.dim))
        for (k, l), (a, b) in zip(self.edges, self.payoffs):
            m[off[k]:off[k + 1], off[l]:off[l + 1]] = a
            m[off[l]:off[l + 1], off[k]:off[k + 1]] = b
        m.flags.writeable = False
        return m

    def same_structure(self, other: "NetworkGame") -> bool:
        return self.action_counts == other.action_counts and set(self.edges) == set(other.edges)

    def map_payoffs(self, fn) -> "NetworkGame":
        """New game with ``(A_kl, A_lk) -> fn(edge_index, (k, l), A_kl, A_lk)``."""
        new = [fn(i, e, a, b) for i, (e, (a, b)) in enumerate(zip(self.edges, self.payoffs))]
        return NetworkGame(self.action_counts, self.edges, tuple(new))

    def split(self, flat) -> list[np.ndarray]:
        return np.split(np.asarray(flat, dtype=float), self.offsets[1:-1])

    def to_dict(self) -> dict:
        return {
            "agents": list(self.action_counts),
            "edges": [
                {"from": k, "to": l, "A": a.tolist(), "B": b.tolist()}
                for (k, l), (a, b) in zip(self.edges, self.payoffs)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkGame":
        try:
            agents = data["agents"]
            edges = [(e["from"], e["to"], e["A"], e["B"]) for e in data["edges"]]
        except (KeyError, TypeError) as exc:
            raise InvalidInputError(f"malformed game document: {exc}") from exc
        return cls.from_edges(agents, edges)


def dumps_game(game: NetworkGame) -> str:
    # json writes floats with repr(), which round-trips doubles exactly
    return json.dumps(game.to_dict(), indent=1, sort_keys=True) + "\n"


def loads_game(text: str) -> NetworkGame:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"game file is not valid JSON: {exc}") from exc
    return NetworkGame.from_dict(data)


def save_game(game: NetworkGame, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_game(game))


def load_game(path) -> NetworkGame:
    try:
        with open(path) as fh:
            return loads_game(fh.read())
    except OSError as exc:
        raise InvalidInputError(f"cannot read game file {path}: {exc}") from exc


# ---------------------------------------------------------------- strategies


def flatten(game: NetworkGame, x) -> np.ndarray:
    """Validate a joint strategy and return it as one flat vector.

    Accepts a list of per-agent vectors or an already-flat vector.  Entries
    above -1e-12 are clipped at zero and every agent's vector is renormalised.
    """
    if isinstance(x, np.ndarray) and x.ndim == 1 and x.shape[0] == game.dim:
        parts = game.split(x)
    else:
        parts = [np.asarray(xk, dtype=float) for xk in x]
    if len(parts) != game.n_agents:
        raise InvalidInputError(f"expected {game.n_agents} strategies, got {len(parts)}")
    out = []
    for k, (xk, n) in enumerate(zip(parts, game.action_counts)):
        if xk.shape != (n,):
            raise InvalidInputError(f"agent {k}: expected {n} probabilities, got shape {xk.shape}")
        if not np.all(np.isfinite(xk)) or np.any(xk < -SIMPLEX_TOL):
            raise InvalidInputError(f"agent {k}: strategy has negative or non-finite entries")
        total = xk.sum()
        if abs(total - 1.0) > 1e-6:
            raise InvalidInputError(f"agent {k}: probabilities sum to {total}")
        xk = np.clip(xk, 0.0, None)
        out.append(xk / xk.sum())
    return np.concatenate(out)


def check_interior(x_flat: np.ndarray, floor: float = EPS_FLOOR) -> None:
    if np.min(x_flat) < floor:
        raise BoundaryError(f"strategy has an entry below {floor:g}; the log is undefined there")


def uniform_strategy(game: NetworkGame) -> list[np.ndarray]:
    return [np.full(n, 1.0 / n) for n in game.action_counts]


def random_interior_strategy(game: NetworkGame, rng: np.random.Generator) -> list[np.ndarray]:
    return [rng.dirichlet(np.ones(n)) for n in game.action_counts]


def segment_sum(game: NetworkGame, v: np.ndarray) -> np.ndarray:
    return np.add.reduceat(v, game.offsets[:-1], axis=-1)


def expand(game: NetworkGame, per_agent: np.ndarray) -> np.ndarray:
    return np.repeat(per_agent, game.action_counts, axis=-1)


# ------------------------------------------------------------------ payoffs


def reward_flat(game: NetworkGame, x_flat: np.ndarray) -> np.ndarray:
    return game.block_matrix @ x_flat


def reward_vector(game: NetworkGame, x, k: int) -> np.ndarray:
    """Marginal payoff of each of agent k's actions against ``x_{-k}``."""
    xf = flatten(game, x)
    parts = game.split(xf)
    r = np.zeros(game.action_counts[k])
    for l in game.neighbours[k]:
        r += game.matrix(k, l) @ parts[l]
    return r


def reward_vectors(game: NetworkGame, x) -> list[np.ndarray]:
    return game.split(reward_flat(game, flatten(game, x)))


def payoff(game: NetworkGame, x, k: int) -> float:
    """Expected payoff of agent ``k``: the sum of ``x_k^T A^{kl} x_l`` over its edges."""
    if not 0 <= k < game.n_agents:
        raise InvalidInputError(f"unknown agent {k}")
    parts = game.split(flatten(game, x))
    return float(sum(parts[k] @ game.matrix(k, l) @ parts[l] for l in game.neighbours[k]))


def pure_profile_totals(game: NetworkGame) -> np.ndarray:
    """Total payoff ``sum_k u_k(s)`` at every pure profile, as an N-d array."""
    if np.prod(game.action_counts, dtype=float) > ENUMERATION_CAP:
        raise InvalidInputError("too many pure profiles to enumerate")
    total = np.zeros(game.action_counts)
    n = game.n_agents
    for (k, l), (a, b) in zip(game.edges, game.payoffs):
        shape = [1] * n
        shape[k], shape[l] = game.action_counts[k], game.action_counts[l]
        total = total + (a + b.T).reshape(shape)
    return total


def edge_sum_matrices(game: NetworkGame) -> list[np.ndarray]:
    """``s^{kl} = A^{kl} + (A^{lk})^T`` for every edge."""
    return [a + b.T for a, b in game.payoffs]


def zero_sum_components(game: NetworkGame):
    """Orthogonal (ANOVA) split of the total-payoff function.

    Returns ``(constant, main_effects, interactions)`` where ``main_effects[k]``
    is agent k's centred own-action effect and ``interactions[e]`` the
    double-centred part of ``s^{kl}``.  The game is zero-sum iff all vanish.
    """
    main = [np.zeros(n) for n in game.action_counts]
    inter = []
    const = 0.0
    for (k, l), s in zip(game.edges, edge_sum_matrices(game)):
        mu = s.mean()
        rows = s.mean(axis=1) - mu
        cols = s.mean(axis=0) - mu
        const += mu
        main[k] += rows
        main[l] += cols
        inter.append(s - mu - rows[:, None] - cols[None, :])
    return const, main, inter


def zero_sum_residual(game: NetworkGame) -> float:
    """Largest ``|sum_k u_k(s)|`` over pure profiles ``s``.

    Exact by enumeration when the profile count is at most ``ENUMERATION_CAP``,
    otherwise an upper bound from the orthogonal decomposition.
    """
    if np.prod(game.action_counts, dtype=float) <= ENUMERATION_CAP:
        return float(np.max(np.abs(pure_profile_totals(game))))
    const, main, inter = zero_sum_components(game)
    return float(
        abs(const) + sum(np.max(np.abs(m)) for m in main) + sum(np.max(np.abs(g)) for g in inter)
    )


def is_zero_sum(game: NetworkGame, tol: float = ZERO_SUM_TOL) -> bool:
    """True iff the payoffs of all agents sum to zero at every joint strategy.

    Multilinearity makes it enough to check the pure profiles.
    """
    return zero_sum_residual(game) <= tol


# ---------------------------------------------------------------------- MPD


@dataclass(frozen=True)
class MpdBound:
    value: float
    kind: str  # "exact", "abs_entry_bound" or "two_norm_bound"


def _require_same_structure(g1: NetworkGame, g2: NetworkGame) -> None:
    if not g1.same_structure(g2):
        raise InvalidInputError("games differ in agents, action counts or edge set")


def _deviation_tables(g1, g2, k):
    """For agent k, ``D^{kl} = A^{kl} - B^{kl}`` for each neighbour l."""
    return [g1.matrix(k, l) - g2.matrix(k, l) for l in g1.neighbours[k]]


def mpd_exact(g1: NetworkGame, g2: NetworkGame) -> MpdBound:
    """Exact Maximum Pairwise Difference between two network games.

    The deviation gain difference ``(y_k - x_k)^T sum_l D^{kl} x_l`` is
    multilinear, so the maximum sits at pure ``y_k, x_k, x_l``.  For a fixed
    pair of actions ``(i', i)`` the neighbours' contributions are independent,
    so the max over opponent profiles is a sum of per-neighbour maxima; no
    profile enumeration is needed.
    """
    _require_same_structure(g1, g2)
    best = 0.0
    for k in range(g1.n_agents):
        tables = _deviation_tables(g1, g2, k)
        if not tables:
            continue
        # per neighbour: max_j D[i', j] - D[i, j], as an (i', i) table
        per_nbr = [np.max(d[:, None, :] - d[None, :, :], axis=2) for d in tables]
        hi = per_nbr[0]
        for t in per_nbr[1:]:
            hi = hi + t
        best = max(best, float(np.max(hi)))
    return MpdBound(best, "exact")


def mpd_enumerate(g1: NetworkGame, g2: NetworkGame) -> MpdBound:
    """MPD by enumerating every pure deviation and neighbour profile.

    Exponential in the neighbourhood size; refuses above ``ENUMERATION_CAP``
    neighbour profiles (use :func:`mpd_bound_abs` / :func:`mpd_bound_2norm`).
    """
    _require_same_structure(g1, g2)
    best = 0.0
    for k in range(g1.n_agents):
        nbrs = g1.neighbours[k]
        if not nbrs:
            continue
        sizes = [g1.action_counts[l] for l in nbrs]
        if np.prod(sizes, dtype=float) > ENUMERATION_CAP:
            raise InvalidInputError(f"agent {k}: too many neighbour profiles for enumeration")
        # gain[l][j] is the (i', i) table D[i', j] - D[i, j]
        gains = [[d[:, j][:, None] - d[:, j][None, :] for j in range(d.shape[1])]
                 for d in _deviation_tables(g1, g2, k)]
        for profile in itertools.product(*(range(n) for n in sizes)):
            total = gains[0][profile[0]]
            for g, j in zip(gains[1:], profile[1:]):
                total = total + g[j]
            best = max(best, float(np.max(total)))
    return MpdBound(best, "exact")


def _bound(g1, g2, entry_norm, kind):
    _require_same_structure(g1, g2)
    delta = 0.0
    for k in range(g1.n_agents):
        nbrs = g1.neighbours[k]
        if not nbrs:
            continue
        scale = 2 * g1.action_counts[k] * sum(g1.action_counts[l] for l in nbrs)
        worst = max(entry_norm(d) for d in _deviation_tables(g1, g2, k))
        delta = max(delta, scale * worst)
    return MpdBound(float(delta), kind)


def mpd_bound_abs(g1: NetworkGame, g2: NetworkGame) -> MpdBound:
    """Smallest delta certified by the entrywise payoff-difference bound."""
    return _bound(g1, g2, lambda d: float(np.max(np.abs(d))), "abs_entry_bound")


def mpd_bound_2norm(g1: NetworkGame, g2: NetworkGame) -> MpdBound:
    """Smallest delta certified by the spectral-norm payoff-difference bound."""
    return _bound(g1, g2, lambda d: float(np.linalg.norm(d, 2)), "two_norm_bound")


def delta_scale(game: NetworkGame) -> float:
    """``max_k 2 n_k sum_{l ~ k} n_l``: maps an entrywise bound to an MPD bound."""
    return float(max(
        2 * game.action_counts[k] * sum(game.action_counts[l] for l in game.neighbours[k])
        for k in range(game.n_agents)
    ))


def mpd_integrand(g: NetworkGame, k: int, xk, yk, x, T=None) -> float:
    """``u_k(y_k, x_{-k}) - u_k(x_k, x_{-k})`` (entropy-perturbed if ``T`` is given)."""
    parts = g.split(flatten(g, x))
    r = np.zeros(g.action_counts[k])
    for l in g.neighbours[k]:
        r += g.matrix(k, l) @ parts[l]
    xk = np.asarray(xk, dtype=float)
    yk = np.asarray(yk, dtype=float)
    gain = float((yk - xk) @ r)
    if T is not None:
        gain -= T * float(yk @ np.log(yk) - xk @ np.log(xk))
    return gain


def perturbed_game_mpd_identity_check(g1, g2, T, samples: int = 1000, seed: int = 0,
                                      tol: float = 1e-10):
    """Compare the MPD integrand of two games with that of their entropy-perturbed
    versions at random points; returns ``(ok, max_abs_deviation)``.

    The entropy terms cancel pointwise, so the deviation is rounding only.
    """
    from .dynamics import ExplorationRates

    _require_same_structure(g1, g2)
    rates = ExplorationRates.coerce(T, g1.n_agents)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        k = int(rng.integers(g1.n_agents))
        x = random_interior_strategy(g1, rng)
        n = g1.action_counts[k]
        xk, yk = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(n))
        plain = mpd_integrand(g1, k, xk, yk, x) - mpd_integrand(g2, k, xk, yk, x)
        tk = rates.values[k]
        pert = mpd_integrand(g1, k, xk, yk, x, tk) - mpd_integrand(g2, k, xk, yk, x, tk)
        worst = max(worst, abs(abs(pert) - abs(plain)))
    return worst <= tol, worst
