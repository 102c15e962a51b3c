"""Game generators, perturbations, noisy runs, the logit-plane embedding and
seeded simulation campaigns."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .dynamics import (
    DEFAULT_STEP,
    TAIL_FRACTION,
    ExplorationRates,
    TrajectoryRecord,
    TrapRegion,
    _Layout,
    asymptotic_kl,
    integrate,
    qre_solve,
    run_logit,
    to_logits,
    trap_radius,
    _make_record,
)
from .game import (
    InvalidInputError,
    MpdBound,
    NetworkGame,
    NumericalError,
    check_interior,
    delta_scale,
    dumps_game,
    flatten,
    random_interior_strategy,
    uniform_strategy,
)

log = logging.getLogger(__name__)

GRAPHS = ("chain", "complete", "random")
KINDS = ("nzsg_random", "chain", "complete", "conflict_network")


@dataclass
class GeneratorSpec:
    kind: str = "nzsg_random"
    agents: int = 3
    actions: int | list[int] = 2
    seed: int = 0
    graph: str = "chain"
    edge_prob: float = 0.5
    entry_range: tuple[float, float] = (-1.0, 1.0)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown generator kind {self.kind!r}")
        if self.kind in ("chain", "complete"):
            self.graph = self.kind
        if self.graph not in GRAPHS:
            raise InvalidInputError(f"unknown graph {self.graph!r}")
        if self.agents < 2:
            raise InvalidInputError("need at least two agents")
        if not 0 < self.edge_prob <= 1:
            raise InvalidInputError("edge_prob must lie in (0, 1]")
        lo, hi = self.entry_range
        if not lo < hi:
            raise InvalidInputError("entry_range must be an interval (lo, hi) with lo < hi")
        self.entry_range = (float(lo), float(hi))

    @property
    def action_counts(self) -> tuple[int, ...]:
        if isinstance(self.actions, int):
            return (self.actions,) * self.agents
        if len(self.actions) != self.agents:
            raise InvalidInputError("one action count per agent required")
        return tuple(int(a) for a in self.actions)

    @classmethod
    def from_dict(cls, data: dict) -> "GeneratorSpec":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise InvalidInputError(f"unknown generator fields {sorted(unknown)}")
        return cls(**data)


def graph_edges(graph: str, n: int, rng: np.random.Generator, edge_prob: float = 0.5):
    if graph == "chain":
        return [(k, k + 1) for k in range(n - 1)]
    if graph == "complete":
        return [(k, l) for k in range(n) for l in range(k + 1, n)]
    if graph == "random":
        # resample until connected
        pairs = [(k, l) for k in range(n) for l in range(k + 1, n)]
        while True:
            keep = rng.random(len(pairs)) < edge_prob
            edges = [e for e, kk in zip(pairs, keep) if kk]
            if _connected(n, edges):
                return edges
    raise InvalidInputError(f"unknown graph {graph!r}")


def _connected(n, edges):
    seen = {0}
    stack = [0]
    adj = {k: [] for k in range(n)}
    for k, l in edges:
        adj[k].append(l)
        adj[l].append(k)
    while stack:
        for l in adj[stack.pop()]:
            if l not in seen:
                seen.add(l)
                stack.append(l)
    return len(seen) == n


def generate_nzsg(spec: GeneratorSpec) -> NetworkGame:
    """Random pairwise constant-sum game whose edge constants sum to zero."""
    rng = np.random.default_rng(spec.seed)
    counts = spec.action_counts
    edges = graph_edges(spec.graph, spec.agents, rng, spec.edge_prob)
    lo, hi = spec.entry_range
    consts = rng.uniform(lo, hi, len(edges))
    consts[-1] = -consts[:-1].sum()
    mats = {}
    for (k, l), c in zip(edges, consts):
        a = rng.uniform(lo, hi, (counts[k], counts[l]))
        mats[(k, l)] = (a, c - a.T)
    return NetworkGame.from_edges(counts, mats)


def generate(spec: GeneratorSpec) -> NetworkGame:
    if spec.kind == "conflict_network":
        return random_conflict_network(spec.agents, spec.action_counts, spec.seed, spec.graph)
    return generate_nzsg(spec)


# ------------------------------------------------------------- perturbation


def epsilon_for_delta(game: NetworkGame, delta: float) -> float:
    """Largest entrywise noise level whose MPD certificate stays within ``delta``."""
    if delta < 0:
        raise InvalidInputError("delta must be non-negative")
    return float(delta) / delta_scale(game)


def delta_for_epsilon(game: NetworkGame, epsilon: float) -> MpdBound:
    return MpdBound(float(epsilon) * delta_scale(game), "abs_entry_bound")


def _add_noise(game, epsilon, rng):
    return game.map_payoffs(
        lambda i, e, a, b: (a + rng.uniform(-epsilon, epsilon, a.shape),
                            b + rng.uniform(-epsilon, epsilon, b.shape))
    )


def perturb_game(game: NetworkGame, epsilon: float, seed) -> tuple[NetworkGame, MpdBound]:
    """Add independent uniform noise in ``[-epsilon, epsilon]`` to every entry.

    The returned certificate depends only on ``epsilon`` and the graph, so it
    holds for every noise draw.
    """
    if epsilon < 0:
        raise InvalidInputError("epsilon must be non-negative")
    rng = np.random.default_rng(seed)
    return _add_noise(game, epsilon, rng), delta_for_epsilon(game, epsilon)


def noisy_run(game_zs: NetworkGame, T, epsilon: float, period: int, horizon: float,
              step: float = DEFAULT_STEP, seed=0, x0=None, reference=None,
              record_every: int = 1) -> TrajectoryRecord:
    """Integrate the dynamics while redrawing payoff noise every ``period`` steps.

    Each segment runs on ``game_zs`` plus fresh uniform noise of size
    ``epsilon``; diagnostics are taken against the QRE of ``game_zs`` with the
    radius of the ``epsilon`` certificate.
    """
    if period < 1:
        raise InvalidInputError("noise period must be at least one step")
    if epsilon < 0:
        raise InvalidInputError("epsilon must be non-negative")
    if step <= 0 or horizon < step:
        raise InvalidInputError("need step > 0 and horizon >= step")
    rates = ExplorationRates.coerce(T, game_zs.n_agents)
    tf = np.repeat(rates.values, game_zs.action_counts)
    lay = _Layout(game_zs)
    rng = np.random.default_rng(seed)
    xf = flatten(game_zs, uniform_strategy(game_zs) if x0 is None else x0)
    check_interior(xf)
    if reference is None:
        reference = qre_solve(game_zs, rates)
    n_steps = int(round(horizon / step))
    z = to_logits(lay, xf)
    steps = [np.array([0])]
    logs = [lay.log_softmax(z)[None, :]]
    done = 0
    while done < n_steps:
        seg = min(period, n_steps - done)
        noisy = _add_noise(game_zs, epsilon, rng)
        z, s, lg = run_logit(noisy.block_matrix, tf, game_zs.offsets, z, step, seg, 1, done * step)
        steps.append(s + done)
        logs.append(lg)
        done += seg
    steps = np.concatenate(steps)
    logs = np.vstack(logs)
    keep = (steps % record_every == 0) | (steps == n_steps)
    return _make_record(game_zs, rates, steps[keep] * step, logs[keep], reference,
                        delta_for_epsilon(game_zs, epsilon))


def tail_spread(trajectory: TrajectoryRecord, tail_fraction: float = TAIL_FRACTION) -> float:
    """Largest sup-norm distance from the reference over the final stretch."""
    t = trajectory.times
    tail = t >= t[-1] - tail_fraction * (t[-1] - t[0]) - 1e-12
    return float(np.max(np.abs(trajectory.states[tail] - trajectory.reference[None, :])))


# --------------------------------------------------------- conflict networks


CONFLICT_FORWARD = np.array([[2.4, 6.6], [4.5, 3.1]])
CONFLICT_BACKWARD = np.array([[2.8, 1.0], [4.2, 7.2]])


def conflict_preset(n_agents: int = 3) -> NetworkGame:
    """Fully connected ring preset: ``A^{k,k+1}`` and ``A^{k,k-1}`` fixed 2x2 matrices."""
    if n_agents != 3:
        raise InvalidInputError("the preset is defined for three agents")
    mats = {}
    for k in range(n_agents):
        l = (k + 1) % n_agents
        # A^{k,k+1} and A^{k+1,k} = A^{l,l-1}
        mats[(k, l)] = (CONFLICT_FORWARD, CONFLICT_BACKWARD)
    return NetworkGame.from_edges((2,) * n_agents, mats)


def _conflict_parts(values, contests, costs, action_counts):
    values = np.asarray(values, dtype=float)
    if np.any(values <= 0) or len(values) != len(action_counts):
        raise InvalidInputError("need one positive valuation per agent")
    costs = costs or {}
    parts = {}
    for (k, l), (p_kl, p_lk) in contests.items():
        p_kl = np.asarray(p_kl, dtype=float)
        p_lk = np.asarray(p_lk, dtype=float)
        if p_kl.shape != (action_counts[k], action_counts[l]) or p_lk.shape != p_kl.T.shape:
            raise InvalidInputError(f"edge ({k}, {l}): contest matrices have the wrong shape")
        if np.max(np.abs(p_kl + p_lk.T - 1.0)) > 1e-12:
            raise InvalidInputError(f"edge ({k}, {l}): P^kl + (P^lk)^T must equal one")
        c_kl, c_lk = costs.get((k, l), (np.zeros(action_counts[k]), np.zeros(action_counts[l])))
        parts[(k, l)] = (p_kl, p_lk, np.asarray(c_kl, dtype=float), np.asarray(c_lk, dtype=float))
    return values, parts


def conflict_network(values, contests, action_counts, costs=None) -> NetworkGame:
    """``A^{kl}_ij = v_k P^{kl}_ij - c^{kl}_i`` on every edge.

    ``contests`` maps ``(k, l)`` to ``(P^{kl}, P^{lk})``; ``costs`` maps it to
    the action-cost vectors ``(c^{kl}, c^{lk})`` (zero when omitted).
    """
    values, parts = _conflict_parts(values, contests, costs, action_counts)
    mats = {
        (k, l): (values[k] * p_kl - c_kl[:, None], values[l] * p_lk - c_lk[:, None])
        for (k, l), (p_kl, p_lk, c_kl, c_lk) in parts.items()
    }
    return NetworkGame.from_edges(action_counts, mats)


def conflict_zero_sum_form(values, contests, action_counts, costs=None) -> NetworkGame:
    """Zero-sum game best-response equivalent to an equal-valuation conflict network.

    Each agent's action costs are also credited to its opponent (a term the
    opponent cannot influence) and the common valuation is subtracted from
    one side of every edge, which leaves each edge summing to zero.
    """
    values, parts = _conflict_parts(values, contests, costs, action_counts)
    if not np.allclose(values, values[0], rtol=0, atol=1e-12):
        raise InvalidInputError("zero-sum equivalence needs equal valuations")
    v = values[0]
    mats = {}
    for (k, l), (p_kl, p_lk, c_kl, c_lk) in parts.items():
        a = v * p_kl - c_kl[:, None] + c_lk[None, :] - v
        b = v * p_lk - c_lk[:, None] + c_kl[None, :]
        mats[(k, l)] = (a, b)
    return NetworkGame.from_edges(action_counts, mats)


def random_conflict_parts(n_agents, action_counts, seed, graph="complete"):
    rng = np.random.default_rng(seed)
    counts = tuple(action_counts)
    edges = graph_edges(graph, n_agents, rng)
    values = rng.uniform(0.5, 2.0, n_agents)
    contests, costs = {}, {}
    for k, l in edges:
        p = rng.uniform(0.0, 1.0, (counts[k], counts[l]))
        contests[(k, l)] = (p, 1.0 - p.T)
        costs[(k, l)] = (rng.uniform(0.0, 1.0, counts[k]), rng.uniform(0.0, 1.0, counts[l]))
    return values, contests, costs


def random_conflict_network(n_agents, action_counts, seed, graph="complete") -> NetworkGame:
    values, contests, costs = random_conflict_parts(n_agents, action_counts, seed, graph)
    return conflict_network(values, contests, tuple(action_counts), costs)


def edge_constants(game: NetworkGame, tol: float = 1e-12):
    """Per-edge constants if the game is pairwise constant-sum, else ``None``."""
    out = []
    for a, b in game.payoffs:
        s = a + b.T
        if np.max(s) - np.min(s) > tol:
            return None
        out.append(float(s.mean()))
    return np.array(out)


# ------------------------------------------------------------- embedding


@dataclass
class EmbeddingSpec:
    """Two base points (action-1 probabilities per agent) and a coefficient grid."""

    u: np.ndarray
    v: np.ndarray
    alphas: np.ndarray
    betas: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.alphas = np.asarray(self.alphas, dtype=float).reshape(-1)
        self.betas = np.asarray(self.betas, dtype=float).reshape(-1)
        for name, w in (("u", self.u), ("v", self.v)):
            if w.ndim != 1 or np.any(w <= 0) or np.any(w >= 1):
                raise InvalidInputError(f"{name} must lie strictly inside (0, 1)^N")
        if self.u.shape != self.v.shape:
            raise InvalidInputError("u and v need the same length")
        if not (np.all(np.isfinite(self.alphas)) and np.all(np.isfinite(self.betas))):
            raise InvalidInputError("grid coefficients must be finite")

    @classmethod
    def random(cls, n_agents, seed, extent=5.0, resolution=101) -> "EmbeddingSpec":
        rng = np.random.default_rng(seed)
        # open interval: Generator.uniform may return the lower end
        u = rng.uniform(0.0, 1.0, n_agents).clip(1e-6, 1 - 1e-6)
        v = rng.uniform(0.0, 1.0, n_agents).clip(1e-6, 1 - 1e-6)
        grid = np.linspace(-extent, extent, resolution)
        return cls(u, v, grid, grid)


def logit_embedding(spec: EmbeddingSpec) -> np.ndarray:
    """Action-1 probabilities, shape ``(len(alphas), len(betas), N)``, of the
    points ``sigmoid(alpha logit(u) + beta logit(v))``."""
    lu = np.log(spec.u) - np.log1p(-spec.u)
    lv = np.log(spec.v) - np.log1p(-spec.v)
    z = spec.alphas[:, None, None] * lu + spec.betas[None, :, None] * lv
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def embedding_kl(reference, probs: np.ndarray) -> np.ndarray:
    """``KL(p || z)`` at every grid point for two-action games."""
    p1 = np.array([np.asarray(pk, dtype=float)[0] for pk in reference])
    if any(len(pk) != 2 for pk in reference):
        raise InvalidInputError("the logit embedding needs two actions per agent")
    p2 = 1.0 - p1
    q1 = probs
    q2 = 1.0 - probs
    with np.errstate(divide="ignore"):
        terms = p1 * (np.log(p1) - np.log(q1)) + p2 * (np.log(p2) - np.log(q2))
    return terms.sum(axis=-1)


def embedding_strategy(probs_row) -> list[np.ndarray]:
    return [np.array([q, 1.0 - q]) for q in probs_row]


# ------------------------------------------------------------- file output


def fmt(x: float) -> str:
    return repr(float(x))


def trajectory_csv(trajectory: TrajectoryRecord) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "agent", "action", "prob", "kl_p_x", "kl_x_p"])
    off = trajectory.offsets
    for i, t in enumerate(trajectory.times):
        row = trajectory.states[i]
        kpx, kxp = fmt(trajectory.kl_p_x[i]), fmt(trajectory.kl_x_p[i])
        ts = fmt(t)
        for k in range(len(trajectory.action_counts)):
            for a in range(off[k + 1] - off[k]):
                w.writerow([ts, k, a, fmt(row[off[k] + a]), kpx, kxp])
    return buf.getvalue()


def write_text(path, text: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(text)


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def game_hash(game: NetworkGame) -> str:
    return hashlib.sha256(dumps_game(game).encode()).hexdigest()


def run_manifest(game, rates, step, horizon, seed, delta, radius, **extra) -> dict:
    out = {
        "game_sha256": game_hash(game),
        "temperatures": rates.tolist(),
        "step": float(step),
        "horizon": float(horizon),
        "seed": seed,
        "delta": None if delta is None else {"value": float(delta.value), "kind": delta.kind},
        "trap_radius": None if radius is None else float(radius),
        "iterations_per_time_unit": 1.0 / float(step),
    }
    out.update(extra)
    return out


# ---------------------------------------------------------------- campaign


@dataclass
class CampaignSpec:
    generator: GeneratorSpec
    runs: int = 1
    delta: float | None = None
    epsilon: float | None = None
    temperature: float | list[float] = 0.75
    step: float = DEFAULT_STEP
    horizon: float = 100.0
    record_every: int = 100
    seed: int = 0
    initial: str = "random"
    tail_fraction: float = TAIL_FRACTION
    noise_period: int | None = None
    workers: int = 1
    name: str = "campaign"

    def __post_init__(self):
        if isinstance(self.generator, dict):
            self.generator = GeneratorSpec.from_dict(self.generator)
        if self.runs < 1:
            raise InvalidInputError("a campaign needs at least one run")
        if (self.delta is None) == (self.epsilon is None):
            raise InvalidInputError("give exactly one of delta and epsilon")
        if (self.delta or 0) < 0 or (self.epsilon or 0) < 0:
            raise InvalidInputError("delta and epsilon must be non-negative")
        if self.initial not in ("random", "uniform"):
            raise InvalidInputError("initial must be 'random' or 'uniform'")
        if self.noise_period is not None and self.noise_period < 1:
            raise InvalidInputError("noise_period must be at least one step")

    @classmethod
    def from_dict(cls, data: dict) -> "CampaignSpec":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidInputError(f"unknown campaign fields {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "CampaignSpec":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidInputError(f"cannot read campaign spec {path}: {exc}") from exc
        return cls.from_dict(data)


def _run_one(args):
    spec, base, reference, epsilon, index = args
    rates = ExplorationRates.coerce(spec.temperature, base.n_agents)
    seq = np.random.SeedSequence([spec.seed, index])
    noise_seed, init_seed = (int(s.generate_state(1, np.uint64)[0]) for s in seq.spawn(2))
    if spec.initial == "uniform":
        x0 = uniform_strategy(base)
    else:
        x0 = random_interior_strategy(base, np.random.default_rng(init_seed))
    try:
        if spec.noise_period is None:
            game, delta = perturb_game(base, epsilon, noise_seed)
            traj = integrate(game, x0, rates, spec.horizon, spec.step, reference=reference,
                             delta=delta, record_every=spec.record_every)
        else:
            game, delta = base, delta_for_epsilon(base, epsilon)
            traj = noisy_run(base, rates, epsilon, spec.noise_period, spec.horizon, spec.step,
                             noise_seed, x0, reference, spec.record_every)
        radius = trap_radius(base.n_agents, delta, rates)
        region = TrapRegion(reference, radius, delta, rates)
        tail = asymptotic_kl(traj, region, spec.tail_fraction, atol=1e-6)
    except NumericalError as exc:
        return {"index": index, "status": "failed", "error": str(exc)}
    return {
        "index": index,
        "status": "ok",
        "game": dumps_game(game),
        "csv": trajectory_csv(traj),
        "manifest": run_manifest(
            game, rates, spec.step, spec.horizon, noise_seed, delta, radius,
            run_index=index, initial_seed=init_seed, base_game_sha256=game_hash(base),
            noise_period=spec.noise_period, max_tail_kl=tail.max_tail_kl,
            within_bound=tail.within_bound,
        ),
        "final": traj.states[-1].tolist(),
        "max_tail_kl": tail.max_tail_kl,
        "within_bound": tail.within_bound,
        "delta": delta.value,
        "radius": radius,
    }


def campaign(spec: CampaignSpec, out_dir) -> dict:
    """Generate one NZSG, then per run perturb, integrate and record diagnostics.

    Writes ``base_game.json``, ``qre.json``, one ``run_XXX/`` directory per
    run, ``runs.csv``, ``summary.csv`` and ``campaign.json`` under ``out_dir``.
    Returns the ``campaign.json`` content.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    base = generate_nzsg(spec.generator) if spec.generator.kind != "conflict_network" else None
    if base is None:
        raise InvalidInputError("campaigns perturb a network zero-sum game; use an nzsg kind")
    rates = ExplorationRates.coerce(spec.temperature, base.n_agents)
    reference = qre_solve(base, rates)
    epsilon = spec.epsilon if spec.epsilon is not None else epsilon_for_delta(base, spec.delta)
    write_text(out / "base_game.json", dumps_game(base))
    write_text(out / "qre.json", dumps_json({
        "temperatures": rates.tolist(), "qre": [pk.tolist() for pk in reference]}))

    jobs = [(spec, base, reference, epsilon, i) for i in range(spec.runs)]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    results.sort(key=lambda r: r["index"])

    rows = []
    finals = []
    for r in results:
        rdir = out / f"run_{r['index']:03d}"
        rdir.mkdir(exist_ok=True)
        if r["status"] != "ok":
            write_text(rdir / "manifest.json", dumps_json({"status": "failed", "error": r["error"]}))
            rows.append([r["index"], "failed", "", "", "", ""])
            continue
        write_text(rdir / "game.json", r["game"])
        write_text(rdir / "trajectory.csv", r["csv"])
        write_text(rdir / "manifest.json", dumps_json(r["manifest"]))
        rows.append([r["index"], "ok", fmt(r["delta"]), fmt(r["radius"]),
                     fmt(r["max_tail_kl"]), str(r["within_bound"]).lower()])
        finals.append(r["final"])

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["run", "status", "delta", "radius", "max_tail_kl", "within_bound"])
    w.writerows(rows)
    write_text(out / "runs.csv", buf.getvalue())

    summary = summary_table(base, reference, np.array(finals))
    write_text(out / "summary.csv", summary)
    failures = sum(r["status"] != "ok" for r in results)
    violations = sum(1 for r in results if r["status"] == "ok" and not r["within_bound"])
    report = {
        "name": spec.name,
        # worker count does not affect results, so it stays out of the record
        "spec": _jsonable({k: v for k, v in asdict(spec).items() if k != "workers"}),
        "base_game_sha256": game_hash(base),
        "epsilon": float(epsilon),
        "delta_certificate": delta_for_epsilon(base, epsilon).value,
        "trap_radius": trap_radius(base.n_agents, delta_for_epsilon(base, epsilon), rates),
        "runs": spec.runs,
        "failures": failures,
        "violations": violations,
    }
    write_text(out / "campaign.json", dumps_json(report))
    return report


def summary_table(base, reference, finals) -> str:
    """Per agent: QRE and min / quartiles / max of the final action-1 probability."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["agent", "qre", "min", "q1", "median", "q3", "max"])
    off = base.offsets
    for k in range(base.n_agents):
        if len(finals):
            col = finals[:, off[k]]
            stats = [np.min(col), *np.percentile(col, [25, 50, 75]), np.max(col)]
            cells = [fmt(s) for s in stats]
        else:
            cells = [""] * 5
        w.writerow([k, fmt(reference[k][0]), *cells])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj
