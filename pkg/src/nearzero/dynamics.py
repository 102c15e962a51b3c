"""Smooth Q-Learning dynamics, quantal response equilibria and the KL
diagnostics that certify the trapping region around an NZSG's QRE."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ._kernel import rk4_logit
from .game import (
    EPS_FLOOR,
    InvalidInputError,
    MpdBound,
    NetworkGame,
    NumericalError,
    check_interior,
    flatten,
    is_zero_sum,
    payoff,
    reward_flat,
    uniform_strategy,
)

log = logging.getLogger(__name__)

DEFAULT_STEP = 0.01
DEFAULT_DAMPING = 0.5
TAIL_FRACTION = 0.2


class IntegrationDiverged(NumericalError):
    def __init__(self, message, last_time):
        super().__init__(f"{message} (last finite state at t={last_time:g})")
        self.last_time = last_time


class QRENotConverged(NumericalError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class ExplorationRates:
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.size == 0 or not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise InvalidInputError(f"exploration rates must be positive, got {v}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def coerce(cls, T, n_agents: int) -> "ExplorationRates":
        """Accept a scalar, a per-agent sequence or an ``ExplorationRates``."""
        if isinstance(T, cls):
            rates = T
        elif np.ndim(T) == 0:
            rates = cls(np.full(n_agents, float(T)))
        else:
            rates = cls(np.asarray(T, dtype=float))
        if rates.values.size == 1 and n_agents > 1:
            rates = cls(np.full(n_agents, rates.values[0]))
        if rates.values.size != n_agents:
            raise InvalidInputError(f"need {n_agents} exploration rates, got {rates.values.size}")
        return rates

    @property
    def t_min(self) -> float:
        return float(self.values.min())

    @property
    def t_max(self) -> float:
        return float(self.values.max())

    def tolist(self):
        return [float(t) for t in self.values]


class _Layout:
    """Per-agent segment operations on flat vectors; reshapes when all agents
    have the same number of actions, which is the common and fast case."""

    def __init__(self, game: NetworkGame):
        self.counts = np.array(game.action_counts)
        self.offsets = game.offsets
        self.n = game.n_agents
        self.regular = bool(np.all(self.counts == self.counts[0]))
        self.width = int(self.counts[0])

    def seg_sum(self, v):
        if self.regular:
            return v.reshape(self.n, self.width).sum(axis=1)
        return np.add.reduceat(v, self.offsets[:-1])

    def expand(self, per_agent):
        if self.regular:
            return np.repeat(per_agent, self.width)
        return np.repeat(per_agent, self.counts)

    def center(self, v):
        if self.regular:
            vv = v.reshape(self.n, self.width)
            return (vv - vv.mean(axis=1, keepdims=True)).reshape(-1)
        return v - self.expand(self.seg_sum(v) / self.counts)

    def log_softmax(self, z):
        if self.regular:
            zz = z.reshape(self.n, self.width)
            m = zz.max(axis=1, keepdims=True)
            lse = m + np.log(np.exp(zz - m).sum(axis=1, keepdims=True))
            return (zz - lse).reshape(-1)
        m = self.expand(np.maximum.reduceat(z, self.offsets[:-1]))
        lse = np.log(self.seg_sum(np.exp(z - m)))
        return z - m - self.expand(lse)

    def softmax(self, z):
        return np.exp(self.log_softmax(z))


def _rates_flat(game, T):
    rates = ExplorationRates.coerce(T, game.n_agents)
    return rates, np.repeat(rates.values, game.action_counts)


def _interior(game, x):
    xf = flatten(game, x)
    check_interior(xf)
    return xf


# ------------------------------------------------------------- vector field


def qld_vector_field(game: NetworkGame, x, T) -> list[np.ndarray]:
    """Q-Learning dynamics velocity at interior ``x``; tangent to every simplex."""
    xf = _interior(game, x)
    lay = _Layout(game)
    _, tf = _rates_flat(game, T)
    r = reward_flat(game, xf)
    lx = np.log(xf)
    avg = lay.expand(lay.seg_sum(xf * r))
    neg_ent = lay.expand(lay.seg_sum(xf * lx))
    return game.split(xf * (r - avg + tf * (neg_ent - lx)))


def perturbed_reward(game: NetworkGame, x, k: int, T) -> np.ndarray:
    """Reward of agent k in the entropy-perturbed game: ``r_k - T_k (ln x_k + 1)``.

    ``T`` may contain zeros here (recovering the plain reward); ``x`` must be
    interior whenever ``T_k > 0``.
    """
    xf = flatten(game, x)
    tk = float(np.broadcast_to(np.asarray(T, dtype=float), (game.n_agents,))[k])
    r = game.split(reward_flat(game, xf))[k]
    if tk == 0.0:
        return r
    xk = game.split(xf)[k]
    check_interior(xk)
    return r - tk * (np.log(xk) + 1.0)


def perturbed_payoff(game: NetworkGame, x, k: int, T) -> float:
    """Payoff plus ``T_k`` times the Shannon entropy of ``x_k``."""
    xf = flatten(game, x)
    tk = float(np.broadcast_to(np.asarray(T, dtype=float), (game.n_agents,))[k])
    u = payoff(game, xf, k)
    if tk == 0.0:
        return u
    xk = game.split(xf)[k]
    check_interior(xk)
    return u - tk * float(xk @ np.log(xk))


def replicator_form(game: NetworkGame, x, T) -> list[np.ndarray]:
    """Replicator velocity in the perturbed game, ``x_ki (r^H_ki - <x_k, r^H_k>)``."""
    xf = _interior(game, x)
    parts = game.split(xf)
    out = []
    for k, xk in enumerate(parts):
        rh = perturbed_reward(game, xf, k, T)
        out.append(xk * (rh - xk @ rh))
    return out


# ------------------------------------------------------------------ KL


def kl_divergence(y, x) -> float:
    """``sum_k sum_i y_ki ln(y_ki / x_ki)`` with ``0 ln 0 = 0``; ``inf`` when x
    vanishes where y does not."""
    total = 0.0
    for yk, xk in zip(y, x, strict=True):
        yk = np.asarray(yk, dtype=float)
        xk = np.asarray(xk, dtype=float)
        if yk.shape != xk.shape:
            raise InvalidInputError("strategies differ in shape")
        mask = yk > 0
        if np.any(xk[mask] <= 0):
            return float("inf")
        total += float(np.sum(yk[mask] * (np.log(yk[mask]) - np.log(xk[mask]))))
    return total


# ------------------------------------------------------------ integration


@dataclass
class TrajectoryRecord:
    """States of one integration run plus KL diagnostics against ``reference``.

    ``states`` and ``log_states`` are stacked flat joint strategies, one row per
    entry of ``times``.  The diagnostics are NaN when no reference is set.
    """

    action_counts: tuple[int, ...]
    times: np.ndarray
    states: np.ndarray
    log_states: np.ndarray
    reference: np.ndarray | None = None
    radius: float | None = None
    kl_p_x: np.ndarray | None = None
    kl_x_p: np.ndarray | None = None
    condition: np.ndarray | None = None

    def __post_init__(self):
        self.attach_reference(self.reference, self.radius)

    @property
    def offsets(self):
        return np.concatenate([[0], np.cumsum(self.action_counts)]).astype(int)

    def strategy(self, i: int) -> list[np.ndarray]:
        return np.split(self.states[i], self.offsets[1:-1])

    @property
    def final(self) -> list[np.ndarray]:
        return self.strategy(-1)

    def attach_reference(self, reference, radius=None) -> None:
        """(Re)compute the diagnostics against a reference point."""
        if reference is not None and not isinstance(reference, np.ndarray):
            reference = np.concatenate([np.asarray(p, dtype=float).reshape(-1) for p in reference])
        self.reference = reference
        self.radius = radius
        n = len(self.times)
        self.condition = np.zeros(n, dtype=bool)
        if reference is None:
            self.kl_p_x = np.full(n, np.nan)
            self.kl_x_p = np.full(n, np.nan)
            return
        pos = reference > 0
        with np.errstate(divide="ignore"):
            logp = np.log(reference)
        # 0 ln 0 = 0 on the forward divergence
        fwd = np.where(pos, logp, 0.0)[None, :] - self.log_states
        self.kl_p_x = (np.where(pos, reference, 0.0)[None, :] * fwd).sum(axis=1)
        self.kl_x_p = (self.states * (self.log_states - logp[None, :])).sum(axis=1)
        if radius is not None:
            self.condition = radius < self.kl_p_x + self.kl_x_p


def run_logit(matrix, tf, offsets, z, step, n_steps, record_every=1, t0=0.0):
    """Advance centred logits ``z`` by ``n_steps`` RK4 steps.

    Returns ``(z_final, recorded_steps, recorded_log_probs)``; raises
    :class:`IntegrationDiverged` on a non-finite update.
    """
    z_end, steps, logs, failed = rk4_logit(
        np.ascontiguousarray(matrix, dtype=float), np.ascontiguousarray(tf, dtype=float),
        np.asarray(offsets, dtype=np.int64), np.ascontiguousarray(z, dtype=float),
        float(step), int(n_steps), int(record_every),
    )
    if failed >= 0:
        raise IntegrationDiverged("non-finite state", t0 + (failed - 1) * step)
    return z_end, steps, logs


def to_logits(lay, xf):
    return lay.center(np.log(xf))


def integrate(game: NetworkGame, x0, T, horizon: float, step: float = DEFAULT_STEP,
              reference=None, delta=None, record_every: int = 1) -> TrajectoryRecord:
    """Integrate the Q-Learning dynamics with fixed-step RK4.

    The state is carried in centred logit coordinates
    ``z_ki = ln x_ki - mean_j ln x_kj``, in which the flow reads
    ``dz/dt = centre(r(softmax z)) - T z``; positivity and normalisation of the
    strategies then hold by construction.

    If ``reference`` (a QRE) is given the KL diagnostics are filled in; with
    ``delta`` as well, the trap radius ``N delta / T_min`` sets the condition flag.
    """
    if step <= 0 or horizon < step:
        raise InvalidInputError("need step > 0 and horizon >= step")
    if record_every < 1:
        raise InvalidInputError("record_every must be at least 1")
    xf = _interior(game, x0)
    lay = _Layout(game)
    rates, tf = _rates_flat(game, T)
    n_steps = int(round(horizon / step))
    z = to_logits(lay, xf)
    _, steps, logs = run_logit(game.block_matrix, tf, game.offsets, z, step, n_steps, record_every)
    steps = np.concatenate([[0], steps])
    logs = np.vstack([lay.log_softmax(z)[None, :], logs])
    return _make_record(game, rates, steps * step, logs, reference, delta)


def _make_record(game, rates, times, logs, reference, delta):
    radius = None
    if reference is not None:
        reference = flatten(game, reference)
        if delta is not None:
            radius = trap_radius(game.n_agents, delta, rates)
    return TrajectoryRecord(game.action_counts, times, np.exp(logs), logs, reference, radius)


# --------------------------------------------------------- discrete Q-update


@dataclass(frozen=True)
class QState:
    q: tuple[np.ndarray, ...]
    alpha: np.ndarray

    def __post_init__(self):
        q = tuple(np.asarray(v, dtype=float) for v in self.q)
        a = np.array(self.alpha, dtype=float).reshape(-1)
        if a.size == 1 and len(q) > 1:
            a = np.full(len(q), a[0])
        if a.size != len(q) or np.any(a <= 0) or np.any(a > 1):
            raise InvalidInputError("learning rates must lie in (0, 1], one per agent")
        if not all(np.all(np.isfinite(v)) for v in q):
            raise InvalidInputError("Q-values must be finite")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "alpha", a)


def boltzmann(q, t: float) -> np.ndarray:
    z = np.asarray(q, dtype=float) / t
    z = np.exp(z - z.max())
    return z / z.sum()


def discrete_q_step(game: NetworkGame, state: QState, T, opponents_x):
    """One synchronous Q-update against ``opponents_x``; returns the new state
    and the Boltzmann policy it induces."""
    rates = ExplorationRates.coerce(T, game.n_agents)
    r = game.split(reward_flat(game, flatten(game, opponents_x)))
    q = tuple((1.0 - a) * qk + a * rk for qk, rk, a in zip(state.q, r, state.alpha))
    policy = [boltzmann(qk, t) for qk, t in zip(q, rates.values)]
    return QState(q, state.alpha), policy


# ---------------------------------------------------------------------- QRE


def logit_response(game: NetworkGame, xf: np.ndarray, tf: np.ndarray, lay=None) -> np.ndarray:
    lay = lay or _Layout(game)
    return lay.softmax(reward_flat(game, xf) / tf)


def qre_residual(game: NetworkGame, x, T) -> float:
    """``max |p_ki - softmax(r_k(p_{-k}) / T_k)_i|``."""
    xf = flatten(game, x)
    _, tf = _rates_flat(game, T)
    return float(np.max(np.abs(xf - logit_response(game, xf, tf))))


class _ReducedQRE:
    """QRE equations in ``w_k = ln(x_k[:-1] / x_k[-1])``, scaled by ``lam``:
    ``H(w, lam) = w - lam (r_k[:-1] - r_k[-1]) / T_k``."""

    def __init__(self, game, tf):
        off = game.offsets
        counts = game.action_counts
        self.game = game
        self.lay = _Layout(game)
        self.off = off
        self.red = np.concatenate([np.arange(off[k], off[k + 1] - 1) for k in range(game.n_agents)])
        self.last = np.repeat(off[1:] - 1, [n - 1 for n in counts])
        self.agent_of = np.repeat(np.arange(game.n_agents), [n - 1 for n in counts])
        self.t_red = tf[self.red]
        self.mat = np.asarray(game.block_matrix)
        self.n = len(self.red)

    def to_x(self, w):
        full = np.zeros(self.game.dim)
        full[self.red] = w
        return self.lay.softmax(full)

    def from_x(self, xf):
        return np.log(xf[self.red]) - np.log(xf[self.last])

    def gap(self, w):
        r = self.mat @ self.to_x(w)
        return (r[self.red] - r[self.last]) / self.t_red

    def resid(self, w, lam=1.0):
        return w - lam * self.gap(w)

    def jac(self, w, lam=1.0):
        """``(dH/dw, dH/dlam)``."""
        x = self.to_x(w)
        # within agent k, dx_i/dw_j = x_i (delta_ij - x_j) for j < n_k
        jx = np.zeros((self.game.dim, self.n))
        for c, (j, k) in enumerate(zip(self.red, self.agent_of)):
            seg = slice(self.off[k], self.off[k + 1])
            jx[seg, c] = -x[seg] * x[j]
            jx[j, c] += x[j]
        dr = self.mat @ jx
        jw = np.eye(self.n) - lam * (dr[self.red] - dr[self.last]) / self.t_red[:, None]
        return jw, -self.gap(w)


def _newton_qre(game, tf, xf, tol=1e-13, max_iter=60):
    """Damped Newton at full temperature scale in reduced log-ratio coordinates."""
    eq = _ReducedQRE(game, tf)
    w = eq.from_x(xf)
    f = eq.resid(w)
    for _ in range(max_iter):
        fn = np.max(np.abs(f))
        if fn < tol:
            break
        try:
            dw = np.linalg.solve(eq.jac(w)[0], -f)
        except np.linalg.LinAlgError:
            return w, eq.to_x(w), np.inf
        scale = 1.0
        while scale > 1e-6:
            w_try = w + scale * dw
            f_try = eq.resid(w_try)
            if np.all(np.isfinite(f_try)) and np.max(np.abs(f_try)) < fn:
                break
            scale *= 0.5
        else:
            break
        w, f = w_try, f_try
    return w, eq.to_x(w), float(np.max(np.abs(f)))


def _tangent(eq, w, lam, prev=None):
    jw, jl = eq.jac(w, lam)
    full = np.hstack([jw, jl[:, None]])
    t = np.linalg.svd(full)[2][-1]
    if prev is not None and t @ prev < 0:
        t = -t
    elif prev is None and t[-1] < 0:
        t = -t
    return t


def _arclength_qre(game, tf, max_steps=20_000):
    """Trace the principal logit-QRE branch from uniform play (``lam = 0``) to
    ``lam = 1`` with pseudo-arclength continuation; the branch may fold in
    ``lam``, which plain continuation in the temperature cannot follow."""
    eq = _ReducedQRE(game, tf)
    y = np.zeros(eq.n + 1)
    t = _tangent(eq, y[:-1], 0.0)
    h = 0.1
    for _ in range(max_steps):
        pred = y + h * t
        cur = pred.copy()
        ok = False
        for _ in range(8):
            jw, jl = eq.jac(cur[:-1], cur[-1])
            f = np.append(eq.resid(cur[:-1], cur[-1]), t @ (cur - pred))
            if np.max(np.abs(f)) < 1e-11:
                ok = True
                break
            big = np.vstack([np.hstack([jw, jl[:, None]]), t])
            try:
                cur = cur - np.linalg.solve(big, f)
            except np.linalg.LinAlgError:
                break
            if not np.all(np.isfinite(cur)):
                break
        if not ok:
            h *= 0.5
            if h < 1e-10:
                return None
            continue
        if cur[-1] >= 1.0:
            # interpolate to lam = 1 and finish with Newton
            a = (1.0 - y[-1]) / (cur[-1] - y[-1])
            w0 = y[:-1] + a * (cur[:-1] - y[:-1])
            _, x, fres = _newton_qre(game, tf, eq.to_x(w0))
            return x if np.isfinite(fres) else None
        t = _tangent(eq, cur[:-1], cur[-1], t)
        y = cur
        h = min(2.0 * h, 1.0)
    return None


def qre_solve(game: NetworkGame, T, init=None, damping: float = DEFAULT_DAMPING,
              tol: float = 1e-10, max_iter: int = 100_000) -> list[np.ndarray]:
    """Quantal response equilibrium with exploration rates ``T``.

    Damped fixed-point iteration ``x <- (1 - damping) x + damping softmax(r / T)``
    first; if the residual has not decreased over 100 sweeps the dynamics are
    integrated instead.  The result is polished with Newton's method, and as a
    last resort traced along the principal branch from uniform play.
    """
    if not 0 < damping <= 1:
        raise InvalidInputError("damping must lie in (0, 1]")
    rates, tf = _rates_flat(game, T)
    lay = _Layout(game)
    xf = _interior(game, uniform_strategy(game) if init is None else init)

    history = []
    stalled = False
    for it in range(max_iter):
        br = logit_response(game, xf, tf, lay)
        res = float(np.max(np.abs(xf - br)))
        if res < tol:
            return game.split(xf)
        history.append(res)
        # ties go to the ODE fallback
        if it >= 100 and res >= history[it - 100]:
            stalled = True
            break
        xf = (1.0 - damping) * xf + damping * br
    best = xf

    if stalled:
        log.debug("fixed-point iteration stalled at residual %.3e; integrating", res)
        z = to_logits(lay, np.clip(xf, EPS_FLOOR, None))
        horizon = 0.0
        budget = max(500.0, 60.0 / rates.t_min)
        while horizon < budget:
            z, _, _ = run_logit(game.block_matrix, tf, game.offsets, z, DEFAULT_STEP, 1000, 1000,
                                horizon)
            horizon += 1000 * DEFAULT_STEP
            best = lay.softmax(z)
            if np.max(np.abs(best - logit_response(game, best, tf, lay))) < 1e-6:
                break

    _, x_new, fres = _newton_qre(game, tf, np.clip(best, 1e-300, None))
    if np.all(np.isfinite(x_new)) and np.max(np.abs(x_new - logit_response(game, x_new, tf, lay))) < tol:
        return game.split(x_new)

    x_cont = _arclength_qre(game, tf)
    if x_cont is not None:
        res = float(np.max(np.abs(x_cont - logit_response(game, x_cont, tf, lay))))
        if res < tol:
            return game.split(x_cont)
    final = float(np.max(np.abs(best - logit_response(game, best, tf, lay))))
    raise QRENotConverged("QRE solver did not converge", final)


def approximate_nash_gap(game: NetworkGame, x) -> float:
    """Largest gain any agent gets from a unilateral pure deviation."""
    xf = flatten(game, x)
    r = game.split(reward_flat(game, xf))
    return float(max(np.max(rk) - xk @ rk for rk, xk in zip(r, game.split(xf))))


# ----------------------------------------------------------- trap region


def _delta_value(delta) -> float:
    value = delta.value if isinstance(delta, MpdBound) else float(delta)
    if not np.isfinite(value) or value < 0:
        raise InvalidInputError(f"delta must be a finite non-negative number, got {value}")
    return value


def trap_radius(n_agents: int, delta, T) -> float:
    rates = ExplorationRates.coerce(T, n_agents)
    return n_agents * _delta_value(delta) / rates.t_min


@dataclass(frozen=True)
class TrapRegion:
    reference: list
    radius: float
    delta: MpdBound
    rates: ExplorationRates


def trap_region(game_zs: NetworkGame, delta, T, init=None) -> TrapRegion:
    """QRE of the zero-sum game and the KL radius ``N delta / T_min`` around it."""
    if not is_zero_sum(game_zs):
        raise InvalidInputError("trap regions are defined around network zero-sum games")
    rates = ExplorationRates.coerce(T, game_zs.n_agents)
    bound = delta if isinstance(delta, MpdBound) else MpdBound(_delta_value(delta), "given")
    p = qre_solve(game_zs, rates, init=init)
    return TrapRegion(p, trap_radius(game_zs.n_agents, bound, rates), bound, rates)


@dataclass(frozen=True)
class LyapunovCheck:
    lhs: float  # N delta / T_min
    rhs: float  # KL(p || x) + KL(x || p)
    derivative: float  # d/dt KL(p || x) along the flow of `game`
    condition: bool
    decrease_observed: bool

    @property
    def consistent(self) -> bool:
        return self.decrease_observed or not self.condition


def kl_time_derivative(game: NetworkGame, x, p, T) -> float:
    """``d/dt KL(p || x) = sum_k (x_k - p_k)^T [r_k(x_{-k}) - T_k ln x_k]``."""
    xf = _interior(game, x)
    pf = flatten(game, p)
    _, tf = _rates_flat(game, T)
    return float((xf - pf) @ (reward_flat(game, xf) - tf * np.log(xf)))


def lyapunov_check(game: NetworkGame, x, p, T, delta) -> LyapunovCheck:
    xf = _interior(game, x)
    pf = _interior(game, p)
    rates = ExplorationRates.coerce(T, game.n_agents)
    lhs = trap_radius(game.n_agents, delta, rates)
    xs, ps = game.split(xf), game.split(pf)
    rhs = kl_divergence(ps, xs) + kl_divergence(xs, ps)
    deriv = kl_time_derivative(game, xf, pf, rates)
    return LyapunovCheck(lhs, rhs, deriv, lhs < rhs, deriv < 0)


@dataclass(frozen=True)
class TailKL:
    max_tail_kl: float
    within_bound: bool


def asymptotic_kl(trajectory: TrajectoryRecord, region: TrapRegion,
                  tail_fraction: float = TAIL_FRACTION, atol: float = 0.0) -> TailKL:
    """Largest ``KL(p || x(t))`` over the final ``tail_fraction`` of the run."""
    if not 0 < tail_fraction <= 1:
        raise InvalidInputError("tail_fraction must lie in (0, 1]")
    if len(trajectory.times) == 0:
        raise InvalidInputError("empty trajectory")
    ref = np.concatenate([np.asarray(p, dtype=float) for p in region.reference])
    if trajectory.reference is None or not np.array_equal(trajectory.reference, ref):
        trajectory.attach_reference(ref, region.radius)
    t = trajectory.times
    start = t[-1] - tail_fraction * (t[-1] - t[0])
    tail = trajectory.kl_p_x[t >= start - 1e-12]
    worst = float(np.max(tail))
    return TailKL(worst, worst <= region.radius + atol)
