"""Acceptance suite: one PASS/FAIL line per criterion, shown in the pytest summary."""

import json

import numpy as np
import pytest

from conftest import random_game, random_nzsg, report
from nearzero.cli import main
from nearzero.dynamics import (
    ExplorationRates,
    TrapRegion,
    approximate_nash_gap,
    asymptotic_kl,
    integrate,
    lyapunov_check,
    qld_vector_field,
    qre_residual,
    qre_solve,
    replicator_form,
    trap_radius,
)
from nearzero.experiments import (
    epsilon_for_delta,
    noisy_run,
    conflict_preset,
    perturb_game,
    tail_spread,
)
from nearzero.game import (
    NetworkGame,
    flatten,
    is_zero_sum,
    mpd_bound_2norm,
    mpd_bound_abs,
    mpd_enumerate,
    mpd_exact,
    perturbed_game_mpd_identity_check,
    random_interior_strategy,
)
from nearzero.projection import nearest_nzsg
from oracles import brute_mpd, kkt_oracle

pytestmark = pytest.mark.slow

T = 0.75
HORIZON = 500.0
STEP = 0.01


def certified_pairs():
    """(base NZSG, perturbed game, delta from the abs bound) for N in {3, 5, 10}."""
    pairs = []
    for n, graph in ((3, "chain"), (5, "random"), (10, "random")):
        for i in range(18):
            base = random_nzsg(100 * n + i, n, 2 if i % 3 else 3, graph)
            target = (0.25, 0.75, 2.0)[i % 3]
            noisy, _ = perturb_game(base, epsilon_for_delta(base, target), 7 * i + n)
            pairs.append((base, noisy, mpd_bound_abs(base, noisy)))
    return pairs


@pytest.fixture(scope="module")
def pairs():
    return certified_pairs()


def test_trap_region_bound(pairs):
    worst_ratio, violations = 0.0, 0
    for i, (base, noisy, delta) in enumerate(pairs):
        p = qre_solve(base, T)
        x0 = random_interior_strategy(base, np.random.default_rng(i))
        traj = integrate(noisy, x0, T, HORIZON, STEP, reference=p, delta=delta, record_every=10)
        radius = trap_radius(base.n_agents, delta, T)
        tail = asymptotic_kl(traj, TrapRegion(p, radius, delta, ExplorationRates.coerce(T, base.n_agents)),
                             tail_fraction=0.2, atol=1e-6)
        violations += not tail.within_bound
        worst_ratio = max(worst_ratio, tail.max_tail_kl / radius)
    ok = report("trap region bound", violations == 0,
                f"{len(pairs)} runs over N in {{3,5,10}}, {violations} above N*delta/T_min + 1e-6, "
                f"largest tail KL / radius = {worst_ratio:.3g}")
    assert ok and len(pairs) >= 50


def test_lyapunov_decrease(pairs):
    violations, active, checked = 0, 0, 0
    for i, (base, noisy, delta) in enumerate(pairs):
        p = qre_solve(base, T)
        rng = np.random.default_rng(1000 + i)
        for j in range(1000):
            # spread the samples from the centre out to the faces
            conc = (0.05, 0.3, 1.0, 5.0)[j % 4]
            x = [rng.dirichlet(np.full(n, conc)).clip(1e-10) for n in base.action_counts]
            x = [xk / xk.sum() for xk in x]
            chk = lyapunov_check(noisy, x, p, T, delta)
            checked += 1
            active += chk.condition
            violations += not chk.consistent
    ok = report("Lyapunov decrease", violations == 0 and active > 0,
                f"{checked} states over {len(pairs)} pairs, condition held at {active}, "
                f"{violations} without strict decrease")
    assert ok


def test_nzsg_convergence():
    worst_res, worst_gap = 0.0, 0.0
    for i in range(20):
        n = (3, 4, 5, 6, 10)[i % 5]
        g = random_nzsg(500 + i, n, (2, 3)[i % 2], ("chain", "complete", "random")[i % 3])
        p = qre_solve(g, T)
        traj = integrate(g, random_interior_strategy(g, np.random.default_rng(i)), T, HORIZON,
                         STEP, record_every=1000)
        worst_res = max(worst_res, qre_residual(g, traj.final, T))
        worst_gap = max(worst_gap, float(np.max(np.abs(traj.states[-1] - flatten(g, p)))))
    ok = report("NZSG convergence", worst_res < 1e-8 and worst_gap < 1e-6,
                f"20 games, worst QRE residual {worst_res:.2e} (< 1e-8), "
                f"worst sup distance to qre_solve {worst_gap:.2e} (< 1e-6)")
    assert ok


def test_projection_optimality():
    rng = np.random.default_rng(2024)
    worst_obj, worst_entry, worst_idem, not_zs = 0.0, 0.0, 0.0, 0
    for _ in range(50):
        n = int(rng.integers(2, 6))
        counts = tuple(int(v) for v in rng.integers(2, 5, n))
        g = random_game(rng, n, counts, graph="random", scale=float(rng.uniform(0.5, 5)))
        res = nearest_nzsg(g)
        y, obj, _ = kkt_oracle(g)
        ours = np.concatenate([np.concatenate([a.ravel(), b.ravel()]) for a, b in res.projected.payoffs]
                              + [res.constants])
        worst_obj = max(worst_obj, abs(res.objective - obj))
        worst_entry = max(worst_entry, float(np.max(np.abs(ours - y))))
        not_zs += not is_zero_sum(res.projected, 1e-8)
        again = nearest_nzsg(res.projected)
        moved = max(float(np.max(np.abs(a2 - a))) for (a, _), (a2, _) in
                    zip(res.projected.payoffs, again.projected.payoffs))
        worst_idem = max(worst_idem, again.objective, moved)
    ok = report("projection optimality",
                worst_obj < 1e-8 and worst_entry < 1e-6 and not_zs == 0 and worst_idem < 1e-10,
                f"50 games vs KKT oracle: objective error {worst_obj:.1e}, entry error "
                f"{worst_entry:.1e}, {not_zs} outputs not zero-sum, idempotence {worst_idem:.1e}")
    assert ok


def test_conflict_network():
    gc = conflict_preset()
    res = nearest_nzsg(gc)
    gz = res.projected
    cert = res.delta_2norm.value
    exact = mpd_exact(gc, gz)
    starts = [random_interior_strategy(gc, np.random.default_rng(s)) for s in range(5)]
    tails = {}
    contained = True
    for t in (0.35, 0.5, 2.5):
        p = qre_solve(gz, t)
        radius = trap_radius(3, exact, t)
        region = TrapRegion(p, radius, exact, ExplorationRates.coerce(t, 3))
        tails[t] = []
        for x0 in starts:
            traj = integrate(gc, x0, t, HORIZON, STEP, reference=p, delta=exact, record_every=10)
            tail = asymptotic_kl(traj, region, atol=1e-6)
            contained &= tail.within_bound
            tails[t].append(tail.max_tail_kl)
    trend = all(a > b for a, b in zip(tails[0.35], tails[2.5]))
    cert_ok = cert <= 7.2
    detail = (f"2-norm certificate {cert:.4g} {'<=' if cert_ok else '>'} 7.2 "
              f"(exact MPD {exact.value:.4g}); trap containment with exact delta "
              f"{'held' if contained else 'broken'} at T in {{0.35, 0.5, 2.5}}; tail KL "
              f"{max(tails[0.35]):.3g} at T=0.35 vs {max(tails[2.5]):.3g} at T=2.5 "
              f"({'decreasing' if trend else 'not decreasing'} on all 5 starts)")
    ok = report("conflict network", cert_ok and contained and trend, detail)
    assert ok


def dyadic_game(rng, counts):
    """Entries on a 1/64 grid, so every sum in the MPD is exact in floating point."""
    g = random_game(rng, len(counts), counts, graph="complete")
    return g.map_payoffs(lambda i, e, a, b: (np.round(a * 128) / 64, np.round(b * 128) / 64))


def test_mpd_ordering():
    rng = np.random.default_rng(77)
    order_bad, oracle_bad, enum_bad = 0, 0, 0
    for i in range(100):
        counts = tuple(int(v) for v in rng.integers(2, 4, int(rng.integers(2, 5))))
        g1, g2 = dyadic_game(rng, counts), dyadic_game(rng, counts)
        exact = mpd_exact(g1, g2).value
        order_bad += not (exact <= mpd_bound_abs(g1, g2).value and exact <= mpd_bound_2norm(g1, g2).value)
        oracle_bad += exact != brute_mpd(g1, g2)
        f1, f2 = random_game(rng, 3, (2, 3, 2)), random_game(rng, 3, (2, 3, 2))
        enum_bad += mpd_exact(f1, f2).value != mpd_enumerate(f1, f2).value
    ok = report("MPD ordering", order_bad == 0 and oracle_bad == 0 and enum_bad == 0,
                f"100 pairs: {order_bad} ordering violations, {oracle_bad} mismatches with "
                f"independent enumeration (exact arithmetic), {enum_bad} with profile enumeration")
    assert ok


def test_qre_gap():
    rng = np.random.default_rng(31)
    violations, worst = 0, 0.0
    for i in range(100):
        t = (0.1, 0.75, 2.5)[i % 3]
        n = int(rng.integers(2, 6))
        counts = tuple(int(v) for v in rng.integers(2, 5, n))
        g = random_game(rng, n, counts, graph="random", scale=float(rng.uniform(0.5, 3)))
        p = qre_solve(g, t)
        bound = t * np.log(max(counts))
        gap = approximate_nash_gap(g, p)
        violations += gap > bound
        worst = max(worst, gap / bound)
    ok = report("QRE approximate Nash", violations == 0,
                f"100 games at T in {{0.1, 0.75, 2.5}}: {violations} violations, "
                f"largest gap / bound = {worst:.3g}")
    assert ok


def test_perturbed_identities():
    rng = np.random.default_rng(5)
    worst_field = 0.0
    g = random_game(rng, 4, (2, 3, 4, 2), graph="complete", scale=3.0)
    for _ in range(1000):
        t = rng.uniform(0.05, 3.0, 4)
        x = random_interior_strategy(g, rng)
        a = np.concatenate(qld_vector_field(g, x, t))
        b = np.concatenate(replicator_form(g, x, t))
        worst_field = max(worst_field, float(np.max(np.abs(a - b))))
    g2 = random_game(rng, 4, (2, 3, 4, 2), graph="complete", scale=3.0)
    ok_mpd, worst_mpd = perturbed_game_mpd_identity_check(g, g2, [0.1, 0.75, 2.5, 1.0],
                                                         samples=1000, seed=9, tol=1e-10)
    ok = report("perturbed-game identities", worst_field < 1e-12 and ok_mpd,
                f"vector field vs perturbed replicator {worst_field:.1e} (< 1e-12), "
                f"entropy cancellation in the MPD integrand {worst_mpd:.1e} (< 1e-10), 1000 points each")
    assert ok


def test_noise_robustness():
    g = random_nzsg(1, 3, 2)
    p = qre_solve(g, T)
    exits, non_monotone, spreads = 0, 0, []
    for seed in range(5):
        row = []
        for delta in (0.75, 2.0, 3.0):
            traj = noisy_run(g, T, epsilon_for_delta(g, delta), 50, HORIZON, STEP, seed=seed,
                             x0=random_interior_strategy(g, np.random.default_rng(seed)),
                             reference=p, record_every=10)
            after = traj.times >= 0.2 * traj.times[-1]
            exits += int(np.any(traj.kl_p_x[after] > traj.radius))
            row.append(tail_spread(traj))
        non_monotone += not (row[0] < row[1] < row[2])
        spreads.append(row)
    mean = np.mean(spreads, axis=0)
    ok = report("noise robustness", exits == 0 and non_monotone == 0,
                f"5 seeds x delta in {{0.75, 2, 3}}: {exits} trap exits after burn-in, "
                f"{non_monotone} seeds with non-monotone tail spread, mean spread "
                f"{mean[0]:.3g} / {mean[1]:.3g} / {mean[2]:.3g}")
    assert ok


def test_cli_determinism(tmp_path):
    gdir = tmp_path / "g"
    main(["generate", "--agents", "3", "--actions", "2", "--seed", "11", "--out", str(gdir)])
    base = str(gdir / "game.json")
    main(["perturb", "--game", base, "--delta", "0.75", "--seed", "3", "--out", str(tmp_path / "p")])
    other = str(tmp_path / "p" / "perturbed.json")
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"generator": {"agents": 4, "seed": 2, "graph": "random"},
                                "runs": 4, "delta": 2.0, "horizon": 20.0, "record_every": 20,
                                "seed": 1, "workers": 2}))
    commands = [
        ["generate", "--kind", "conflict_network", "--agents", "4", "--actions", "3", "--seed", "8"],
        ["perturb", "--game", base, "--delta", "2", "--seed", "4"],
        ["project", "--game", other],
        ["mpd", "--game", base, "--other", other],
        ["qre", "--game", other, "--temp", "0.1,0.75,2.5"],
        ["simulate", "--game", other, "--reference", base, "--horizon", "20", "--seed", "6"],
        ["noisy-sim", "--game", base, "--delta", "3", "--horizon", "20", "--seed", "6"],
        ["embed", "--game", base, "--resolution", "31", "--seed", "6"],
        ["campaign", "--spec", str(spec)],
    ]
    differing = []
    for cmd in commands:
        outs = []
        for run in ("first", "second"):
            d = tmp_path / cmd[0] / run
            assert main(cmd + ["--out", str(d)]) == 0
            outs.append({q.relative_to(d).as_posix(): q.read_bytes()
                         for q in sorted(d.rglob("*")) if q.is_file()})
        if not outs[0] or outs[0] != outs[1]:
            differing.append(cmd[0])
    ok = report("CLI determinism", not differing,
                f"{len(commands)} subcommands re-run, byte-identical outputs"
                + (f" except {differing}" if differing else ""))
    assert ok
