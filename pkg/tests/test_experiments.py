import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_nzsg
from nearzero.dynamics import integrate, qld_vector_field, qre_solve, trap_radius
from nearzero.experiments import (
    CampaignSpec,
    EmbeddingSpec,
    GeneratorSpec,
    campaign,
    conflict_network,
    conflict_zero_sum_form,
    delta_for_epsilon,
    embedding_kl,
    epsilon_for_delta,
    generate,
    logit_embedding,
    noisy_run,
    conflict_preset,
    perturb_game,
    random_conflict_parts,
    tail_spread,
)
from nearzero.game import (
    InvalidInputError,
    dumps_game,
    is_zero_sum,
    mpd_bound_abs,
    mpd_exact,
    payoff,
    random_interior_strategy,
    uniform_strategy,
)

seeds = st.integers(0, 2**32 - 1)


@given(seeds, st.sampled_from(["chain", "complete", "random"]), st.integers(2, 6))
def test_generator_is_zero_sum_and_deterministic(seed, graph, n):
    spec = GeneratorSpec(agents=n, actions=3, seed=seed, graph=graph)
    g = generate(spec)
    assert is_zero_sum(g)
    assert dumps_game(generate(spec)) == dumps_game(g)


def test_generator_validation():
    with pytest.raises(InvalidInputError):
        GeneratorSpec(kind="nope")
    with pytest.raises(InvalidInputError):
        GeneratorSpec(agents=1)
    with pytest.raises(InvalidInputError):
        GeneratorSpec(agents=3, actions=[2, 2]).action_counts
    with pytest.raises(InvalidInputError):
        GeneratorSpec.from_dict({"agent": 3})


def test_random_conflict_network():
    g = generate(GeneratorSpec(kind="conflict_network", agents=4, actions=3, seed=5,
                               graph="complete"))
    assert g.n_agents == 4 and len(g.edges) == 6
    _, contests, _ = random_conflict_parts(4, (3,) * 4, 5)
    for p, q in contests.values():
        np.testing.assert_allclose(p + q.T, 1.0, atol=1e-15)


def test_conflict_zero_sum_form_is_equivalent(rng):
    values, contests, costs = random_conflict_parts(3, (2, 3, 2), 11)
    values = np.full(3, 1.3)
    g = conflict_network(values, contests, (2, 3, 2), costs)
    z = conflict_zero_sum_form(values, contests, (2, 3, 2), costs)
    assert is_zero_sum(z)
    x = random_interior_strategy(g, rng)
    a, b = qld_vector_field(g, x, 0.5), qld_vector_field(z, x, 0.5)
    for u, v in zip(a, b):
        np.testing.assert_allclose(u, v, atol=1e-14)
    with pytest.raises(InvalidInputError):
        conflict_zero_sum_form([1.0, 2.0, 1.0], contests, (2, 3, 2), costs)


@given(seeds, st.floats(0.0, 2.0))
def test_perturbation_certificate_is_sound(seed, delta):
    g = random_nzsg(seed % 10_000, 3, 2)
    eps = epsilon_for_delta(g, delta)
    noisy, cert = perturb_game(g, eps, seed)
    assert cert.value == pytest.approx(delta)
    assert mpd_bound_abs(g, noisy).value <= cert.value + 1e-12
    assert mpd_exact(g, noisy).value <= cert.value + 1e-12


def test_zero_noise_is_identity():
    g = random_nzsg(0)
    noisy, cert = perturb_game(g, 0.0, 1)
    assert dumps_game(noisy) == dumps_game(g) and cert.value == 0
    x0 = uniform_strategy(g)
    a = noisy_run(g, 0.75, 0.0, 50, 5.0, x0=x0)
    b = integrate(g, x0, 0.75, 5.0)
    np.testing.assert_allclose(a.states, b.states, rtol=0, atol=1e-15)


def test_fig3_certificate_scale():
    g = random_nzsg(1, 3, 2)
    # two-action chain: the middle agent sees 2 * 2 * (2 + 2) = 16
    assert epsilon_for_delta(g, 0.75) == pytest.approx(0.75 / 16)
    assert delta_for_epsilon(g, 0.75 / 16).value == pytest.approx(0.75)


def test_chain_converges():
    g = random_nzsg(1, 3, 2)
    traj = integrate(g, random_interior_strategy(g, np.random.default_rng(0)), 0.75, 300.0,
                     record_every=1000)
    v = qld_vector_field(g, traj.final, 0.75)
    assert max(np.max(np.abs(vk)) for vk in v) < 1e-8


def test_noisy_run_stays_trapped_and_moves():
    g = random_nzsg(1, 3, 2)
    eps = epsilon_for_delta(g, 3.0)
    traj = noisy_run(g, 0.75, eps, 50, 200.0, seed=4, x0=uniform_strategy(g))
    burn = traj.times >= 0.2 * traj.times[-1]
    assert np.all(traj.kl_p_x[burn] <= traj.radius)
    assert np.max(np.abs(traj.states[-1] - traj.states[-101])) > 1e-4
    assert tail_spread(traj) > 0


def test_embedding_examples():
    u, v = np.array([0.2, 0.7, 0.9]), np.array([0.4, 0.5, 0.1])
    z = logit_embedding(EmbeddingSpec(u, v, [0.0, 1.0], [0.0]))
    np.testing.assert_allclose(z[0, 0], 0.5)
    np.testing.assert_allclose(z[1, 0], u, rtol=1e-14)
    with pytest.raises(InvalidInputError):
        EmbeddingSpec(np.array([0.0, 0.5]), np.array([0.5, 0.5]), [0.0], [0.0])


def test_embedding_contour_encloses_a_region():
    g = random_nzsg(2, 5, 2, "random")
    p = qre_solve(g, 0.75)
    spec = EmbeddingSpec.random(5, seed=3)
    kl = embedding_kl(p, logit_embedding(spec))
    radius = trap_radius(5, 1.0, 0.75)
    inside = kl <= radius
    assert inside.any() and not inside.all()
    # the centre of the plane is uniform play, which is inside for this radius
    assert inside[50, 50]
    assert np.all(kl >= 0)


def _read_all(path):
    return {p.relative_to(path).as_posix(): p.read_bytes()
            for p in sorted(path.rglob("*")) if p.is_file()}


def test_campaign_zero_noise_collapses_to_qre(tmp_path):
    spec = CampaignSpec(generator=GeneratorSpec(agents=3, seed=9), runs=3, epsilon=0.0,
                        horizon=150.0, record_every=500)
    report = campaign(spec, tmp_path)
    assert report["failures"] == 0 and report["violations"] == 0
    rows = (tmp_path / "summary.csv").read_text().splitlines()[1:]
    for row in rows:
        vals = [float(v) for v in row.split(",")[1:]]
        assert max(vals) - min(vals) < 1e-6
    assert (tmp_path / "run_000" / "trajectory.csv").read_text().startswith(
        "t,agent,action,prob,kl_p_x,kl_x_p\n")


def test_campaign_is_deterministic(tmp_path):
    data = {"generator": {"agents": 4, "seed": 2, "graph": "random"}, "runs": 3, "delta": 1.0,
            "horizon": 20.0, "record_every": 50, "seed": 7}
    campaign(CampaignSpec.from_dict(data), tmp_path / "a")
    campaign(CampaignSpec.from_dict(dict(data, workers=2)), tmp_path / "b")
    a, b = _read_all(tmp_path / "a"), _read_all(tmp_path / "b")
    assert a == b and len(a) > 10
    manifest = json.loads(a["run_001/manifest.json"])
    assert {"game_sha256", "temperatures", "step", "horizon", "seed", "delta",
            "trap_radius"} <= set(manifest)


def test_campaign_spec_validation(tmp_path):
    with pytest.raises(InvalidInputError):
        CampaignSpec(generator=GeneratorSpec(), runs=1)
    with pytest.raises(InvalidInputError):
        CampaignSpec(generator=GeneratorSpec(), runs=0, delta=1.0)
    with pytest.raises(InvalidInputError):
        CampaignSpec.from_dict({"generator": {}, "delta": 1.0, "colour": "red"})
    with pytest.raises(InvalidInputError):
        campaign(CampaignSpec(generator=GeneratorSpec(kind="conflict_network"), delta=1.0), tmp_path)


def test_conflict_preset_shape():
    g = conflict_preset()
    assert g.edges == ((0, 1), (0, 2), (1, 2))
    np.testing.assert_array_equal(g.matrix(0, 1), [[2.4, 6.6], [4.5, 3.1]])
    np.testing.assert_array_equal(g.matrix(1, 0), [[2.8, 1.0], [4.2, 7.2]])
    np.testing.assert_array_equal(g.matrix(2, 0), [[2.4, 6.6], [4.5, 3.1]])


def test_conflict_preset_uniform_payoff():
    g = conflict_preset()
    for k in range(3):
        assert payoff(g, uniform_strategy(g), k) == pytest.approx(7.95, abs=1e-14)
