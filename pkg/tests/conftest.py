import numpy as np
import pytest
from hypothesis import settings

from nearzero.experiments import GeneratorSpec, generate_nzsg, graph_edges
from nearzero.game import NetworkGame

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def random_game(rng, n=3, actions=2, graph="complete", scale=1.0):
    """Arbitrary (generally not zero-sum) network game."""
    counts = (actions,) * n if isinstance(actions, int) else tuple(actions)
    mats = {}
    for k, l in graph_edges(graph, n, rng):
        mats[(k, l)] = (rng.uniform(-scale, scale, (counts[k], counts[l])),
                        rng.uniform(-scale, scale, (counts[l], counts[k])))
    return NetworkGame.from_edges(counts, mats)


def random_nzsg(seed, n=3, actions=2, graph="chain"):
    return generate_nzsg(GeneratorSpec(agents=n, actions=actions, seed=seed, graph=graph))


def matching_pennies():
    a = np.array([[1.0, -1.0], [-1.0, 1.0]])
    return NetworkGame.from_edges((2, 2), {(0, 1): (a, -a.T)})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def report(name, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
