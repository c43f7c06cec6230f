import numpy as np
import pytest

from ffcover.graph import validate_graph


def complete(m: int, weight: float = 1.0) -> np.ndarray:
    w = np.full((m, m), weight)
    np.fill_diagonal(w, 0.0)
    return w


def cycle3() -> np.ndarray:
    w = np.zeros((3, 3))
    w[0, 1] = w[1, 2] = w[2, 0] = 1.0
    return w


# weighted triangle w01 = 2, w02 = 1, w12 = 1, symmetric
TRIANGLE = np.array([[0, 2, 1], [2, 0, 1], [1, 1, 0]], dtype=float)
# general directed example
GENERAL_Q = np.array([[0, 2, 1], [1, 0, 1], [1, 1, 0]], dtype=float)


def two_cliques(size: int = 3, bridge: float = 0.1) -> np.ndarray:
    w = np.zeros((2 * size, 2 * size))
    w[:size, :size] = 1.0
    w[size:, size:] = 1.0
    np.fill_diagonal(w, 0.0)
    w[size - 1, size] = w[size, size - 1] = bridge
    return w


@pytest.fixture
def k3():
    return validate_graph(complete(3))


@pytest.fixture
def k4():
    return validate_graph(complete(4))


@pytest.fixture
def triangle():
    return validate_graph(TRIANGLE)


@pytest.fixture
def general_q():
    return validate_graph(GENERAL_Q)


def simulate_excursions(p: np.ndarray, visited, start: int, n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Run ``n`` walks from ``start`` until they leave ``visited``.

    Returns the last in-set position and the number of in-set steps taken
    before the exiting step, one entry per walk.
    """
    inside = np.zeros(len(p), dtype=bool)
    inside[list(visited)] = True
    cum = np.cumsum(p, axis=1)
    cum[:, -1] = 1.0
    pos = np.full(n, start)
    steps = np.zeros(n, dtype=np.int64)
    last = np.full(n, -1)
    alive = np.arange(n)
    while alive.size:
        cur = pos[alive]
        nxt = (cum[cur] <= rng.random(alive.size)[:, None]).sum(axis=1)
        out = ~inside[nxt]
        last[alive[out]] = cur[out]
        stay = alive[~out]
        pos[stay] = nxt[~out]
        steps[stay] += 1
        alive = stay
    return last, steps


ACCEPTANCE_LINES: list[str] = []


def report_criterion(name: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
