"""Shared fixtures: worked examples plus a seeded corpus of random plants.

The corpus generator draws stable closed loops directly (shift the spectrum
left, then back out the gain), so every fixture is Hurwitz by construction;
``numpy.linalg.eigvals`` serves as the test-side spectrum oracle. Designs
are computed once per session since several suites reuse them.
"""

import dataclasses

import numpy as np
import pytest

from selftrig import design, scheduler

CORPUS_SEED = 12345
CORPUS_SIZE = 20
# Grid picks for the random corpus: a non-trivial prefix below the minimum
# dwell time and a few times that for headroom above.
CORPUS_DELTA_DIVISOR = 7.3
CORPUS_TAU_MAX_FACTOR = 3.2


@dataclasses.dataclass
class DesignedSystem:
    name: str
    sys: design.LinearSystem
    cert: design.LyapunovCertificate
    tau_star: float
    trig: design.TriggerConfig
    tables: scheduler.TriggerTables


def _designed(name, sys_, cert, delta, tau_max):
    result = design.min_inter_execution_time(sys_, cert)
    assert result.root_found, f"{name}: no dwell-time root below the cap"
    trig = design.choose_trigger(result.tau, delta, tau_max)
    tables = scheduler.build_tables(sys_, cert, trig)
    return DesignedSystem(name, sys_, cert, result.tau, trig, tables)


@pytest.fixture(scope="session")
def scalar():
    """Worked example: integrator with unit feedback, half-rate envelope."""
    sys_ = design.LinearSystem(0.0, 1.0, -1.0)
    cert = design.make_certificate(sys_, lambda_ratio=0.5)
    return _designed("scalar", sys_, cert, 0.1, 3.0)


@pytest.fixture(scope="session")
def double_integrator():
    sys_ = design.LinearSystem([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0]],
                               [[-1.0, -2.0]])
    cert = design.make_certificate(sys_)
    return _designed("double_integrator", sys_, cert, 0.05, 1.5)


def _random_system(rng):
    m = int(rng.integers(1, 4))
    if m == 1:
        a = float(rng.uniform(-1.0, 2.0))
        b = float(rng.uniform(0.5, 2.0)) * (1.0 if rng.uniform() < 0.5 else -1.0)
        margin = float(rng.uniform(0.3, 1.5))
        k = -(a + margin) / b
        return design.LinearSystem(a, b, k)
    A = rng.normal(size=(m, m))
    shift = float(np.max(np.real(np.linalg.eigvals(A)))) + 0.5
    a_cl = A - shift * np.eye(m)
    return design.LinearSystem(A, np.eye(m), a_cl - A)


@pytest.fixture(scope="session")
def corpus():
    """Deterministic random plants of dimension one to three, designed."""
    rng = np.random.default_rng(CORPUS_SEED)
    designed = []
    attempts = 0
    while len(designed) < CORPUS_SIZE and attempts < 3 * CORPUS_SIZE:
        attempts += 1
        sys_ = _random_system(rng)
        cert = design.make_certificate(sys_)
        result = design.min_inter_execution_time(sys_, cert)
        if not result.root_found:
            continue
        delta = result.tau / CORPUS_DELTA_DIVISOR
        tau_max = CORPUS_TAU_MAX_FACTOR * result.tau
        trig = design.choose_trigger(result.tau, delta, tau_max)
        tables = scheduler.build_tables(sys_, cert, trig)
        designed.append(DesignedSystem(f"random_{len(designed):02d}", sys_,
                                       cert, result.tau, trig, tables))
    assert len(designed) == CORPUS_SIZE
    return designed


SCALAR_CONFIG = {
    "system": {"A": 0.0, "B": 1.0, "K": -1.0},
    "lyapunov": {"lambda_ratio": 0.5},
    "trigger": {"delta": 0.1, "tau_max": 3.0},
    "simulation": {"x0": [2.0], "t_end": 50.0},
    "outputs": {"directory": "out"},
}

DOUBLE_INTEGRATOR_CONFIG = {
    "system": {"A": [[0.0, 1.0], [0.0, 0.0]], "B": [[0.0], [1.0]],
               "K": [[-1.0, -2.0]]},
    "trigger": {"delta": 0.05, "tau_max": 1.5},
    "simulation": {"x0": [1.0, -0.5], "t_end": 50.0},
    "outputs": {"directory": "out"},
}
