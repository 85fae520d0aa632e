from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from potts_anneal.encoding import PottsModel

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_couplings(rng: np.random.Generator, n: int) -> np.ndarray:
    a = np.triu(rng.normal(size=(n, n)), 1)
    return a + a.T


def random_model(seed: int, n: int, q: int, **kwargs) -> PottsModel:
    return PottsModel(random_couplings(np.random.default_rng(seed), n), q, **kwargs)


def all_assignments(n: int, q: int):
    return itertools.product(range(q), repeat=n)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    module = next((m for name, m in __import__("sys").modules.items()
                   if name.endswith("test_acceptance") and hasattr(m, "RESULTS")), None)
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(module.RESULTS):
        entries = module.RESULTS[criterion]
        ok = all(passed for passed, _ in entries)
        failed = [detail for passed, detail in entries if not passed]
        summary = "; ".join(failed) if failed else f"{len(entries)} checks"
        terminalreporter.write_line(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} ({summary})")
