import functools
import math

import numpy as np
import pytest

from hillbasis import potential as pt
from hillbasis.criteria import analyze

SUITE_SEED = 2024
N_RANDOM = 20


def suite_potentials():
    """``name -> (potential, cutoff, window)`` for the shared test suite."""
    out = {
        "free": (pt.from_trig_coeffs({}), 64, None),
        "mathieu": (pt.mathieu(1.0), 64, None),
        "gasymov": (pt.gasymov([1.0] * 24, 24), 96, None),
        "delta_comb": (pt.delta_comb([math.pi / 2], [1.0], 48), 128, (4, 24)),
        "four_harmonic_literal": (pt.four_harmonic_example("literal"), 64, None),
        "four_harmonic_corrected": (pt.four_harmonic_example("corrected"), 64, None),
    }
    rng = np.random.default_rng(SUITE_SEED)
    for i in range(N_RANDOM):
        out[f"random{i:02d}"] = (pt.random_trig_poly(rng), 48, None)
    return out


SUITE = suite_potentials()


@functools.lru_cache(maxsize=None)
def suite_analysis(name, bc):
    """Cached ``(assembly, report)`` of a suite potential, validated at twice the cutoff."""
    pot, cutoff, window = SUITE[name]
    return analyze(pot, bc, cutoff, window=window, validate=True, projections=False)


_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")
    config.addinivalue_line("markers", "slow: long-running check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.when != "call" and not rep.failed:
        return
    num, title = mark.args
    prev = _ACCEPTANCE.get(num, (title, True))
    _ACCEPTANCE[num] = (title, prev[1] and rep.passed)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        title, ok = _ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {title}")
