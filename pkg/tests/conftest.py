"""Shared, session-cached heavy objects: potentials, scattering data, kernels, reconstructions."""

from __future__ import annotations

import functools
import time

import numpy as np
import pytest

from stepscat import direct, glm, potentials, transform

TEST_SET = ("free", "step", "sech2", "lame_bump")


class Cache:
    """Builds each expensive object once per session and records how long it took."""

    def __init__(self):
        self.seconds: dict = {}

    def _timed(self, key, fn):
        t0 = time.perf_counter()
        out = fn()
        self.seconds[key] = time.perf_counter() - t0
        return out

    @functools.lru_cache(maxsize=None)
    def potential(self, name: str):
        return self._timed(("potential", name), lambda: potentials.builtin(name))

    @functools.lru_cache(maxsize=None)
    def data(self, name: str):
        q = self.potential(name)
        return self._timed(("data", name),
                           lambda: direct.build_scattering_data(q, strict=False, edges=True))

    @functools.lru_cache(maxsize=None)
    def doubled_data(self, name: str):
        q = self.potential(name)
        spec = direct.GridSpec.for_window(q.window).doubled()
        return self._timed(("doubled", name),
                           lambda: direct.build_scattering_data(q, spec, strict=False, edges=False))

    @functools.lru_cache(maxsize=None)
    def reconstruction(self, name: str):
        q = self.potential(name)
        d = self.data(name)
        return self._timed(("glm", name), lambda: glm.reconstruct(d, q.left, q.right, q_ref=q))

    @functools.lru_cache(maxsize=None)
    def kernel(self, name: str, side: int):
        q = self.potential(name)
        return self._timed(("transform", name, side),
                           lambda: transform.solve_transformation_kernel(q, side))


@pytest.fixture(scope="session")
def cache() -> Cache:
    return Cache()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_VERDICTS = pytest.StashKey[dict]()


@pytest.fixture
def verdict(request):
    """Record one pass/fail line for an acceptance criterion; lines are echoed at once and
    repeated in the terminal summary."""
    store = request.config.stash.setdefault(_VERDICTS, {})
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")

    def record(number: int, ok: bool, detail: str):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        store[number] = line
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_VERDICTS, {})
    if store:
        terminalreporter.section("acceptance criteria")
        for k in sorted(store):
            terminalreporter.write_line(store[k])
