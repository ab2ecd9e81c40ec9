import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from trussim.phantom import PhantomModel
from trussim.reconstruction import reconstruct
from trussim.sweep import SweepConfig, run_sweep

settings.register_profile("trussim", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("trussim")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def default_cfg():
    return SweepConfig()


@pytest.fixture(scope="session")
def s_record(default_cfg):
    return run_sweep("S", default_cfg, seed=1)


@pytest.fixture(scope="session")
def s_cloud(s_record):
    return reconstruct(s_record)


@pytest.fixture(scope="session")
def c_record(default_cfg):
    return run_sweep("C", default_cfg, seed=7)


@pytest.fixture(scope="session")
def ideal_cfg():
    """Untapered phantom, exact hand placement, noiseless sensor."""
    return SweepConfig(
        phantom=PhantomModel(taper=0.0),
        placement_axial=0.0,
        placement_roll=0.0,
        force_noise=0.0,
    )


@pytest.fixture(scope="session")
def ideal_record(ideal_cfg):
    return run_sweep("S", ideal_cfg, seed=0)


# acceptance verdicts, printed once at the end of the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record_verdict(number: int, ok: bool, detail: str) -> None:
    prev = ACCEPTANCE.get(number)
    if prev is not None:
        ok, detail = prev[0] and ok, f"{prev[1]}; {detail}"
    ACCEPTANCE[number] = (ok, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
