import numpy as np
import pytest

from splinetrack.boundary import Structure, sequence_candidates
from splinetrack.synth import PhantomConfig, generate_annulus_phantom


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def phantom_025():
    return generate_annulus_phantom(PhantomConfig(amplitude=0.25))


@pytest.fixture(scope="session")
def endo_candidates_025(phantom_025):
    masks, _ = phantom_025
    return sequence_candidates(masks, Structure.LV_ENDO)


@pytest.fixture(scope="session")
def small_phantom_candidates():
    masks, _ = generate_annulus_phantom(
        PhantomConfig(width=64, height=64, n_frames=6, lv_endo_radius=12.0, lv_wall_thickness=4.0, amplitude=0.2)
    )
    return sequence_candidates(masks, Structure.LV_ENDO)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
