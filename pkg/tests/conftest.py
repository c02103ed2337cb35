import numpy as np
import pytest

from mspad.data import N_BANDS, SpectralCube
from mspad.synthgen import GenConfig, generate_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_cube(rng, size=32):
    return SpectralCube(rng.integers(0, 65536, size=(N_BANDS, size, size), dtype=np.uint16))


SMALL = GenConfig(n_subjects=8, samples_per_cell=3, attack_samples=4, mask_subjects=4,
                  mask_samples=4, image_size=16, seed=5)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """A tiny generated dataset shared by the slower integration tests."""
    root = tmp_path_factory.mktemp("small")
    return generate_dataset(SMALL, root)


# acceptance results, filled by test_acceptance and printed after the run
ACCEPTANCE: list[tuple[str, bool, str]] = []


def record_criterion(name: str, ok: bool, detail: str) -> bool:
    ACCEPTANCE.append((name, bool(ok), detail))
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return bool(ok)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
