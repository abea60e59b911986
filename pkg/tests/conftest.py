import numpy as np
import pytest

from nsregularity.fields import Grid3, VectorField3


@pytest.fixture
def grid16():
    return Grid3(16)


@pytest.fixture
def grid32():
    return Grid3(32)


def random_field(grid: Grid3, seed: int, scale: float = 1.0) -> VectorField3:
    rng = np.random.default_rng(seed)
    return VectorField3(grid, scale * rng.standard_normal((3, *grid.shape)))


def sin_y_field(grid: Grid3) -> VectorField3:
    x, y, z = grid.coordinates()
    zero = np.zeros(grid.shape)
    return VectorField3.from_components(grid, np.sin(y) + zero, zero, zero)


def band_limited_field(grid: Grid3, seed: int) -> VectorField3:
    """Random field with the Nyquist planes and the mean removed."""
    v = random_field(grid, seed)
    kx, ky, kz = grid.integer_wavenumbers()
    h = grid.n // 2
    keep = (np.abs(kx) < h) & (np.abs(ky) < h) & (np.abs(kz) < h)
    coeffs = v.spectral * keep
    coeffs[:, 0, 0, 0] = 0
    return VectorField3.from_spectral(grid, coeffs)


# --- acceptance summary -------------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
