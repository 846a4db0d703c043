import numpy as np
import pytest

from oldroyd.spectral import (
    FourierGrid,
    SpectralTensorField,
    SpectralVectorField,
    hermitianize,
    leray_project,
)


def random_vector_field(grid: FourierGrid, seed: int, solenoidal: bool = False,
                        amplitude: float = 1.0) -> SpectralVectorField:
    """Random band-limited Hermitian vector field for tests."""
    rng = np.random.default_rng(seed)
    shape = grid.shape(3)
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    c *= grid.dealias_mask
    c = hermitianize(c)
    c[:, 0, 0, 0] = 0.0
    field = SpectralVectorField(grid, amplitude * c)
    if solenoidal:
        field = leray_project(field)
    return field


def random_tensor_field(grid: FourierGrid, seed: int, trace_free: bool = False,
                        amplitude: float = 1.0) -> SpectralTensorField:
    rng = np.random.default_rng(seed)
    shape = grid.shape(6)
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    c *= grid.dealias_mask
    c = hermitianize(c)
    c[:, 0, 0, 0] = 0.0
    if trace_free:
        tr = (c[0] + c[1] + c[2]) / 3.0
        c[0] -= tr
        c[1] -= tr
        c[2] -= tr
    return SpectralTensorField(grid, amplitude * c)


@pytest.fixture
def small_grid() -> FourierGrid:
    return FourierGrid(n_per_axis=16, box_scale=2.0)
