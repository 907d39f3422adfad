import numpy as np
import pytest

from palmwatch.raster_core import Band, Raster


def make_raster(band_arrays: dict, nodata=None, origin=(0, 0)) -> Raster:
    bands = tuple(Band(name=name, samples=arr) for name, arr in band_arrays.items())
    return Raster(bands=bands, nodata_value=nodata, origin=origin)


def random_raster(rng, width, height, band_names=("red", "nir"), nodata=None) -> Raster:
    bands = tuple(
        Band(name=name, samples=rng.random((height, width), dtype=np.float32))
        for name in band_names
    )
    return Raster(bands=bands, nodata_value=nodata)


@pytest.fixture
def rng():
    return np.random.default_rng(20240803)
