import json
import struct

import numpy as np
import pytest

from palmwatch.errors import (
    BandLookupError,
    FormatError,
    PayloadSizeError,
    ShapeError,
)
from palmwatch.raster_core import Band, Mask, Raster, load_raster, save_raster

from conftest import make_raster, random_raster


def write_container(tmp_path, header: dict, payload: bytes, stem="scene"):
    (tmp_path / f"{stem}.rhdr").write_text(json.dumps(header))
    (tmp_path / f"{stem}.rbin").write_bytes(payload)
    return tmp_path / f"{stem}.rhdr"


def minimal_header(width=2, height=2, bands=("nir", "red"), nodata=None):
    return {
        "width": width,
        "height": height,
        "dtype": "f32le",
        "layout": "band-sequential",
        "nodata": nodata,
        "origin": [0, 0],
        "bands": [{"name": n, "wavelength_nm": None} for n in bands],
    }


class TestLoad:
    def test_minimal_two_band(self, tmp_path):
        values = np.arange(8, dtype="<f4")
        path = write_container(tmp_path, minimal_header(), values.tobytes())
        raster = load_raster(path)
        assert (raster.width, raster.height) == (2, 2)
        assert raster.band_names == ("nir", "red")
        np.testing.assert_array_equal(raster.band("nir").samples, values[:4].reshape(2, 2))
        np.testing.assert_array_equal(raster.band("red").samples, values[4:].reshape(2, 2))

    def test_truncated_payload(self, tmp_path):
        path = write_container(tmp_path, minimal_header(), b"\x00" * 31)
        with pytest.raises(PayloadSizeError, match="31.*expected 32|expected 32"):
            load_raster(path)

    def test_oversized_payload(self, tmp_path):
        path = write_container(tmp_path, minimal_header(), b"\x00" * 33)
        with pytest.raises(PayloadSizeError):
            load_raster(path)

    def test_missing_header(self, tmp_path):
        with pytest.raises(FormatError):
            load_raster(tmp_path / "nope.rhdr")

    def test_bad_json(self, tmp_path):
        (tmp_path / "s.rhdr").write_text("{not json")
        (tmp_path / "s.rbin").write_bytes(b"")
        with pytest.raises(FormatError, match="JSON"):
            load_raster(tmp_path / "s.rhdr")

    @pytest.mark.parametrize(
        "mutate, field",
        [
            (lambda h: h.pop("width"), "width"),
            (lambda h: h.update(width=0), "width"),
            (lambda h: h.update(width="2"), "width"),
            (lambda h: h.update(dtype="f64le"), "dtype"),
            (lambda h: h.update(layout="tiled"), "layout"),
            (lambda h: h.update(nodata="x"), "nodata"),
            (lambda h: h.update(origin=[0]), "origin"),
            (lambda h: h.update(origin=[0.5, 0]), "origin"),
            (lambda h: h.update(bands=[]), "bands"),
            (lambda h: h.update(bands=[{"wavelength_nm": 1}]), "bands"),
        ],
    )
    def test_corrupt_header_names_field(self, tmp_path, mutate, field):
        header = minimal_header()
        mutate(header)
        path = write_container(tmp_path, header, b"\x00" * 32)
        with pytest.raises(FormatError, match=field):
            load_raster(path)

    def test_duplicate_band_names(self, tmp_path):
        header = minimal_header(bands=("nir", "nir"))
        path = write_container(tmp_path, header, b"\x00" * 32)
        with pytest.raises(FormatError, match="duplicate"):
            load_raster(path)


class TestSave:
    def test_single_pixel_payload_bytes(self, tmp_path):
        raster = make_raster({"red": np.array([[0.5]], dtype=np.float32)})
        save_raster(raster, tmp_path / "one")
        payload = (tmp_path / "one.rbin").read_bytes()
        assert payload == bytes.fromhex("0000003f")
        assert payload == struct.pack("<f", 0.5)

    def test_band_order_preserved(self, tmp_path, rng):
        raster = random_raster(rng, 5, 3, band_names=("nir", "red", "blue"))
        save_raster(raster, tmp_path / "ordered")
        assert load_raster(tmp_path / "ordered").band_names == ("nir", "red", "blue")

    def test_wavelengths_survive(self, tmp_path):
        raster = Raster(
            bands=(
                Band("red", np.zeros((2, 2), np.float32), wavelength_nm=660.0),
                Band("nir", np.zeros((2, 2), np.float32), wavelength_nm=None),
            )
        )
        save_raster(raster, tmp_path / "wl")
        loaded = load_raster(tmp_path / "wl")
        assert loaded.band("red").wavelength_nm == 660.0
        assert loaded.band("nir").wavelength_nm is None

    def test_unwritable_path(self, tmp_path, rng):
        raster = random_raster(rng, 2, 2)
        with pytest.raises(OSError):
            save_raster(raster, tmp_path / "no" / "such" / "dir" / "x")


class TestRoundTrip:
    def test_random_rasters_bit_exact(self, tmp_path, rng):
        for i in range(25):
            width = int(rng.integers(1, 257))
            height = int(rng.integers(1, 257))
            n_bands = int(rng.integers(1, 9))
            names = [f"b{j}" for j in range(n_bands)]
            nodata = [None, -999.0, float("nan")][i % 3]
            raster = random_raster(rng, width, height, band_names=names, nodata=nodata)
            save_raster(raster, tmp_path / f"r{i}")
            first = (tmp_path / f"r{i}.rbin").read_bytes()
            loaded = load_raster(tmp_path / f"r{i}")
            save_raster(loaded, tmp_path / f"r{i}_again")
            second = (tmp_path / f"r{i}_again.rbin").read_bytes()
            assert first == second
            for name in names:
                np.testing.assert_array_equal(
                    loaded.band(name).samples.view(np.uint32),
                    raster.band(name).samples.view(np.uint32),
                )
            assert loaded.origin == raster.origin
            if nodata is None:
                assert loaded.nodata_value is None
            elif np.isnan(nodata):
                assert np.isnan(loaded.nodata_value)
            else:
                assert loaded.nodata_value == nodata

    def test_band_values_equal_saved(self, tmp_path, rng):
        raster = random_raster(rng, 64, 64, band_names=("red", "nir"))
        save_raster(raster, tmp_path / "x")
        loaded = load_raster(tmp_path / "x")
        np.testing.assert_array_equal(loaded.band("red").samples, raster.band("red").samples)


class TestBandLookup:
    def test_present(self, rng):
        raster = random_raster(rng, 3, 3, band_names=("nir", "red"))
        assert raster.band("nir").name == "nir"

    def test_missing_lists_available(self, rng):
        raster = random_raster(rng, 3, 3, band_names=("nir", "red"))
        with pytest.raises(BandLookupError, match="swir.*nir.*red"):
            raster.band("swir")

    def test_lookup_order_independent(self, rng):
        raster = random_raster(rng, 3, 3, band_names=("a", "b", "c"))
        first = [raster.band(n).samples for n in ("a", "b", "c")]
        second = [raster.band(n).samples for n in ("c", "b", "a")][::-1]
        for x, y in zip(first, second):
            np.testing.assert_array_equal(x, y)


class TestValidMask:
    def test_all_valid(self, rng):
        raster = random_raster(rng, 8, 8)
        assert raster.valid_mask().bits.all()

    def test_single_nodata_pixel(self):
        red = np.full((4, 4), 0.25, np.float32)
        red[1, 2] = -999.0
        raster = make_raster({"red": red, "nir": np.full((4, 4), 0.5, np.float32)}, nodata=-999.0)
        mask = raster.valid_mask()
        assert not mask.bits[1, 2]
        assert mask.count() == 15

    def test_planted_count(self, rng):
        arr = rng.random((32, 32), dtype=np.float32)
        k = 17
        flat = rng.choice(arr.size, size=k, replace=False)
        arr.ravel()[flat] = -1.0
        raster = make_raster({"b": arr}, nodata=-1.0)
        assert raster.valid_mask().count() == arr.size - k

    def test_nan_nodata_bitwise(self):
        arr = np.array([[0.5, np.nan], [1.0, 2.0]], np.float32)
        raster = make_raster({"b": arr}, nodata=float("nan"))
        mask = raster.valid_mask()
        np.testing.assert_array_equal(mask.bits, [[True, False], [True, True]])

    def test_nonfinite_invalid_without_nodata(self):
        arr = np.array([[np.inf, 0.5], [np.nan, 1.0]], np.float32)
        raster = make_raster({"b": arr})
        np.testing.assert_array_equal(raster.valid_mask().bits, [[False, True], [False, True]])

    def test_idempotent(self, rng):
        raster = random_raster(rng, 16, 16, nodata=0.5)
        np.testing.assert_array_equal(raster.valid_mask().bits, raster.valid_mask().bits)


class TestInvariants:
    def test_band_shape_mismatch(self):
        with pytest.raises(ShapeError):
            Raster(
                bands=(
                    Band("a", np.zeros((2, 2), np.float32)),
                    Band("b", np.zeros((3, 2), np.float32)),
                )
            )

    def test_duplicate_names(self):
        with pytest.raises(ShapeError, match="duplicate"):
            Raster(
                bands=(
                    Band("a", np.zeros((2, 2), np.float32)),
                    Band("a", np.zeros((2, 2), np.float32)),
                )
            )

    def test_no_bands(self):
        with pytest.raises(ShapeError):
            Raster(bands=())

    def test_samples_read_only(self):
        band = Band("a", np.zeros((2, 2), np.float32))
        with pytest.raises(ValueError):
            band.samples[0, 0] = 1.0

    def test_mask_shape(self):
        with pytest.raises(ShapeError):
            Mask(np.zeros(4, dtype=bool))
