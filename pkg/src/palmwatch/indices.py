"""Vegetation indices, vegetation masking and per-class index statistics.

Built-in indices are the two normalized differences

    ndvi  = (nir - red)   / (nir + red)
    gndvi = (nir - green) / (nir + green)

computed per pixel in float32. A pixel is invalid exactly where the
input mask is false or the denominator is zero; zero denominators are
never reported as 0.0 because that would masquerade as a meaningful
"equal reflectance" reading.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .annotations import CLASS_LABELS, AnnotationSet
from .errors import BandLookupError, ParameterError, ShapeError
from .raster_core import Band, Mask, Raster

DEFAULT_VEGETATION_THRESHOLD = 0.2


@dataclass(frozen=True)
class IndexMap:
    """Single-band index grid with an explicit validity mask."""

    index_name: str
    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float32, order="C", copy=True)
        valid = np.array(self.valid, dtype=bool, order="C", copy=True)
        if values.ndim != 2 or values.shape != valid.shape:
            raise ShapeError(
                f"index map {self.index_name!r}: values {values.shape} and "
                f"valid {valid.shape} must be matching 2-D grids"
            )
        values.setflags(write=False)
        valid.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "valid", valid)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def to_raster(self, origin: tuple[int, int] = (0, 0)) -> Raster:
        """Single-band raster named after the index; invalid pixels become NaN nodata."""
        values = np.where(self.valid, self.values, np.float32(np.nan))
        return Raster(
            bands=(Band(name=self.index_name, samples=values),),
            nodata_value=float("nan"),
            origin=origin,
        )

    @classmethod
    def from_raster(cls, raster: Raster) -> "IndexMap":
        band = raster.bands[0]
        return cls(
            index_name=band.name,
            values=band.samples,
            valid=raster.valid_mask().bits,
        )


def normalized_difference(name: str, a: Band, b: Band, mask: Mask) -> IndexMap:
    """(a - b) / (a + b) per pixel, invalid where masked or a + b == 0."""
    if a.samples.shape != b.samples.shape or a.samples.shape != mask.bits.shape:
        raise ShapeError(
            f"{name}: band/mask shapes disagree: {a.samples.shape} vs "
            f"{b.samples.shape} vs mask {mask.bits.shape}"
        )
    num = a.samples - b.samples
    den = a.samples + b.samples
    valid = mask.bits & (den != 0)
    values = np.full(num.shape, np.nan, dtype=np.float32)
    np.divide(num, den, out=values, where=valid)
    return IndexMap(index_name=name, values=values, valid=valid)


def ndvi(nir: Band, red: Band, mask: Mask) -> IndexMap:
    """Normalized difference of NIR against red reflectance."""
    return normalized_difference("ndvi", nir, red, mask)


def gndvi(nir: Band, green: Band, mask: Mask) -> IndexMap:
    """Normalized difference of NIR against green reflectance."""
    return normalized_difference("gndvi", nir, green, mask)


# name -> (required bands, builder). Extensible: register new entries to make
# an index available to featurize() and the CLI by name.
INDEX_REGISTRY = {
    "ndvi": (("nir", "red"), lambda r, m: ndvi(r.band("nir"), r.band("red"), m)),
    "gndvi": (("nir", "green"), lambda r, m: gndvi(r.band("nir"), r.band("green"), m)),
}


def compute_index(raster: Raster, mask: Mask, name: str) -> IndexMap:
    """Compute a registered index over a raster."""
    try:
        _, builder = INDEX_REGISTRY[name]
    except KeyError:
        raise BandLookupError(
            f"unknown index {name!r}; registered: {sorted(INDEX_REGISTRY)}"
        ) from None
    return builder(raster, mask)


def vegetation_mask(index: IndexMap, threshold: float) -> Mask:
    """Pixels strictly above ``threshold`` with a valid index value.

    The boundary is exclusive: a value exactly equal to the threshold is
    not vegetation.
    """
    if not -1.0 <= threshold <= 1.0:
        raise ParameterError(f"vegetation threshold must be in [-1, 1], got {threshold}")
    return Mask(index.valid & (index.values > threshold))


@dataclass(frozen=True)
class ClassIndexStats:
    """Distribution summary of index values over one class's crown pixels.

    All statistics are None when the class has no valid pixels
    (count == 0). std_dev is the population standard deviation.
    """

    class_label: str
    index_name: str
    count: int
    mean: float | None = None
    std_dev: float | None = None
    min: float | None = None
    max: float | None = None
    q1: float | None = None
    median: float | None = None
    q3: float | None = None


def index_stats_by_class(index: IndexMap, annotations: AnnotationSet) -> list[ClassIndexStats]:
    """Summarize index values over the union of each class's crown pixels.

    One record per class present in ``annotations``, in canonical class
    order. Invalid index pixels are excluded. Raises BoundsError when an
    annotation's disc leaves the index grid.
    """
    annotations.check_within(index.width, index.height)
    out = []
    for label in CLASS_LABELS:
        crowns = annotations.of_class(label)
        if not crowns:
            continue
        member = np.zeros((index.height, index.width), dtype=bool)
        for crown in crowns:
            ys, xs = annotations.crown_pixels(crown, index.width, index.height)
            member[ys, xs] = True
        vals = index.values[member & index.valid].astype(np.float64)
        if vals.size == 0:
            out.append(ClassIndexStats(label, index.index_name, count=0))
            continue
        q1, median, q3 = np.percentile(vals, [25.0, 50.0, 75.0])
        out.append(
            ClassIndexStats(
                class_label=label,
                index_name=index.index_name,
                count=int(vals.size),
                mean=float(vals.mean()),
                std_dev=float(vals.std(ddof=0)),
                min=float(vals.min()),
                max=float(vals.max()),
                q1=float(q1),
                median=float(median),
                q3=float(q3),
            )
        )
    return out
