"""Agreement statistics between paired distance series."""

import logging
import math

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel
from scipy.stats import pearsonr

from terrabstract.utils import UndefinedMetricError

logger = logging.getLogger(__name__)

LOA_Z = 1.96
FLAT_TOLERANCE = 1e-9


class BlandAltman(BaseModel):
    """Bland-Altman summary of `measured - reference` differences.

    Attributes:
        n: number of pairs.
        mean_diff: mean difference (the centre line of the plot).
        sd_diff: sample standard deviation of the differences, None for n < 2.
        loa_lower: mean_diff - 1.96 sd_diff.
        loa_upper: mean_diff + 1.96 sd_diff.
        proportional_bias: Pearson correlation between pair means and
            differences, None when undefined.
    """

    n: int
    mean_diff: float
    sd_diff: float | None = None
    loa_lower: float | None = None
    loa_upper: float | None = None
    proportional_bias: float | None = None


def _is_flat(x: np.ndarray) -> bool:
    """No variation beyond float rounding, relative to the magnitude of x."""
    if len(x) == 0:
        return True
    return bool(np.ptp(x) <= FLAT_TOLERANCE * max(1.0, float(np.abs(x).max())))


def _pearson(a: np.ndarray, b: np.ndarray) -> float | None:
    if len(a) < 2 or _is_flat(a) or _is_flat(b):
        return None
    r = float(pearsonr(a, b)[0])
    return r if math.isfinite(r) else None


def r_squared(reference: ArrayLike, measured: ArrayLike) -> float | None:
    """Squared Pearson correlation, None when either series has no variance."""
    a = np.asarray(reference, dtype=float)
    b = np.asarray(measured, dtype=float)
    if a.shape != b.shape:
        raise ValueError("series should have equal length")
    r = _pearson(a, b)
    return None if r is None else min(r * r, 1.0)


def bland_altman(reference: ArrayLike, measured: ArrayLike) -> BlandAltman:
    a = np.asarray(reference, dtype=float)
    b = np.asarray(measured, dtype=float)
    if a.shape != b.shape:
        raise ValueError("series should have equal length")
    if len(a) == 0:
        raise UndefinedMetricError("Bland-Altman analysis needs at least one pair")

    differences = b - a
    mean_diff = float(np.mean(differences))
    if len(a) < 2:
        return BlandAltman(n=1, mean_diff=mean_diff)

    sd = float(np.std(differences, ddof=1))
    return BlandAltman(
        n=len(a),
        mean_diff=mean_diff,
        sd_diff=sd,
        loa_lower=mean_diff - LOA_Z * sd,
        loa_upper=mean_diff + LOA_Z * sd,
        proportional_bias=_pearson((a + b) / 2, differences),
    )


def relative_difference(euclidean_distance: float, waypoint_distance: float) -> float:
    """|euclidean - waypoint| / euclidean.

    Example:

        >>> round(relative_difference(10 * 2**0.5, 20.0), 5)
        0.41421

    Raises:
        UndefinedMetricError: the euclidean distance is zero.
    """
    if euclidean_distance == 0:
        raise UndefinedMetricError(
            "relative difference is undefined for zero distance travelled"
        )
    return abs(euclidean_distance - waypoint_distance) / euclidean_distance
