"""Population moments and the infinite-sample ERM solution.

The SEM is linear-Gaussian, so every observed variable is a linear map of
the independent exogenous noises ``(H, N1, Ny, N2)``. Writing that map as a
matrix ``A`` gives the joint covariance of ``(Z1, Y, Z2)`` as
``A D A^T`` with ``D`` the diagonal noise covariance.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from beartype import beartype

from invbench._scm_env import FloatArray, GroundTruth, ScmConfig
from invbench._solvers import Regressor

_LOGGER = logging.getLogger(name=__name__)

MAX_CONDITION_NUMBER = 1e12
DEFAULT_JITTER = 1e-8


class SingularCovarianceError(Exception):
    """Raised when the averaged population covariance is numerically
    singular.

    This happens in the fully noiseless setting, where ``Z2`` is an exact
    function of ``Y``. Retry with ``jitter=DEFAULT_JITTER``.
    """


@beartype
@dataclass(frozen=True, kw_only=True, slots=True, eq=False)
class PopulationMoments:
    """Second moments of one environment."""

    sigma_xx: FloatArray
    sigma_xy: FloatArray
    var_y: float


@beartype
def _structural_map(*, gt: GroundTruth, config: ScmConfig) -> FloatArray:
    """Rows map the exogenous noises to ``(Z1, Y, Z2)``."""
    d1, d2, dh = config.d1, config.d2, config.dh
    y_from_h = gt.w_1y @ gt.w_h1 + gt.w_hy
    z1_rows = np.hstack(
        [
            gt.w_h1,
            np.eye(d1),
            np.zeros(shape=(d1, 1)),
            np.zeros(shape=(d1, d2)),
        ]
    )
    y_row = np.concatenate([y_from_h, gt.w_1y, [1.0], np.zeros(shape=d2)])
    z2_rows = np.hstack(
        [
            np.outer(gt.w_y2, y_from_h) + gt.w_h2,
            np.outer(gt.w_y2, gt.w_1y),
            gt.w_y2[:, np.newaxis],
            np.eye(d2),
        ]
    )
    structural_map = np.vstack([z1_rows, y_row[np.newaxis, :], z2_rows])
    assert structural_map.shape == (d1 + 1 + d2, dh + d1 + 1 + d2)
    return structural_map


@beartype
def population_moments(
    *,
    gt: GroundTruth,
    config: ScmConfig,
    scale: float,
) -> PopulationMoments:
    """Exact second moments of the environment at ``scale``."""
    d1 = config.d1
    sigma_y, sigma_2 = config.noise_scales(scale=scale)
    noise_variances = np.concatenate(
        [
            np.full(shape=config.dh, fill_value=scale**2),
            np.full(shape=d1, fill_value=scale**2),
            [sigma_y**2],
            np.full(shape=config.d2, fill_value=sigma_2**2),
        ]
    )
    structural_map = _structural_map(gt=gt, config=config)
    joint = (structural_map * noise_variances) @ structural_map.T
    joint = (joint + joint.T) / 2

    x_index = np.r_[0:d1, d1 + 1 : d1 + 1 + config.d2]
    return PopulationMoments(
        sigma_xx=joint[np.ix_(x_index, x_index)],
        sigma_xy=joint[x_index, d1],
        var_y=float(joint[d1, d1]),
    )


@beartype
def pooled_population_regressor(
    *,
    gt: GroundTruth,
    config: ScmConfig,
    scales: Sequence[float],
    jitter: float = 0.0,
) -> Regressor:
    """Minimize the environment-averaged population squared error.

    This is the limit of pooled ERM as every environment's sample grows.

    Raises:
        SingularCovarianceError: The averaged covariance (after adding
            ``jitter`` to its diagonal) has a condition number above
            ``MAX_CONDITION_NUMBER``.
    """
    assert scales, "at least one environment scale is required"
    moments = [
        population_moments(gt=gt, config=config, scale=scale)
        for scale in scales
    ]
    sigma_xx = np.mean([m.sigma_xx for m in moments], axis=0)
    sigma_xy = np.mean([m.sigma_xy for m in moments], axis=0)
    sigma_xx += jitter * np.eye(config.dim)

    condition_number = np.linalg.cond(sigma_xx)
    if not condition_number <= MAX_CONDITION_NUMBER:
        msg = (
            f"Averaged covariance has condition number {condition_number:.3g}"
            f" (limit {MAX_CONDITION_NUMBER:.0e})."
        )
        raise SingularCovarianceError(msg)

    _LOGGER.debug("Averaged covariance condition %.3g", condition_number)
    phi = scipy.linalg.solve(sigma_xx, sigma_xy, assume_a="pos")
    return Regressor(phi=phi)
