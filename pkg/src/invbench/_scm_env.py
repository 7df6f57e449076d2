"""Linear structural-equation unit-test environments.

Every setting shares one chain: a causal block ``Z1`` generates a scalar
target ``Y``, which in turn generates a spurious block ``Z2``. A hidden
confounder ``H`` optionally feeds all three. The environment scale ``e``
always scales the noise of ``Z1`` (and of ``H``); the noise model decides
whether it also scales the target noise or the spurious-feature noise.
"""

import hashlib
import logging
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum

import numpy as np
import numpy.typing as npt
from beartype import beartype
from pydantic import ConfigDict, with_config

_LOGGER = logging.getLogger(name=__name__)

FloatArray = npt.NDArray[np.float64]


class InvalidConfigError(ValueError):
    """Raised when a configuration value violates its documented range."""


class NoiseModel(Enum):
    """Which structural noise carries the environment scale."""

    HOMOSKEDASTIC = "homoskedastic"
    HETEROSKEDASTIC = "heteroskedastic"


class CausalWeights(Enum):
    """How the causal weights ``w_1y`` are chosen.

    ``GAUSSIAN`` draws every entry from the weight distribution.
    ``ONES`` fixes them to the all-ones vector.
    """

    GAUSSIAN = "gaussian"
    ONES = "ones"


class Setting(Enum):
    """The four unit-test settings: confounder x noise model."""

    HOMOSKEDASTIC = "homoskedastic"
    HETEROSKEDASTIC = "heteroskedastic"
    HOMOSKEDASTIC_CONFOUNDED = "homoskedastic-confounded"
    HETEROSKEDASTIC_CONFOUNDED = "heteroskedastic-confounded"

    @property
    def confounder(self) -> bool:
        """Whether the hidden confounder participates."""
        return self in {
            Setting.HOMOSKEDASTIC_CONFOUNDED,
            Setting.HETEROSKEDASTIC_CONFOUNDED,
        }

    @property
    def noise_model(self) -> NoiseModel:
        """The noise model of this setting."""
        if self in {Setting.HOMOSKEDASTIC, Setting.HOMOSKEDASTIC_CONFOUNDED}:
            return NoiseModel.HOMOSKEDASTIC
        return NoiseModel.HETEROSKEDASTIC


@beartype
@dataclass(frozen=True, kw_only=True, slots=True)
class ScmConfig:
    """Full description of one unit-test setting."""

    d1: int
    d2: int
    dh: int
    confounder: bool
    noise_model: NoiseModel
    env_scales: tuple[float, ...]
    weight_std: float
    n_per_env: int
    master_seed: int
    sigma_y_multiplier: float = 1.0
    sigma_2_multiplier: float = 1.0
    causal_weights: CausalWeights = CausalWeights.GAUSSIAN

    def __post_init__(self) -> None:
        """Validate the invariants of a setting."""
        if self.d1 < 1 or self.d2 < 1:
            msg = f"d1 and d2 must be at least 1, got {self.d1}, {self.d2}"
            raise InvalidConfigError(msg)
        if self.confounder and self.dh < 1:
            msg = f"dh must be at least 1 with a confounder, got {self.dh}"
            raise InvalidConfigError(msg)
        if not self.confounder and self.dh != 0:
            msg = f"dh must be 0 without a confounder, got {self.dh}"
            raise InvalidConfigError(msg)
        if not self.env_scales:
            msg = "env_scales must not be empty"
            raise InvalidConfigError(msg)
        if any(scale <= 0 for scale in self.env_scales):
            msg = f"env_scales must be positive, got {self.env_scales}"
            raise InvalidConfigError(msg)
        if self.weight_std <= 0:
            msg = f"weight_std must be positive, got {self.weight_std}"
            raise InvalidConfigError(msg)
        if self.n_per_env < 1:
            msg = f"n_per_env must be at least 1, got {self.n_per_env}"
            raise InvalidConfigError(msg)
        if not 0 <= self.master_seed < 2**64:
            msg = f"master_seed must fit in 64 bits: {self.master_seed}"
            raise InvalidConfigError(msg)
        if self.sigma_y_multiplier < 0 or self.sigma_2_multiplier < 0:
            msg = "noise multipliers must be non-negative"
            raise InvalidConfigError(msg)

    @property
    def dim(self) -> int:
        """Width of the concatenated feature vector ``(Z1 || Z2)``."""
        return self.d1 + self.d2

    def noise_scales(self, *, scale: float) -> tuple[float, float]:
        """Return ``(sigma_y, sigma_2)`` for an environment scale."""
        if self.noise_model is NoiseModel.HOMOSKEDASTIC:
            sigma_y, sigma_2 = scale, 1.0
        else:
            sigma_y, sigma_2 = 1.0, scale
        return (
            sigma_y * self.sigma_y_multiplier,
            sigma_2 * self.sigma_2_multiplier,
        )


@beartype
@with_config(ConfigDict(extra="forbid"))
@dataclass(frozen=True, kw_only=True, slots=True)
class ScmTemplate:
    """The part of a setting shared by every cell of a sweep.

    ``dh`` is the confounder width used by the confounded settings; the
    other two settings resolve it to 0.
    """

    d1: int = 5
    d2: int = 5
    dh: int = 5
    env_scales: tuple[float, ...] = (0.2, 2.0, 5.0)
    n_per_env: int = 1000
    master_seed: int = 0
    sigma_y_multiplier: float = 1.0
    sigma_2_multiplier: float = 1.0
    causal_weights: CausalWeights = CausalWeights.GAUSSIAN

    def resolve(self, *, setting: Setting, weight_std: float) -> ScmConfig:
        """Build the full configuration of one sweep cell."""
        return ScmConfig(
            d1=self.d1,
            d2=self.d2,
            dh=self.dh if setting.confounder else 0,
            confounder=setting.confounder,
            noise_model=setting.noise_model,
            env_scales=self.env_scales,
            weight_std=weight_std,
            n_per_env=self.n_per_env,
            master_seed=self.master_seed,
            sigma_y_multiplier=self.sigma_y_multiplier,
            sigma_2_multiplier=self.sigma_2_multiplier,
            causal_weights=self.causal_weights,
        )


@beartype
@dataclass(frozen=True, kw_only=True, slots=True, eq=False)
class GroundTruth:
    """Sampled SEM weights and the derived optimal regressor."""

    w_1y: FloatArray
    w_y2: FloatArray
    w_h1: FloatArray
    w_hy: FloatArray
    w_h2: FloatArray

    @property
    def d1(self) -> int:
        """Width of the causal block."""
        return int(self.w_1y.shape[0])

    @property
    def d2(self) -> int:
        """Width of the spurious block."""
        return int(self.w_y2.shape[0])

    @property
    def optimal_regressor(self) -> FloatArray:
        """The invariant predictor ``(w_1y || 0)``."""
        return np.concatenate([self.w_1y, np.zeros(shape=self.d2)])


@beartype
@dataclass(frozen=True, kw_only=True, slots=True, eq=False)
class EnvDataset:
    """A finite sample from one environment.

    Rows of ``x`` are concatenated ``(Z1 || Z2)`` observations.
    """

    scale: float
    x: FloatArray
    y: FloatArray

    def __post_init__(self) -> None:
        """Check shapes and finiteness."""
        assert self.x.ndim == 2  # noqa: PLR2004
        assert self.y.shape == (self.x.shape[0],)
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))):
            msg = "Environment samples must be finite."
            raise InvalidConfigError(msg)

    @property
    def n(self) -> int:
        """Number of samples."""
        return int(self.y.shape[0])


@beartype
def derive_seed(
    *,
    master_seed: int,
    parts: Sequence[str | int | float],
) -> int:
    """Derive a stable 64-bit seed from the master seed and labels.

    The seed does not depend on the process, the platform or the order in
    which streams are requested.
    """
    key = "/".join([str(master_seed), *(repr(part) for part in parts)])
    digest = hashlib.sha256(key.encode(encoding="utf-8")).digest()
    return int.from_bytes(digest[:8], byteorder="big")


@beartype
def substream(*, seed: int) -> np.random.Generator:
    """Return a fresh generator for a derived seed."""
    return np.random.default_rng(seed=seed)


@beartype
def sample_ground_truth(
    *,
    config: ScmConfig,
    rng: np.random.Generator,
) -> GroundTruth:
    """Draw every SEM weight i.i.d. from ``N(0, weight_std**2)``.

    Draw order is fixed: ``w_1y``, ``w_y2``, ``w_h1``, ``w_hy``, ``w_h2``.
    """
    std = config.weight_std
    w_1y = rng.normal(loc=0.0, scale=std, size=config.d1)
    if config.causal_weights is CausalWeights.ONES:
        w_1y = np.ones(shape=config.d1)
    w_y2 = rng.normal(loc=0.0, scale=std, size=config.d2)
    w_h1 = rng.normal(loc=0.0, scale=std, size=(config.d1, config.dh))
    w_hy = rng.normal(loc=0.0, scale=std, size=config.dh)
    w_h2 = rng.normal(loc=0.0, scale=std, size=(config.d2, config.dh))
    _LOGGER.debug(
        "Sampled ground truth with causal norm %.6g and spurious norm %.6g",
        np.linalg.norm(w_1y),
        np.linalg.norm(w_y2),
    )
    return GroundTruth(w_1y=w_1y, w_y2=w_y2, w_h1=w_h1, w_hy=w_hy, w_h2=w_h2)


@beartype
def _check_dimensions(*, gt: GroundTruth, config: ScmConfig) -> None:
    """Fail when ground truth and config disagree on widths."""
    expected = (config.d1, config.d2, config.dh)
    actual = (gt.d1, gt.d2, int(gt.w_hy.shape[0]))
    if expected != actual:
        msg = f"ground truth widths {actual} do not match config {expected}"
        raise InvalidConfigError(msg)


@beartype
def sample_environment(
    *,
    gt: GroundTruth,
    config: ScmConfig,
    scale: float,
    rng: np.random.Generator,
) -> EnvDataset:
    """Draw ``config.n_per_env`` rows from the environment at ``scale``.

    ``H ~ N(0, e^2 I)``, ``Z1 = W_h1 H + N(0, e^2 I)``,
    ``Y = w_1y . Z1 + w_hy . H + N(0, sigma_y^2)`` and
    ``Z2 = w_y2 Y + W_h2 H + N(0, sigma_2^2 I)``.
    """
    if scale <= 0:
        msg = f"scale must be positive, got {scale}"
        raise InvalidConfigError(msg)
    _check_dimensions(gt=gt, config=config)
    n = config.n_per_env
    sigma_y, sigma_2 = config.noise_scales(scale=scale)

    h = scale * rng.standard_normal(size=(n, config.dh))
    z1 = h @ gt.w_h1.T + scale * rng.standard_normal(size=(n, config.d1))
    y = z1 @ gt.w_1y + h @ gt.w_hy + sigma_y * rng.standard_normal(size=n)
    z2 = (
        np.outer(y, gt.w_y2)
        + h @ gt.w_h2.T
        + sigma_2 * rng.standard_normal(size=(n, config.d2))
    )
    return EnvDataset(scale=scale, x=np.hstack([z1, z2]), y=y)

