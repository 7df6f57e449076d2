"""Solution quality against the ground truth and on held-out data."""

from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum

import numpy as np
from beartype import beartype

from invbench._scm_env import EnvDataset, GroundTruth, Setting
from invbench._solvers import (
    DimensionMismatchError,
    Regressor,
    empirical_risk,
)


class Method(Enum):
    """A training method compared by the sweep."""

    IRM_V1 = "IrmV1"
    ERM_ANALYTIC = "ErmAnalytic"
    ERM_SGD = "ErmSgd"


class TrialStatus(Enum):
    """Outcome of running one method on one trial."""

    OK = "ok"
    SINGULAR_DESIGN = "singular_design"
    NON_FINITE_OBJECTIVE = "non_finite_objective"
    NOT_CONVERGED = "not_converged"


RESULT_COLUMNS = (
    "setting",
    "noise_model",
    "confounder",
    "weight_std",
    "trial",
    "method",
    "causal_err",
    "noncausal_err",
    "test_mse",
    "seed",
    "status",
)


@beartype
@dataclass(frozen=True, kw_only=True, slots=True)
class Evaluation:
    """Errors of one regressor."""

    causal_err: float
    noncausal_err: float
    test_mse: float


@beartype
@dataclass(frozen=True, kw_only=True, slots=True)
class TrialResult:
    """One (setting, arm, trial, method) row of the results table.

    Rows of methods that raised carry NaN errors. ``NOT_CONVERGED`` rows
    keep their errors. Only ``OK`` rows enter the summaries.
    """

    setting: Setting
    weight_std: float
    trial: int
    method: Method
    causal_err: float
    noncausal_err: float
    test_mse: float
    seed: int
    status: TrialStatus = TrialStatus.OK

    @classmethod
    def failed(
        cls,
        *,
        setting: Setting,
        weight_std: float,
        trial: int,
        method: Method,
        seed: int,
        status: TrialStatus,
    ) -> "TrialResult":
        """A row for a method that raised instead of returning."""
        return cls(
            setting=setting,
            weight_std=weight_std,
            trial=trial,
            method=method,
            causal_err=float("nan"),
            noncausal_err=float("nan"),
            test_mse=float("nan"),
            seed=seed,
            status=status,
        )

    @property
    def sort_key(self) -> tuple[str, float, int, str]:
        """Order of rows in every output file."""
        return (
            self.setting.value,
            self.weight_std,
            self.trial,
            self.method.value,
        )

    def as_row(self) -> dict[str, str | float | int | bool]:
        """The CSV row, keyed by ``RESULT_COLUMNS``."""
        return {
            "setting": self.setting.value,
            "noise_model": self.setting.noise_model.value,
            "confounder": self.setting.confounder,
            "weight_std": self.weight_std,
            "trial": self.trial,
            "method": self.method.value,
            "causal_err": self.causal_err,
            "noncausal_err": self.noncausal_err,
            "test_mse": self.test_mse,
            "seed": str(self.seed),
            "status": self.status.value,
        }


@beartype
def evaluate(
    *,
    regressor: Regressor,
    gt: GroundTruth,
    test_env: EnvDataset,
) -> Evaluation:
    """Parameter-space errors against the ground truth and held-out MSE.

    ``causal_err`` is the L2 distance of the ``Z1`` block from ``w_1y``;
    ``noncausal_err`` is the L2 norm of the ``Z2`` block.
    """
    if regressor.phi.shape[0] != gt.d1 + gt.d2:
        msg = (
            f"Regressor has {regressor.phi.shape[0]} weights, ground truth "
            f"has {gt.d1 + gt.d2}."
        )
        raise DimensionMismatchError(msg)
    causal_block = regressor.phi[: gt.d1]
    spurious_block = regressor.phi[gt.d1 :]
    return Evaluation(
        causal_err=float(np.linalg.norm(causal_block - gt.w_1y)),
        noncausal_err=float(np.linalg.norm(spurious_block)),
        test_mse=empirical_risk(regressor=regressor, ds=test_env),
    )


@beartype
def regressor_coverage(
    *,
    gt: GroundTruth,
    low: float = 0.5,
    high: float = 1.5,
) -> float:
    """Fraction of optimal-regressor causal terms inside ``[low, high]``."""
    inside = (gt.w_1y >= low) & (gt.w_1y <= high)
    return float(np.mean(inside))


@beartype
@dataclass(frozen=True, kw_only=True, slots=True)
class MetricSummary:
    """Robust summary of one metric over the successful trials of a cell.

    Statistics are ``None`` when no trial succeeded. ``n_failed`` counts
    every excluded row, unconverged fits included.
    """

    median: float | None
    mean: float | None
    q25: float | None
    q75: float | None
    iqr: float | None
    n_ok: int
    n_failed: int


@beartype
def summarize(*, values: Sequence[float], n_failed: int) -> MetricSummary:
    """Median, mean and interquartile range of ``values``."""
    if not values:
        return MetricSummary(
            median=None,
            mean=None,
            q25=None,
            q75=None,
            iqr=None,
            n_ok=0,
            n_failed=n_failed,
        )
    array = np.asarray(values, dtype=np.float64)
    quartiles = np.quantile(array, [0.25, 0.5, 0.75])
    q25, median, q75 = (float(value) for value in quartiles)
    return MetricSummary(
        median=median,
        mean=float(np.mean(array)),
        q25=q25,
        q75=q75,
        iqr=q75 - q25,
        n_ok=len(values),
        n_failed=n_failed,
    )
