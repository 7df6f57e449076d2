"""Tests for solution metrics."""

import math

import numpy as np
import pytest

from invbench import (
    RESULT_COLUMNS,
    DimensionMismatchError,
    EnvDataset,
    GroundTruth,
    Method,
    Regressor,
    ScmTemplate,
    Setting,
    TrialResult,
    TrialStatus,
    empirical_risk,
    evaluate,
    regressor_coverage,
    sample_environment,
    sample_ground_truth,
    substream,
    summarize,
)


def _ground_truth(*, w_1y: list[float], w_y2: list[float]) -> GroundTruth:
    """Unconfounded ground truth with the given chain weights."""
    return GroundTruth(
        w_1y=np.array(w_1y),
        w_y2=np.array(w_y2),
        w_h1=np.zeros(shape=(len(w_1y), 0)),
        w_hy=np.zeros(shape=0),
        w_h2=np.zeros(shape=(len(w_y2), 0)),
    )


@pytest.fixture(name="small_problem")
def fixture_small_problem() -> tuple[GroundTruth, EnvDataset]:
    """A 2+2-dimensional ground truth and a held-out sample."""
    config = ScmTemplate(d1=2, d2=2, n_per_env=200).resolve(
        setting=Setting.HOMOSKEDASTIC, weight_std=0.35
    )
    rng = substream(seed=0)
    gt = sample_ground_truth(config=config, rng=rng)
    return gt, sample_environment(gt=gt, config=config, scale=5.0, rng=rng)


def test_optimal_regressor_has_no_error(
    *,
    small_problem: tuple[GroundTruth, EnvDataset],
) -> None:
    """The invariant predictor scores zero on both parameter errors."""
    gt, test_env = small_problem
    errors = evaluate(
        regressor=Regressor(phi=gt.optimal_regressor),
        gt=gt,
        test_env=test_env,
    )
    assert errors.causal_err == 0.0
    assert errors.noncausal_err == 0.0


def test_zero_regressor(
    *,
    small_problem: tuple[GroundTruth, EnvDataset],
) -> None:
    """The zero regressor misses the whole causal block."""
    gt, test_env = small_problem
    errors = evaluate(
        regressor=Regressor(phi=np.zeros(shape=4)),
        gt=gt,
        test_env=test_env,
    )
    assert errors.causal_err == pytest.approx(
        expected=float(np.linalg.norm(gt.w_1y)), rel=1e-12
    )
    assert errors.noncausal_err == 0.0
    assert errors.test_mse == pytest.approx(
        expected=float(np.mean(test_env.y**2)),
        rel=1e-12,
    )


def test_hand_computed_errors(
    *,
    small_problem: tuple[GroundTruth, EnvDataset],
) -> None:
    """Both norms match a direct computation."""
    _, test_env = small_problem
    gt = _ground_truth(w_1y=[1.0, 2.0], w_y2=[0.5, -0.5])
    phi = np.array([0.5, 2.5, 3.0, -4.0])
    errors = evaluate(
        regressor=Regressor(phi=phi),
        gt=gt,
        test_env=test_env,
    )
    assert errors.causal_err == pytest.approx(
        expected=math.sqrt(0.5**2 + 0.5**2), rel=1e-12
    )
    assert errors.noncausal_err == pytest.approx(expected=5.0, rel=1e-12)
    assert errors.test_mse == empirical_risk(
        regressor=Regressor(phi=phi),
        ds=test_env,
    )


def test_spurious_error_scales(
    *,
    small_problem: tuple[GroundTruth, EnvDataset],
) -> None:
    """Doubling the spurious block doubles the spurious error."""
    gt, test_env = small_problem
    phi = np.array([0.1, 0.2, 0.3, -0.7])
    doubled = phi.copy()
    doubled[2:] *= 2
    single = evaluate(
        regressor=Regressor(phi=phi),
        gt=gt,
        test_env=test_env,
    )
    double = evaluate(
        regressor=Regressor(phi=doubled),
        gt=gt,
        test_env=test_env,
    )
    assert double.noncausal_err == 2 * single.noncausal_err
    assert double.causal_err == single.causal_err


def test_width_mismatch(
    *,
    small_problem: tuple[GroundTruth, EnvDataset],
) -> None:
    """The regressor must cover both blocks."""
    gt, test_env = small_problem
    with pytest.raises(expected_exception=DimensionMismatchError):
        evaluate(
            regressor=Regressor(phi=np.zeros(shape=3)),
            gt=gt,
            test_env=test_env,
        )


def test_causal_predictor_beats_null() -> None:
    """Out of sample the causal predictor is no worse than predicting 0."""
    config = ScmTemplate(d1=3, d2=3, n_per_env=10_000).resolve(
        setting=Setting.HETEROSKEDASTIC, weight_std=0.35
    )
    rng = substream(seed=1)
    gt = sample_ground_truth(config=config, rng=rng)
    test_env = sample_environment(gt=gt, config=config, scale=5.0, rng=rng)
    optimal = evaluate(
        regressor=Regressor(phi=gt.optimal_regressor),
        gt=gt,
        test_env=test_env,
    )
    null = evaluate(
        regressor=Regressor(phi=np.zeros(shape=6)), gt=gt, test_env=test_env
    )
    residuals = test_env.x @ gt.optimal_regressor - test_env.y
    standard_error = float(np.std(residuals**2) / np.sqrt(test_env.n))
    assert optimal.test_mse <= null.test_mse + 3 * standard_error


def test_regressor_coverage() -> None:
    """Coverage counts causal weights inside the closed interval."""
    gt = _ground_truth(w_1y=[0.5, 1.0, 1.5, 1.6, -1.0], w_y2=[0.0])
    assert regressor_coverage(gt=gt) == 0.6
    assert regressor_coverage(gt=gt, low=-2.0, high=2.0) == 1.0


def test_summarize() -> None:
    """Quartiles use linear interpolation."""
    summary = summarize(values=[4.0, 1.0, 3.0, 2.0], n_failed=1)
    assert summary.median == 2.5
    assert summary.mean == 2.5
    assert summary.q25 == 1.75
    assert summary.q75 == 3.25
    assert summary.iqr == 1.5
    assert (summary.n_ok, summary.n_failed) == (4, 1)


def test_summarize_without_values() -> None:
    """A cell where every trial failed has no statistics."""
    summary = summarize(values=[], n_failed=3)
    assert summary.median is None
    assert summary.iqr is None
    assert (summary.n_ok, summary.n_failed) == (0, 3)


def test_failed_row() -> None:
    """Failed rows keep their coordinates and carry NaN errors."""
    row = TrialResult.failed(
        setting=Setting.HETEROSKEDASTIC_CONFOUNDED,
        weight_std=0.1,
        trial=3,
        method=Method.ERM_ANALYTIC,
        seed=2**64 - 1,
        status=TrialStatus.SINGULAR_DESIGN,
    )
    csv_row = row.as_row()
    assert tuple(csv_row) == RESULT_COLUMNS
    assert csv_row["noise_model"] == "heteroskedastic"
    assert csv_row["confounder"] is True
    assert csv_row["seed"] == "18446744073709551615"
    assert csv_row["status"] == "singular_design"
    assert math.isnan(row.causal_err)


def test_sort_key() -> None:
    """Rows sort by setting, arm, trial, then method."""
    rows = [
        TrialResult(
            setting=setting,
            weight_std=weight_std,
            trial=trial,
            method=method,
            causal_err=0.0,
            noncausal_err=0.0,
            test_mse=0.0,
            seed=0,
        )
        for setting in (Setting.HOMOSKEDASTIC, Setting.HETEROSKEDASTIC)
        for weight_std in (0.35, 0.1)
        for trial in (1, 0)
        for method in Method
    ]
    ordered = sorted(rows, key=lambda row: row.sort_key)
    assert ordered[0].setting is Setting.HETEROSKEDASTIC
    assert ordered[0].weight_std == 0.1
    assert ordered[0].trial == 0
    assert ordered[0].method is Method.ERM_ANALYTIC
    assert ordered[-1].setting is Setting.HOMOSKEDASTIC
    assert ordered[-1].method is Method.IRM_V1
