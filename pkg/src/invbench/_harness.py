"""Run the scale sweep over every unit-test setting and write results.

Every cell of the sweep is a (setting, weight scale, trial) triple. Its
randomness comes only from seeds derived from the master seed and the cell
coordinates, so cells can run in any order, on any number of workers, and
the sorted outputs are byte-identical.
"""

import dataclasses
import json
import logging
import os
from collections.abc import Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from importlib.metadata import version
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from beartype import beartype
from pydantic import ConfigDict, TypeAdapter, ValidationError, with_config

from invbench._metrics import (
    RESULT_COLUMNS,
    MetricSummary,
    Method,
    TrialResult,
    TrialStatus,
    evaluate,
    regressor_coverage,
    summarize,
)
from invbench._scm_env import (
    EnvDataset,
    GroundTruth,
    InvalidConfigError,
    ScmConfig,
    ScmTemplate,
    Setting,
    derive_seed,
    sample_environment,
    sample_ground_truth,
    substream,
)
from invbench._solvers import (
    IrmHyperparams,
    NonFiniteObjectiveError,
    Regressor,
    SgdHyperparams,
    SingularDesignError,
    TraceRecord,
    erm_analytic,
    erm_sgd,
    irm_stationarity,
    random_init,
    train_irmv1,
)

_LOGGER = logging.getLogger(name=__name__)

WORKERS_ENV_VAR = "INVBENCH_THREADS"
RESULTS_FILE = "results.csv"
SUMMARY_FILE = "summary.json"
_FLOAT_FORMAT = "%.17g"
_METRICS = ("causal_err", "noncausal_err", "test_mse")


class OutputDirectoryError(OSError):
    """Raised when the output directory cannot be created or written."""


@beartype
@with_config(ConfigDict(extra="forbid"))
@dataclass(frozen=True, kw_only=True, slots=True)
class SweepConfig:
    """Everything needed to reproduce one sweep."""

    base: ScmTemplate = field(default_factory=ScmTemplate)
    weight_stds: tuple[float, ...] = (0.35, 0.1)
    settings: tuple[Setting, ...] = tuple(Setting)
    methods: tuple[Method, ...] = tuple(Method)
    trials: int = 20
    irm_hp: IrmHyperparams = field(default_factory=IrmHyperparams)
    sgd_hp: SgdHyperparams = field(default_factory=SgdHyperparams)
    out_dir: Path = Path("invbench-results")
    max_workers: int | None = None

    def __post_init__(self) -> None:
        """Validate the sweep shape."""
        if self.trials < 1:
            msg = f"trials must be at least 1, got {self.trials}"
            raise InvalidConfigError(msg)
        if not self.weight_stds or not self.settings or not self.methods:
            msg = "weight_stds, settings and methods must not be empty"
            raise InvalidConfigError(msg)
        if self.max_workers is not None and self.max_workers < 1:
            msg = f"max_workers must be at least 1, got {self.max_workers}"
            raise InvalidConfigError(msg)
        # Resolving every cell validates the template against each arm.
        for setting in self.settings:
            for weight_std in self.weight_stds:
                self.base.resolve(setting=setting, weight_std=weight_std)

    @property
    def heldout_scale(self) -> float:
        """Scale of the held-out test environment."""
        return max(self.base.env_scales)


_SWEEP_CONFIG_ADAPTER = TypeAdapter(type=SweepConfig)
_UNKNOWN_KEY_ERRORS = frozenset(
    {"extra_forbidden", "unexpected_keyword_argument"}
)


@beartype
def _config_error(*, exc: ValidationError, source: str) -> InvalidConfigError:
    """Describe the first validation error by its dotted key path."""
    error = exc.errors(include_url=False)[0]
    key = ".".join(
        f"[{part}]" if isinstance(part, int) else str(object=part)
        for part in error["loc"]
    ).replace(".[", "[")
    if error["type"] in _UNKNOWN_KEY_ERRORS:
        msg = f"Unknown configuration key: {key}"
    elif key:
        msg = f"{key}: {error['msg']}"
    else:
        msg = f"{source}: {error['msg']}"
    return InvalidConfigError(msg)


@beartype
def sweep_config_from_dict(*, data: Mapping[str, object]) -> SweepConfig:
    """Build a ``SweepConfig`` from parsed JSON.

    Raises:
        InvalidConfigError: A key is unknown or a value is invalid.
    """
    try:
        return _SWEEP_CONFIG_ADAPTER.validate_python(dict(data))
    except ValidationError as exc:
        raise _config_error(exc=exc, source="configuration") from exc


@beartype
def load_sweep_config(*, path: Path) -> SweepConfig:
    """Read a JSON sweep configuration file.

    Raises:
        InvalidConfigError: The file is not valid JSON or does not describe
            a valid sweep.
    """
    try:
        return _SWEEP_CONFIG_ADAPTER.validate_json(path.read_bytes())
    except ValidationError as exc:
        raise _config_error(exc=exc, source=str(object=path)) from exc


@beartype
def sweep_config_to_dict(*, cfg: SweepConfig) -> dict[str, object]:
    """The fully resolved configuration, itself a valid input file."""
    data = _SWEEP_CONFIG_ADAPTER.dump_python(cfg, mode="json")
    assert isinstance(data, dict)
    return data


@beartype
def trial_seed(
    *,
    cfg: SweepConfig,
    setting: Setting,
    weight_std: float,
    trial: int,
) -> int:
    """The root seed of one sweep cell."""
    return derive_seed(
        master_seed=cfg.base.master_seed,
        parts=(setting.value, weight_std, trial),
    )


@beartype
def _stream(*, seed: int, label: str) -> np.random.Generator:
    """A named substream of a cell."""
    return substream(seed=derive_seed(master_seed=seed, parts=(label,)))


@beartype
@dataclass(frozen=True, kw_only=True, slots=True, eq=False)
class TrialData:
    """The sampled ground truth and datasets of one cell."""

    config: ScmConfig
    gt: GroundTruth
    train_envs: tuple[EnvDataset, ...]
    test_env: EnvDataset


@beartype
def sample_trial_data(
    *,
    cfg: SweepConfig,
    setting: Setting,
    weight_std: float,
    seed: int,
) -> TrialData:
    """Sample the ground truth, training environments and held-out set."""
    config = cfg.base.resolve(setting=setting, weight_std=weight_std)
    gt = sample_ground_truth(
        config=config,
        rng=_stream(seed=seed, label="ground_truth"),
    )
    train_envs = tuple(
        sample_environment(
            gt=gt,
            config=config,
            scale=scale,
            rng=_stream(seed=seed, label=f"env/{index}"),
        )
        for index, scale in enumerate(config.env_scales)
    )
    test_env = sample_environment(
        gt=gt,
        config=config,
        scale=cfg.heldout_scale,
        rng=_stream(seed=seed, label="heldout"),
    )
    return TrialData(
        config=config,
        gt=gt,
        train_envs=train_envs,
        test_env=test_env,
    )


@beartype
def _fit(
    *,
    method: Method,
    data: TrialData,
    cfg: SweepConfig,
    seed: int,
    trace: bool,
) -> tuple[Regressor, tuple[TraceRecord, ...]]:
    """Train one method on the training environments of a cell."""
    dim = data.config.dim
    if method is Method.IRM_V1:
        init = random_init(
            dim=dim,
            std=cfg.irm_hp.init_std,
            rng=_stream(seed=seed, label="irm_init"),
        )
        return train_irmv1(
            envs=data.train_envs,
            hp=cfg.irm_hp,
            init=init,
            trace=trace,
        )
    if method is Method.ERM_ANALYTIC:
        return erm_analytic(envs=data.train_envs), ()
    init = Regressor(phi=np.zeros(shape=dim))
    return erm_sgd(envs=data.train_envs, hp=cfg.sgd_hp, init=init), ()


_FAILURE_STATUS: dict[type[Exception], TrialStatus] = {
    SingularDesignError: TrialStatus.SINGULAR_DESIGN,
    NonFiniteObjectiveError: TrialStatus.NON_FINITE_OBJECTIVE,
}


@beartype
def trace_trial(
    *,
    setting: Setting,
    weight_std: float,
    trial: int,
    cfg: SweepConfig,
) -> tuple[list[TrialResult], tuple[TraceRecord, ...]]:
    """Run one cell and also return the IRMv1 training trace."""
    return _execute_trial(
        setting=setting,
        weight_std=weight_std,
        trial=trial,
        cfg=cfg,
        trace=True,
    )


@beartype
def run_trial(
    *,
    setting: Setting,
    weight_std: float,
    trial: int,
    cfg: SweepConfig,
) -> list[TrialResult]:
    """Run every requested method on one cell.

    Solver failures become rows with a failure status instead of
    exceptions.
    """
    results, _ = _execute_trial(
        setting=setting,
        weight_std=weight_std,
        trial=trial,
        cfg=cfg,
        trace=False,
    )
    return results


@beartype
def _execute_trial(
    *,
    setting: Setting,
    weight_std: float,
    trial: int,
    cfg: SweepConfig,
    trace: bool,
) -> tuple[list[TrialResult], tuple[TraceRecord, ...]]:
    """Sample one cell and evaluate every method on it."""
    seed = trial_seed(
        cfg=cfg, setting=setting, weight_std=weight_std, trial=trial
    )
    data = sample_trial_data(
        cfg=cfg, setting=setting, weight_std=weight_std, seed=seed
    )
    results: list[TrialResult] = []
    irm_trace: tuple[TraceRecord, ...] = ()
    for method in cfg.methods:
        try:
            regressor, method_trace = _fit(
                method=method,
                data=data,
                cfg=cfg,
                seed=seed,
                trace=trace,
            )
        except (SingularDesignError, NonFiniteObjectiveError) as exc:
            status = _FAILURE_STATUS[type(exc)]
            _LOGGER.warning(
                "%s failed on %s, weight_std %g, trial %d: %s",
                method.value,
                setting.value,
                weight_std,
                trial,
                exc,
            )
            results.append(
                TrialResult.failed(
                    setting=setting,
                    weight_std=weight_std,
                    trial=trial,
                    method=method,
                    seed=seed,
                    status=status,
                )
            )
            continue
        status = TrialStatus.OK
        if method is Method.IRM_V1:
            irm_trace = method_trace
            grad_norm = irm_stationarity(
                regressor=regressor, envs=data.train_envs, hp=cfg.irm_hp
            )
            if grad_norm > cfg.irm_hp.stationary_tol:
                status = TrialStatus.NOT_CONVERGED
                _LOGGER.warning(
                    "IrmV1 did not converge on %s, weight_std %g, trial %d: "
                    "gradient norm %.3g",
                    setting.value,
                    weight_std,
                    trial,
                    grad_norm,
                )
        errors = evaluate(
            regressor=regressor, gt=data.gt, test_env=data.test_env
        )
        results.append(
            TrialResult(
                setting=setting,
                weight_std=weight_std,
                trial=trial,
                method=method,
                causal_err=errors.causal_err,
                noncausal_err=errors.noncausal_err,
                test_mse=errors.test_mse,
                seed=seed,
                status=status,
            )
        )
    return results, irm_trace


@beartype
def worker_count(*, cfg: SweepConfig) -> int:
    """Workers to use: the environment variable wins over the config."""
    override = os.environ.get(WORKERS_ENV_VAR)
    if override is not None:
        try:
            workers = int(override)
        except ValueError:
            msg = f"{WORKERS_ENV_VAR} must be an integer, got {override!r}"
            raise InvalidConfigError(msg) from None
        if workers < 1:
            msg = f"{WORKERS_ENV_VAR} must be at least 1, got {workers}"
            raise InvalidConfigError(msg)
        return workers
    if cfg.max_workers is not None:
        return cfg.max_workers
    return os.cpu_count() or 1


@beartype
def _results_frame(*, results: Sequence[TrialResult]) -> pd.DataFrame:
    """Results as a table with the documented column order."""
    return pd.DataFrame(
        data=[result.as_row() for result in results],
        columns=list(RESULT_COLUMNS),
    )


@beartype
def _write_csv(
    *,
    frame: pd.DataFrame,
    path: Path,
    append: bool,
) -> None:
    """Write a table with the documented float and line conventions."""
    frame.to_csv(
        path_or_buf=path,
        mode="a" if append else "w",
        header=not append,
        index=False,
        float_format=_FLOAT_FORMAT,
        lineterminator="\n",
        encoding="utf-8",
    )


@beartype
def _plot_file_name(*, setting: Setting, weight_std: float) -> str:
    """Name of the plot-data file of one (setting, arm) pair."""
    return f"plot_{setting.value}_{weight_std:g}.csv"


@beartype
def _summary_dict(
    *,
    cfg: SweepConfig,
    results: Sequence[TrialResult],
) -> dict[str, object]:
    """Per-cell statistics, coverage and the resolved configuration."""
    cells: list[dict[str, object]] = []
    for setting in sorted(cfg.settings, key=lambda item: item.value):
        for weight_std in sorted(cfg.weight_stds):
            methods: dict[str, object] = {}
            for method in cfg.methods:
                rows = [
                    result
                    for result in results
                    if result.setting is setting
                    and result.weight_std == weight_std
                    and result.method is method
                ]
                ok_rows = [row for row in rows if row.status is TrialStatus.OK]
                n_failed = len(rows) - len(ok_rows)
                if n_failed:
                    _LOGGER.info(
                        "Excluded %d failed or unconverged %s trials from %s, "
                        "weight_std %g",
                        n_failed,
                        method.value,
                        setting.value,
                        weight_std,
                    )
                methods[method.value] = {
                    metric: dataclasses.asdict(
                        summarize(
                            values=[getattr(row, metric) for row in ok_rows],
                            n_failed=n_failed,
                        )
                    )
                    for metric in _METRICS
                }
            cells.append(
                {
                    "setting": setting.value,
                    "weight_std": weight_std,
                    "methods": methods,
                }
            )

    return {
        "artifact_version": version(distribution_name="invbench"),
        "config": sweep_config_to_dict(cfg=cfg),
        "heldout_scale": cfg.heldout_scale,
        "coverage": _coverage(cfg=cfg),
        "cells": cells,
    }


@beartype
def _coverage(*, cfg: SweepConfig) -> dict[str, float]:
    """Mean fraction of causal terms in ``[0.5, 1.5]`` for every arm."""
    coverage: dict[str, float] = {}
    for weight_std in sorted(cfg.weight_stds):
        fractions: list[float] = []
        for setting in cfg.settings:
            config = cfg.base.resolve(setting=setting, weight_std=weight_std)
            for trial in range(cfg.trials):
                seed = trial_seed(
                    cfg=cfg,
                    setting=setting,
                    weight_std=weight_std,
                    trial=trial,
                )
                gt = sample_ground_truth(
                    config=config,
                    rng=_stream(seed=seed, label="ground_truth"),
                )
                fractions.append(regressor_coverage(gt=gt))
        coverage[repr(weight_std)] = float(np.mean(fractions))
    return coverage


@beartype
@dataclass(frozen=True, kw_only=True, slots=True)
class SweepOutcome:
    """Sorted results and the summary written to ``summary.json``."""

    results: tuple[TrialResult, ...]
    summary: dict[str, object]


@beartype
def _prepare_out_dir(*, out_dir: Path) -> Path:
    """Create the output directory and start an empty results file."""
    results_path = out_dir / RESULTS_FILE
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_csv(
            frame=_results_frame(results=[]),
            path=results_path,
            append=False,
        )
    except OSError as exc:
        msg = f"Cannot write to output directory {out_dir}: {exc}"
        raise OutputDirectoryError(msg) from exc
    return results_path


@beartype
def run_sweep(*, cfg: SweepConfig) -> SweepOutcome:
    """Run every (setting, arm, trial) cell and write all outputs.

    Rows are appended to ``results.csv`` as cells finish, so an interrupted
    sweep leaves complete rows behind. The finished file is rewritten in
    (setting, weight_std, trial, method) order.

    Raises:
        OutputDirectoryError: ``cfg.out_dir`` is not writable.
    """
    results_path = _prepare_out_dir(out_dir=cfg.out_dir)
    cells = [
        (setting, weight_std, trial)
        for setting in cfg.settings
        for weight_std in cfg.weight_stds
        for trial in range(cfg.trials)
    ]
    workers = worker_count(cfg=cfg)
    _LOGGER.info("Running %d cells on %d workers", len(cells), workers)

    results: list[TrialResult] = []

    def _record(cell_results: list[TrialResult]) -> None:
        results.extend(cell_results)
        _write_csv(
            frame=_results_frame(results=cell_results),
            path=results_path,
            append=True,
        )
        _LOGGER.info(
            "Finished %d of %d cells",
            len(results) // len(cfg.methods),
            len(cells),
        )

    if workers == 1:
        for setting, weight_std, trial in cells:
            _record(
                run_trial(
                    setting=setting,
                    weight_std=weight_std,
                    trial=trial,
                    cfg=cfg,
                )
            )
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = [
                executor.submit(
                    run_trial,
                    setting=setting,
                    weight_std=weight_std,
                    trial=trial,
                    cfg=cfg,
                )
                for setting, weight_std, trial in cells
            ]
            for future in as_completed(fs=futures):
                _record(future.result())

    ordered = tuple(sorted(results, key=lambda result: result.sort_key))
    summary = _write_outputs(
        cfg=cfg, results=ordered, results_path=results_path
    )
    return SweepOutcome(results=ordered, summary=summary)


@beartype
def _write_outputs(
    *,
    cfg: SweepConfig,
    results: Sequence[TrialResult],
    results_path: Path,
) -> dict[str, object]:
    """Write the sorted results, plot data and summary."""
    frame = _results_frame(results=results)
    partial_path = results_path.with_suffix(".csv.tmp")
    _write_csv(frame=frame, path=partial_path, append=False)
    partial_path.replace(results_path)

    for (setting_value, weight_std), group in frame.groupby(
        by=["setting", "weight_std"], sort=True
    ):
        plot_path = cfg.out_dir / _plot_file_name(
            setting=Setting(setting_value),
            weight_std=float(weight_std),
        )
        _write_csv(
            frame=group[["method", "trial", *_METRICS]],
            path=plot_path,
            append=False,
        )

    summary_path = cfg.out_dir / SUMMARY_FILE
    summary = _summary_dict(cfg=cfg, results=results)
    summary_path.write_text(
        data=json.dumps(obj=summary, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    _LOGGER.info("Wrote %s and %s", results_path, summary_path)
    return summary


@beartype
def comparison_table(*, summary: Mapping[str, object]) -> pd.DataFrame:
    """Median errors of IRMv1 against analytic ERM for every cell.

    ``causal_winner`` and ``noncausal_winner`` name the method with the
    lower median; they are empty when either method has no successful
    trial.
    """
    cells = summary["cells"]
    assert isinstance(cells, list)
    rows: list[dict[str, object]] = []
    for cell in cells:
        methods = cell["methods"]
        row: dict[str, object] = {
            "weight_std": cell["weight_std"],
            "setting": cell["setting"],
        }
        for metric in ("causal_err", "noncausal_err"):
            irm = _median(methods=methods, method=Method.IRM_V1, metric=metric)
            erm = _median(
                methods=methods, method=Method.ERM_ANALYTIC, metric=metric
            )
            row[f"irm_{metric}"] = irm
            row[f"erm_{metric}"] = erm
            winner = ""
            if irm is not None and erm is not None:
                best = Method.IRM_V1 if irm < erm else Method.ERM_ANALYTIC
                winner = best.value
            row[f"{metric.removesuffix('_err')}_winner"] = winner
        rows.append(row)
    return pd.DataFrame(data=rows).sort_values(
        by=["weight_std", "setting"], ascending=[False, True]
    ).reset_index(drop=True)


@beartype
def _median(
    *,
    methods: Mapping[str, Any],
    method: Method,
    metric: str,
) -> float | None:
    """The median of one metric, if the method ran and succeeded."""
    if method.value not in methods:
        return None
    metric_summary = MetricSummary(**methods[method.value][metric])
    return metric_summary.median
