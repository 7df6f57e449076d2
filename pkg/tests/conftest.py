"""Configuration for ``pytest``."""

from pathlib import Path

import pytest

from invbench import (
    IrmHyperparams,
    Method,
    ScmConfig,
    ScmTemplate,
    Setting,
    SgdHyperparams,
    SweepConfig,
)
from invbench._harness import WORKERS_ENV_VAR


@pytest.fixture(name="no_worker_override", autouse=True)
def fixture_no_worker_override(
    *,
    monkeypatch: pytest.MonkeyPatch,
) -> None:
    """Keep a worker count from the calling shell out of every test."""
    monkeypatch.delenv(name=WORKERS_ENV_VAR, raising=False)


@pytest.fixture(name="small_template")
def fixture_small_template() -> ScmTemplate:
    """A template small enough for many trials per test."""
    return ScmTemplate(d1=3, d2=3, dh=2, n_per_env=300)


@pytest.fixture(name="unconfounded_config")
def fixture_unconfounded_config() -> ScmConfig:
    """A homoskedastic setting without a confounder."""
    return ScmTemplate(d1=3, d2=3, dh=2).resolve(
        setting=Setting.HOMOSKEDASTIC,
        weight_std=0.35,
    )


@pytest.fixture(name="smoke_sweep_config")
def fixture_smoke_sweep_config(*, tmp_path: Path) -> SweepConfig:
    """Every setting and arm, with tiny dimensions and budgets."""
    return SweepConfig(
        base=ScmTemplate(d1=2, d2=2, dh=2, n_per_env=100),
        trials=2,
        methods=tuple(Method),
        irm_hp=IrmHyperparams(max_iters=200, warmup_iters=50),
        sgd_hp=SgdHyperparams(epochs=3),
        out_dir=tmp_path / "out",
        max_workers=1,
    )
