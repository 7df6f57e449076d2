"""ERM and IRMv1 solvers for linear regressors.

All objectives use the squared loss. The IRMv1 penalty of an environment is
the squared derivative of its risk with respect to a scalar multiplier
``w`` on the predictions, evaluated at ``w = 1``:

    g = d/dw R(w * phi) at w = 1 = (2/n) sum_i (phi.x_i - y_i) * (phi.x_i)

Gradients are derived by hand. ``gradient_check`` compares them with
central finite differences.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.optimize
from beartype import beartype
from pydantic import ConfigDict, with_config

from invbench._scm_env import EnvDataset, FloatArray, InvalidConfigError

_LOGGER = logging.getLogger(name=__name__)

MAX_CONDITION_NUMBER = 1e12
_LOG_EVERY = 1000


class DimensionMismatchError(ValueError):
    """Raised when a regressor and a dataset disagree on width."""


class SingularDesignError(Exception):
    """Raised when the pooled design matrix is numerically rank
    deficient.
    """


class NonFiniteObjectiveError(Exception):
    """Raised when training produces a NaN or infinite value.

    This usually means the step size is too large for the problem.
    """


@beartype
@dataclass(frozen=True, kw_only=True, slots=True, eq=False)
class Regressor:
    """A linear predictor over the concatenated features ``(Z1 || Z2)``.

    ``bias`` is ``None`` when the intercept is disabled. An enabled bias is
    treated everywhere as one extra weight on a constant feature.
    """

    phi: FloatArray
    bias: float | None = None

    def __post_init__(self) -> None:
        """Reject non-finite weights."""
        assert self.phi.ndim == 1
        bias = 0.0 if self.bias is None else self.bias
        if not (np.all(np.isfinite(self.phi)) and np.isfinite(bias)):
            msg = "Regressor weights must be finite."
            raise NonFiniteObjectiveError(msg)

    @property
    def theta(self) -> FloatArray:
        """All trainable parameters, bias last when enabled."""
        if self.bias is None:
            return self.phi
        return np.append(self.phi, self.bias)

    @classmethod
    def from_theta(cls, *, theta: FloatArray, with_bias: bool) -> "Regressor":
        """Inverse of ``theta``."""
        if with_bias:
            return cls(phi=theta[:-1].copy(), bias=float(theta[-1]))
        return cls(phi=theta.copy())


@beartype
@with_config(ConfigDict(extra="forbid"))
@dataclass(frozen=True, kw_only=True, slots=True)
class IrmHyperparams:
    """Settings of the IRMv1 gradient-descent trainer.

    ``cap_step`` limits each step to the reciprocal of an upper bound on the
    objective's curvature at the current iterate, so ``step_size`` acts as
    a ceiling. Without it, a step that is too large ends in
    ``NonFiniteObjectiveError``.

    With ``refine``, the last gradient-descent iterate is polished by an
    exact-Hessian trust-region method at ``lambda_max`` for at most
    ``refine_max_iters`` iterations. A fit counts as converged when the
    gradient norm at ``lambda_max`` is at most ``stationary_tol``.
    """

    lambda_max: float = 100.0
    warmup_iters: int = 1000
    step_size: float = 1e-3
    max_iters: int = 50_000
    grad_tol: float = 1e-8
    init_std: float = 0.1
    cap_step: bool = True
    refine: bool = True
    refine_max_iters: int = 500
    stationary_tol: float = 1e-5

    def __post_init__(self) -> None:
        """Validate ranges."""
        if self.lambda_max < 0:
            msg = f"lambda_max must be non-negative, got {self.lambda_max}"
            raise InvalidConfigError(msg)
        if self.warmup_iters < 0:
            msg = f"warmup_iters must be non-negative: {self.warmup_iters}"
            raise InvalidConfigError(msg)
        if self.step_size <= 0 or self.grad_tol <= 0 or self.init_std < 0:
            msg = "step_size, grad_tol must be positive; init_std non-negative"
            raise InvalidConfigError(msg)
        if self.max_iters < 1:
            msg = f"max_iters must be at least 1, got {self.max_iters}"
            raise InvalidConfigError(msg)
        if self.refine_max_iters < 0:
            msg = (
                "refine_max_iters must be non-negative, got "
                f"{self.refine_max_iters}"
            )
            raise InvalidConfigError(msg)
        if self.stationary_tol <= 0:
            msg = f"stationary_tol must be positive, got {self.stationary_tol}"
            raise InvalidConfigError(msg)

    def penalty_weight(self, *, iteration: int) -> float:
        """The penalty weight after a linear warm-up from zero."""
        if iteration >= self.warmup_iters:
            return self.lambda_max
        return self.lambda_max * iteration / self.warmup_iters


@beartype
@with_config(ConfigDict(extra="forbid"))
@dataclass(frozen=True, kw_only=True, slots=True)
class SgdHyperparams:
    """Settings of mini-batch SGD on the pooled squared loss.

    The returned regressor averages the iterates of every epoch from
    ``average_from * epochs`` onwards.
    """

    step_size: float = 5e-3
    epochs: int = 100
    batch_size: int = 32
    shuffle_seed: int = 0
    average_from: float = 0.5

    def __post_init__(self) -> None:
        """Validate ranges."""
        if self.step_size <= 0:
            msg = f"step_size must be positive, got {self.step_size}"
            raise InvalidConfigError(msg)
        if self.epochs < 1 or self.batch_size < 1:
            msg = "epochs and batch_size must be at least 1"
            raise InvalidConfigError(msg)
        if not 0 <= self.shuffle_seed < 2**64:
            msg = f"shuffle_seed must fit in 64 bits: {self.shuffle_seed}"
            raise InvalidConfigError(msg)
        if not 0 <= self.average_from <= 1:
            msg = f"average_from must be in [0, 1], got {self.average_from}"
            raise InvalidConfigError(msg)


@beartype
@dataclass(frozen=True, kw_only=True, slots=True)
class TraceRecord:
    """One iteration of the IRMv1 trainer.

    The row after a trust-region refinement adds its iteration count to
    the last descent row and reports the length of the whole refinement
    move as ``step``.
    """

    iteration: int
    penalty_weight: float
    objective: float
    risk_sum: float
    penalty_sum: float
    grad_norm: float
    step: float


@beartype
def _design(*, x: FloatArray, with_bias: bool) -> FloatArray:
    """Append a constant column when the intercept is enabled."""
    if with_bias:
        return np.hstack([x, np.ones(shape=(x.shape[0], 1))])
    return x


@beartype
def _check_width(*, regressor: Regressor, ds: EnvDataset) -> None:
    """Fail when the regressor does not fit the dataset."""
    if regressor.phi.shape[0] != ds.x.shape[1]:
        msg = (
            f"Regressor has {regressor.phi.shape[0]} weights but the data "
            f"has {ds.x.shape[1]} features."
        )
        raise DimensionMismatchError(msg)


@beartype
def _predict(*, regressor: Regressor, ds: EnvDataset) -> FloatArray:
    """Predictions of ``regressor`` on every row of ``ds``."""
    _check_width(regressor=regressor, ds=ds)
    predictions = ds.x @ regressor.phi
    if regressor.bias is not None:
        predictions = predictions + regressor.bias
    return predictions


@beartype
def empirical_risk(*, regressor: Regressor, ds: EnvDataset) -> float:
    """Mean squared error of ``regressor`` on ``ds``."""
    residuals = _predict(regressor=regressor, ds=ds) - ds.y
    return float(np.mean(residuals**2))


@beartype
def _penalty_derivative(*, regressor: Regressor, ds: EnvDataset) -> float:
    """``g``, the derivative of the risk of ``w * phi`` at ``w = 1``."""
    predictions = _predict(regressor=regressor, ds=ds)
    return float(2 * np.mean((predictions - ds.y) * predictions))


@beartype
def irm_penalty(*, regressor: Regressor, ds: EnvDataset) -> float:
    """The IRMv1 penalty ``g**2`` of one environment."""
    return _penalty_derivative(regressor=regressor, ds=ds) ** 2


@beartype
def irm_objective(
    *,
    regressor: Regressor,
    envs: Sequence[EnvDataset],
    penalty_weight: float,
) -> float:
    """Sum over environments of risk plus weighted penalty."""
    assert envs, "at least one environment is required"
    total = 0.0
    for ds in envs:
        total += empirical_risk(regressor=regressor, ds=ds)
        total += penalty_weight * irm_penalty(regressor=regressor, ds=ds)
    return total


@beartype
def irm_objective_grad(
    *,
    regressor: Regressor,
    envs: Sequence[EnvDataset],
    penalty_weight: float,
) -> FloatArray:
    """Gradient of ``irm_objective`` with respect to ``regressor.theta``."""
    assert envs, "at least one environment is required"
    with_bias = regressor.bias is not None
    grad = np.zeros(shape=regressor.theta.shape[0])
    for ds in envs:
        design = _design(x=ds.x, with_bias=with_bias)
        predictions = _predict(regressor=regressor, ds=ds)
        residuals = predictions - ds.y
        g = 2 * np.mean(residuals * predictions)
        grad_risk = 2 / ds.n * (design.T @ residuals)
        grad_g = 2 / ds.n * (design.T @ (2 * predictions - ds.y))
        grad += grad_risk + penalty_weight * 2 * g * grad_g
    return grad


@beartype
@dataclass(frozen=True, kw_only=True, slots=True, eq=False)
class _StackedMoments:
    """Per-environment sufficient statistics of the squared loss.

    ``gram[e] = X^T X / n``, ``cross[e] = X^T y / n``,
    ``energy[e] = y^T y / n``. Risk, penalty and their gradients are
    quadratic or quartic forms in these, so training never touches the
    samples again.
    """

    gram: FloatArray
    cross: FloatArray
    energy: FloatArray
    gram_norms: FloatArray

    @classmethod
    def from_envs(
        cls,
        *,
        envs: Sequence[EnvDataset],
        with_bias: bool,
    ) -> "_StackedMoments":
        """Compute the statistics of every environment, in order."""
        grams: list[FloatArray] = []
        crosses: list[FloatArray] = []
        energies: list[float] = []
        for ds in envs:
            design = _design(x=ds.x, with_bias=with_bias)
            grams.append(design.T @ design / ds.n)
            crosses.append(design.T @ ds.y / ds.n)
            energies.append(float(ds.y @ ds.y / ds.n))
        gram = np.stack(grams)
        return cls(
            gram=gram,
            cross=np.stack(crosses),
            energy=np.asarray(energies, dtype=np.float64),
            gram_norms=np.linalg.norm(gram, ord=2, axis=(1, 2)),
        )


@beartype
@dataclass(frozen=True, kw_only=True, slots=True, eq=False)
class _Evaluation:
    """Objective terms, gradient and curvature bound at one iterate."""

    objective: float
    risk_sum: float
    penalty_sum: float
    grad: FloatArray
    curvature_bound: float


@beartype
def _evaluate(
    *,
    moments: _StackedMoments,
    theta: FloatArray,
    penalty_weight: float,
) -> _Evaluation:
    """Evaluate the IRMv1 objective from sufficient statistics."""
    gram_theta = moments.gram @ theta
    quadratic = gram_theta @ theta
    linear = moments.cross @ theta
    risks = quadratic - 2 * linear + moments.energy
    g = 2 * (quadratic - linear)
    grad_risk = 2 * (gram_theta - moments.cross)
    grad_g = 2 * (2 * gram_theta - moments.cross)
    grad = grad_risk.sum(axis=0) + penalty_weight * (
        2 * g[:, np.newaxis] * grad_g
    ).sum(axis=0)
    # Hessian of g**2 is 2 grad_g grad_g^T + 8 g gram.
    curvature_bound = 2 * moments.gram_norms.sum() + penalty_weight * (
        2 * (grad_g**2).sum(axis=1) + 8 * np.abs(g) * moments.gram_norms
    ).sum()
    risk_sum = float(risks.sum())
    penalty_sum = float((g**2).sum())
    return _Evaluation(
        objective=risk_sum + penalty_weight * penalty_sum,
        risk_sum=risk_sum,
        penalty_sum=penalty_sum,
        grad=grad,
        curvature_bound=float(curvature_bound),
    )



@beartype
def _hessian(
    *,
    moments: _StackedMoments,
    theta: FloatArray,
    penalty_weight: float,
) -> FloatArray:
    """Exact Hessian of the IRMv1 objective from sufficient statistics."""
    gram_theta = moments.gram @ theta
    g = 2 * (gram_theta @ theta - moments.cross @ theta)
    grad_g = 2 * (2 * gram_theta - moments.cross)
    penalty_hessian = 2 * np.einsum("ei,ej->ij", grad_g, grad_g) + 8 * (
        np.einsum("e,eij->ij", g, moments.gram)
    )
    hessian: FloatArray = (
        2 * moments.gram.sum(axis=0) + penalty_weight * penalty_hessian
    )
    return hessian


@beartype
def _refine(
    *,
    moments: _StackedMoments,
    theta: FloatArray,
    hp: IrmHyperparams,
) -> scipy.optimize.OptimizeResult:
    """Trust-region Newton iterations at the full penalty weight."""

    def objective_and_grad(candidate: FloatArray) -> tuple[float, FloatArray]:
        evaluation = _evaluate(
            moments=moments,
            theta=candidate,
            penalty_weight=hp.lambda_max,
        )
        return evaluation.objective, evaluation.grad

    def hessian(candidate: FloatArray) -> FloatArray:
        return _hessian(
            moments=moments,
            theta=candidate,
            penalty_weight=hp.lambda_max,
        )

    return scipy.optimize.minimize(
        fun=objective_and_grad,
        x0=theta,
        method="trust-exact",
        jac=True,
        hess=hessian,
        options={"gtol": hp.grad_tol, "maxiter": hp.refine_max_iters},
    )


@beartype
def random_init(
    *,
    dim: int,
    std: float,
    rng: np.random.Generator,
) -> Regressor:
    """Draw initial weights i.i.d. from ``N(0, std**2)``."""
    return Regressor(phi=rng.normal(loc=0.0, scale=std, size=dim))


@beartype
def train_irmv1(
    *,
    envs: Sequence[EnvDataset],
    hp: IrmHyperparams,
    init: Regressor,
    trace: bool,
) -> tuple[Regressor, tuple[TraceRecord, ...]]:
    """Minimize the IRMv1 objective by full-batch gradient descent.

    The penalty weight ramps linearly from 0 to ``hp.lambda_max`` over
    ``hp.warmup_iters`` iterations and is then held. Descent stops after
    ``hp.max_iters`` steps or as soon as the gradient norm falls below
    ``hp.grad_tol``. With ``hp.refine`` the result is then refined at
    ``hp.lambda_max``; ``irm_stationarity`` tells whether it converged.

    Raises:
        NonFiniteObjectiveError: The objective or its gradient stopped being
            finite.
    """
    assert envs, "at least one environment is required"
    for ds in envs:
        _check_width(regressor=init, ds=ds)
    with_bias = init.bias is not None
    moments = _StackedMoments.from_envs(envs=envs, with_bias=with_bias)
    theta = init.theta.copy()
    records: list[TraceRecord] = []

    for iteration in range(hp.max_iters):
        penalty_weight = hp.penalty_weight(iteration=iteration)
        evaluation = _evaluate(
            moments=moments,
            theta=theta,
            penalty_weight=penalty_weight,
        )
        grad_norm = float(np.linalg.norm(evaluation.grad))
        if not (np.isfinite(evaluation.objective) and np.isfinite(grad_norm)):
            msg = (
                f"IRMv1 objective diverged at iteration {iteration} "
                f"(step size {hp.step_size:g})."
            )
            raise NonFiniteObjectiveError(msg)

        step = hp.step_size
        if hp.cap_step and evaluation.curvature_bound > 0:
            step = min(step, 1 / evaluation.curvature_bound)

        if trace:
            records.append(
                TraceRecord(
                    iteration=iteration,
                    penalty_weight=penalty_weight,
                    objective=evaluation.objective,
                    risk_sum=evaluation.risk_sum,
                    penalty_sum=evaluation.penalty_sum,
                    grad_norm=grad_norm,
                    step=step,
                )
            )
        if iteration % _LOG_EVERY == 0:
            _LOGGER.debug(
                "IRMv1 iteration %d: lambda %.4g, objective %.6g, "
                "gradient norm %.3g",
                iteration,
                penalty_weight,
                evaluation.objective,
                grad_norm,
            )
        if grad_norm < hp.grad_tol:
            _LOGGER.debug("IRMv1 converged at iteration %d", iteration)
            break
        theta = theta - step * evaluation.grad
    else:
        _LOGGER.debug("IRMv1 stopped after %d iterations", hp.max_iters)

    if hp.refine and hp.refine_max_iters > 0:
        result = _refine(moments=moments, theta=theta, hp=hp)
        refined = np.asarray(result.x, dtype=np.float64)
        if not (np.isfinite(result.fun) and np.all(np.isfinite(refined))):
            msg = "IRMv1 refinement produced non-finite weights."
            raise NonFiniteObjectiveError(msg)
        _LOGGER.debug(
            "IRMv1 refinement: %d iterations, %s", result.nit, result.message
        )
        if trace and result.nit > 0:
            evaluation = _evaluate(
                moments=moments,
                theta=refined,
                penalty_weight=hp.lambda_max,
            )
            records.append(
                TraceRecord(
                    iteration=records[-1].iteration + int(result.nit),
                    penalty_weight=hp.lambda_max,
                    objective=evaluation.objective,
                    risk_sum=evaluation.risk_sum,
                    penalty_sum=evaluation.penalty_sum,
                    grad_norm=float(np.linalg.norm(evaluation.grad)),
                    step=float(np.linalg.norm(refined - theta)),
                )
            )
        theta = refined

    if not np.all(np.isfinite(theta)):
        msg = "IRMv1 weights stopped being finite."
        raise NonFiniteObjectiveError(msg)
    regressor = Regressor.from_theta(theta=theta, with_bias=with_bias)
    return regressor, tuple(records)


@beartype
def irm_stationarity(
    *,
    regressor: Regressor,
    envs: Sequence[EnvDataset],
    hp: IrmHyperparams,
) -> float:
    """Gradient norm of the IRMv1 objective at ``hp.lambda_max``."""
    grad = irm_objective_grad(
        regressor=regressor, envs=envs, penalty_weight=hp.lambda_max
    )
    return float(np.linalg.norm(grad))


@beartype
def _pool(
    *,
    envs: Sequence[EnvDataset],
    with_bias: bool,
) -> tuple[FloatArray, FloatArray]:
    """Concatenate every environment into one design and target."""
    assert envs, "at least one environment is required"
    x = np.vstack([ds.x for ds in envs])
    y = np.concatenate([ds.y for ds in envs])
    return _design(x=x, with_bias=with_bias), y


@beartype
def erm_analytic(
    *,
    envs: Sequence[EnvDataset],
    fit_intercept: bool = False,
    ridge: float = 0.0,
) -> Regressor:
    """Pooled least squares via a Cholesky solve of the normal equations.

    ``ridge`` is added to the diagonal of the normalized Gram matrix before
    the conditioning check.

    Raises:
        SingularDesignError: The (jittered) Gram matrix has a condition
            number above ``MAX_CONDITION_NUMBER``.
    """
    design, y = _pool(envs=envs, with_bias=fit_intercept)
    n = design.shape[0]
    gram = design.T @ design / n + ridge * np.eye(design.shape[1])
    rhs = design.T @ y / n

    condition_number = np.linalg.cond(gram)
    if not condition_number <= MAX_CONDITION_NUMBER:
        msg = (
            f"Pooled design has condition number {condition_number:.3g} "
            f"(limit {MAX_CONDITION_NUMBER:.0e})."
        )
        raise SingularDesignError(msg)
    try:
        factor = scipy.linalg.cho_factor(gram)
    except np.linalg.LinAlgError as exc:
        msg = "Pooled Gram matrix is not positive definite."
        raise SingularDesignError(msg) from exc
    theta = scipy.linalg.cho_solve(factor, rhs)
    return Regressor.from_theta(theta=theta, with_bias=fit_intercept)


@beartype
def erm_sgd(
    *,
    envs: Sequence[EnvDataset],
    hp: SgdHyperparams,
    init: Regressor,
) -> Regressor:
    """Mini-batch SGD on the pooled squared loss.

    Each epoch visits the pooled samples in a fresh permutation drawn from a
    generator seeded with ``hp.shuffle_seed``, so the result is fully
    determined by the data, ``hp`` and ``init``.

    Raises:
        InvalidConfigError: The batch is larger than the pooled sample.
        NonFiniteObjectiveError: The iterates stopped being finite.
    """
    for ds in envs:
        _check_width(regressor=init, ds=ds)
    with_bias = init.bias is not None
    design, y = _pool(envs=envs, with_bias=with_bias)
    n = design.shape[0]
    if hp.batch_size > n:
        msg = f"batch_size {hp.batch_size} exceeds the {n} pooled samples"
        raise InvalidConfigError(msg)

    rng = np.random.default_rng(seed=hp.shuffle_seed)
    first_averaged_epoch = int(hp.epochs * hp.average_from)
    theta = init.theta.copy()
    theta_sum = np.zeros_like(theta)
    averaged_steps = 0

    for epoch in range(hp.epochs):
        order = rng.permutation(n)
        for start in range(0, n, hp.batch_size):
            batch = order[start : start + hp.batch_size]
            x_batch = design[batch]
            residuals = x_batch @ theta - y[batch]
            theta = theta - hp.step_size * (
                2 / batch.shape[0] * (x_batch.T @ residuals)
            )
            if epoch >= first_averaged_epoch:
                theta_sum += theta
                averaged_steps += 1
        if not np.all(np.isfinite(theta)):
            msg = (
                f"SGD diverged in epoch {epoch} "
                f"(step size {hp.step_size:g})."
            )
            raise NonFiniteObjectiveError(msg)

    if averaged_steps:
        theta = theta_sum / averaged_steps
    return Regressor.from_theta(theta=theta, with_bias=with_bias)


@beartype
@dataclass(frozen=True, kw_only=True, slots=True)
class GradientCheckReport:
    """Outcome of comparing analytic and finite-difference gradients."""

    cases: int
    failures: int
    worst_error: float

    @property
    def passed(self) -> bool:
        """Whether every case agreed within tolerance."""
        return self.failures == 0


@beartype
def _random_problem(
    *,
    rng: np.random.Generator,
) -> tuple[Regressor, list[EnvDataset], float]:
    """A small random regressor, environment list and penalty weight."""
    dim = int(rng.integers(low=1, high=7))
    n_envs = int(rng.integers(low=1, high=4))
    envs = [
        EnvDataset(
            scale=1.0,
            x=rng.standard_normal(size=(n, dim)),
            y=rng.standard_normal(size=n),
        )
        for n in rng.integers(low=5, high=30, size=n_envs)
    ]
    bias = float(rng.normal(scale=0.5)) if rng.random() < 0.5 else None
    regressor = Regressor(phi=rng.normal(scale=0.5, size=dim), bias=bias)
    return regressor, envs, float(rng.uniform(low=0.0, high=2.0))


@beartype
def finite_difference_grad(
    *,
    regressor: Regressor,
    envs: Sequence[EnvDataset],
    penalty_weight: float,
    step: float = 1e-6,
) -> FloatArray:
    """Central finite differences of ``irm_objective`` in every weight."""
    theta = regressor.theta
    with_bias = regressor.bias is not None
    grad = np.empty_like(theta)
    for index in range(theta.shape[0]):
        offset = np.zeros_like(theta)
        offset[index] = step
        upper = irm_objective(
            regressor=Regressor.from_theta(
                theta=theta + offset, with_bias=with_bias
            ),
            envs=envs,
            penalty_weight=penalty_weight,
        )
        lower = irm_objective(
            regressor=Regressor.from_theta(
                theta=theta - offset, with_bias=with_bias
            ),
            envs=envs,
            penalty_weight=penalty_weight,
        )
        grad[index] = (upper - lower) / (2 * step)
    return grad


@beartype
def gradient_check(
    *,
    seed: int,
    cases: int = 100,
    rel_tol: float = 1e-5,
) -> GradientCheckReport:
    """Compare ``irm_objective_grad`` with finite differences.

    Each component's error is ``|fd - analytic| / max(1, |analytic|)``.
    """
    rng = np.random.default_rng(seed=seed)
    failures = 0
    worst_error = 0.0
    for case in range(cases):
        regressor, envs, penalty_weight = _random_problem(rng=rng)
        analytic = irm_objective_grad(
            regressor=regressor, envs=envs, penalty_weight=penalty_weight
        )
        numeric = finite_difference_grad(
            regressor=regressor, envs=envs, penalty_weight=penalty_weight
        )
        errors = np.abs(numeric - analytic) / np.maximum(1.0, np.abs(analytic))
        error = float(errors.max())
        worst_error = max(worst_error, error)
        if error > rel_tol:
            failures += 1
            _LOGGER.warning(
                "Gradient check case %d failed with relative error %.3g",
                case,
                error,
            )
    return GradientCheckReport(
        cases=cases, failures=failures, worst_error=worst_error
    )
