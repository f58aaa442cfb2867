"""Maximum-likelihood estimation with multiple starts.

Each start runs BFGS on the negative mean log-likelihood and is then
polished with a few Newton steps on a finite-difference Hessian of the
analytic gradient, so the convergence test (infinity norm of the
log-likelihood gradient below ``tol``) is met at the scale of the full
sample.
"""
from __future__ import annotations

import json
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
import pandas as pd
from scipy import optimize, stats

from .data import PanelDataset
from .exceptions import EstimationError, NumericError
from .likelihood import PanelLikelihood, check_rule
from .spec import ModelSpec

logger = logging.getLogger(__name__)

BOUNDARY_THRESHOLD = 10.0
SATURATION = 25.0      # utility spread at which exp(-spread) is negligible


class BoundaryWarning(UserWarning):
    """An estimate drifted to the edge of the parameter space."""


class FitStatistics(NamedTuple):
    adjusted_rho2: float
    bic: float


def fit_statistics(final_ll: float, initial_ll: float, k: int, n_obs: int) -> FitStatistics:
    """Adjusted rho-squared ``1 - (LL - k) / LL0`` and ``BIC = -2 LL + k ln n``.

    ``n_obs`` counts choice observations (respondents x tasks).
    """
    if n_obs < 1:
        raise ValueError("n_obs must be positive")
    rho2 = 1.0 - (final_ll - k) / initial_ll
    bic = -2.0 * final_ll + k * math.log(n_obs)
    return FitStatistics(rho2, bic)


@dataclass(frozen=True)
class ParameterEstimate:
    label: str
    name: str
    class_index: int
    block: str
    role: str
    value: float
    std_error: float | None = None
    p_value: float | None = None


@dataclass(frozen=True)
class Diagnostics:
    converged: bool
    gradient_norm: float
    iterations: int
    n_starts: int
    best_start: int
    start_logliks: tuple[float, ...] = ()
    start_converged: tuple[bool, ...] = ()
    hessian_condition: float | None = None
    singular: tuple[str, ...] = ()
    boundary: tuple[str, ...] = ()
    message: str = ""


@dataclass(frozen=True)
class FitResult:
    """Estimates, uncertainty, fit statistics and posteriors of one fit."""

    spec: ModelSpec
    rule: str
    theta: tuple[float, ...]
    parameters: tuple[ParameterEstimate, ...]
    final_ll: float
    initial_ll: float
    n_params: int
    n_observations: int
    n_respondents: int
    adjusted_rho2: float
    bic: float
    class_sizes: tuple[float, ...]
    diagnostics: Diagnostics
    covariance: tuple[tuple[float, ...], ...] | None = None
    se_method: str = "hessian"
    respondent_ids: tuple[str, ...] = ()
    posterior: tuple[tuple[float, ...], ...] = ()
    best_of_multistart: bool = True

    @property
    def theta_array(self) -> np.ndarray:
        return np.asarray(self.theta, dtype=float)

    @property
    def std_errors(self) -> np.ndarray:
        """SE per free parameter (NaN where unavailable)."""
        free = [p for p in self.parameters if p.role == "free"]
        return np.array([np.nan if p.std_error is None else p.std_error for p in free])

    def class_parameters(self, class_index: int) -> dict[str, float]:
        return self.spec.class_parameters(self.theta_array, class_index)

    def membership_parameters(self, class_index: int) -> dict[str, float]:
        return self.spec.membership_parameters(self.theta_array, class_index)

    def table(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(p) for p in self.parameters])

    def to_dict(self) -> dict:
        d = asdict(self)
        d["spec"] = self.spec.to_dict()
        return d

    @classmethod
    def from_dict(cls, d) -> "FitResult":
        d = dict(d)
        d["spec"] = ModelSpec.from_dict(d["spec"])
        d["theta"] = tuple(d["theta"])
        d["parameters"] = tuple(ParameterEstimate(**p) for p in d["parameters"])
        diag = dict(d["diagnostics"])
        for k in ("start_logliks", "start_converged", "singular", "boundary"):
            diag[k] = tuple(diag.get(k, ()))
        d["diagnostics"] = Diagnostics(**diag)
        d["class_sizes"] = tuple(d["class_sizes"])
        if d.get("covariance") is not None:
            d["covariance"] = tuple(tuple(r) for r in d["covariance"])
        d["respondent_ids"] = tuple(d.get("respondent_ids", ()))
        d["posterior"] = tuple(tuple(r) for r in d.get("posterior", ()))
        return cls(**d)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "FitResult":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# ----------------------------------------------------------------------
# optimisation

class _StartResult(NamedTuple):
    theta: np.ndarray
    loglik: float
    gradient_norm: float
    iterations: int
    converged: bool
    message: str


def numerical_hessian(grad, theta: np.ndarray, rel_step: float = 1e-5) -> np.ndarray:
    """Central differences of an analytic gradient, symmetrised."""
    k = theta.size
    H = np.empty((k, k))
    for i in range(k):
        h = rel_step * max(1.0, abs(theta[i]))
        e = np.zeros(k)
        e[i] = h
        H[:, i] = (grad(theta + e) - grad(theta - e)) / (2 * h)
    return 0.5 * (H + H.T)


def _objective(lik: PanelLikelihood, scale: float):
    def f(theta):
        if not np.all(np.isfinite(theta)):
            return np.inf, np.zeros_like(theta)
        with np.errstate(over="ignore", invalid="ignore"):
            ev = lik.evaluate(theta, gradient=True)
        if not np.isfinite(ev.loglik):
            return np.inf, np.zeros_like(theta)
        return -ev.loglik / scale, -ev.scores.sum(axis=0) / scale
    return f


def _newton_polish(lik: PanelLikelihood, theta: np.ndarray, tol: float, max_steps: int = 20):
    ll, g = lik.loglik_and_gradient(theta)
    steps = 0
    while np.max(np.abs(g), initial=0.0) >= tol and steps < max_steps:
        H = numerical_hessian(lik.gradient, theta)
        try:
            step = np.linalg.solve(-H, g)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)) or step @ g <= 0:
            break
        t, improved = 1.0, False
        for _ in range(30):
            cand = theta + t * step
            try:
                ll_c, g_c = lik.loglik_and_gradient(cand)
            except NumericError:
                ll_c = -np.inf
            if np.isfinite(ll_c) and ll_c >= ll - 1e-10 * abs(ll):
                improved = True
                break
            t *= 0.5
        if not improved:
            break
        theta, ll, g = cand, ll_c, g_c
        steps += 1
    return theta, ll, g, steps


def _run_start(lik: PanelLikelihood, theta0: np.ndarray, tol: float, max_iter: int) -> _StartResult:
    scale = float(lik.n_obs)
    f = _objective(lik, scale)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = optimize.minimize(f, theta0, jac=True, method="BFGS",
                                options={"gtol": tol / scale, "maxiter": max_iter})
    theta = res.x
    try:
        theta, ll, g, steps = _newton_polish(lik, theta, tol)
    except NumericError as exc:
        return _StartResult(theta, -np.inf, np.inf, res.nit, False, str(exc))
    gnorm = float(np.max(np.abs(g), initial=0.0))
    return _StartResult(theta, ll, gnorm, int(res.nit) + steps, gnorm < tol, str(res.message))


class StandardErrors(NamedTuple):
    std_errors: np.ndarray          # NaN where unavailable
    p_values: np.ndarray
    covariance: np.ndarray
    condition: float
    singular: tuple[int, ...]


def standard_errors(lik: PanelLikelihood, theta, robust: bool = False) -> StandardErrors:
    """Inverse negative Hessian (or sandwich) standard errors and normal p-values.

    A singular or indefinite Hessian does not raise; the condition number
    is returned and parameters loading on the null directions are listed
    in ``singular`` with NaN standard errors.
    """
    theta = np.asarray(theta, dtype=float)
    k = theta.size
    if k == 0:
        empty = np.zeros(0)
        return StandardErrors(empty, empty, np.zeros((0, 0)), 1.0, ())
    info = -numerical_hessian(lik.gradient, theta)
    w, V = np.linalg.eigh(info)
    wmax = max(np.max(np.abs(w)), 1e-300)
    bad = w <= 1e-10 * wmax
    condition = float(wmax / np.min(np.abs(w))) if np.min(np.abs(w)) > 0 else np.inf
    singular = tuple(sorted({int(i) for j in np.flatnonzero(bad)
                             for i in np.flatnonzero(np.abs(V[:, j]) > 0.1)}))
    winv = np.where(bad, 0.0, 1.0 / np.where(bad, 1.0, w))
    cov = (V * winv) @ V.T
    if robust:
        scores = lik.evaluate(theta, gradient=True).scores
        meat = scores.T @ scores
        cov = cov @ meat @ cov
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    se[list(singular)] = np.nan
    with np.errstate(divide="ignore", invalid="ignore"):
        p = 2.0 * stats.norm.sf(np.abs(theta / se))
    return StandardErrors(se, p, cov, condition, singular)


def _opt(x) -> float | None:
    return None if x is None or not np.isfinite(x) else float(x)


def _parameter_table(spec: ModelSpec, theta, ses: StandardErrors) -> tuple[ParameterEstimate, ...]:
    free_pos = {(fp.block, fp.class_index, fp.name): i for i, fp in enumerate(spec.free_parameters)}
    full = spec.expand(theta)
    rows = []
    for p in spec.taste:
        label = f"class{p.class_index + 1}.{p.name}"
        value = full[(p.class_index, p.name)]
        se = pv = None
        if p.role == "free":
            i = free_pos[("taste", p.class_index, p.name)]
            se, pv = _opt(ses.std_errors[i]), _opt(ses.p_values[i])
        elif p.role == "derived":
            a = spec.derived_weights(p.class_index, p.group)
            nz = np.flatnonzero(a)
            if not set(nz) & set(ses.singular):
                var = float(a @ ses.covariance @ a)
                se = math.sqrt(max(var, 0.0))
                pv = _opt(2.0 * stats.norm.sf(abs(value) / se)) if se > 0 else None
        rows.append(ParameterEstimate(label, p.name, p.class_index, "taste", p.role, value, se, pv))
    for p in spec.membership:
        label = f"class{p.class_index + 1}.membership.{p.name}"
        if p.role == "free":
            i = free_pos[("membership", p.class_index, p.name)]
            rows.append(ParameterEstimate(label, p.name, p.class_index, "membership", "free",
                                          float(theta[i]), _opt(ses.std_errors[i]),
                                          _opt(ses.p_values[i])))
        else:
            rows.append(ParameterEstimate(label, p.name, p.class_index, "membership", "fixed",
                                          p.initial_value))
    return tuple(rows)


def _canonical_order(spec: ModelSpec, lik: PanelLikelihood, theta: np.ndarray) -> np.ndarray:
    """Sort structurally identical non-reference classes by descending size."""
    S = spec.n_classes
    if S < 3:
        return theta
    taste_idx, taste_fix, mem_idx, mem_fix = spec._maps

    def signature(s):
        roles = tuple((p.name, p.role, p.initial_value if p.role == "fixed" else None)
                      for p in spec.taste if p.class_index == s)
        mroles = tuple((p.name, p.role, p.initial_value if p.role == "fixed" else None)
                       for p in spec.membership if p.class_index == s)
        return roles, mroles

    sizes = lik.prior(theta).mean(axis=0)
    groups: dict = {}
    for s in range(1, S):
        groups.setdefault(signature(s), []).append(s)
    out = theta.copy()
    for members in groups.values():
        order = sorted(members, key=lambda s: (-sizes[s], s))
        for dst, src in zip(members, order):
            for idx in (taste_idx, mem_idx):
                d, s_ = idx[dst], idx[src]
                mask = d >= 0
                out[d[mask]] = theta[s_[mask]]
    return out


def _saturated_classes(lik: PanelLikelihood, theta) -> tuple[set, set]:
    """Classes whose utilities, or whose membership scores, spread so far
    that some fitted probabilities are numerically zero."""
    spec = lik.spec
    V = lik.X @ spec.class_coefficients(theta).T                # (n_obs, J, S)
    spread = (V.max(axis=1) - V.min(axis=1)).max(axis=0)
    taste = {s for s in range(spec.n_classes) if spread[s] > SATURATION}
    scores = lik.Z @ spec.membership_coefficients(theta).T      # (N, S)
    mem = set()
    if spec.n_classes > 1:
        mspread = np.abs(scores - scores[:, :1]).max(axis=0)
        mem = {s for s in range(1, spec.n_classes) if mspread[s] > SATURATION}
    return taste, mem


def _boundary(lik: PanelLikelihood, theta, ses: StandardErrors, threshold: float) -> tuple[str, ...]:
    """Labels of estimates that are drifting off to infinity.

    Either the estimate is large and imprecise, or the information matrix
    is singular along it while its class's fitted probabilities are
    saturated (separation).
    """
    spec = lik.spec
    taste_sat, mem_sat = _saturated_classes(lik, theta)
    out = []
    for i, fp in enumerate(spec.free_parameters):
        large = abs(theta[i]) > threshold and (not np.isfinite(ses.std_errors[i])
                                               or ses.std_errors[i] > abs(theta[i]) / 2)
        sat = taste_sat if fp.block == "taste" else mem_sat
        separated = i in ses.singular and fp.class_index in sat
        if large or separated:
            out.append(fp.label)
    return tuple(out)


def fit(dataset: PanelDataset, spec: ModelSpec, *, starts: int = 20, seed=None,
        tol: float = 1e-6, max_iter: int = 1000, rule: str = "top",
        initial_ll: float | None = None, robust: bool = False, n_jobs: int = 1,
        init: str = "random", boundary_threshold: float = BOUNDARY_THRESHOLD) -> FitResult:
    """Estimate ``spec`` on ``dataset`` by multi-start maximum likelihood.

    Starting points are drawn uniformly from (-1, 1) with a generator
    seeded by ``seed``; with ``init="spec"`` the first start is the spec's
    ``initial_value`` column instead. The best log-likelihood wins, ties
    going to the lower start index.

    Raises
    ------
    EstimationError
        If no start meets the gradient tolerance. ``exc.best`` holds the
        best result found.
    """
    rule = check_rule(rule)
    lik = PanelLikelihood(dataset, spec, rule)
    k = spec.n_free
    rng = np.random.default_rng(seed)
    starts = max(int(starts), 1)
    theta0s = [rng.uniform(-1.0, 1.0, k) for _ in range(starts)]
    if init == "spec":
        theta0s[0] = spec.initial_theta()
    elif init != "random":
        raise ValueError(f"unknown init {init!r}")

    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            results = list(pool.map(lambda t0: _run_start(lik, t0, tol, max_iter), theta0s))
    else:
        results = [_run_start(lik, t0, tol, max_iter) for t0 in theta0s]

    lls = np.array([r.loglik for r in results])
    best = int(np.argmax(np.where(np.isfinite(lls), lls, -np.inf)))
    r = results[best]
    for i, res in enumerate(results):
        logger.debug("start %d: LL=%.6f |g|=%.2e converged=%s", i, res.loglik,
                     res.gradient_norm, res.converged)
    theta = _canonical_order(spec, lik, r.theta)
    result = _assemble(lik, theta, r, results, best, initial_ll, robust, boundary_threshold)
    if result.diagnostics.boundary:
        warnings.warn(f"estimates at the boundary: {', '.join(result.diagnostics.boundary)}",
                      BoundaryWarning, stacklevel=2)
    if not any(res.converged for res in results):
        raise EstimationError(
            f"no start converged (best |grad|={r.gradient_norm:.3g}, LL={r.loglik:.3f})",
            best=result)
    return result


def _assemble(lik: PanelLikelihood, theta, r: _StartResult, results, best, initial_ll,
              robust, boundary_threshold) -> FitResult:
    spec = lik.spec
    ses = standard_errors(lik, theta, robust=robust)
    ev = lik.evaluate(theta)
    if initial_ll is None:
        initial_ll = lik.loglik(np.zeros(spec.n_free))
    k = spec.n_free
    fs = fit_statistics(ev.loglik, initial_ll, k, lik.n_obs)
    singular = tuple(spec.free_names[i] for i in ses.singular)
    diag = Diagnostics(
        converged=r.converged,
        gradient_norm=r.gradient_norm,
        iterations=r.iterations,
        n_starts=len(results),
        best_start=best,
        start_logliks=tuple(float(x.loglik) for x in results),
        start_converged=tuple(bool(x.converged) for x in results),
        hessian_condition=_opt(ses.condition),
        singular=singular,
        boundary=_boundary(lik, theta, ses, boundary_threshold),
        message=r.message,
    )
    cov = tuple(tuple(float(x) for x in row) for row in ses.covariance)
    return FitResult(
        spec=spec,
        rule=lik.rule,
        theta=tuple(float(x) for x in theta),
        parameters=_parameter_table(spec, theta, ses),
        final_ll=float(ev.loglik),
        initial_ll=float(initial_ll),
        n_params=k,
        n_observations=lik.n_obs,
        n_respondents=lik.n_respondents,
        adjusted_rho2=fs.adjusted_rho2,
        bic=fs.bic,
        class_sizes=tuple(float(x) for x in np.exp(ev.log_prior).mean(axis=0)),
        diagnostics=diag,
        covariance=cov,
        se_method="sandwich" if robust else "hessian",
        respondent_ids=lik.dataset.respondent_ids,
        posterior=tuple(tuple(float(x) for x in row) for row in np.exp(ev.log_posterior)),
    )


def stepwise_prune(dataset: PanelDataset, spec: ModelSpec, alpha: float = 0.10,
                   **fit_kwargs) -> tuple[FitResult, list[str]]:
    """Refit, fixing the least significant free parameter at zero each round.

    Membership intercepts are never removed. Returns the final fit and the
    removed labels in removal order.
    """
    removed = []
    while True:
        result = fit(dataset, spec, **fit_kwargs)
        candidates = [(p.p_value, p.label) for p in result.parameters
                      if p.role == "free" and p.p_value is not None and p.p_value > alpha
                      and not (p.block == "membership" and p.name == "intercept")]
        if not candidates:
            return result, removed
        _, label = max(candidates)
        removed.append(label)
        spec = spec.fix_parameter(label, 0.0)
