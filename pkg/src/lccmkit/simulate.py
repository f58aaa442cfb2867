"""Synthetic panels from a known latent class model, and recovery runs.

Each respondent draws from an independent random stream spawned from the
master seed, so results do not depend on how respondents are scheduled.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .core import ALTERNATIVES, ChoiceSituation, RankingObservation
from .data import PanelDataset, Respondent
from .design import DesignConfig, generate_design
from .estimation import FitResult, fit
from .exceptions import EstimationError
from .likelihood import MembershipModel, class_membership_probabilities, mnl_probabilities
from .spec import ModelSpec, expand_utility_row

logger = logging.getLogger(__name__)

# sample shares: age bins 18-24 ... >74, and female vs male ("other" was 0%)
AGE_SHARES = np.array([15, 18, 17, 17, 19, 13, 2], dtype=float) / 101
FEMALE_SHARE = 49 / 99
# not reported; chosen so the published membership model implies a 46.3% class-2 share
TRAIN_FREQ_SHARES = np.array([0.54, 0.28, 0.12, 0.06])


def paper_covariates(rng: np.random.Generator) -> dict[str, float]:
    """Draw one respondent's age bin, effect-coded gender and train use."""
    return {
        "age": float(rng.choice(7, p=AGE_SHARES) + 1),
        "female": 1.0 if rng.random() < FEMALE_SHARE else -1.0,
        "train_freq_covid": float(rng.choice(4, p=TRAIN_FREQ_SHARES) + 1),
    }


@dataclass(frozen=True)
class SimulationConfig:
    """Generator model and sample layout.

    ``spec`` carries the true values in its ``initial_value`` column unless
    ``theta`` is given. ``blocks`` defaults to a design drawn with
    ``design``.
    """

    spec: ModelSpec
    n_respondents: int = 513
    rng_seed: int = 0
    theta: Sequence[float] | None = None
    blocks: Sequence[Sequence[ChoiceSituation]] | None = None
    design: DesignConfig = field(default_factory=DesignConfig)
    covariate_sampler: Callable[[np.random.Generator], Mapping[str, float]] = paper_covariates

    def true_theta(self) -> np.ndarray:
        return (np.asarray(self.theta, dtype=float) if self.theta is not None
                else self.spec.initial_theta())

    def resolved_blocks(self):
        return [list(b) for b in self.blocks] if self.blocks is not None else generate_design(self.design)


def respondent_streams(seed, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _draw_class(probs: np.ndarray, rng: np.random.Generator) -> int:
    u = rng.random()
    return int(min(np.searchsorted(np.cumsum(probs), u, side="right"), len(probs) - 1))


def assign_classes(covariates, membership: MembershipModel, seed) -> np.ndarray:
    """One latent class per respondent, drawn from its membership probabilities.

    ``covariates`` is a sequence of mappings or an ``(N, K)`` array in the
    order of ``membership.covariates``.
    """
    rows = list(covariates)
    rngs = respondent_streams(seed, len(rows))
    return np.array([_draw_class(class_membership_probabilities(z, membership), rng)
                     for z, rng in zip(rows, rngs)], dtype=int)


def gumbel_rankings(utilities, rng: np.random.Generator) -> np.ndarray:
    """Rank alternatives by utility plus i.i.d. standard Gumbel noise.

    ``utilities`` is ``(..., J)``; returns positions, best first.
    """
    v = np.asarray(utilities, dtype=float)
    u = v + rng.gumbel(size=v.shape)
    return np.argsort(-u, axis=-1, kind="stable")


def sequential_rankings(utilities, rng: np.random.Generator) -> np.ndarray:
    """Same distribution as :func:`gumbel_rankings`, by drawing logit choices
    without replacement."""
    v = np.atleast_2d(np.asarray(utilities, dtype=float))
    out = np.empty(v.shape, dtype=int)
    for r, row in enumerate(v):
        remaining = list(range(row.size))
        for k in range(row.size):
            p = mnl_probabilities(row[remaining])
            pick = remaining[_draw_class(p, rng)]
            out[r, k] = pick
            remaining.remove(pick)
    return out.reshape(np.shape(utilities))


def situation_utilities(situations, coefficients: np.ndarray, spec: ModelSpec) -> np.ndarray:
    """``(T, 3)`` systematic utilities of each situation's alternatives."""
    return np.array([[expand_utility_row(sit, alt, spec) @ coefficients for alt in ALTERNATIVES]
                     for sit in situations])


def simulate_rankings(situations, class_params, spec: ModelSpec, seed) -> list[RankingObservation]:
    """Draw a ranking for every situation under one class's coefficients.

    ``class_params`` is either a coefficient vector aligned with
    ``spec.utility.parameter_names`` or a name -> value mapping.
    """
    if isinstance(class_params, Mapping):
        coef = np.array([class_params.get(n, 0.0) for n in spec.utility.parameter_names])
    else:
        coef = np.asarray(class_params, dtype=float)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    V = situation_utilities(situations, coef, spec)
    ranks = gumbel_rankings(V, rng)
    return [RankingObservation(sit.id, tuple(ALTERNATIVES[i] for i in row))
            for sit, row in zip(situations, ranks)]


def simulate_panel(config: SimulationConfig) -> tuple[PanelDataset, np.ndarray]:
    """Simulated dataset plus the true class label of every respondent."""
    spec = config.spec
    theta = config.true_theta()
    coefs = spec.class_coefficients(theta)
    membership = MembershipModel.from_spec(spec, theta)
    blocks = config.resolved_blocks()
    block_utils = [np.stack([situation_utilities(b, coefs[s], spec) for s in range(spec.n_classes)])
                   for b in blocks]
    situations = {sit.id: sit for b in blocks for sit in b}
    respondents, labels = [], []
    width = len(str(config.n_respondents))
    for n, rng in enumerate(respondent_streams(config.rng_seed, config.n_respondents)):
        covs = dict(config.covariate_sampler(rng))
        b = int(rng.integers(len(blocks)))
        z = np.array([covs[c] for c in spec.covariates])
        s = _draw_class(class_membership_probabilities(z, membership), rng)
        ranks = gumbel_rankings(block_utils[b][s], rng)
        obs = [RankingObservation(sit.id, tuple(ALTERNATIVES[i] for i in row))
               for sit, row in zip(blocks[b], ranks)]
        respondents.append(Respondent(f"r{n + 1:0{width}d}", covs, obs))
        labels.append(s)
    return PanelDataset(tuple(respondents), situations), np.array(labels)


def simulate_dataset(config: SimulationConfig) -> PanelDataset:
    return simulate_panel(config)[0]


@dataclass(frozen=True)
class RecoveryReport:
    """Per-replication comparison of estimates against the generator."""

    labels: tuple[str, ...]
    truth: np.ndarray
    estimates: np.ndarray             # (R, K)
    std_errors: np.ndarray            # (R, K)
    z_scores: np.ndarray              # (R, K)
    coverage: np.ndarray              # (R,) share of |z| <= 2
    class_sizes: np.ndarray           # (R, S) estimated
    true_class_sizes: np.ndarray      # (R, S) generator shares on the simulated sample
    low_power: bool
    failures: int = 0
    fits: tuple[FitResult, ...] = ()

    @property
    def mean_coverage(self) -> float:
        return float(np.nanmean(self.coverage))

    @property
    def class_size_error(self) -> np.ndarray:
        return self.class_sizes - self.true_class_sizes


def recovery_experiment(config: SimulationConfig, n_replications: int = 1,
                        fit_options: Mapping | None = None, keep_fits: bool = False,
                        z_threshold: float = 2.0) -> RecoveryReport:
    """Simulate, estimate and compare ``n_replications`` times.

    Replication ``r`` simulates with a child of ``config.rng_seed`` and
    estimates with another, so runs are reproducible. A replication whose
    estimation raises :class:`EstimationError` still contributes its
    best-so-far estimates and is counted in ``failures``.
    ``low_power`` is set when most true coefficients are within two
    standard errors of zero, or have no standard error at all.
    """
    fit_options = dict(fit_options or {})
    spec = config.spec
    truth = config.true_theta()
    seeds = np.random.SeedSequence(config.rng_seed).spawn(n_replications)
    est, ses, sizes, true_sizes, fits = [], [], [], [], []
    failures = 0
    for r, ss in enumerate(seeds):
        sim_seed, fit_seed = ss.generate_state(2)
        cfg = SimulationConfig(spec, config.n_respondents, int(sim_seed), truth, config.blocks,
                               config.design, config.covariate_sampler)
        data, _ = simulate_panel(cfg)
        try:
            result = fit(data, spec, seed=int(fit_seed), **fit_options)
        except EstimationError as exc:
            if exc.best is None:
                raise
            failures += 1
            result = exc.best
        logger.info("replication %d: LL=%.3f", r, result.final_ll)
        est.append(result.theta_array)
        ses.append(result.std_errors)
        sizes.append(result.class_sizes)
        Z = data.covariate_matrix(spec.covariates)
        true_sizes.append(class_membership_probabilities(
            Z, MembershipModel.from_spec(spec, truth)).mean(axis=0))
        if keep_fits:
            fits.append(result)
    est, ses = np.array(est), np.array(ses)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (est - truth) / ses
        # an unavailable SE counts as no power
        power = np.abs(truth) / np.where(np.isfinite(ses), ses, np.inf).mean(axis=0)
    coverage = np.mean(np.abs(np.nan_to_num(z, nan=np.inf)) <= z_threshold, axis=1)
    low_power = bool(np.mean(power < 2.0) > 0.5)
    return RecoveryReport(tuple(spec.free_names), truth, est, ses, z, coverage,
                          np.array(sizes), np.array(true_sizes), low_power, failures, tuple(fits))
