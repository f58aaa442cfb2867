"""Choice probabilities and the panel latent class log-likelihood.

The log-likelihood of respondent ``n`` is

    log sum_s pi_ns * prod_t P(ranking_nt | class s)

accumulated in log space. ``P`` is either the logit probability of the
top-ranked alternative (``rule="top"``) or the exploded-logit probability
of the full ranking (``rule="rank"``).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np
from scipy.special import logsumexp

from .core import ALTERNATIVES
from .data import PanelDataset
from .exceptions import DataError, NumericError, SpecError
from .spec import ModelSpec

RULES = {"top": "top", "mnl": "top", "rank": "rank", "rmnl": "rank"}


def check_rule(rule: str) -> str:
    try:
        return RULES[rule]
    except KeyError:
        raise SpecError(f"unknown choice rule {rule!r}; use 'top' or 'rank'") from None


def mnl_probabilities(utilities) -> np.ndarray:
    """Logit choice probabilities over the last axis.

    >>> mnl_probabilities([np.log(2.0), 0.0]).round(6).tolist()
    [0.666667, 0.333333]
    """
    v = np.asarray(utilities, dtype=float)
    if v.size == 0 or v.shape[-1] == 0:
        raise NumericError("need at least one alternative")
    if np.isnan(v).any():
        raise NumericError("NaN utility")
    m = np.max(v, axis=-1, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    e = np.exp(v - m)
    return e / e.sum(axis=-1, keepdims=True)


def rmnl_ranking_probability(utilities, ranking: Sequence) -> float:
    """Probability of a complete ranking under the exploded logit.

    ``ranking`` lists alternative positions (or labels from
    ``ALTERNATIVES``), best first. Each ranked item is a logit choice
    from the alternatives not yet ranked.
    """
    v = np.asarray(utilities, dtype=float)
    idx = [ALTERNATIVES.index(r) if isinstance(r, str) else int(r) for r in ranking]
    if sorted(idx) != list(range(len(v))):
        raise DataError(f"ranking {tuple(ranking)} is not a permutation of {len(v)} alternatives")
    remaining = list(range(len(v)))
    prob = 1.0
    for i in idx[:-1]:
        p = mnl_probabilities(v[remaining])
        prob *= p[remaining.index(i)]
        remaining.remove(i)
    return float(prob)


@dataclass(frozen=True)
class MembershipModel:
    """Class-membership logit; row 0 of both arrays is the zero reference."""

    intercepts: np.ndarray
    coefficients: np.ndarray
    covariates: tuple[str, ...] = ()

    @classmethod
    def from_spec(cls, spec: ModelSpec, theta) -> "MembershipModel":
        m = spec.membership_coefficients(theta)
        return cls(m[:, 0], m[:, 1:], spec.covariates)


def class_membership_probabilities(covariates, membership: MembershipModel) -> np.ndarray:
    """Class probabilities for one respondent (mapping) or many (2-D array)."""
    if isinstance(covariates, Mapping):
        try:
            z = np.array([float(covariates[n]) for n in membership.covariates])
        except KeyError as exc:
            raise DataError(f"missing covariate {exc.args[0]!r}") from None
    else:
        z = np.asarray(covariates, dtype=float)
    if np.isnan(z).any():
        raise DataError("missing covariate value")
    scores = membership.intercepts + z @ np.asarray(membership.coefficients).T
    return mnl_probabilities(scores)


def design_tensor(arrays, spec: ModelSpec) -> np.ndarray:
    """``(n_obs, 3, n_params)`` utility design, one row per alternative."""
    names = spec.utility.parameter_names
    X = np.zeros((arrays.n_obs, len(ALTERNATIVES), len(names)))
    for a, alt in enumerate(ALTERNATIVES):
        for pname, term in spec.utility.terms.get(alt, ()):
            X[:, a, names.index(pname)] += term.evaluate(arrays.alt_values[alt], spec.schema)
    return X


class Evaluation(NamedTuple):
    loglik: float
    respondent_loglik: np.ndarray       # (N,)
    log_prior: np.ndarray               # (N, S)
    log_posterior: np.ndarray           # (N, S)
    class_loglik: np.ndarray            # (N, S)
    scores: np.ndarray | None           # (N, K) per-respondent gradient


class PanelLikelihood:
    """Cached likelihood evaluator for one dataset and one model spec.

    Arrays are built once; :meth:`evaluate` is then a handful of dense
    numpy operations per class.
    """

    def __init__(self, dataset: PanelDataset, spec: ModelSpec, rule: str = "top"):
        self.dataset = dataset
        self.spec = spec
        self.rule = check_rule(rule)
        arrays = dataset.arrays
        self.X = design_tensor(arrays, spec)
        self.rankings = arrays.rankings
        self.starts = arrays.starts
        self.n_respondents = dataset.n_respondents
        self.n_obs = arrays.n_obs
        self.Z = np.column_stack([np.ones(self.n_respondents),
                                  dataset.covariate_matrix(spec.covariates)])
        self._taste_idx, _, self._mem_idx, _ = spec._maps
        self._rows = np.arange(self.n_obs)
        self._n_stages = 1 if self.rule == "top" else len(ALTERNATIVES) - 1

    def _class_terms(self, b: np.ndarray, gradient: bool):
        """Per-observation log-probability and d/db of it, for one class."""
        V = self.X @ b
        avail = np.ones(V.shape, dtype=bool)
        logp = np.zeros(self.n_obs)
        dV = np.zeros(V.shape) if gradient else None
        for k in range(self._n_stages):
            chosen = self.rankings[:, k]
            Vm = np.where(avail, V, -np.inf)
            lse = logsumexp(Vm, axis=1)
            logp += V[self._rows, chosen] - lse
            if gradient:
                dV -= np.exp(Vm - lse[:, None])
                dV[self._rows, chosen] += 1.0
            avail[self._rows, chosen] = False
        dlogp = np.einsum("oa,oap->op", dV, self.X) if gradient else None
        return logp, dlogp

    def evaluate(self, theta, gradient: bool = False) -> Evaluation:
        spec = self.spec
        theta = spec._check_theta(theta)
        if not np.all(np.isfinite(theta)):
            raise NumericError("non-finite parameter value")
        B = spec.class_coefficients(theta)
        M = spec.membership_coefficients(theta)
        S = spec.n_classes
        N, K = self.n_respondents, spec.n_free
        class_ll = np.empty((N, S))
        grads = []
        for s in range(S):
            logp, dlogp = self._class_terms(B[s], gradient)
            class_ll[:, s] = np.add.reduceat(logp, self.starts)
            if gradient:
                grads.append(np.add.reduceat(dlogp, self.starts, axis=0))
        scores_z = self.Z @ M.T
        log_prior = scores_z - logsumexp(scores_z, axis=1, keepdims=True)
        joint = log_prior + class_ll
        resp_ll = logsumexp(joint, axis=1)
        with np.errstate(invalid="ignore"):
            log_post = joint - resp_ll[:, None]
        ll = float(resp_ll.sum())
        scores = None
        if gradient:
            scores = np.zeros((N, K))
            h = np.exp(log_post)
            prior = np.exp(log_prior)
            for s in range(S):
                idx = self._taste_idx[s]
                free = idx >= 0
                scores[:, idx[free]] += h[:, [s]] * grads[s][:, free]
                midx = self._mem_idx[s]
                mfree = midx >= 0
                scores[:, midx[mfree]] += (h[:, [s]] - prior[:, [s]]) * self.Z[:, mfree]
        return Evaluation(ll, resp_ll, log_prior, log_post, class_ll, scores)

    def loglik(self, theta) -> float:
        ev = self.evaluate(theta)
        _guard(ev, self.dataset)
        return ev.loglik

    def gradient(self, theta) -> np.ndarray:
        ev = self.evaluate(theta, gradient=True)
        _guard(ev, self.dataset)
        return ev.scores.sum(axis=0)

    def loglik_and_gradient(self, theta) -> tuple[float, np.ndarray]:
        ev = self.evaluate(theta, gradient=True)
        _guard(ev, self.dataset)
        return ev.loglik, ev.scores.sum(axis=0)

    def posterior(self, theta) -> np.ndarray:
        """``(N, S)`` posterior class probabilities given each respondent's choices."""
        ev = self.evaluate(theta)
        _guard(ev, self.dataset)
        return np.exp(ev.log_posterior)

    def prior(self, theta) -> np.ndarray:
        return np.exp(self.evaluate(theta).log_prior)

    def choice_probabilities(self, theta) -> np.ndarray:
        """``(n_obs, 3)`` unconditional logit probabilities, mixed over classes
        with each respondent's prior membership probabilities."""
        B = self.spec.class_coefficients(theta)
        prior = self.prior(theta)
        resp = self.dataset.arrays.respondent_index
        out = np.zeros((self.n_obs, len(ALTERNATIVES)))
        for s in range(self.spec.n_classes):
            out += prior[resp, s][:, None] * mnl_probabilities(self.X @ B[s])
        return out


def _guard(ev: Evaluation, dataset: PanelDataset) -> None:
    bad = np.flatnonzero(~np.isfinite(ev.respondent_loglik))
    if bad.size:
        ids = [dataset.respondents[i].respondent_id for i in bad[:5]]
        raise NumericError(
            f"zero likelihood under every class for {bad.size} respondent(s), e.g. {ids}")


def lccm_panel_loglik(dataset: PanelDataset, spec: ModelSpec, theta, rule: str = "top") -> float:
    """Panel log-likelihood of ``dataset`` at free-parameter vector ``theta``."""
    return PanelLikelihood(dataset, spec, rule).loglik(theta)


def loglik_gradient(dataset: PanelDataset, spec: ModelSpec, theta, rule: str = "top") -> np.ndarray:
    """Analytic gradient of :func:`lccm_panel_loglik` over the free parameters."""
    return PanelLikelihood(dataset, spec, rule).gradient(theta)
