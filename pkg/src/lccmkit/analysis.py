"""Post-estimation quantities: values of crowding, scaled coefficients,
posterior class membership and profiles, opt-out curves and descriptive
non-trader shares."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np
import pandas as pd

from .core import ALTERNATIVES, ChoiceSituation, format_level
from .data import PanelDataset
from .exceptions import DataError, NumericError
from .likelihood import PanelLikelihood, mnl_probabilities
from .spec import ModelSpec, expand_utility_row, paper_2class_spec

CROWDING_PERSONS = (5.0, 18.0, 23.0, 28.0, 36.0)
INFECTION_LEVELS = (0.01, 0.1, 0.5, 2.0, 10.0)


def _wt(class_params: Mapping[str, float], wt_name: str) -> float:
    beta_wt = class_params[wt_name]
    if beta_wt == 0:
        raise NumericError("waiting-time coefficient is zero; trade-off undefined")
    return beta_wt


class CrowdingSegment(NamedTuple):
    from_persons: float
    to_persons: float
    value: float            # waiting-time minutes per person
    interpolated: bool


@dataclass(frozen=True)
class CrowdingValueTable:
    segments: tuple[CrowdingSegment, ...]
    average: float
    telescoped: float
    persons: tuple[float, ...]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.segments)


def value_of_crowding(class_params: Mapping[str, float], persons: Sequence[float] = CROWDING_PERSONS,
                      prefix: str = "crowd", wt_name: str = "wt",
                      interpolate: Sequence[float] = ()) -> CrowdingValueTable:
    """Waiting minutes accepted per person removed, between adjacent levels.

    Levels listed in ``interpolate`` are skipped: the segment spanning them
    is computed once from its end points and reported for each adjacent
    pair it covers. The average weights segments by their person gaps.
    """
    beta_wt = _wt(class_params, wt_name)
    x = [float(v) for v in persons]
    beta = {v: class_params[f"{prefix}:{format_level(v)}"] for v in x}
    anchors = [v for v in x if v not in {float(i) for i in interpolate}]
    if anchors[0] != x[0] or anchors[-1] != x[-1]:
        raise ValueError("cannot interpolate across the first or last level")
    segments = []
    for lo, hi in zip(anchors[:-1], anchors[1:]):
        value = (beta[lo] - beta[hi]) / (lo - hi) / beta_wt
        inner = [v for v in x if lo <= v <= hi]
        for a, b in zip(inner[:-1], inner[1:]):
            segments.append(CrowdingSegment(a, b, value, len(inner) > 2))
    weights = np.array([s.to_persons - s.from_persons for s in segments])
    values = np.array([s.value for s in segments])
    average = float(weights @ values / weights.sum())
    telescoped = (beta[x[0]] - beta[x[-1]]) / ((x[0] - x[-1]) * beta_wt)
    return CrowdingValueTable(tuple(segments), average, float(telescoped), tuple(x))


def uncrowded_vs_crowded_wait(class_params: Mapping[str, float], level_a: float, level_b: float,
                              prefix: str = "crowd", wt_name: str = "wt") -> float:
    """Extra waiting minutes accepted to ride at ``level_a`` rather than ``level_b``."""
    beta_wt = _wt(class_params, wt_name)
    a = class_params[f"{prefix}:{format_level(level_a)}"]
    b = class_params[f"{prefix}:{format_level(level_b)}"]
    return -(a - b) / beta_wt


def scaled_impacts(param_table: Mapping[str, float], reference_param: str) -> dict[str, float]:
    """Every coefficient divided by the coefficient named ``reference_param``."""
    ref = param_table[reference_param]
    if ref == 0:
        raise NumericError(f"reference coefficient {reference_param!r} is zero")
    return {name: value / ref for name, value in param_table.items()}


def posterior_membership(fit, dataset: PanelDataset) -> np.ndarray:
    """``(N, S)`` posterior class probabilities given each respondent's choices."""
    lik = PanelLikelihood(dataset, fit.spec, fit.rule)
    return lik.posterior(fit.theta_array)


@dataclass(frozen=True)
class ClassProfile:
    covariate: str
    means: np.ndarray                # (S,)
    histogram: pd.DataFrame          # index: covariate value, columns: class, rows sum to 1 per class


def weighted_profile(posteriors, values, covariate: str = "value") -> ClassProfile:
    h = np.asarray(posteriors, dtype=float)
    v = np.asarray(values, dtype=float)
    keep = np.isfinite(v)
    h, v = h[keep], v[keep]
    mass = h.sum(axis=0)
    means = (h * v[:, None]).sum(axis=0) / mass
    levels = np.unique(v)
    hist = np.array([h[v == lv].sum(axis=0) for lv in levels]) / mass
    frame = pd.DataFrame(hist, index=pd.Index(levels, name=covariate),
                         columns=[f"class{s + 1}" for s in range(h.shape[1])])
    return ClassProfile(covariate, means, frame)


def class_profile(posteriors, dataset: PanelDataset, covariate_name: str) -> ClassProfile:
    """Posterior-weighted mean and distribution of a covariate in each class.

    Respondents with a missing value are left out.
    """
    try:
        values = [r.covariates[covariate_name] for r in dataset.respondents]
    except KeyError:
        raise DataError(f"covariate {covariate_name!r} not in dataset") from None
    return weighted_profile(posteriors, values, covariate_name)


def _utility(row: np.ndarray, coef: np.ndarray) -> float:
    # skip zero design entries so an infinite coefficient cannot produce 0 * inf
    mask = row != 0
    return float(np.sum(row[mask] * coef[mask]))


def opt_out_curve(class_params: Mapping[str, float], crowding_level: float, wt: float = 12.0,
                  infection_grid: Sequence[float] = INFECTION_LEVELS, ivt: float = 25.0,
                  spec: ModelSpec | None = None) -> np.ndarray:
    """Opt-out probability at each infection level, both trains identical."""
    spec = spec or paper_2class_spec()
    coef = np.array([class_params.get(n, 0.0) for n in spec.utility.parameter_names], dtype=float)
    out = []
    for infect in infection_grid:
        sit = ChoiceSituation.from_values(crowding_level, wt, crowding_level, wt, infect, ivt)
        V = [_utility(expand_utility_row(sit, alt, spec), coef) for alt in ALTERNATIVES]
        out.append(mnl_probabilities(V)[ALTERNATIVES.index("opt_out")])
    return np.array(out)


def opt_out_table(fit, wt: float = 12.0, infection_grid: Sequence[float] = INFECTION_LEVELS,
                  crowding_levels: Sequence[float] = CROWDING_PERSONS, ivt: float = 25.0) -> pd.DataFrame:
    """Tidy opt-out curves for every class and crowding level."""
    rows = []
    for s in range(fit.spec.n_classes):
        params = fit.class_parameters(s)
        for c in crowding_levels:
            probs = opt_out_curve(params, c, wt, infection_grid, ivt, fit.spec)
            for inf, p in zip(infection_grid, probs):
                rows.append({"class": s + 1, "crowd": c, "wt": wt, "ivt": ivt,
                             "infect": inf, "p_opt_out": p})
    return pd.DataFrame(rows)


@dataclass(frozen=True)
class DescriptiveShares:
    always_opt_out: float
    never_opt_out: float
    always_less_crowded: float
    always_more_crowded: float
    crowded_curve: pd.DataFrame      # extra_wait_per_person, n, share_crowded


def descriptive_shares(dataset: PanelDataset) -> DescriptiveShares:
    """Respondent-level non-trader shares and the crowded-train choice curve.

    Opt-out shares use the top-ranked alternative. Train comparisons use
    the relative order of the two trains in the ranking and skip
    situations where both trains are equally crowded.
    """
    n = dataset.n_respondents
    if n == 0:
        raise DataError("dataset has no respondents")
    always_oo = never_oo = always_less = always_more = 0
    extra, crowded_chosen = [], []
    for r in dataset.respondents:
        tops, picks = [], []
        for obs in r.observations:
            tops.append(obs.ranking[0] == "opt_out")
            c1, w1, c2, w2, _, _ = dataset.situations[obs.situation_id].values
            if c1 == c2:
                continue
            t1_first = obs.ranking.index("train1") < obs.ranking.index("train2")
            less_is_t1 = c1 < c2
            chose_crowded = t1_first != less_is_t1
            picks.append(chose_crowded)
            w_less, w_crowd = (w1, w2) if less_is_t1 else (w2, w1)
            c_less, c_crowd = (c1, c2) if less_is_t1 else (c2, c1)
            extra.append((w_less - w_crowd) / (c_crowd - c_less))
            crowded_chosen.append(chose_crowded)
        always_oo += bool(tops) and all(tops)
        never_oo += bool(tops) and not any(tops)
        if picks:
            always_less += not any(picks)
            always_more += all(picks)
    df = pd.DataFrame({"extra_wait_per_person": np.round(extra, 9), "crowded": crowded_chosen})
    curve = (df.groupby("extra_wait_per_person")["crowded"]
             .agg(n="size", share_crowded="mean").reset_index())
    return DescriptiveShares(always_oo / n, never_oo / n, always_less / n, always_more / n, curve)
