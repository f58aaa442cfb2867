"""Panel datasets: respondents, their rankings, CSV I/O and validation."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np
import pandas as pd

from .core import (ALTERNATIVES, CSV_LABELS, LABEL_TO_CSV, AttributeSchema, ChoiceSituation,
                   RankingObservation, ranking_indices)
from .exceptions import DataError

SITUATION_COLUMNS = ("crowd1", "wt1", "crowd2", "wt2", "infect", "ivt")
RANK_COLUMNS = ("rank1", "rank2", "rank3")
ID_COLUMNS = ("respondent_id", "task_id")


@dataclass(frozen=True)
class Respondent:
    respondent_id: str
    covariates: Mapping[str, float]
    observations: tuple[RankingObservation, ...]

    def __post_init__(self):
        object.__setattr__(self, "covariates", dict(self.covariates))
        object.__setattr__(self, "observations", tuple(self.observations))


@dataclass(frozen=True)
class PanelDataset:
    """Respondents with ordered sequences of ranked choice situations."""

    respondents: tuple[Respondent, ...]
    situations: Mapping[str, ChoiceSituation] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "respondents", tuple(self.respondents))
        object.__setattr__(self, "situations", dict(self.situations))

    @property
    def n_respondents(self) -> int:
        return len(self.respondents)

    @property
    def n_observations(self) -> int:
        return sum(len(r.observations) for r in self.respondents)

    @property
    def T(self) -> int:
        """Tasks per respondent (the maximum, for unbalanced panels)."""
        return max((len(r.observations) for r in self.respondents), default=0)

    @property
    def respondent_ids(self) -> tuple[str, ...]:
        return tuple(r.respondent_id for r in self.respondents)

    @cached_property
    def arrays(self) -> "PanelArrays":
        return PanelArrays.from_dataset(self)

    def covariate_matrix(self, names) -> np.ndarray:
        out = np.empty((self.n_respondents, len(names)))
        for i, r in enumerate(self.respondents):
            for k, n in enumerate(names):
                v = r.covariates.get(n)
                if v is None or not np.isfinite(v):
                    raise DataError(f"respondent {r.respondent_id}: missing covariate {n!r}")
                out[i, k] = v
        return out

    def to_frame(self) -> pd.DataFrame:
        rows = []
        cov_names = _covariate_names(self)
        for r in self.respondents:
            for t, obs in enumerate(r.observations, start=1):
                sit = self.situations[obs.situation_id]
                row = {"respondent_id": r.respondent_id, "task_id": t}
                row.update(dict(zip(SITUATION_COLUMNS, sit.values)))
                for k, lbl in enumerate(obs.ranking[:3]):
                    row[RANK_COLUMNS[k]] = LABEL_TO_CSV.get(lbl, lbl)
                for n in cov_names:
                    row[n] = r.covariates.get(n, np.nan)
                rows.append(row)
        cols = list(ID_COLUMNS + SITUATION_COLUMNS + RANK_COLUMNS) + cov_names
        return pd.DataFrame(rows, columns=cols)

    @classmethod
    def from_frame(cls, df: pd.DataFrame) -> "PanelDataset":
        missing = [c for c in ID_COLUMNS + SITUATION_COLUMNS + RANK_COLUMNS if c not in df.columns]
        if missing:
            raise DataError(f"dataset is missing columns {missing}")
        cov_names = [c for c in df.columns
                     if c not in ID_COLUMNS + SITUATION_COLUMNS + RANK_COLUMNS]
        situations: dict[str, ChoiceSituation] = {}
        respondents = []
        df = df.copy()
        df["respondent_id"] = df["respondent_id"].astype(str)
        for rid, block in df.groupby("respondent_id", sort=False):
            block = block.sort_values("task_id", kind="stable")
            obs = []
            for row in block.itertuples(index=False):
                d = row._asdict()
                sit = ChoiceSituation.from_values(*(d[c] for c in SITUATION_COLUMNS))
                situations.setdefault(sit.id, sit)
                ranking = tuple(CSV_LABELS.get(str(d[c]).strip(), str(d[c]).strip())
                                for c in RANK_COLUMNS)
                obs.append(RankingObservation(sit.id, ranking))
            first = block.iloc[0]
            covs = {n: float(first[n]) if pd.notna(first[n]) else float("nan") for n in cov_names}
            respondents.append(Respondent(rid, covs, obs))
        return cls(tuple(respondents), situations)


def _covariate_names(dataset: PanelDataset) -> list[str]:
    names: dict[str, None] = {}
    for r in dataset.respondents:
        for n in r.covariates:
            names.setdefault(n, None)
    return list(names)


def read_dataset_csv(path) -> PanelDataset:
    return PanelDataset.from_frame(pd.read_csv(path))


def write_dataset_csv(dataset: PanelDataset, path) -> None:
    dataset.to_frame().to_csv(path, index=False, lineterminator="\n")


@dataclass(frozen=True)
class PanelArrays:
    """Observation-level arrays, sorted by respondent.

    ``alt_values[label][attr]`` holds one value per observation;
    ``rankings`` is ``(n_obs, 3)`` alternative indices, best first;
    ``starts`` marks each respondent's first observation row.
    """

    alt_values: Mapping[str, Mapping[str, np.ndarray]]
    rankings: np.ndarray
    respondent_index: np.ndarray
    starts: np.ndarray

    @classmethod
    def from_dataset(cls, dataset: PanelDataset) -> "PanelArrays":
        vals, ranks, resp = [], [], []
        for i, r in enumerate(dataset.respondents):
            for obs in r.observations:
                if not obs.is_permutation:
                    raise DataError(
                        f"respondent {r.respondent_id}: invalid ranking {obs.ranking}")
                vals.append(dataset.situations[obs.situation_id].values)
                ranks.append(ranking_indices(obs.ranking))
                resp.append(i)
        if not vals:
            raise DataError("dataset has no observations")
        v = np.asarray(vals, dtype=float)
        crowd1, wt1, crowd2, wt2, infect, ivt = v.T
        ctx = {"infect": infect, "ivt": ivt}
        alt_values = {
            "train1": {"crowd": crowd1, "wt": wt1, **ctx},
            "train2": {"crowd": crowd2, "wt": wt2, **ctx},
            "opt_out": dict(ctx),
        }
        resp = np.asarray(resp)
        counts = np.bincount(resp, minlength=dataset.n_respondents)
        if np.any(counts == 0):
            raise DataError("every respondent needs at least one observation")
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        return cls(alt_values, np.asarray(ranks, dtype=int), resp, starts)

    @property
    def n_obs(self) -> int:
        return self.rankings.shape[0]


def validate_dataset(dataset: PanelDataset, schema: Mapping[str, AttributeSchema] | None = None,
                     spec=None) -> list[str]:
    """List every violation found in ``dataset``; an empty list means valid.

    Checks rankings are permutations of the three alternatives, situation
    levels are declared by ``schema``, both trains share the context, and
    covariates are present (the spec's membership covariates, and a common
    key set across respondents).
    """
    report = []
    if schema is None and spec is not None:
        schema = spec.schema
    needed = list(spec.covariates) if spec is not None else []
    keysets = {frozenset(r.covariates) for r in dataset.respondents}
    common = frozenset.union(*keysets) if keysets else frozenset()
    if not dataset.respondents:
        report.append("dataset has no respondents")
    for r in dataset.respondents:
        rid = r.respondent_id
        if not r.observations:
            report.append(f"respondent {rid}: no observations")
        for n in sorted(set(needed) | common):
            v = r.covariates.get(n)
            if v is None or not np.isfinite(v):
                report.append(f"respondent {rid}: missing covariate {n!r}")
        for t, obs in enumerate(r.observations, start=1):
            if not obs.is_permutation:
                report.append(f"respondent {rid} task {t}: ranking {obs.ranking} is not a "
                              f"permutation of {ALTERNATIVES}")
            sit = dataset.situations.get(obs.situation_id)
            if sit is None:
                report.append(f"respondent {rid} task {t}: unknown situation {obs.situation_id!r}")
                continue
            if schema is not None:
                bad = sit.check(schema)
                if bad:
                    report.append(f"respondent {rid} task {t}: undeclared levels {', '.join(bad)}")
    return report
