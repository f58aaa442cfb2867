"""Domain data model: attributes, alternatives, choice situations, rankings.

Every type here is a frozen dataclass; instances can be shared freely
between threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .exceptions import SchemaError

ALTERNATIVES = ("train1", "train2", "opt_out")
# rank-column labels used by the dataset CSV
CSV_LABELS = {"T1": "train1", "T2": "train2", "OO": "opt_out"}
LABEL_TO_CSV = {v: k for k, v in CSV_LABELS.items()}

TRAIN_ATTRIBUTES = ("crowd", "wt")
CONTEXT_ATTRIBUTES = ("infect", "ivt")


@dataclass(frozen=True)
class AttributeSchema:
    """Declaration of one attribute and its admissible levels.

    ``reference`` is the effect-coding reference level and is required
    when ``coding == "effect"``.
    """

    name: str
    kind: str
    levels: tuple[float, ...]
    coding: str = "linear"
    preference_direction: str = "none"
    reference: float | None = None

    def __post_init__(self):
        levels = tuple(float(v) for v in self.levels)
        object.__setattr__(self, "levels", levels)
        if self.kind not in ("continuous", "categorical"):
            raise SchemaError(f"{self.name}: unknown kind {self.kind!r}")
        if self.coding not in ("linear", "effect"):
            raise SchemaError(f"{self.name}: unknown coding {self.coding!r}")
        if self.preference_direction not in ("lower-better", "higher-better", "none"):
            raise SchemaError(
                f"{self.name}: unknown preference direction {self.preference_direction!r}"
            )
        if not levels:
            raise SchemaError(f"{self.name}: empty level list")
        if len(set(levels)) != len(levels) or list(levels) != sorted(levels):
            raise SchemaError(f"{self.name}: levels must be distinct and ascending")
        if self.coding == "effect":
            if self.kind != "categorical" or len(levels) < 2:
                raise SchemaError(
                    f"{self.name}: effect coding needs a categorical attribute with >= 2 levels"
                )
            if self.reference is None or float(self.reference) not in levels:
                raise SchemaError(f"{self.name}: reference level must be one of {levels}")
            object.__setattr__(self, "reference", float(self.reference))

    def has_level(self, value) -> bool:
        return any(np.isclose(value, lv, rtol=0, atol=1e-9) for lv in self.levels)

    @property
    def coded_levels(self) -> tuple[float, ...]:
        """Non-reference levels, one indicator column each."""
        return tuple(lv for lv in self.levels if lv != self.reference)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "levels": list(self.levels),
            "coding": self.coding,
            "preference_direction": self.preference_direction,
            "reference": self.reference,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "AttributeSchema":
        return cls(
            name=d["name"],
            kind=d["kind"],
            levels=tuple(d["levels"]),
            coding=d.get("coding", "linear"),
            preference_direction=d.get("preference_direction", "none"),
            reference=d.get("reference"),
        )


def format_level(value: float) -> str:
    """Compact level label used in parameter names, e.g. ``0.01`` or ``18``."""
    return f"{float(value):g}"


def paper_schema() -> dict[str, AttributeSchema]:
    """Attribute levels of the train crowding experiment."""
    return {
        "crowd": AttributeSchema(
            "crowd", "categorical", (5, 18, 23, 28, 36), "effect", "lower-better", reference=5
        ),
        "wt": AttributeSchema("wt", "continuous", (3, 12, 25), "linear", "lower-better"),
        "infect": AttributeSchema(
            "infect", "categorical", (0.01, 0.1, 0.5, 2, 10), "effect", "none", reference=0.1
        ),
        "ivt": AttributeSchema("ivt", "continuous", (10, 25, 40), "linear", "none"),
    }


CROWDING_LABELS = {
    5.0: "almost empty",
    18.0: "can sit alone",
    23.0: "not crowded",
    28.0: "quite crowded",
    36.0: "almost full",
}


def effect_code(schema: AttributeSchema, observed_level, reference_level=None) -> np.ndarray:
    """Effect-code ``observed_level`` against ``reference_level``.

    Returns one entry per non-reference level: 1 where the observed level
    matches, -1 everywhere if the observed level is the reference, else 0.

    >>> crowd = paper_schema()["crowd"]
    >>> effect_code(crowd, 23).tolist()
    [0.0, 1.0, 0.0, 0.0]
    """
    ref = schema.reference if reference_level is None else float(reference_level)
    if not schema.has_level(ref):
        raise SchemaError(f"{schema.name}: unknown reference level {reference_level!r}")
    if not schema.has_level(observed_level):
        raise SchemaError(f"{schema.name}: unknown level {observed_level!r}")
    others = [lv for lv in schema.levels if lv != ref]
    if np.isclose(observed_level, ref, rtol=0, atol=1e-9):
        return -np.ones(len(others))
    return np.array([1.0 if np.isclose(observed_level, lv, rtol=0, atol=1e-9) else 0.0
                     for lv in others])


@dataclass(frozen=True)
class Alternative:
    label: str
    attribute_values: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class ChoiceSituation:
    """Two train alternatives sharing a context, plus the implicit opt-out."""

    train1: Alternative
    train2: Alternative
    context: Mapping[str, float]
    id: str = ""

    @classmethod
    def from_values(cls, crowd1, wt1, crowd2, wt2, infect, ivt, id=None) -> "ChoiceSituation":
        values = tuple(float(v) for v in (crowd1, wt1, crowd2, wt2, infect, ivt))
        sid = id if id is not None else situation_key(*values)
        return cls(
            Alternative("train1", {"crowd": values[0], "wt": values[1]}),
            Alternative("train2", {"crowd": values[2], "wt": values[3]}),
            {"infect": values[4], "ivt": values[5]},
            sid,
        )

    @property
    def values(self) -> tuple[float, float, float, float, float, float]:
        """``(crowd1, wt1, crowd2, wt2, infect, ivt)``."""
        a, b = self.train1.attribute_values, self.train2.attribute_values
        return (a["crowd"], a["wt"], b["crowd"], b["wt"],
                self.context["infect"], self.context["ivt"])

    def attributes_of(self, label: str) -> dict[str, float]:
        """Attribute values seen by one alternative, context included."""
        if label == "train1":
            return {**self.train1.attribute_values, **self.context}
        if label == "train2":
            return {**self.train2.attribute_values, **self.context}
        if label == "opt_out":
            return dict(self.context)
        raise SchemaError(f"unknown alternative {label!r}")

    def check(self, schema: Mapping[str, AttributeSchema]) -> list[str]:
        """Return the attributes whose value is not a declared level."""
        bad = []
        for alt in (self.train1, self.train2):
            for name, v in alt.attribute_values.items():
                if name in schema and not schema[name].has_level(v):
                    bad.append(f"{alt.label}.{name}={v:g}")
        for name, v in self.context.items():
            if name in schema and not schema[name].has_level(v):
                bad.append(f"{name}={v:g}")
        return bad


def situation_key(crowd1, wt1, crowd2, wt2, infect, ivt) -> str:
    return "c{:g}w{:g}-c{:g}w{:g}-i{:g}-t{:g}".format(crowd1, wt1, crowd2, wt2, infect, ivt)


@dataclass(frozen=True)
class RankingObservation:
    """A respondent's ranking of the three alternatives, best first.

    The ranking is not checked on construction so that malformed input
    can be reported by :func:`lccmkit.data.validate_dataset`.
    """

    situation_id: str
    ranking: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "ranking", tuple(self.ranking))

    @property
    def is_permutation(self) -> bool:
        return len(self.ranking) == len(ALTERNATIVES) and set(self.ranking) == set(ALTERNATIVES)


def ranking_indices(ranking: Sequence[str]) -> tuple[int, ...]:
    return tuple(ALTERNATIVES.index(lbl) for lbl in ranking)
