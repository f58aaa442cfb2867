"""Semi-random stated-choice design.

Enumerate the full factorial, drop situations in which one train weakly
dominates the other, keep one orientation of each train swap, then draw
disjoint random blocks.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import pandas as pd

from .core import AttributeSchema, ChoiceSituation, paper_schema
from .data import SITUATION_COLUMNS
from .exceptions import ConfigError, SchemaError


@dataclass(frozen=True)
class DesignConfig:
    schema: Mapping[str, AttributeSchema] = field(default_factory=paper_schema)
    n_blocks: int = 4
    block_size: int = 15
    rng_seed: int = 0


def full_factorial(schema: Mapping[str, AttributeSchema]) -> list[ChoiceSituation]:
    """Every (crowd1, wt1, crowd2, wt2, infect, ivt) combination once."""
    for name in ("crowd", "wt", "infect", "ivt"):
        if name not in schema:
            raise SchemaError(f"schema lacks attribute {name!r}")
        if not schema[name].levels:
            raise SchemaError(f"{name}: empty level list")
    crowd, wt = schema["crowd"].levels, schema["wt"].levels
    grid = itertools.product(crowd, wt, crowd, wt, schema["infect"].levels, schema["ivt"].levels)
    return [ChoiceSituation.from_values(*combo) for combo in grid]


def _better_or_equal(a: float, b: float, direction: str) -> bool:
    if direction == "lower-better":
        return a <= b
    if direction == "higher-better":
        return a >= b
    raise ConfigError("dominance needs a preference direction on every train attribute")


def weakly_dominates(first: Mapping[str, float], second: Mapping[str, float],
                     schema: Mapping[str, AttributeSchema]) -> bool:
    """True when ``first`` is at least as good as ``second`` on every attribute.

    Identical profiles dominate each other.
    """
    return all(_better_or_equal(first[n], second[n], schema[n].preference_direction)
               for n in first)


def filter_dominated_and_symmetric(situations, schema: Mapping[str, AttributeSchema] | None = None
                                   ) -> list[ChoiceSituation]:
    """Keep trade-off situations only, in canonical train order.

    A situation is removed if either train weakly dominates the other.
    Of each pair of swap images the one listing the less crowded train
    first (ties broken by shorter wait) is kept.
    """
    schema = schema or paper_schema()
    kept = []
    for sit in situations:
        a, b = sit.train1.attribute_values, sit.train2.attribute_values
        if weakly_dominates(a, b, schema) or weakly_dominates(b, a, schema):
            continue
        if (a["crowd"], a["wt"]) > (b["crowd"], b["wt"]):
            continue
        kept.append(sit)
    return kept


def make_blocks(admissible, config: DesignConfig) -> list[list[ChoiceSituation]]:
    """Draw ``n_blocks`` disjoint blocks uniformly without replacement."""
    need = config.n_blocks * config.block_size
    if config.n_blocks < 1 or config.block_size < 1:
        raise ConfigError("n_blocks and block_size must be positive")
    if need > len(admissible):
        raise ConfigError(
            f"{config.n_blocks} x {config.block_size} blocks need {need} situations, "
            f"only {len(admissible)} admissible")
    rng = np.random.default_rng(config.rng_seed)
    picks = rng.choice(len(admissible), size=need, replace=False)
    return [[admissible[i] for i in picks[k * config.block_size:(k + 1) * config.block_size]]
            for k in range(config.n_blocks)]


def generate_design(config: DesignConfig | None = None) -> list[list[ChoiceSituation]]:
    config = config or DesignConfig()
    admissible = filter_dominated_and_symmetric(full_factorial(config.schema), config.schema)
    return make_blocks(admissible, config)


def blocks_to_frame(blocks) -> pd.DataFrame:
    rows = []
    for b, block in enumerate(blocks, start=1):
        for t, sit in enumerate(block, start=1):
            rows.append({"block_id": b, "task_id": t, **dict(zip(SITUATION_COLUMNS, sit.values))})
    return pd.DataFrame(rows, columns=["block_id", "task_id", *SITUATION_COLUMNS])


def blocks_from_frame(df: pd.DataFrame) -> list[list[ChoiceSituation]]:
    blocks = []
    for _, g in df.sort_values(["block_id", "task_id"]).groupby("block_id", sort=True):
        blocks.append([ChoiceSituation.from_values(*(getattr(r, c) for c in SITUATION_COLUMNS))
                       for r in g.itertuples(index=False)])
    return blocks
