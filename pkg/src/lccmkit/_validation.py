"""Input validation helpers shared by the estimator and the CLI."""
from __future__ import annotations

import numpy as np
import pandas as pd

from .data import PanelDataset, validate_dataset
from .exceptions import DataError, SpecError
from .spec import ModelSpec, load_model_spec


def check_spec(spec) -> ModelSpec:
    """Accept a :class:`ModelSpec`, a built-in name or a JSON path."""
    if isinstance(spec, ModelSpec):
        return spec
    if isinstance(spec, (str, bytes)) or hasattr(spec, "__fspath__"):
        return load_model_spec(spec)
    raise SpecError(f"cannot interpret {type(spec).__name__} as a model spec")


def check_panel(X, spec: ModelSpec | None = None) -> PanelDataset:
    """Coerce ``X`` to a validated :class:`PanelDataset`.

    ``X`` may already be a dataset or a data frame in the dataset CSV
    layout. Raises :class:`DataError` listing the first violations.
    """
    if isinstance(X, pd.DataFrame):
        X = PanelDataset.from_frame(X)
    elif not isinstance(X, PanelDataset):
        raise DataError(f"expected a PanelDataset or DataFrame, got {type(X).__name__}")
    report = validate_dataset(X, spec=spec)
    if report:
        more = f" (+{len(report) - 5} more)" if len(report) > 5 else ""
        raise DataError("; ".join(report[:5]) + more)
    return X


def check_seed(random_state):
    """Integer seed or ``None``; numpy Generators are reduced to a seed."""
    if random_state is None or isinstance(random_state, (int, np.integer)):
        return random_state
    if isinstance(random_state, np.random.Generator):
        return int(random_state.integers(2**32))
    raise ValueError(f"random_state must be an int, Generator or None, got {random_state!r}")
