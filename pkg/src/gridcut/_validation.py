"""Argument checks shared by the estimators and the command line."""

from __future__ import annotations

from numbers import Real

import numpy as np
from sklearn.utils.validation import check_array

from gridcut.netmodel import CaseValidationError, GridCase, load_case, validate


def check_case(case, allow_warnings=True) -> GridCase:
    """Return a :class:`GridCase` from a case object, path or name, validated.

    Raises :class:`CaseValidationError` listing every structural problem.
    """
    if not isinstance(case, GridCase):
        case = load_case(case)
    problems = validate(case)
    if problems:
        lines = "; ".join(f"{d.code}: {d.message}" for d in problems)
        raise CaseValidationError(lines)
    return case


def check_injections(case: GridCase, injections) -> np.ndarray:
    """Per-bus MW injections as a finite array; a 2-D input holds one scenario per row."""
    arr = np.asarray(injections, dtype=float)
    two_d = arr.ndim == 2
    arr = check_array(np.atleast_2d(arr), dtype=float, ensure_all_finite=True)
    if arr.shape[1] != case.n_buses:
        raise ValueError(f"expected {case.n_buses} injections per scenario, got {arr.shape[1]}")
    return arr if two_d else arr[0]


def check_fraction(name, value, lo=0.0, hi=1.0, hi_open=False) -> float:
    if not isinstance(value, Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite number, got {value!r}")
    value = float(value)
    if value < lo or value > hi or (hi_open and value == hi):
        bracket = ")" if hi_open else "]"
        raise ValueError(f"{name} must lie in [{lo}, {hi}{bracket}, got {value}")
    return value


def check_bus_ids(case: GridCase, buses, name="buses") -> list[int]:
    out = [int(b) for b in buses]
    unknown = sorted(set(out) - set(case.bus_index))
    if unknown:
        raise ValueError(f"{name} contains unknown bus ids {unknown}")
    return out
