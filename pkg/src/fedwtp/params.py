"""Flat parameter vectors and the arithmetic shared by attacks and aggregators.

A parameter vector is a 1-D ``float64`` numpy array. Operations here always
return fresh arrays and never mutate their inputs.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

ParamVector = np.ndarray


class DimensionError(ValueError):
    """Vectors of incompatible length were combined."""


class NumericError(ArithmeticError):
    """An operation produced NaN or Inf."""


class EmptyInputError(ValueError):
    """An operation that needs at least one element received none."""


def as_params(values, *, copy: bool = True) -> ParamVector:
    arr = np.array(values, dtype=np.float64, copy=copy).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise NumericError("parameter vector contains non-finite entries")
    return arr


def _check_same_length(u: np.ndarray, v: np.ndarray) -> None:
    if u.shape != v.shape:
        raise DimensionError(f"length mismatch: {u.shape[0]} vs {v.shape[0]}")


def affine_combine(a: float, u: ParamVector, b: float, v: ParamVector) -> ParamVector:
    """Return ``a*u + b*v``."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    _check_same_length(u, v)
    with np.errstate(over="ignore", invalid="ignore"):
        out = a * u + b * v
    if not np.all(np.isfinite(out)):
        raise NumericError(f"affine_combine({a}, u, {b}, v) overflowed")
    return out


def l2_distance(u: ParamVector, v: ParamVector) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    _check_same_length(u, v)
    return float(np.linalg.norm(u - v))


def stack(updates: Sequence[ParamVector]) -> np.ndarray:
    """Stack updates into a ``(count, D)`` matrix, checking uniform length."""
    if len(updates) == 0:
        raise EmptyInputError("no updates given")
    if isinstance(updates, np.ndarray):
        mat = np.asarray(updates, dtype=np.float64)
    else:
        rows = [np.asarray(u, dtype=np.float64).reshape(-1) for u in updates]
        if len({r.shape[0] for r in rows}) != 1:
            raise DimensionError("updates do not share a common length")
        mat = np.vstack(rows)
    if mat.ndim != 2:
        raise DimensionError("updates must form a 2-D (count, D) matrix")
    return mat


def elementwise_stats(updates: Sequence[ParamVector], d: int) -> tuple[float, float, list[float]]:
    """Population mean, population std and ascending values of coordinate ``d``."""
    mat = stack(updates)
    if not 0 <= d < mat.shape[1]:
        raise DimensionError(f"dimension {d} out of range for D={mat.shape[1]}")
    col = np.sort(mat[:, d])
    mean = float(col.sum() / col.size)
    std = float(np.sqrt(np.sum((col - mean) ** 2) / col.size))
    return mean, std, col.tolist()
