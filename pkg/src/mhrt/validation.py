"""Input checks shared by the estimator and the file readers."""

from __future__ import annotations

import numpy as np

from .model import ObservedData, QMatrix


def _as_2d_float(x, name):
    try:
        arr = np.array(x, dtype=float)
    except (TypeError, ValueError):
        raise ValueError(f"{name} must be numeric (use nan for missing)") from None
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D (persons x items), got ndim={arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} is empty, shape {arr.shape}")
    return arr


def check_responses(responses):
    """Binary ``(N, I)`` float array with ``nan`` for missing cells."""
    y = _as_2d_float(responses, "responses")
    obs = ~np.isnan(y)
    bad = obs & (y != 0) & (y != 1)
    if bad.any():
        n, i = np.argwhere(bad)[0]
        raise ValueError(f"responses must be 0/1; found {y[n, i]!r} at ({n}, {i})")
    return y


def check_rts(rts, zero_as_missing=True):
    """Positive ``(N, I)`` response times in seconds, ``nan`` for missing.

    With ``zero_as_missing`` an RT of exactly 0 is treated as not recorded.
    """
    t = _as_2d_float(rts, "rts")
    if np.isinf(t).any():
        raise ValueError("rts contain infinite values")
    if zero_as_missing:
        t[t == 0] = np.nan
    bad = ~np.isnan(t) & (t <= 0)
    if bad.any():
        n, i = np.argwhere(bad)[0]
        raise ValueError(f"rts must be positive; found {t[n, i]!r} at ({n}, {i})")
    return t


def check_data(responses, rts, n_items=None):
    """Validate a response/RT pair and wrap it as :class:`ObservedData`."""
    y = check_responses(responses)
    t = check_rts(rts)
    if y.shape != t.shape:
        raise ValueError(f"responses have shape {y.shape} but rts have {t.shape}")
    if n_items is not None and y.shape[1] != n_items:
        raise ValueError(f"expected {n_items} items, got {y.shape[1]}")
    return ObservedData(y, t)


def check_qmatrix(q, n_items=None):
    """Coerce ``q`` (QMatrix or array-like) to :class:`QMatrix`."""
    if not isinstance(q, QMatrix):
        q = QMatrix(np.asarray(q))
    if n_items is not None and q.n_items != n_items:
        raise ValueError(f"Q-matrix has {q.n_items} items but data have {n_items}")
    return q
