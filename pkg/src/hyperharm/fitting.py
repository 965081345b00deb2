"""Weighted exponential-rate fits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class DecayFit:
    """``values ~ C exp(-rate * grid)`` fitted on ``window``."""

    grid: np.ndarray
    values: np.ndarray
    rate: float
    stderr: float
    window: tuple
    intercept: float = 0.0

    def predict(self, x):
        return np.exp(self.intercept - self.rate * np.asarray(x, dtype=float))

    def to_dict(self):
        return {"rate": self.rate, "stderr": self.stderr, "window": list(self.window),
                "intercept": self.intercept, "grid": np.asarray(self.grid).tolist(),
                "values": np.asarray(self.values).tolist()}


def decay_fit(t, values, stderr=None, window=None, min_points: int = 5) -> DecayFit:
    """Weighted least squares of ``log values`` against ``t``.

    Weights are ``values / stderr`` (the inverse standard error of the log);
    without standard errors every point counts equally.  The reported
    standard error is the usual parameter error, inflated by the reduced
    chi-square when the scatter exceeds the stated errors.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    if np.any(~np.isfinite(v)) or np.any(v <= 0):
        raise ValueError("decay_fit needs positive finite values")
    sel = np.ones(len(t), dtype=bool)
    if window is not None:
        sel = (t >= window[0]) & (t <= window[1])
    if sel.sum() < min_points:
        raise ValueError(f"decay_fit needs at least {min_points} points in the window")
    tt, y = t[sel], np.log(v[sel])
    if stderr is None:
        sig = np.ones_like(y)
    else:
        s = np.asarray(stderr, dtype=float)[sel]
        sig = np.where(s > 0, s / v[sel], 0.0)
        floor = max(1e-12, 1e-3 * float(np.max(sig))) if np.any(sig > 0) else 1.0
        sig = np.maximum(sig, floor)
    w = 1.0 / sig
    A = np.vstack([-tt, np.ones_like(tt)]).T
    Aw = A * w[:, None]
    coef, *_ = np.linalg.lstsq(Aw, y * w, rcond=None)
    resid = (A @ coef - y) * w
    dof = max(len(tt) - 2, 1)
    chi2 = float(resid @ resid) / dof
    cov = np.linalg.inv(Aw.T @ Aw)
    if stderr is None:
        cov = cov * chi2
    else:
        cov = cov * max(chi2, 1.0)
    return DecayFit(t, v, float(coef[0]), float(np.sqrt(cov[0, 0])),
                    (float(tt.min()), float(tt.max())), float(coef[1]))
