"""Agreement metrics between predicted and subjective scores.

Tie conventions follow the standard statistics suites: Spearman uses
average (fractional) ranks, Kendall is the tie-corrected tau-b (tau-a is
available behind a flag and equals (C-D)/(n(n-1)/2) when no ties exist).
Constant inputs raise :class:`DegenerateInputError` instead of returning 0,
since silent zeros corrupt comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, ShapeError


def _as_pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1:
        raise ShapeError("metric inputs must be 1-D vectors")
    if x.shape != y.shape:
        raise ShapeError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    if x.shape[0] < 2:
        raise ShapeError("metrics need at least 2 samples")
    return x, y


def plcc(x, y) -> float:
    """Sample Pearson linear correlation."""
    x, y = _as_pair(x, y)
    xc = x - x.mean()
    yc = y - y.mean()
    sx2 = (xc * xc).sum()
    sy2 = (yc * yc).sum()
    if sx2 == 0.0 or sy2 == 0.0:
        raise DegenerateInputError("pearson correlation undefined for constant input")
    r = (xc * yc).sum() / np.sqrt(sx2 * sy2)
    return float(min(1.0, max(-1.0, r)))


def rankdata(x: np.ndarray) -> np.ndarray:
    """1-based fractional ranks; tied values share their average rank."""
    x = np.asarray(x)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x), dtype=np.float64)
    sx = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def srcc(x, y) -> float:
    """Spearman rank-order correlation (average-tie ranks)."""
    x, y = _as_pair(x, y)
    return plcc(rankdata(x), rankdata(y))


def _tie_term(x: np.ndarray) -> float:
    _, counts = np.unique(x, return_counts=True)
    return float((counts * (counts - 1) // 2).sum())


def krcc(x, y, tie_correction: bool = True) -> float:
    """Kendall rank correlation; tau-b by default, tau-a when disabled."""
    x, y = _as_pair(x, y)
    sx = np.sign(x[:, None] - x[None, :])
    sy = np.sign(y[:, None] - y[None, :])
    prod = sx * sy
    concordant_minus_discordant = prod[np.triu_indices(len(x), k=1)].sum()
    n0 = len(x) * (len(x) - 1) / 2.0
    if not tie_correction:
        return float(concordant_minus_discordant / n0)
    n1 = _tie_term(x)
    n2 = _tie_term(y)
    denom = np.sqrt((n0 - n1) * (n0 - n2))
    if denom == 0.0:
        raise DegenerateInputError("kendall tau undefined: an input is entirely tied")
    return float(concordant_minus_discordant / denom)


@dataclass
class EvalReport:
    plcc: float
    srcc: float
    krcc: float
    rmse: float
    mae: float
    n: int

    def __post_init__(self):
        for name in ("plcc", "srcc", "krcc"):
            v = getattr(self, name)
            if not -1.0 - 1e-12 <= v <= 1.0 + 1e-12:
                raise ShapeError(f"{name}={v} outside [-1, 1]")
        if not self.rmse >= self.mae >= 0.0:
            raise ShapeError(f"rmse={self.rmse} < mae={self.mae}")

    # Fixed column order everywhere reports are rendered.
    COLUMNS = ("plcc", "srcc", "krcc", "rmse", "mae")

    def row(self) -> tuple[float, float, float, float, float]:
        return (self.plcc, self.srcc, self.krcc, self.rmse, self.mae)

    def as_dict(self) -> dict:
        return {"plcc": self.plcc, "srcc": self.srcc, "krcc": self.krcc,
                "rmse": self.rmse, "mae": self.mae, "n": self.n}


def evaluate(pred, mos) -> EvalReport:
    pred, mos = _as_pair(pred, mos)
    err = pred - mos
    return EvalReport(
        plcc=plcc(pred, mos),
        srcc=srcc(pred, mos),
        krcc=krcc(pred, mos),
        rmse=float(np.sqrt(np.mean(err * err))),
        mae=float(np.mean(np.abs(err))),
        n=len(pred),
    )
