"""Agreement metrics against a reference read, with confidence intervals."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable

from scipy import stats


class UndefinedMetric(ZeroDivisionError):
    """The requested rate has a zero denominator for these counts."""

    def __init__(self, metric: str):
        super().__init__(f"{metric} undefined (zero denominator)")
        self.metric = metric


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("negative count")

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn
        )

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion(pairs: Iterable[tuple[bool, bool]]) -> ConfusionCounts:
    """Tally (predicted_positive, reference_positive) pairs."""
    tp = fp = fn = tn = 0
    for pred, ref in pairs:
        if pred and ref:
            tp += 1
        elif pred and not ref:
            fp += 1
        elif not pred and ref:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp, fp, fn, tn)


_METRIC_PARTS = {
    "ppv": lambda c: (c.tp, c.tp + c.fp),
    "npv": lambda c: (c.tn, c.tn + c.fn),
    "ppa": lambda c: (c.tp, c.tp + c.fn),
    "npa": lambda c: (c.tn, c.tn + c.fp),
}

METRIC_NAMES = tuple(_METRIC_PARTS)


@dataclass(frozen=True)
class AgreementMetrics:
    """The four agreement rates; a rate is None when its denominator is zero."""

    ppv: float | None
    npv: float | None
    ppa: float | None
    npa: float | None

    def require(self, name: str) -> float:
        value = getattr(self, name)
        if value is None:
            raise UndefinedMetric(name)
        return value


def metric_counts(c: ConfusionCounts, name: str) -> tuple[int, int]:
    """(numerator, denominator) for one of ppv/npv/ppa/npa."""
    try:
        num, den = _METRIC_PARTS[name](c)
    except KeyError:
        raise KeyError(f"unknown metric {name!r}") from None
    return num, den


def agreement_metrics(c: ConfusionCounts) -> AgreementMetrics:
    """PPV/NPV/PPA/NPA; undefined rates come back as None, never as a batch failure."""
    values: dict[str, float | None] = {}
    for name in METRIC_NAMES:
        num, den = metric_counts(c, name)
        values[name] = (num / den) if den else None
    return AgreementMetrics(**values)


class IntervalMethod(str, enum.Enum):
    WILSON = "wilson"
    CLOPPER_PEARSON = "clopper-pearson"


def wilson_interval(successes: int, total: int, level: float = 0.95) -> tuple[float, float]:
    """Wilson score interval, small-sample form.

    Uses the Student-t quantile at total-1 degrees of freedom rather than
    the asymptotic normal quantile (they agree as n grows; the t form is
    what the report fixtures were computed with). Degenerate tails are
    exact: 0 successes pins the lower bound at 0, all successes pins the
    upper bound at 1.
    """
    _check_interval_args(successes, total, level)
    if total == 1:
        # t(0 df) is undefined; a single Bernoulli draw carries no width anyway.
        return (0.0, 1.0)
    z = float(stats.t.ppf((1.0 + level) / 2.0, total - 1))
    p = successes / total
    denom = 1.0 + z * z / total
    center = (p + z * z / (2 * total)) / denom
    half = z * math.sqrt(p * (1 - p) / total + z * z / (4 * total * total)) / denom
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == total else min(1.0, center + half)
    return (lo, hi)


def clopper_pearson_interval(successes: int, total: int, level: float = 0.95) -> tuple[float, float]:
    """Exact binomial (Clopper-Pearson) interval via beta quantiles."""
    _check_interval_args(successes, total, level)
    alpha = 1.0 - level
    lo = 0.0 if successes == 0 else float(stats.beta.ppf(alpha / 2, successes, total - successes + 1))
    hi = 1.0 if successes == total else float(stats.beta.ppf(1 - alpha / 2, successes + 1, total - successes))
    return (lo, hi)


def confidence_interval(
    successes: int,
    total: int,
    level: float = 0.95,
    method: IntervalMethod = IntervalMethod.WILSON,
) -> tuple[float, float]:
    if method is IntervalMethod.CLOPPER_PEARSON:
        return clopper_pearson_interval(successes, total, level)
    return wilson_interval(successes, total, level)


def _check_interval_args(successes: int, total: int, level: float) -> None:
    if total < 1:
        raise ValueError(f"total {total} < 1")
    if not 0 <= successes <= total:
        raise ValueError(f"successes {successes} outside [0, {total}]")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level {level}")
