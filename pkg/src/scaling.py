"""
Scaling Summaries
Per-size statistics of trial records and their comparison against growth models.

For each model g the ratio mean(n)/g(n) is computed per size; a law fits
well when the ratios are flat, measured by spread = max/min - 1 over the
sizes that have enough trials.
"""

import math
from dataclasses import dataclass, field, asdict
from typing import Any, Callable, Dict, Iterable, List, Optional

import numpy as np
from scipy import stats

from records_io import TrialRecord, record_order

MIN_SPREAD_TRIALS = 30
CONFIDENCE = 0.95


def _n_squared(n: int) -> Optional[float]:
    return float(n * n)


def _n_log_n(n: int) -> Optional[float]:
    return n * math.log2(n) if n > 1 else None


def _n_log_n_over_log_log_n(n: int) -> Optional[float]:
    # log2(log2(n)) must be positive
    if n <= 2:
        return None
    log_n = math.log2(n)
    return n * log_n / math.log2(log_n) if log_n > 1 else None


MODELS: Dict[str, Callable[[int], Optional[float]]] = {
    'n^2': _n_squared,
    'n log n': _n_log_n,
    'n log n / log log n': _n_log_n_over_log_log_n,
}


@dataclass
class SizeStats:
    n: int
    trials: int
    mean: float
    sd: float
    ci_low: float
    ci_high: float
    truncated: int
    mean_wall_time_ms: float


@dataclass
class ModelFit:
    model: str
    ratios: Dict[int, float]
    spread: Optional[float]
    sizes_used: List[int] = field(default_factory=list)


@dataclass
class ScalingSummary:
    algorithm: str
    sizes: List[SizeStats]
    models: List[ModelFit]

    def size(self, n: int) -> SizeStats:
        for entry in self.sizes:
            if entry.n == n:
                return entry
        raise KeyError(n)

    def model(self, name: str) -> ModelFit:
        for fit in self.models:
            if fit.model == name:
                return fit
        raise KeyError(name)

    @property
    def truncations(self) -> int:
        return sum(entry.truncated for entry in self.sizes)

    def to_json_lines(self) -> List[Dict[str, Any]]:
        """One object per size, then one per model"""
        lines = [dict(kind='size', algorithm=self.algorithm, **asdict(entry)) for entry in self.sizes]
        for fit in self.models:
            lines.append({
                'kind': 'model',
                'algorithm': self.algorithm,
                'model': fit.model,
                'ratios': {str(n): ratio for n, ratio in fit.ratios.items()},
                'spread': fit.spread,
                'sizes_used': fit.sizes_used
            })
        return lines


def size_stats(n: int, records: List[TrialRecord]) -> SizeStats:
    queries = np.array([r.queries for r in records], dtype=float)
    trials = queries.size
    mean = float(queries.mean())
    sd = float(queries.std(ddof=1)) if trials > 1 else 0.0
    half_width = float(stats.norm.ppf(0.5 + CONFIDENCE / 2)) * sd / math.sqrt(trials)
    return SizeStats(
        n=n,
        trials=trials,
        mean=mean,
        sd=sd,
        ci_low=mean - half_width,
        ci_high=mean + half_width,
        truncated=sum(r.truncated for r in records),
        mean_wall_time_ms=float(np.mean([r.wall_time_ms for r in records]))
    )


def fit_model(name: str, sizes: List[SizeStats], min_trials: int = MIN_SPREAD_TRIALS) -> ModelFit:
    g = MODELS[name]
    ratios = {}
    for entry in sizes:
        scale = g(entry.n)
        if scale:
            ratios[entry.n] = entry.mean / scale
    used = [entry.n for entry in sizes if entry.n in ratios and entry.trials >= min_trials]
    spread = None
    if len(used) >= 2:
        values = [ratios[n] for n in used]
        spread = max(values) / min(values) - 1
    return ModelFit(model=name, ratios=ratios, spread=spread, sizes_used=used)


def summarize(records: Iterable[TrialRecord], min_trials: int = MIN_SPREAD_TRIALS) -> ScalingSummary:
    """
    Aggregate trial records of one algorithm.

    The result depends only on the multiset of records, not their order.

    Args:
        records: Trial records, usually of a single algorithm
        min_trials: Sizes with fewer trials are left out of the spreads

    Returns:
        ScalingSummary with sizes in increasing order
    """
    ordered = sorted(records, key=record_order)
    if not ordered:
        raise ValueError("Cannot summarize an empty record set")
    algorithms = sorted({r.algorithm for r in ordered})

    by_size: Dict[int, List[TrialRecord]] = {}
    for record in ordered:
        by_size.setdefault(record.n, []).append(record)

    sizes = [size_stats(n, by_size[n]) for n in sorted(by_size)]
    models = [fit_model(name, sizes, min_trials) for name in MODELS]
    return ScalingSummary(algorithm='+'.join(algorithms), sizes=sizes, models=models)


def doubling_ratios(summary: ScalingSummary) -> Dict[int, float]:
    """T(2n)/T(n) for every size n whose double was also measured, keyed by n"""
    means = {entry.n: entry.mean for entry in summary.sizes}
    return {n: means[2 * n] / means[n] for n in sorted(means) if 2 * n in means}


def fitted_constant(summary: ScalingSummary, model: str = 'n log n') -> float:
    """Least-squares c in mean(n) ~ c * g(n) over all measured sizes"""
    g = MODELS[model]
    pairs = [(g(entry.n), entry.mean) for entry in summary.sizes if g(entry.n)]
    if not pairs:
        raise ValueError(f"Model '{model}' is undefined on every measured size")
    scales, means = np.array(pairs).T
    return float(np.dot(scales, means) / np.dot(scales, scales))


def format_summary_table(summary: ScalingSummary) -> List[str]:
    """Console lines: per-size table followed by the model ratios and spreads"""
    header = f"  {'n':>7} | {'trials':>6} | {'mean':>12} | {'sd':>11} | {'95% CI':>25} | {'trunc':>5} | {'ms/trial':>9}"
    divider = f"  {'-' * 7}-+-{'-' * 6}-+-{'-' * 12}-+-{'-' * 11}-+-{'-' * 25}-+-{'-' * 5}-+-{'-' * 9}"
    lines = [f"Scaling summary for {summary.algorithm}:", header, divider]
    for entry in summary.sizes:
        ci = f"[{entry.ci_low:.1f}, {entry.ci_high:.1f}]"
        lines.append(
            f"  {entry.n:>7} | {entry.trials:>6} | {entry.mean:>12.1f} | {entry.sd:>11.1f} | "
            f"{ci:>25} | {entry.truncated:>5} | {entry.mean_wall_time_ms:>9.2f}"
        )
    lines.append("")
    lines.append("Model ratios mean(n)/g(n):")
    for fit in summary.models:
        ratios = ', '.join(f"{n}: {ratio:.4f}" for n, ratio in fit.ratios.items())
        spread = f"{fit.spread * 100:.1f}%" if fit.spread is not None else 'n/a'
        lines.append(f"  {fit.model:<20} spread {spread:>8}   {ratios}")
    return lines
