"""Evaluation suite for vote predictions.

Covers: RMSE normalized by voter count, tie-corrected Kendall tau,
Jaccard overlap of predicted vs real top-k sets, cumulative-cost curves
along a ranking, a seeded shuffling null predictor, and the greedy
budget allocator municipalities commonly apply to the final ranking.

Ranking ties are broken deterministically: higher predicted votes first,
then cheaper project, then lexicographic id.  Everything here is pure
computation on immutable inputs.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .data import Campaign, PredictionRun


class EvaluationError(Exception):
    pass


class IncompleteRunError(EvaluationError):
    """Run has too many gaps to evaluate without ``force``."""


def normalized_rmse(predicted, real, voters: float) -> float:
    """Root-mean-square vote error as a fraction of the voter count."""
    pred = np.asarray(predicted, dtype=np.float64)
    actual = np.asarray(real, dtype=np.float64)
    if pred.shape != actual.shape or pred.ndim != 1:
        raise ValueError(f"length mismatch: {pred.shape} vs {actual.shape}")
    if voters <= 0:
        raise ValueError("voters must be positive")
    return float(np.sqrt(np.mean((pred - actual) ** 2)) / voters)


def kendall_tau(predicted, real) -> float:
    """Tie-corrected (tau-b) rank correlation in [-1, 1].

    Exact O(n^2) pair counting; undefined (raises) when either side is
    a single tied block.
    """
    u = np.asarray(predicted, dtype=np.float64)
    v = np.asarray(real, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise ValueError(f"length mismatch: {u.shape} vs {v.shape}")
    n = u.shape[0]
    if n < 2:
        raise ValueError("need at least 2 observations")
    du = np.sign(u[:, None] - u[None, :])
    dv = np.sign(v[:, None] - v[None, :])
    iu = np.triu_indices(n, k=1)
    su = du[iu]
    sv = dv[iu]
    concordant_minus_discordant = float(np.sum(su * sv))
    n0 = n * (n - 1) / 2
    ties_u = float(np.sum(su == 0))
    ties_v = float(np.sum(sv == 0))
    denom = math.sqrt((n0 - ties_u) * (n0 - ties_v))
    if denom == 0.0:
        raise ValueError("tau undefined: one side is entirely tied")
    return concordant_minus_discordant / denom


def rank_order(
    values: Sequence[Optional[float]],
    costs: Optional[Sequence[float]] = None,
    ids: Optional[Sequence[str]] = None,
) -> list[int]:
    """Indices sorted best-first: votes desc, then cost asc, then id asc.

    ``None`` values (prediction gaps) rank strictly last.
    """
    n = len(values)
    costs = list(costs) if costs is not None else [0.0] * n
    ids = list(ids) if ids is not None else [f"{i:09d}" for i in range(n)]
    if len(costs) != n or len(ids) != n:
        raise ValueError("values, costs and ids must have equal length")

    def key(i: int):
        v = values[i]
        return (v is None, -(v if v is not None else 0.0), costs[i], ids[i])

    return sorted(range(n), key=key)


def top_k_set(
    values: Sequence[Optional[float]],
    k: int,
    costs: Optional[Sequence[float]] = None,
    ids: Optional[Sequence[str]] = None,
) -> set[int]:
    n = len(values)
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    return set(rank_order(values, costs, ids)[:k])


def jaccard_top_k(
    predicted,
    real,
    k: int,
    costs: Optional[Sequence[float]] = None,
    ids: Optional[Sequence[str]] = None,
) -> float:
    """Intersection-over-union of the two top-k sets after tie-breaking."""
    top_pred = top_k_set(list(predicted), k, costs, ids)
    top_real = top_k_set(list(real), k, costs, ids)
    inter = len(top_pred & top_real)
    union = len(top_pred | top_real)
    return inter / union


def aggregated_cost_curve(ranking: Sequence[int], costs: Sequence[float], k_max: int) -> list[float]:
    """Cumulative cost of the best-ranked k projects, for k = 1..k_max."""
    if k_max > len(ranking):
        raise ValueError("k_max exceeds ranking length")
    out = []
    total = 0.0
    for i in range(k_max):
        total += costs[ranking[i]]
        out.append(total)
    return out


def greedy_allocate(
    ranking: Sequence[int],
    costs: Sequence[float],
    budget: float,
    ids: Optional[Sequence[str]] = None,
    stop_at_first_overflow: bool = False,
) -> list:
    """Fund projects in rank order while they fit the remaining budget.

    Default behaviour skips an over-budget project and keeps scanning
    (the common municipal rule); ``stop_at_first_overflow`` stops at the
    first project that does not fit.
    """
    if budget < 0:
        raise ValueError("budget must be >= 0")
    remaining = budget
    funded = []
    for idx in ranking:
        cost = costs[idx]
        if cost <= 0:
            raise ValueError(f"nonpositive cost at index {idx}")
        if cost <= remaining:
            funded.append(ids[idx] if ids is not None else idx)
            remaining -= cost
        elif stop_at_first_overflow:
            break
    return funded


@dataclass(frozen=True)
class NullReport:
    """Shuffling-baseline metrics averaged over seeded permutations."""

    shuffles: int
    seed: int
    tau_mean: float
    rmse_mean: float
    jaccard_mean: tuple[float, ...]
    intersection_mean: tuple[float, ...]
    cost_curve_mean: tuple[float, ...]
    k_values: tuple[int, ...]


def null_predictor(campaign: Campaign, shuffles: int = 100, seed: int = 0) -> NullReport:
    """Average metrics of a predictor that only shuffles the projects.

    Each shuffle draws a uniformly random ranking and hands the r-th
    ranked project the r-th largest real vote count, so vote-level and
    rank-level metrics stay consistent.  Deterministic given the seed.
    """
    rng = np.random.default_rng(seed)
    real = np.asarray(campaign.vote_counts(), dtype=np.float64)
    costs = [p.cost for p in campaign.projects]
    ids = [p.id for p in campaign.projects]
    n = len(real)
    k_max = max(1, math.floor(0.3 * n))
    k_values = tuple(range(1, k_max + 1))
    sorted_desc = np.sort(real)[::-1]
    real_top = {k: top_k_set(real, k, costs, ids) for k in k_values}

    tau_total = 0.0
    rmse_total = 0.0
    jaccard_total = np.zeros(k_max)
    intersection_total = np.zeros(k_max)
    cost_total = np.zeros(k_max)
    for _ in range(shuffles):
        perm = rng.permutation(n)
        predicted = np.empty(n)
        predicted[perm] = sorted_desc
        tau_total += kendall_tau(predicted, real)
        rmse_total += normalized_rmse(predicted, real, campaign.voters)
        pred_rank = rank_order(predicted, costs, ids)
        curve = aggregated_cost_curve(pred_rank, costs, k_max)
        cost_total += np.asarray(curve)
        for j, k in enumerate(k_values):
            top_pred = set(pred_rank[:k])
            inter = len(top_pred & real_top[k])
            intersection_total[j] += inter
            jaccard_total[j] += inter / (2 * k - inter)
    return NullReport(
        shuffles=shuffles,
        seed=seed,
        tau_mean=tau_total / shuffles,
        rmse_mean=rmse_total / shuffles,
        jaccard_mean=tuple(jaccard_total / shuffles),
        intersection_mean=tuple(intersection_total / shuffles),
        cost_curve_mean=tuple(cost_total / shuffles),
        k_values=k_values,
    )


@dataclass(frozen=True)
class EvalReport:
    """Every metric for one prediction run over one campaign."""

    model: str
    campaign_key: str
    n_projects: int
    gap_count: int
    normalized_rmse: Optional[float]
    kendall_tau: Optional[float]
    k_values: tuple[int, ...]
    jaccard: tuple[float, ...]
    cost_curve_real: tuple[float, ...]
    cost_curve_pred: tuple[float, ...]
    greedy_funded_real: tuple[str, ...]
    greedy_funded_pred: tuple[str, ...]
    budget: int
    distinct_predictions: int
    heavy_ties: bool

    def to_json(self) -> str:
        payload = {
            "model": self.model,
            "campaign": self.campaign_key,
            "n_projects": self.n_projects,
            "gap_count": self.gap_count,
            "normalized_rmse": self.normalized_rmse,
            "kendall_tau": self.kendall_tau,
            "k_values": list(self.k_values),
            "jaccard": list(self.jaccard),
            "cost_curve_real": list(self.cost_curve_real),
            "cost_curve_pred": list(self.cost_curve_pred),
            "greedy_funded_real": list(self.greedy_funded_real),
            "greedy_funded_pred": list(self.greedy_funded_pred),
            "budget": self.budget,
            "distinct_predictions": self.distinct_predictions,
            "heavy_ties": self.heavy_ties,
        }
        return json.dumps(payload, sort_keys=True, ensure_ascii=False, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        d = json.loads(text)
        return cls(
            model=d["model"],
            campaign_key=d["campaign"],
            n_projects=d["n_projects"],
            gap_count=d["gap_count"],
            normalized_rmse=d["normalized_rmse"],
            kendall_tau=d["kendall_tau"],
            k_values=tuple(d["k_values"]),
            jaccard=tuple(d["jaccard"]),
            cost_curve_real=tuple(d["cost_curve_real"]),
            cost_curve_pred=tuple(d["cost_curve_pred"]),
            greedy_funded_real=tuple(d["greedy_funded_real"]),
            greedy_funded_pred=tuple(d["greedy_funded_pred"]),
            budget=d["budget"],
            distinct_predictions=d["distinct_predictions"],
            heavy_ties=d["heavy_ties"],
        )

    def plot_series_csv(self) -> str:
        """Plot-ready series: k, jaccard, cum_cost_real, cum_cost_pred."""
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["k", "jaccard", "cum_cost_real", "cum_cost_pred"])
        for i, k in enumerate(self.k_values):
            writer.writerow(
                [k, self.jaccard[i], self.cost_curve_real[i], self.cost_curve_pred[i]]
            )
        return buf.getvalue()


MAX_GAP_FRACTION = 0.10


def evaluate_run(run: PredictionRun, campaign: Campaign, force: bool = False) -> EvalReport:
    """Score one run against a campaign's ground truth.

    Gap records (failed LLM parses) are excluded pairwise from RMSE/tau
    and ranked last for the top-k metrics.  Runs with more than 10% gaps
    are refused unless ``force`` is set.
    """
    predictions = run.predictions_for(campaign)
    n = len(campaign.projects)
    gaps = sum(1 for p in predictions if p is None)
    if gaps > MAX_GAP_FRACTION * n and not force:
        raise IncompleteRunError(
            f"run has {gaps}/{n} gaps (> {MAX_GAP_FRACTION:.0%}); pass force to evaluate anyway"
        )
    real = np.asarray(campaign.vote_counts(), dtype=np.float64)
    costs = [p.cost for p in campaign.projects]
    ids = [p.id for p in campaign.projects]

    present = [i for i, p in enumerate(predictions) if p is not None]
    rmse = tau = None
    if len(present) >= 2:
        pred_present = np.asarray([predictions[i] for i in present])
        real_present = real[present]
        rmse = normalized_rmse(pred_present, real_present, campaign.voters)
        try:
            tau = kendall_tau(pred_present, real_present)
        except ValueError:
            tau = None

    k_max = max(1, math.floor(0.3 * n))
    k_values = tuple(range(1, k_max + 1))
    jaccard = tuple(
        jaccard_top_k(predictions, list(real), k, costs, ids) for k in k_values
    )
    real_rank = rank_order(list(real), costs, ids)
    pred_rank = rank_order(predictions, costs, ids)
    curve_real = tuple(aggregated_cost_curve(real_rank, costs, k_max))
    curve_pred = tuple(aggregated_cost_curve(pred_rank, costs, k_max))
    funded_real = tuple(greedy_allocate(real_rank, costs, campaign.budget, ids))
    funded_pred = tuple(greedy_allocate(pred_rank, costs, campaign.budget, ids))
    values = [p for p in predictions if p is not None]
    distinct = len(set(values))
    return EvalReport(
        model=run.model,
        campaign_key=campaign.key,
        n_projects=n,
        gap_count=gaps,
        normalized_rmse=rmse,
        kendall_tau=tau,
        k_values=k_values,
        jaccard=jaccard,
        cost_curve_real=curve_real,
        cost_curve_pred=curve_pred,
        greedy_funded_real=funded_real,
        greedy_funded_pred=funded_pred,
        budget=campaign.budget,
        distinct_predictions=distinct,
        heavy_ties=bool(values) and distinct * 3 <= len(values),
    )
