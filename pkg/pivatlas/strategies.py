"""
Pivot selection strategies, elimination episodes and the statistics
computed over a complete atlas.
"""

from copy import copy
from enum import Enum
from logging import getLogger
from random import Random
from typing import (
    Any,
    Callable,
    Dict,
    List,
    Optional,
    Sequence,
    Tuple,
)

import numpy as np

from .atlas import Atlas, ClassRecord, IntegrityError, Mode
from .bitmatrix import (
    BitMatrix,
    CostModel,
    Pivot,
    PivotError,
    eliminate,
    fill_in,
    free_pivots,
    min_fill_in_pivots,
    profile,
    step_cost,
)
from .canon import canonical
from .common import Report
from .workers import fanout

__all__ = (
    "Aggregation",
    "Baseline",
    "EpisodeResult",
    "Kind",
    "Strategy",
    "TieBreak",
    "Weighting",
    "choose",
    "episode_costs",
    "evaluate",
    "run_episode",
    "sample_matrices",
    "stats_best_pivot_fillin_excess",
    "stats_density_histogram",
    "stats_largest_gaps",
    "stats_minfillin_optimal_fraction",
    "stats_savings_markowitz_vs_median",
    "stats_savings_optimal_vs_markowitz",
)

log = getLogger("pivatlas.strategies")

BUCKETS = 10
EVAL_CHUNK = 1000


class Kind(Enum):
    MARKOWITZ = "markowitz"
    RANDOM = "random"
    OPTIMAL = "optimal"
    WEIGHTED_FILLIN = "weighted"
    TWO_STEP_LOOKAHEAD = "lookahead"
    AGENT = "agent"


class TieBreak(Enum):
    LEXICOGRAPHIC = "lexicographic"
    UNIFORM = "uniform"


class Aggregation(Enum):
    RATIO_OF_SUMS = "ratio_of_sums"
    MEAN_OF_RATIOS = "mean_of_ratios"


class Weighting(Enum):
    PER_CLASS = "per_class"
    MATRIX = "matrix"


class Baseline(Enum):
    MEDIAN = "median"
    BEST = "best"


Agent = Callable[[BitMatrix], Pivot]


class Strategy:
    """
    A rule picking a pivot of a nonzero matrix. Optimal needs atlases
    for the sizes below the matrices it is used on, Agent needs a
    callable (see dqn.agent_strategy).
    """

    def __init__(
        self,
        kind: Kind,
        tie_break: TieBreak = TieBreak.LEXICOGRAPHIC,
        seed: Optional[int] = None,
        lam: float = 1.0,
        atlases: Optional[Dict[int, Atlas]] = None,
        agent: Optional[Agent] = None,
    ) -> None:
        if lam < 0:
            raise ValueError(f"Weight {lam} of the column count is negative")
        if kind is Kind.AGENT and agent is None:
            raise ValueError("Agent strategy without an agent")
        self.kind = kind
        self.tie_break = tie_break
        self.lam = lam
        self.atlases = {0: Atlas.empty()}
        self.atlases.update(atlases or {})
        self.agent = agent
        self.reseed(seed)

    def reseed(self, seed: Optional[int]) -> None:
        self.seed = seed
        self.rng = Random(seed)

    def reseeded(self, seed: Optional[int]) -> "Strategy":
        """Copy sharing atlases and agent, with its own generator"""
        other = copy(self)
        other.reseed(seed)
        return other

    def __repr__(self) -> str:
        return (
            f"{self.__class__.__name__}({self.kind.value},"
            f" {self.tie_break.value}, seed={self.seed})"
        )

    def atlas(self, n: int) -> Atlas:
        try:
            return self.atlases[n]
        except KeyError:
            raise IntegrityError(
                f"Optimal strategy needs the size {n} atlas"
            ) from None


def _pick(strategy: Strategy, pivots: Sequence[Pivot]) -> Pivot:
    if strategy.tie_break is TieBreak.UNIFORM:
        return strategy.rng.choice(list(pivots))
    return min(pivots)


def _argmin(
    strategy: Strategy, pivots: Sequence[Pivot], score: Callable[[Pivot], Any]
) -> Pivot:
    scores = [score(p) for p in pivots]
    low = min(scores)
    return _pick(strategy, [p for p, s in zip(pivots, scores) if s == low])


def _optimal_score(
    strategy: Strategy, m: BitMatrix, model: CostModel
) -> Callable[[Pivot], int]:
    prev = strategy.atlas(m.n_rows - 1)

    def score(p: Pivot) -> int:
        rest = prev[canonical(eliminate(m, p)).bits]
        return step_cost(m, p, model) + rest.get(model, Mode.ALL).costmin

    return score


def _lookahead_score(
    m: BitMatrix, model: CostModel
) -> Callable[[Pivot], Tuple[int, int]]:
    def score(p: Pivot) -> Tuple[int, int]:
        rest = eliminate(m, p)
        ahead = min(
            (step_cost(rest, q, model) for q in rest.nonzeros()), default=0
        )
        return step_cost(m, p, model) + ahead, fill_in(m, p)

    return score


def choose(strategy: Strategy, m: BitMatrix, model: CostModel) -> Pivot:
    if m.is_zero:
        raise PivotError(f"No pivot to choose in zero {m.n_rows}x{m.n_cols}")
    free = free_pivots(m)
    if free:
        return _pick(strategy, free)
    kind = strategy.kind
    if kind is Kind.MARKOWITZ:
        return _pick(strategy, min_fill_in_pivots(m))
    pivots = list(m.nonzeros())
    if kind is Kind.RANDOM:
        return strategy.rng.choice(pivots)
    if kind is Kind.OPTIMAL:
        return _argmin(strategy, pivots, _optimal_score(strategy, m, model))
    if kind is Kind.WEIGHTED_FILLIN:
        rows, cols = profile(m)
        return _argmin(
            strategy,
            pivots,
            lambda p: (rows[p.row] - 1) * (cols[p.col] - 1)
            + strategy.lam * (cols[p.col] - 1),
        )
    if kind is Kind.TWO_STEP_LOOKAHEAD:
        return _argmin(strategy, pivots, _lookahead_score(m, model))
    assert strategy.agent is not None
    p = strategy.agent(m)
    if not m[p]:
        raise PivotError(f"Agent chose {p}, a zero entry of {m}")
    return p


class EpisodeResult(Report):
    TYPE = "episode"

    def __init__(self, *, total_cost: int, pivots: List[Pivot]) -> None:
        self.total_cost = total_cost
        self.pivots = pivots
        self.steps = len(pivots)


def run_episode(
    m: BitMatrix, strategy: Strategy, model: CostModel
) -> EpisodeResult:
    """
    Eliminate until nothing nonzero is left. Pivots are given in the
    coordinates of the shrinking matrix they were applied to.
    """
    total = 0
    pivots = []
    while not m.is_zero:
        p = choose(strategy, m, model)
        total += step_cost(m, p, model)
        pivots.append(p)
        m = eliminate(m, p)
    return EpisodeResult(total_cost=total, pivots=pivots)


def sample_matrices(n: int, size: int, seed: int) -> List[BitMatrix]:
    """Uniform over all 2**(n*n) patterns, reproducible by seed"""
    rng = np.random.default_rng(seed)
    rows = rng.integers(0, 1 << n, size=(size, n))
    return [BitMatrix.from_rows(n, r) for r in rows.tolist()]


def _eval_chunk(
    context: Tuple[Strategy, CostModel],
    item: Tuple[int, List[BitMatrix]],
) -> List[int]:
    strategy, model = context
    seed, matrices = item
    strategy = strategy.reseeded(seed)
    return [run_episode(m, strategy, model).total_cost for m in matrices]


def episode_costs(
    strategy: Strategy,
    matrices: Sequence[BitMatrix],
    model: CostModel,
    seed: int,
    workers: int = 1,
) -> List[int]:
    """
    Total cost of an episode on each matrix. Every chunk of matrices
    gets its own generator derived from seed, so the outcome does not
    depend on the number of workers.
    """
    chunks = [
        list(matrices[i : i + EVAL_CHUNK])
        for i in range(0, len(matrices), EVAL_CHUNK)
    ]
    seeds = [
        int(ss.generate_state(1)[0])
        for ss in np.random.SeedSequence(seed).spawn(len(chunks))
    ]
    parts = fanout(
        _eval_chunk, (strategy, model), list(zip(seeds, chunks)), workers
    )
    return [cost for part in parts for cost in part]


def evaluate(
    strategy: Strategy,
    n: int,
    model: CostModel,
    sample_size: int,
    seed: int,
    workers: int = 1,
) -> float:
    costs = episode_costs(
        strategy, sample_matrices(n, sample_size, seed), model, seed, workers
    )
    mean = sum(costs) / len(costs) if costs else 0.0
    log.info(
        "%s on %d samples of size %d, %s: mean cost %.4f",
        strategy,
        sample_size,
        n,
        model.name.lower(),
        mean,
    )
    return mean


def _weights(atlas: Atlas, weighting: Weighting) -> Dict[int, int]:
    if weighting is Weighting.MATRIX:
        return atlas.weights
    return dict.fromkeys(atlas.records, 1)


def _savings(
    atlas: Atlas,
    ratio: Callable[[ClassRecord], Tuple[float, float]],
    aggregation: Aggregation,
    weighting: Weighting,
) -> float:
    weights = _weights(atlas, weighting)
    num = den = 0.0
    for key, rec in atlas.items():
        m, d = ratio(rec)
        w = weights[key]
        if aggregation is Aggregation.RATIO_OF_SUMS:
            num += w * m
            den += w * d
        else:
            # a class with nothing to save counts as saving 0
            num += w * (1 - m / d) if d > 0 else 0.0
            den += w
    if den == 0:
        return 0.0
    if aggregation is Aggregation.RATIO_OF_SUMS:
        return 100 * (1 - num / den)
    return 100 * num / den


def stats_savings_markowitz_vs_median(
    atlas: Atlas,
    model: CostModel,
    aggregation: Aggregation = Aggregation.MEAN_OF_RATIOS,
    weighting: Weighting = Weighting.PER_CLASS,
) -> float:
    """Saving of the median minimum fill-in cost against the median cost"""
    return _savings(
        atlas,
        lambda rec: (
            rec.get(model, Mode.MINFILLIN).costmed,
            rec.get(model, Mode.ALL).costmed,
        ),
        aggregation,
        weighting,
    )


def stats_savings_optimal_vs_markowitz(
    atlas: Atlas,
    model: CostModel,
    aggregation: Aggregation = Aggregation.MEAN_OF_RATIOS,
    weighting: Weighting = Weighting.PER_CLASS,
) -> float:
    """Saving of the optimal cost against the median minimum fill-in cost"""
    return _savings(
        atlas,
        lambda rec: (
            rec.get(model, Mode.ALL).costmin,
            rec.get(model, Mode.MINFILLIN).costmed,
        ),
        aggregation,
        weighting,
    )


def stats_minfillin_optimal_fraction(
    atlas: Atlas,
    model: CostModel,
    weighting: Weighting = Weighting.PER_CLASS,
) -> float:
    """Percentage for which minimum fill-in all the way is optimal"""
    weights = _weights(atlas, weighting)
    hits = total = 0
    for key, rec in atlas.items():
        total += weights[key]
        if (
            rec.get(model, Mode.MINFILLIN).costmin
            == rec.get(model, Mode.ALL).costmin
        ):
            hits += weights[key]
    return 100 * hits / total if total else 0.0


def density_bucket(m: BitMatrix) -> int:
    return min(BUCKETS - 1, m.popcount * BUCKETS // (m.n_rows * m.n_cols))


def stats_density_histogram(
    atlas: Atlas,
    model: CostModel,
    baseline: Baseline = Baseline.MEDIAN,
    weighting: Weighting = Weighting.PER_CLASS,
) -> List[float]:
    """
    Mean possible saving of the optimal cost against the minimum fill-in
    baseline, per density bucket [0%, 10%), ..., [90%, 100%].
    A class with a zero baseline counts as saving 0. Empty buckets are 0.
    """
    weights = _weights(atlas, weighting)
    sums = [0.0] * BUCKETS
    counts = [0] * BUCKETS
    for key, rec in atlas.items():
        mfi = rec.get(model, Mode.MINFILLIN)
        base = mfi.costmed if baseline is Baseline.MEDIAN else mfi.costmin
        bucket = density_bucket(BitMatrix(atlas.n, atlas.n, key))
        counts[bucket] += weights[key]
        if base > 0:
            best = rec.get(model, Mode.ALL).costmin
            sums[bucket] += weights[key] * 100 * (base - best) / base
    return [s / c if c else 0.0 for s, c in zip(sums, counts)]


def stats_largest_gaps(
    atlas: Atlas, model: CostModel, top: int = 10
) -> List[Tuple[int, int]]:
    """
    Classes where minimum fill-in loses most against the optimum:
    (key, costmin(MinFillIn) - costmin(All)), largest gap first.
    """
    gaps = [
        (
            key,
            rec.get(model, Mode.MINFILLIN).costmin
            - rec.get(model, Mode.ALL).costmin,
        )
        for key, rec in atlas.items()
    ]
    gaps.sort(key=lambda kg: (-kg[1], kg[0]))
    return gaps[:top]


def stats_best_pivot_fillin_excess(
    atlas: Atlas, model: CostModel
) -> Dict[int, int]:
    """
    Histogram of fill_in(best pivot) - minimal fill-in over the classes
    without a free pivot: how far optimal pivots stray from Markowitz.
    """
    result: Dict[int, int] = {}
    for key, rec in atlas.items():
        m = BitMatrix(atlas.n, atlas.n, key)
        best = rec.get(model, Mode.ALL).best
        if best is None or free_pivots(m):
            continue
        mfi = min_fill_in_pivots(m)
        excess = fill_in(m, best) - fill_in(m, mfi[0])
        result[excess] = result.get(excess, 0) + 1
    return dict(sorted(result.items()))
