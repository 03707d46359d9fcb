"""Group-level score aggregation and query population statistics.

Scores are query-averaged: for each (group, query) cell the metric is
averaged over the group's impressions of that query, and the group score
is the unweighted mean of those per-query means.  This keeps popular
queries from dominating the comparison.  Min-max normalization maps each
metric's group scores onto [0, 1]; a fitted normalization can be reused
as a reference scale so that score sets from different cohorts stay
comparable.
"""

from __future__ import annotations

import enum
import math
import logging
from dataclasses import dataclass, field

from .errors import DataError
from .logmodel import AgeGroup, Gender, Impression, LogCorpus
from .metrics import DEFAULT_DWELL_THRESHOLD_S, MetricKind, metric_vector

logger = logging.getLogger(__name__)

GroupKey = AgeGroup | Gender

METRICS = (MetricKind.GRADED_UTILITY, MetricKind.REFORMULATION,
           MetricKind.PAGE_CLICK_COUNT, MetricKind.SUCCESSFUL_CLICK_COUNT)


class Factor(enum.Enum):
    """The demographic axis an audit slices on."""

    AGE = "age"
    GENDER = "gender"

    def groups(self) -> list[GroupKey]:
        if self is Factor.AGE:
            return list(AgeGroup)
        return list(Gender)

    def key(self, imp: Impression) -> GroupKey:
        if self is Factor.AGE:
            return imp.demographics.age
        return imp.demographics.gender


@dataclass
class QueryCell:
    """Mean metrics for one (group, query) cell."""

    means: dict[MetricKind, float]
    n_impressions: int


@dataclass
class GroupQueryTable:
    factor: Factor
    cells: dict[GroupKey, dict[str, QueryCell]]

    def queries_of(self, group: GroupKey) -> list[str]:
        return sorted(self.cells.get(group, {}))


@dataclass(frozen=True)
class GroupScore:
    raw: float
    normalized: float
    stderr: float
    n_queries: int
    n_impressions: int


@dataclass
class RawScores:
    """Query-averaged raw group scores, one entry per (metric, group)."""

    factor: Factor
    raw: dict[MetricKind, dict[GroupKey, float]]
    stderr: dict[MetricKind, dict[GroupKey, float]]
    n_queries: dict[GroupKey, int]
    n_impressions: dict[GroupKey, int]


@dataclass
class NormalizedScores:
    factor: Factor
    scores: dict[MetricKind, dict[GroupKey, GroupScore]]
    bounds: dict[MetricKind, tuple[float, float]]
    degenerate: set[MetricKind] = field(default_factory=set)

    def gap(self, metric: MetricKind) -> float:
        vals = [s.normalized for s in self.scores[metric].values()]
        return max(vals) - min(vals)


def group_query_table(corpus: LogCorpus, factor: Factor,
                      dwell_threshold_s: float = DEFAULT_DWELL_THRESHOLD_S
                      ) -> GroupQueryTable:
    """Per (group, query) mean metric vectors with impression counts."""
    sums: dict[GroupKey, dict[str, list[float]]] = {}
    counts: dict[GroupKey, dict[str, int]] = {}
    for imp in corpus.impressions:
        g = factor.key(imp)
        mv = metric_vector(imp, dwell_threshold_s)
        row = sums.setdefault(g, {}).setdefault(imp.query_text, [0.0] * len(METRICS))
        for k, kind in enumerate(METRICS):
            row[k] += mv.value(kind)
        counts.setdefault(g, {})[imp.query_text] = \
            counts.get(g, {}).get(imp.query_text, 0) + 1
    cells: dict[GroupKey, dict[str, QueryCell]] = {}
    for g, by_query in sums.items():
        cells[g] = {}
        for q, row in by_query.items():
            n = counts[g][q]
            cells[g][q] = QueryCell(
                means={kind: row[k] / n for k, kind in enumerate(METRICS)},
                n_impressions=n)
    return GroupQueryTable(factor=factor, cells=cells)


def query_averaged_scores(corpus: LogCorpus, factor: Factor,
                          dwell_threshold_s: float = DEFAULT_DWELL_THRESHOLD_S
                          ) -> RawScores:
    """Group scores as means over per-query means, with standard errors.

    The standard error treats queries as the sampling unit.  Groups with
    no impressions are excluded with a warning.
    """
    table = group_query_table(corpus, factor, dwell_threshold_s)
    missing = [g for g in factor.groups() if g not in table.cells]
    if missing:
        logger.warning("scores for factor %s: no impressions for groups %s",
                       factor.value, [g.name for g in missing])
    raw: dict[MetricKind, dict[GroupKey, float]] = {m: {} for m in METRICS}
    stderr: dict[MetricKind, dict[GroupKey, float]] = {m: {} for m in METRICS}
    n_queries: dict[GroupKey, int] = {}
    n_impressions: dict[GroupKey, int] = {}
    for g in factor.groups():
        if g not in table.cells:
            continue
        cells = table.cells[g]
        n_q = len(cells)
        n_queries[g] = n_q
        n_impressions[g] = sum(c.n_impressions for c in cells.values())
        for kind in METRICS:
            vals = [c.means[kind] for c in cells.values()]
            mean = sum(vals) / n_q
            raw[kind][g] = mean
            if n_q > 1:
                var = sum((v - mean) ** 2 for v in vals) / (n_q - 1)
                stderr[kind][g] = math.sqrt(var / n_q)
            else:
                stderr[kind][g] = float("nan")
    if not n_queries:
        raise DataError("empty corpus: no group has any impressions")
    return RawScores(factor=factor, raw=raw, stderr=stderr,
                     n_queries=n_queries, n_impressions=n_impressions)


def normalize(scores: RawScores,
              reference: dict[MetricKind, tuple[float, float]] | None = None
              ) -> NormalizedScores:
    """Min-max normalize each metric's group scores onto [0, 1].

    With `reference` the affine map of a previously normalized score set
    is applied instead of refitting, which keeps two cohorts (for example
    all data versus a matched subset) on one comparable scale; values may
    then fall outside [0, 1].

    A metric with no real range maps every group to 0 and is flagged as
    degenerate.  Degenerate means the span is exactly zero, or (when
    fitting fresh bounds) smaller than twice the combined standard error
    of the extreme groups -- otherwise a factor whose groups genuinely
    agree would still be stretched onto [0, 1] and report a spurious
    full-scale gap.
    """
    groups = [g for g in scores.factor.groups() if g in scores.n_queries]
    if len(groups) < 2:
        raise DataError("normalization needs at least two non-empty groups")
    out: dict[MetricKind, dict[GroupKey, GroupScore]] = {}
    bounds: dict[MetricKind, tuple[float, float]] = {}
    degenerate: set[MetricKind] = set()
    for kind in METRICS:
        vals = scores.raw[kind]
        if reference is not None:
            lo, hi = reference[kind]
            span = hi - lo
            is_degenerate = span == 0
        else:
            g_lo = min(groups, key=lambda g: vals[g])
            g_hi = max(groups, key=lambda g: vals[g])
            lo, hi = vals[g_lo], vals[g_hi]
            span = hi - lo
            noise = 0.0
            for se in (scores.stderr[kind][g_lo], scores.stderr[kind][g_hi]):
                if not math.isnan(se):
                    noise += se * se
            is_degenerate = span == 0 or span <= 2.0 * math.sqrt(noise)
        bounds[kind] = (lo, hi)
        out[kind] = {}
        if is_degenerate:
            degenerate.add(kind)
            logger.warning("normalize: metric %s has no real range across "
                           "groups (span %g); emitting zeros", kind.value,
                           span)
        for g in groups:
            norm = 0.0 if is_degenerate else (vals[g] - lo) / span
            out[kind][g] = GroupScore(
                raw=vals[g], normalized=norm, stderr=scores.stderr[kind][g],
                n_queries=scores.n_queries[g],
                n_impressions=scores.n_impressions[g])
    return NormalizedScores(factor=scores.factor, scores=out, bounds=bounds,
                            degenerate=degenerate)


def query_kl(corpus: LogCorpus, group_a: GroupKey, group_b: GroupKey,
             factor: Factor, alpha: float = 0.5) -> float:
    """KL divergence D(P_a || P_b) between smoothed query distributions.

    Both distributions are additively smoothed with `alpha` over the
    union vocabulary of the two groups, so the divergence is finite even
    for disjoint query sets.  Natural log.
    """
    if alpha <= 0:
        raise DataError("smoothing alpha must be positive")
    counts: dict[GroupKey, dict[str, int]] = {group_a: {}, group_b: {}}
    for imp in corpus.impressions:
        g = factor.key(imp)
        if g in counts:
            counts[g][imp.query_text] = counts[g].get(imp.query_text, 0) + 1
    ca, cb = counts[group_a], counts[group_b]
    if not ca or not cb:
        raise DataError("query KL needs impressions from both groups")
    vocab = set(ca) | set(cb)
    v = len(vocab)
    na = sum(ca.values()) + alpha * v
    nb = sum(cb.values()) + alpha * v
    kl = 0.0
    for q in vocab:
        pa = (ca.get(q, 0) + alpha) / na
        pb = (cb.get(q, 0) + alpha) / nb
        kl += pa * math.log(pa / pb)
    return kl


def head_tail_classify(corpus: LogCorpus) -> dict[str, str]:
    """Partition queries into head / torso / tail by total traffic.

    Head is the top ceil(20%) of queries by impression count, tail the
    bottom floor(30%), torso the rest.  Ties break lexicographically on
    query text so the partition is deterministic.
    """
    counts: dict[str, int] = {}
    for imp in corpus.impressions:
        counts[imp.query_text] = counts.get(imp.query_text, 0) + 1
    if not counts:
        return {}
    ordered = sorted(counts, key=lambda q: (-counts[q], q))
    n = len(ordered)
    n_head = math.ceil(0.2 * n)
    n_tail = math.floor(0.3 * n)
    classes = {}
    for i, q in enumerate(ordered):
        if i < n_head:
            classes[q] = "head"
        elif i >= n - n_tail:
            classes[q] = "tail"
        else:
            classes[q] = "torso"
    return classes
