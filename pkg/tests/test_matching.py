"""The five-stage context-matching funnel and its helpers."""

from __future__ import annotations

import pytest

from corpus_builders import click, corpus, imp
from sataudit.aggregate import Factor
from sataudit.errors import DataError
from sataudit.logmodel import Gender
from sataudit.matching import (MatchConfig, dominant_result,
                               final_successful_click, match_contexts,
                               matched_scores, navigational_queries_proxy,
                               serp_signature)
from sataudit.metrics import MetricKind

STAGES = ["input", "navigational", "min_impressions", "final_click", "serp",
          "min_impressions_recheck"]


class TestFinalSuccessfulClick:
    def test_last_long_dwell_click_wins(self):
        i = imp(clicks=[click("r0", 1, 60.0), click("r1", 2, 45.0),
                        click("r2", 3, 2.0)])
        assert final_successful_click(i) == "r1"

    def test_none_when_no_click_crosses_threshold(self):
        assert final_successful_click(imp(clicks=[click(dwell=5.0)])) is None
        assert final_successful_click(imp(clicks=[])) is None

    def test_nan_dwell_clicks_are_ignored(self):
        i = imp(clicks=[click("r0", 1, 60.0),
                        click("r1", 2, float("nan"))])
        assert final_successful_click(i) == "r0"


def test_dominant_result_counts_and_tie_break():
    imps = [imp(clicks=[click("r0", 1, 60.0)]) for _ in range(2)]
    imps += [imp(clicks=[click("r1", 2, 60.0)]) for _ in range(2)]
    assert dominant_result(imps) == "r0"   # tie -> lexicographically first
    imps += [imp(clicks=[click("r1", 2, 60.0)])]
    assert dominant_result(imps) == "r1"
    assert dominant_result([imp(clicks=[])]) is None


class TestSerpSignature:
    def test_same_prefix_same_signature(self):
        a = [f"r{i}" for i in range(10)]
        b = a[:8] + ["x8", "x9"]
        assert serp_signature(a) == serp_signature(b)

    def test_order_matters(self):
        a = ["r0", "r1", "r2"]
        b = ["r1", "r0", "r2"]
        assert serp_signature(a) != serp_signature(b)

    def test_shorter_prefix_is_a_different_signature(self):
        a = [f"r{i}" for i in range(10)]
        assert serp_signature(a, 3) != serp_signature(a, 8)


def test_navigational_proxy_uses_final_click_concentration():
    imps = []
    # concentrated: 9 of 10 finals on r0
    for k in range(10):
        rid = "r0" if k < 9 else "r1"
        imps.append(imp(query="brand a", clicks=[click(rid, 1, 60.0)]))
    # split 50/50
    for k in range(10):
        rid = "r0" if k % 2 == 0 else "r1"
        imps.append(imp(query="torso q", clicks=[click(rid, 1, 60.0)]))
    # no successful clicks at all
    imps.append(imp(query="dead q", clicks=[click(dwell=2.0)]))
    nav = navigational_queries_proxy(corpus(imps), MatchConfig())
    assert nav == {"brand a"}


class TestMatchContexts:
    CFG = MatchConfig(min_impressions_per_group=2)

    def _pipeline_corpus(self):
        imps = []
        # "brand a": survives end to end, 3 per gender; one extra male
        # impression whose final click misses the dominant result
        for g in (Gender.MALE, Gender.FEMALE):
            for k in range(3):
                imps.append(imp(query="brand a", gender=g,
                                clicks=[click("r0", 1, 60.0)]))
        imps.append(imp(query="brand a", gender=Gender.MALE,
                        clicks=[click("r1", 2, 60.0)]))
        # "brand b": one gender only -> dies at the representation floor
        imps += [imp(query="brand b", gender=Gender.MALE,
                     clicks=[click("r0", 1, 60.0)]) for _ in range(3)]
        # "torso c": not navigational -> dies at stage one
        imps += [imp(query="torso c", gender=g, clicks=[click("r0", 1, 60.0)])
                 for g in (Gender.MALE, Gender.FEMALE)]
        # "brand d": the SERP filter drops one male, pushing males under
        # the floor, so the recheck removes the whole query
        for g in (Gender.MALE, Gender.FEMALE):
            for k in range(2):
                results = ("r0", "r1", "r2")
                if g is Gender.MALE and k == 1:
                    results = ("r1", "r0", "r2")
                imps.append(imp(query="brand d", gender=g, results=results,
                                clicks=[click("r0", results.index("r0") + 1,
                                              60.0)]))
        return corpus(imps), {"brand a", "brand b", "brand d"}

    def test_stage_names_and_attrition(self):
        c, nav = self._pipeline_corpus()
        cohort = match_contexts(c, Factor.GENDER, self.CFG, navigational=nav)
        assert [s.stage for s in cohort.attrition] == STAGES
        by_stage = {s.stage: s for s in cohort.attrition}
        assert by_stage["input"].impressions == 16
        assert by_stage["input"].queries == 4
        assert by_stage["navigational"].impressions == 14   # drops torso c
        assert by_stage["min_impressions"].impressions == 11  # drops brand b
        assert by_stage["final_click"].impressions == 10    # drops r1 clicker
        assert by_stage["serp"].impressions == 9            # drops odd serp
        assert by_stage["min_impressions_recheck"].impressions == 6
        assert set(cohort.by_query) == {"brand a"}
        counts = [s.impressions for s in cohort.attrition]
        assert counts == sorted(counts, reverse=True)

    def test_proxy_used_when_no_explicit_set(self):
        c, _ = self._pipeline_corpus()
        cohort = match_contexts(c, Factor.GENDER, self.CFG)
        # every query here concentrates final clicks on one result, so
        # the proxy admits all four; the floor then drops the thin ones
        assert cohort.attrition[1].stage == "navigational"
        assert cohort.attrition[1].queries == 4
        assert cohort.attrition[1].impressions == 16
        assert set(cohort.by_query) == {"brand a"}

    def test_matched_scores_on_the_surviving_cohort(self):
        c, nav = self._pipeline_corpus()
        cohort = match_contexts(c, Factor.GENDER, self.CFG, navigational=nav)
        norm = matched_scores(cohort, 30.0)
        # survivors all have one successful click and no reformulation:
        # identical groups, so every metric is degenerate
        assert norm.degenerate == set(norm.scores)
        raw = {g: s.raw for g, s in
               norm.scores[MetricKind.GRADED_UTILITY].items()}
        assert raw == {Gender.MALE: 1.0, Gender.FEMALE: 1.0}

    def test_reference_bounds_flow_through(self):
        c, nav = self._pipeline_corpus()
        cohort = match_contexts(c, Factor.GENDER, self.CFG, navigational=nav)
        ref = {m: (0.0, 2.0) for m in
               matched_scores(cohort, 30.0).scores}
        norm = matched_scores(cohort, 30.0, reference=ref)
        gu = norm.scores[MetricKind.GRADED_UTILITY]
        assert gu[Gender.MALE].normalized == 0.5   # raw 1.0 on a (0, 2) scale

    def test_empty_cohort_raises(self):
        c, _ = self._pipeline_corpus()
        cohort = match_contexts(c, Factor.GENDER, self.CFG,
                                navigational={"no such query"})
        with pytest.raises(DataError, match="matched cohort is empty"):
            matched_scores(cohort, 30.0)

    def test_floor_below_one_rejected(self):
        c, _ = self._pipeline_corpus()
        with pytest.raises(DataError, match="min_impressions_per_group"):
            match_contexts(c, Factor.GENDER,
                           MatchConfig(min_impressions_per_group=0))
