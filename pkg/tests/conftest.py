"""Shared fixtures: each synthetic preset is generated once per session."""

from __future__ import annotations

import pytest

from sataudit import synth


@pytest.fixture(scope="session")
def null_data():
    return synth.generate(synth.preset_null())


@pytest.fixture(scope="session")
def qmix_small():
    return synth.generate(synth.preset_query_mix_confound(n_impressions=30_000))


@pytest.fixture(scope="session")
def truegap_data():
    return synth.generate(synth.preset_true_gap())


@pytest.fixture(scope="session")
def dwell_data():
    return synth.generate(synth.preset_dwell_confound())
