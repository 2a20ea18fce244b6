import pathlib

import pytest

from kcycle import load_scenario

SCENARIO_DIR = pathlib.Path(__file__).resolve().parent.parent / "scenarios"

CORPUS_NAMES = [
    "pair_1d",
    "triad_2d",
    "linear_2d_a",
    "linear_3d_b",
    "trig_3d",
    "degenerate_vv",
    "degenerate_const",
]

# scenarios whose stasis point is regular (the degenerate two are not)
REGULAR_NAMES = ["pair_1d", "triad_2d", "linear_2d_a", "linear_3d_b",
                 "trig_3d"]


def scenario_path(name: str) -> pathlib.Path:
    return SCENARIO_DIR / f"{name}.json"


@pytest.fixture(scope="session")
def corpus():
    return {name: load_scenario(scenario_path(name)) for name in CORPUS_NAMES}


@pytest.fixture(scope="session")
def regular_corpus(corpus):
    return {name: corpus[name] for name in REGULAR_NAMES}
