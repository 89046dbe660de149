import pathlib

import pytest

from ecolane.harness import run
from ecolane.world import load_scenario

SCENARIO_DIR = pathlib.Path(__file__).resolve().parents[1] / "src" / "ecolane" / "scenarios"
TWO_LIGHTS = SCENARIO_DIR / "two_lights.json"
SWEEP = SCENARIO_DIR / "sweep.json"


@pytest.fixture(scope="session")
def two_lights_scenario():
    return load_scenario(str(TWO_LIGHTS))


@pytest.fixture(scope="session")
def two_lights_runs(two_lights_scenario):
    """Both policies on the scripted scene, shared across test modules."""
    return {
        policy: run(two_lights_scenario, policy, collect_trace=True)
        for policy in ("baseline", "proposed")
    }
