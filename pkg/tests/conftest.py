import os
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("ci", max_examples=200, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def top_render():
    from qmc_metrology.sem.render import render_top_view

    return render_top_view()


@pytest.fixture(scope="session")
def top_render_plain():
    from qmc_metrology.sem.render import render_top_view

    return render_top_view(holes=False)


@pytest.fixture(scope="session")
def tilted_render():
    from qmc_metrology.sem.render import BeamGeometry, render_tilted_view

    geom = BeamGeometry(W_top_nm=300.0, W_bottom_nm=300.0, thickness_nm=129.0)
    return geom, render_tilted_view(geom)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
