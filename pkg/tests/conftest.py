import pytest
from hypothesis import HealthCheck, settings

from jamofdma.channel_model import ScenarioConfig, example_fixture

settings.register_profile(
    "repo", max_examples=200, deadline=None, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture
def fx():
    """3 users x 5 subcarriers worked example, sigma^2 = 1."""
    return example_fixture()


@pytest.fixture
def fx_cfg(fx):
    # P_S = 10 gives an equal share of 2 per subcarrier
    return ScenarioConfig(num_users=3, num_subcarriers=5, source_budget=10.0,
                          jammer_budget=10.0, noise_variance=fx.noise_variance)



# PASS/FAIL lines recorded by the acceptance module
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
