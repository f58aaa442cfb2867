import numpy as np
import pytest

from lccmkit.core import format_level
from lccmkit.simulate import SimulationConfig, simulate_panel
from lccmkit.spec import TABLE3_CLASSES, build_spec, paper_2class_spec


def pytest_configure(config):
    config._acceptance_log = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = getattr(config, "_acceptance_log", [])
    if log:
        terminalreporter.section("acceptance criteria")
        for line in log:
            terminalreporter.write_line(line)


@pytest.fixture
def acceptance_log(request):
    return request.config._acceptance_log


@pytest.fixture(scope="session")
def paper_spec():
    return paper_2class_spec()


@pytest.fixture(scope="session")
def table3_theta(paper_spec):
    return paper_spec.initial_theta()


def mnl_truth():
    """Single-class spec generating from the class 1 estimates."""
    values = {(0, k): v for k, v in TABLE3_CLASSES[0].items() if isinstance(v, float)}
    return build_spec(1, values=values, name="mnl")


@pytest.fixture(scope="session")
def mnl_spec():
    return mnl_truth()


@pytest.fixture(scope="session")
def small_panel(paper_spec):
    data, labels = simulate_panel(SimulationConfig(paper_spec, n_respondents=60, rng_seed=11))
    return data


@pytest.fixture(scope="session")
def paper_panel(paper_spec):
    data, labels = simulate_panel(SimulationConfig(paper_spec, n_respondents=513, rng_seed=2024))
    return data


def central_fd(f, theta, steps):
    theta = np.asarray(theta, dtype=float)
    out = np.empty(theta.size)
    for i, h in enumerate(steps):
        e = np.zeros(theta.size)
        e[i] = h
        out[i] = (f(theta + e) - f(theta - e)) / (2 * h)
    return out


def hand_utilities(params, sit):
    """Utilities straight from the expanded coefficient table."""
    c1, w1, c2, w2, inf, ivt = sit.values

    def train(c, w):
        return (params[f"crowd:{format_level(c)}"] + params["wt"] * w
                + params["crowd_x_infect"] * c * inf + params["crowd_x_ivt"] * c * ivt)

    oo = params["opt_out"] + params["ivt"] * ivt + params[f"infect:{format_level(inf)}"]
    return [train(c1, w1), train(c2, w2), oo]
