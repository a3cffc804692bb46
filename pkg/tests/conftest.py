import numpy as np
import pytest

from gla_workbench import config, pipeline
from gla_workbench.bench import FlowConfig, WingConfig, build_model


@pytest.fixture(scope="session")
def bench():
    return config.load_config()


@pytest.fixture(scope="session")
def model(bench):
    return pipeline.make_model(bench)


@pytest.fixture(scope="session")
def trimmed(model, bench):
    return pipeline.trim(model, bench)


@pytest.fixture(scope="session")
def reduction(model, trimmed, bench):
    return pipeline.reduce(model, trimmed, bench, bilinear=True)


@pytest.fixture(scope="session")
def design(reduction, bench):
    return pipeline.design(reduction.rom, bench)


@pytest.fixture(scope="session")
def discrete_pair(model, trimmed, design, bench, reduction):
    K, _ = design
    gust, t_final = pipeline.discrete_case(bench)
    cfg = pipeline.sim_config(bench, t_final, reduction.rom)
    return pipeline.run_pair(model, trimmed, K, gust, cfg)


@pytest.fixture(scope="session")
def small_model():
    """Coarse wing for fast unit tests."""
    wing = WingConfig(elements=4)
    return build_model(wing, FlowConfig(U_inf=59.0, rho=0.0789, alpha0=np.deg2rad(4.0)))



# acceptance criteria report: one line per criterion at the end of the run
ACCEPTANCE = {}


@pytest.fixture
def criterion():
    def record(number, title, ok, detail):
        line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
        ACCEPTANCE[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
