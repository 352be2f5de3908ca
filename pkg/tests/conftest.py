import pytest

from delayest.model import PantographModel, ScaleModel, ShiftModel, ThetaWindow, lookup


def ou_model(gamma=1.0, x0=1.0, T=2.0, window=(0.2, 0.8), eps=0.01):
    return ShiftModel(lookup("linear", gamma=gamma), x0, T, ThetaWindow(*window), eps)


def sigmoid_shift_model(eps=0.01):
    return ShiftModel(lookup("shifted_sigmoid", c0=2.0, c1=1.0), 0.0, 3.0,
                      ThetaWindow(0.2, 1.0), eps)


def pantograph_model(a=0.0, b=1.0, x0=1.0, T=2.0, window=(0.1, 0.9), eps=0.01):
    return PantographModel(a, b, x0, T, ThetaWindow(*window), eps)


def scale_model(eps=0.01):
    return ScaleModel(lookup("shifted_sigmoid", c0=2.0, c1=1.0), 0.0, 3.0,
                      ThetaWindow(0.1, 0.9), eps)


@pytest.fixture
def ou():
    return ou_model()


@pytest.fixture
def panto():
    return pantograph_model()


@pytest.fixture
def scale():
    return scale_model()


# Shared Monte Carlo campaigns; each runs once per session.

OU_CAMPAIGN = dict(theta0=0.5, h=2e-4, reps=1000, seed=0, include_grid_mle=True, target_reps=2000)
PANTO_CAMPAIGN = dict(theta0=0.5, h=2e-4, reps=1000, seed=0, tau_exponent=0.45,
                      compare_kernels=True, eval_times=(0.5, 1.0, 1.5, 2.0))


@pytest.fixture(scope="session")
def ou_campaign():
    from delayest.montecarlo import McConfig, run_campaign

    return run_campaign(McConfig(ou_model(), **OU_CAMPAIGN))


@pytest.fixture(scope="session")
def panto_campaign():
    from delayest.montecarlo import McConfig, run_campaign

    return run_campaign(McConfig(pantograph_model(), **PANTO_CAMPAIGN))


# One line per acceptance criterion, printed at the end of the session.
ACCEPTANCE_RESULTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_RESULTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
