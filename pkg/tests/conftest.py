import numpy as np
from hypothesis import settings, strategies as st

from polypin.lattice import LatticePath, Profile

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@st.composite
def paths(draw, min_L=1, max_L=12, walled=True):
    """Random admissible paths: a shuffled bridge, reflected to the upper half-plane if walled."""
    L = draw(st.integers(min_L, max_L))
    steps = draw(st.permutations([1] * L + [-1] * L))
    h = np.concatenate([[0], np.cumsum(steps)])
    if walled:
        h = np.abs(h)
    return LatticePath(h, walled=walled)


@st.composite
def lipschitz_profiles(draw, n_knots=8):
    """Piecewise-linear nonnegative 1-Lipschitz profiles on [-1, 1] vanishing at the ends."""
    slopes = draw(st.lists(st.floats(-1, 1), min_size=n_knots, max_size=n_knots))
    x = np.linspace(-1, 1, n_knots + 1)
    v = np.concatenate([[0.0], np.cumsum(np.array(slopes) * np.diff(x))])
    # cap by the distance to the ends so the profile closes at +-1 and stays 1-Lipschitz
    v = np.clip(np.minimum(v, 1 - np.abs(x)), 0.0, None)
    v[-1] = 0.0
    xs = np.linspace(-1, 1, 801)
    return Profile(-1.0, 1.0, np.interp(xs, x, v))


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria (slow)")


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[number])
