import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from mmot.measures import DiscreteMeasure

settings.register_profile(
    "repo",
    deadline=None,
    derandomize=True,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")


@st.composite
def measures_1d(draw, min_size=1, max_size=5, lo=-10, hi=10):
    """Small 1-d measures with distinct integer-grid points and positive weights."""
    pts = draw(st.lists(st.integers(4 * lo, 4 * hi), min_size=min_size, max_size=max_size, unique=True))
    raw = draw(st.lists(st.integers(1, 20), min_size=len(pts), max_size=len(pts)))
    w = np.array(raw, dtype=float)
    return DiscreteMeasure(np.array(pts, dtype=float)[:, None] / 4, w / w.sum())


@st.composite
def equal_mass_1d(draw, min_size=1, max_size=6):
    pts = draw(st.lists(st.integers(-40, 40), min_size=min_size, max_size=max_size, unique=True))
    m = len(pts)
    return DiscreteMeasure(np.array(pts, dtype=float)[:, None] / 4, np.full(m, 1.0 / m))


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            if getattr(rep, "when", None) != "call":
                continue
            lines += [v for k, v in rep.user_properties if k == "acceptance"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
