import numpy as np
import pytest

# worked example used throughout: five value regions, two of them L-shaped
TARGET = np.array(
    [
        [1.0, 1.0, 1.0, 1.0],
        [1.0, 1.0, 5.0, 5.0],
        [2.0, 3.0, 5.0, 5.0],
        [2.0, 3.0, 5.0, 5.0],
    ]
)

# roots of lam^3 - 182 lam^2 + 620 lam - 64 (char. poly of TARGET^T TARGET without
# its zero root), square-rooted; computed with sympy to 30 digits
TARGET_SIGMA = (13.3614814475793758948690840163, 1.83419099666570230939129914271, 0.326430564963857620304989400936)
# (2 pi / 4) * (1*s1 + 1*s2 + 2*s3), divided by pi
TARGET_CHAT_OVER_PI = 7.9242667870863967224
# 2 * sum|H| / (16 * (1/pi)) = 2 * 46 / 16 pi
TARGET_J_OVER_PI = 5.75


def hadamard(n: int) -> np.ndarray:
    h = np.array([[1.0]])
    while h.shape[0] < n:
        h = np.block([[h, h], [h, -h]])
    return h


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def target():
    return TARGET.copy()


# one line per acceptance criterion, printed after the run regardless of capture
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
