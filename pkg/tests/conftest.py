import numpy as np
import pytest

from qmarket.params import MarketInit, TraderParams

FIG_INIT = MarketInit(30, 15, 5)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_trader(rng, hi=5.0):
    w = rng.uniform(0.0, hi, 3)
    return TraderParams(w[0], w[1], w[2], rng.uniform(0.05, 1.5))


def small_inits(max_total=4):
    """Every (S, K, I) with S + K + I <= max_total."""
    out = []
    for m in range(max_total + 1):
        for s in range(m + 1):
            for k in range(m - s + 1):
                out.append(MarketInit(s, k, m - s - k))
    return out
