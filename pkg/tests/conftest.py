from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from cfmmkit.data import proxy_from_prices
from cfmmkit.models import bs_price
from cfmmkit.profiles import LiquidityProfile

FIXTURES = Path(__file__).parent / "fixtures"

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def fixtures():
    return FIXTURES


def bs_proxy(F, T, sigma, strikes, r=0.0):
    k = np.asarray(strikes, dtype=float)
    return proxy_from_prices(k, bs_price(F, k, T, sigma, r, "call"), bs_price(F, k, T, sigma, r, "put"), F)


@st.composite
def step_profiles(draw, lo=0.5, hi=20.0, max_steps=6, atoms=True):
    """Random profile with disjoint steps inside ``[lo, hi]`` and optional atoms."""
    n = draw(st.integers(1, max_steps))
    cuts = sorted(draw(st.lists(st.floats(lo, hi), min_size=2 * n, max_size=2 * n, unique=True)))
    steps = []
    for a, b in zip(cuts[::2], cuts[1::2]):
        if b - a > 1e-3:
            steps.append((a, b, draw(st.floats(0.1, 10.0))))
    at = []
    if atoms and draw(st.booleans()):
        q = draw(st.floats(lo, hi))
        at.append((q, draw(st.floats(0.01, 2.0))))
    if not steps and not at:
        steps.append((lo, hi, 1.0))
    return LiquidityProfile.from_steps(steps, at)
