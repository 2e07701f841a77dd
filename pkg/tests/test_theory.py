import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fillsim.core import Side
from fillsim.market_model import TY_1S_PARAMS, GchpParams, ModelParams, Reducible
from fillsim.theory import (
    DegenerateFill,
    InvalidRate,
    drift_given_fill,
    drift_report,
    drift_unconditional,
    fill_probability,
    gchp_drift_given_fill,
    gchp_drift_unconditional,
    gchp_fill_probability,
)

from oracles import gchp_drift_given_fill_enum, umd_drift_given_fill_exact

# frozen from the exact enumeration in tests/oracles.py
TY_1S_DRIFT = -0.4855467209319607
TY_1S_P_FILL = 0.0349886


def test_ty_values_match_frozen_oracle():
    exact_drift, exact_pf = umd_drift_given_fill_exact(0.0173, 0.9654, 0.0173, 0.018, 1)
    assert float(exact_drift) == pytest.approx(TY_1S_DRIFT, abs=1e-15)
    assert float(exact_pf) == pytest.approx(TY_1S_P_FILL, abs=1e-15)
    r = drift_report(TY_1S_PARAMS)
    assert r.drift_given_fill_ticks == pytest.approx(TY_1S_DRIFT, abs=1e-12)
    assert r.fill_probability == pytest.approx(TY_1S_P_FILL, abs=1e-12)
    assert r.drift_unconditional_ticks == 0.0
    assert round(r.drift_given_fill_ticks, 2) == -0.49


def test_drift_given_fill_is_fast():
    t = time.perf_counter()
    for _ in range(1000):
        drift_given_fill(TY_1S_PARAMS)
    assert (time.perf_counter() - t) / 1000 < 1e-3


def test_forced_adverse_only_fill_is_minus_one_tick():
    m = ModelParams(0.2, 0.6, 0.2, r_f=0.0, p_fill_down=1.0)
    assert drift_given_fill(m) == -1.0
    assert drift_given_fill(m, Side.SELL) == 1.0


def test_zero_fill_probability_is_degenerate():
    with pytest.raises(DegenerateFill):
        fill_probability(ModelParams(0.5, 0.5, 0.0, r_f=0.0))


def test_sell_side_mirrors_buy_side():
    m = ModelParams(0.03, 0.92, 0.05, r_f=0.1, p_fill_down=0.8)
    assert drift_given_fill(m, Side.SELL) == pytest.approx(-drift_given_fill(m.mirrored()))
    assert drift_unconditional(m) == pytest.approx(-0.02)


probs = st.floats(0.001, 0.499)
rates = st.floats(0.0, 0.999)
fill_down = st.floats(0.01, 1.0)


@settings(max_examples=200, deadline=None)
@given(probs, probs, rates, fill_down)
def test_umd_matches_exact_enumeration(p_up, p_down, r_f, p_fill_down):
    m = ModelParams(p_up, 1.0 - p_up - p_down, p_down, r_f, p_fill_down)
    d, pf = umd_drift_given_fill_exact(m.p_up, m.p_mid, m.p_down, r_f, p_fill_down)
    assert drift_given_fill(m) == pytest.approx(float(d), abs=1e-9)
    assert fill_probability(m) == pytest.approx(float(pf), abs=1e-12)


transition = st.floats(0.01, 0.99)


@settings(max_examples=200, deadline=None)
@given(transition, transition, rates)
def test_gchp_matches_power_iteration(p_du, p_ud, r_f):
    g = GchpParams.from_leave(p_du, p_ud)
    d, pf = gchp_drift_given_fill_enum(g.p_uu, g.p_du, g.p_ud, g.p_dd, r_f)
    assert gchp_drift_given_fill(g, r_f) == pytest.approx(d, abs=1e-9)
    assert gchp_fill_probability(g, r_f) == pytest.approx(pf, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(transition, rates)
def test_gchp_symmetric_chain_has_zero_unconditional_drift(p, r_f):
    g = GchpParams.from_leave(p, p)
    assert gchp_drift_unconditional(g) == pytest.approx(0.0, abs=1e-12)
    assert gchp_drift_given_fill(g, r_f) < 0


def test_gchp_rejects_reducible_chain_and_bad_rate():
    with pytest.raises(Reducible):
        gchp_drift_given_fill(GchpParams(1.0, 0.0, 0.5, 0.5), 0.1)
    with pytest.raises(InvalidRate):
        gchp_drift_given_fill(GchpParams.from_leave(0.3, 0.3), 1.0)
