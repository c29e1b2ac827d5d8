import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tokenval.metrics import (
    HorizonExceedsData,
    adoption_ratios,
    build_proxy_panel,
    dilution_rate,
    past100,
    pe_ratio,
    nvt_ratio,
    pm_ratio,
    pu_ratio,
    returns,
    staking_ratio,
    token_utility,
    velocity,
    volatility,
)

from conftest import make_dataset


class TestVelocity:
    def test_equal_volume_and_cap(self):
        ds = make_dataset(n=5, market_cap_usd=np.full(5, 2e9), volume_usd=np.full(5, 2e9))
        assert np.allclose(velocity(ds), 1.0)

    def test_zero_volume(self):
        ds = make_dataset(n=5, volume_usd=np.zeros(5))
        assert np.all(velocity(ds) == 0.0)

    def test_arithmetic(self):
        ds = make_dataset(n=3, volume_usd=np.full(3, 2e9), market_cap_usd=np.full(3, 4e10))
        assert np.allclose(velocity(ds), 0.05)


class TestStakingRatio:
    def test_all_active(self):
        ds = make_dataset(n=4, supply=np.full(4, 1e6), issuance=np.zeros(4),
                          supply_active_1y=np.full(4, 1e6))
        assert np.all(staking_ratio(ds) == 0.0)

    def test_none_active(self):
        ds = make_dataset(n=4, supply_active_1y=np.zeros(4))
        assert np.all(staking_ratio(ds) == 1.0)

    def test_arithmetic(self):
        ds = make_dataset(n=3, supply=np.full(3, 18e6), issuance=np.zeros(3),
                          supply_active_1y=np.full(3, 7.2e6))
        assert np.allclose(staking_ratio(ds), 0.6)

    def test_bounded(self, small_ds):
        s = staking_ratio(small_ds)
        assert np.all((s >= 0.0) & (s <= 1.0))


class TestDilution:
    def test_constant_issuance(self):
        n = 120
        ds = make_dataset(n=n, issuance=np.full(n, 900.0), supply=np.full(n, 6_570_000.0))
        d = dilution_rate(ds)
        assert np.all(np.isnan(d[:89]))
        assert np.allclose(d[89:], 365 * 900 / 6_570_000)

    def test_zero_issuance(self):
        n = 100
        ds = make_dataset(n=n, issuance=np.zeros(n), supply=np.full(n, 1e6))
        assert np.all(dilution_rate(ds)[89:] == 0.0)

    def test_ramp_matches_direct_mean(self):
        # Oracle: mean of the issuance ramp computed directly on the window.
        n = 90
        issuance = np.arange(1.0, 91.0)
        ds = make_dataset(n=n, issuance=issuance, supply=np.full(n, 1e6))
        expected = 365.0 * issuance.mean() / 1e6
        d = dilution_rate(ds)
        assert d[89] == pytest.approx(expected, rel=1e-14)
        assert expected == pytest.approx(365 * 45.5 / 1e6)


class TestVolatility:
    def test_constant_price(self):
        ds = make_dataset(n=60, price=np.full(60, 42.0))
        v = volatility(ds, 30)
        assert np.all(v[30:] == 0.0)

    def test_alternating_price_matches_bruteforce(self):
        # Oracle: explicit 30-vector of alternating +-1 log returns.
        n = 80
        price = np.where(np.arange(n) % 2 == 0, 1.0, np.e)
        ds = make_dataset(n=n, price=price)
        v = volatility(ds, 30)
        window = np.diff(np.log(price))[-30:]
        expected = window.std(ddof=1)
        assert expected == pytest.approx(np.sqrt(30 / 29), rel=1e-12)
        assert v[-1] == pytest.approx(expected, rel=1e-12)

    def test_shift_equivariance(self):
        rng = np.random.default_rng(3)
        price = 50 * np.exp(np.cumsum(rng.standard_normal(90) * 0.05))
        a = make_dataset(n=90, price=price)
        b = make_dataset(n=90, price=price)  # same prices, different calendar
        np.testing.assert_array_equal(volatility(a, 30), volatility(b, 30))

    def test_first_defined_index(self, small_ds):
        for w in (30, 60, 90):
            v = volatility(small_ds, w)
            assert np.all(np.isnan(v[:w]))
            assert np.isfinite(v[w])


class TestTokenUtility:
    def test_muted_arithmetic(self):
        tu = token_utility(np.array([0.01]), np.array([0.5]), np.array([0.05]))
        assert tu[0] == pytest.approx(0.1, rel=1e-12)

    def test_zero_staking(self):
        tu = token_utility(np.array([0.01]), np.array([0.0]), np.array([0.05]))
        assert tu[0] == 0.0

    def test_unmuted_arithmetic(self):
        tu = token_utility(
            np.array([0.01]), np.array([0.5]), np.array([0.05]),
            volatility=np.array([0.5]), mute_volatility=False,
        )
        assert tu[0] == pytest.approx(0.2, rel=1e-12)

    def test_zero_dilution_is_undefined(self):
        tu = token_utility(np.array([0.01]), np.array([0.5]), np.array([0.0]))
        assert np.isnan(tu[0])

    @given(
        v=st.floats(1e-6, 10.0), s=st.floats(1e-6, 1.0), d=st.floats(1e-6, 10.0),
        bump=st.floats(1e-6, 5.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_monotonicity(self, v, s, d, bump):
        base = token_utility(np.array([v]), np.array([s]), np.array([d]))[0]
        assert base > 0
        up_v = token_utility(np.array([v + bump]), np.array([s]), np.array([d]))[0]
        up_s = token_utility(np.array([v]), np.array([min(s + bump, 1.0)]), np.array([d]))[0]
        up_d = token_utility(np.array([v]), np.array([s]), np.array([d + bump]))[0]
        assert up_v > base
        assert up_s >= base  # equality only when s already capped at 1
        if s + bump <= 1.0:
            assert up_s > base
        assert up_d < base


class TestPuRatio:
    def test_arithmetic(self):
        ds = make_dataset(n=1, price=np.array([10.0]))
        assert pu_ratio(ds, np.array([0.1]))[0] == pytest.approx(100.0, rel=1e-12)

    def test_undefined_propagates(self):
        ds = make_dataset(n=2, price=np.array([10.0, 10.0]))
        pu = pu_ratio(ds, np.array([np.nan, 0.1]))
        assert np.isnan(pu[0]) and np.isfinite(pu[1])

    def test_homogeneity_in_price(self):
        ds1 = make_dataset(n=1, price=np.array([10.0]))
        ds2 = make_dataset(n=1, price=np.array([20.0]))
        tu = np.array([0.37])
        assert pu_ratio(ds2, tu)[0] == pytest.approx(2 * pu_ratio(ds1, tu)[0], rel=1e-12)


class TestMarketRatios:
    def test_pe(self):
        ds = make_dataset(n=1, market_cap_usd=np.array([1e9]),
                          fees_usd=np.array([4e5]), block_rewards_usd=np.array([6e5]))
        assert pe_ratio(ds)[0] == pytest.approx(1000.0, rel=1e-12)

    def test_nvt(self):
        ds = make_dataset(n=1, market_cap_usd=np.array([1e9]), volume_usd=np.array([5e7]))
        assert nvt_ratio(ds)[0] == pytest.approx(20.0, rel=1e-12)

    def test_pm(self):
        ds = make_dataset(n=1, market_cap_usd=np.array([1e9]), active_addresses=np.array([1e5]))
        assert pm_ratio(ds)[0] == pytest.approx(0.1, rel=1e-12)

    def test_zero_denominators_are_undefined(self):
        ds = make_dataset(
            n=1, volume_usd=np.array([0.0]), fees_usd=np.array([0.0]),
            block_rewards_usd=np.array([0.0]), active_addresses=np.array([0.0]),
        )
        assert np.isnan(pe_ratio(ds)[0])
        assert np.isnan(nvt_ratio(ds)[0])
        assert np.isnan(pm_ratio(ds)[0])


class TestAdoptionRatios:
    def test_amr(self):
        ds = make_dataset(n=1, market_cap_usd=np.array([1e9]), active_addresses=np.array([1e5]))
        amr, _, _ = adoption_ratios(ds)
        assert amr[0] == pytest.approx(1e-4, rel=1e-12)

    def test_zero_tx(self):
        ds = make_dataset(n=1, tx_count=np.array([0.0]))
        _, tmr, _ = adoption_ratios(ds)
        assert tmr[0] == 0.0

    def test_halves_when_cap_doubles(self):
        ds1 = make_dataset(n=1, market_cap_usd=np.array([1e9]))
        ds2 = make_dataset(n=1, market_cap_usd=np.array([2e9]))
        for a, b in zip(adoption_ratios(ds1), adoption_ratios(ds2)):
            assert b[0] == pytest.approx(a[0] / 2, rel=1e-12)


class TestPast100:
    def test_flat(self):
        ds = make_dataset(n=701, price=np.full(701, 5.0))
        assert past100(ds)[700] == 0.0

    def test_doubled_and_halved(self):
        price = np.full(701, 1.0)
        price[-1] = 2.0
        assert past100(make_dataset(n=701, price=price))[700] == pytest.approx(-1.0)
        price[-1] = 0.5
        assert past100(make_dataset(n=701, price=price))[700] == pytest.approx(0.5)

    def test_undefined_region(self):
        ds = make_dataset(n=710)
        p = past100(ds)
        assert np.all(np.isnan(p[:700])) and np.all(np.isfinite(p[700:]))


class TestReturns:
    def test_constant_price(self):
        ds = make_dataset(n=10, price=np.full(10, 3.0))
        rp = returns(ds, horizons=(1, 5))
        assert np.all(rp.series(1)[:9] == 0.0)

    def test_linear_price(self):
        ds = make_dataset(n=3, price=np.array([1.0, 2.0, 3.0]))
        rp = returns(ds, horizons=(1,))
        np.testing.assert_allclose(rp.series(1)[:2], [1.0, 0.5])
        assert np.isnan(rp.series(1)[2])

    def test_horizon_exceeds_data(self):
        ds = make_dataset(n=10)
        with pytest.raises(HorizonExceedsData):
            returns(ds, horizons=(10,))

    def test_trailing_undefined_region(self, small_ds):
        rp = returns(small_ds, horizons=(7, 30))
        n = len(small_ds)
        for h in (7, 30):
            s = rp.series(h)
            assert np.all(np.isfinite(s[: n - h]))
            assert np.all(np.isnan(s[n - h :]))

    def test_bounded_below(self, small_ds):
        rp = returns(small_ds, horizons=(1, 7))
        for h in (1, 7):
            s = rp.series(h)
            assert np.all(s[np.isfinite(s)] >= -1.0)


class TestPanelInvariants:
    def test_inverse_pair_identity(self, small_ds):
        panel = build_proxy_panel(small_ds)
        for ratio, inv in (("pu_ratio", "upr"), ("pe_ratio", "epr"),
                           ("nvt_ratio", "tvn"), ("pm_ratio", "mpr")):
            prod = panel[ratio] * panel[inv]
            ok = np.isfinite(prod)
            assert ok.any()
            assert np.all(np.abs(prod[ok] - 1.0) < 1e-12)

    def test_usd_redenomination_covariance(self):
        # Rescaling the USD unit: all USD-denominated columns scale by c.
        ds = make_dataset(n=130)
        c = 3.5
        scaled = make_dataset(
            n=130,
            price=ds.price_usd * c,
            market_cap_usd=ds.market_cap_usd * c,
            fees_usd=ds.fees_usd * c,
            block_rewards_usd=ds.block_rewards_usd * c,
            volume_usd=ds.volume_usd * c,
            supply=ds.supply.copy(),
            issuance=ds.issuance.copy(),
            supply_active_1y=ds.supply_active_1y.copy(),
        )
        a = build_proxy_panel(ds)
        b = build_proxy_panel(scaled)

        def ratio_of(name):
            x, y = a[name], b[name]
            ok = np.isfinite(x) & np.isfinite(y)
            return y[ok] / x[ok]

        np.testing.assert_allclose(ratio_of("pu_ratio"), c, rtol=1e-10)
        np.testing.assert_allclose(ratio_of("pm_ratio"), c, rtol=1e-10)
        np.testing.assert_allclose(ratio_of("pe_ratio"), 1.0, rtol=1e-10)
        np.testing.assert_allclose(ratio_of("nvt_ratio"), 1.0, rtol=1e-10)
        for name in ("amr", "tmr", "pmr"):
            np.testing.assert_allclose(ratio_of(name), 1.0 / c, rtol=1e-10)

    def test_undefined_region_lengths(self):
        ds = make_dataset(n=720)
        panel = build_proxy_panel(ds)
        assert int(np.flatnonzero(np.isfinite(panel["dilution_rate"]))[0]) == 89
        for w in (30, 60, 90, 180):
            assert int(np.flatnonzero(np.isfinite(panel[f"volatility_{w}"]))[0]) == w
        assert int(np.flatnonzero(np.isfinite(panel["past100"]))[0]) == 700

    def test_token_utility_positive_where_inputs_positive(self, small_ds):
        panel = build_proxy_panel(small_ds)
        tu = panel["token_utility"]
        defined = np.isfinite(tu)
        assert np.all(tu[defined] > 0)
