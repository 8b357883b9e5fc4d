# -*- coding: utf-8 -*-
#
# Copyright Contributors to the gbsde-lab project.
# SPDX-License-Identifier: MIT
#

import numpy as np
import pytest

from gbsde_lab.engines.catalog import node_function
from gbsde_lab.engines.oracles import american_put_binomial, game_recursion
from gbsde_lab.exceptions import GBSDEArbitrageError, GBSDEConfigError, GBSDECountExceeded
from gbsde_lab.games import (
    DynkinGameSpec,
    MarketModel,
    Utility,
    dynkin_value,
    enumeration_value,
    evaluate_payoff,
    load_game,
    load_option,
    price_game_option,
    random_game,
    rule_sets,
    saddle_check,
    verify_hedge,
)
from gbsde_lab.lattice import StoppingRule, TimeGrid

from tests.conftest import with_changes
from tests.spellbook import ONESTEP_CONFIG, PUT_PENALTY_CONFIG

PUT = {"kind": "put", "strike": 100.0, "underlying": "S"}


class TestDynkinValue(object):
    @pytest.mark.parametrize(
        "terminal,expected",
        [
            ("2 + B", 2.0),
            ("5 + B", 3.0),
            ("B", 1.0),
        ],
    )
    def test_one_step_values(self, onestep_json, terminal, expected):
        game = load_game(with_changes(onestep_json, terminal=terminal))
        assert dynkin_value(game).root == pytest.approx(expected)

    def test_stopping_regions(self, onestep_json):
        regions = dynkin_value(load_game(with_changes(onestep_json, terminal="5 + B"))).regions()
        assert regions == {"minimizer": {(0, 0)}, "maximizer": set()}
        regions = dynkin_value(load_game(with_changes(onestep_json, terminal="B"))).regions()
        assert regions == {"minimizer": set(), "maximizer": {(0, 0)}}

    def test_value_is_the_game_recursion(self):
        game = random_game(11, steps=6, utility=Utility.from_config({"kind": "exp", "params": {"theta": 0.7}}))
        F_L, F_U, _, F_xi = game.utility_fields()
        expected = game_recursion(F_L, F_U, F_xi, game.measure)
        assert dynkin_value(game).value.allclose(expected, atol=0.0)

    def test_payoff_of_rule_pair(self):
        game = load_game(ONESTEP_CONFIG)
        grid = game.grid
        immediately, never = StoppingRule.immediately(grid), StoppingRule.never(grid)
        assert evaluate_payoff(game, immediately, never, [1]) == pytest.approx(3.0)
        assert evaluate_payoff(game, never, immediately, [1]) == pytest.approx(1.0)
        assert evaluate_payoff(game, never, never, [0]) == pytest.approx(1.0)
        # simultaneous stop before the horizon pays the tie value, here L
        assert evaluate_payoff(game, immediately, immediately, [0]) == pytest.approx(1.0)

    def test_unordered_barriers(self):
        with pytest.raises(GBSDEConfigError):
            DynkinGameSpec.create(TimeGrid(1.0, 2), lower=1.0, upper=0.0, terminal=0.5)

    def test_tie_outside_barriers(self):
        with pytest.raises(GBSDEConfigError):
            DynkinGameSpec.create(TimeGrid(1.0, 2), lower=0.0, upper=1.0, terminal=0.5, tie=2.0)

    def test_missing_barrier(self, onestep_json):
        config = with_changes(onestep_json, barriers={"L": 0.0})
        with pytest.raises(GBSDEConfigError):
            load_game(config)


class TestSaddle(object):
    def test_one_step(self):
        report = saddle_check(load_game(ONESTEP_CONFIG))
        assert report.passed, report.violations
        assert report.value == pytest.approx(2.0)
        assert report.rules == 2

    @pytest.mark.parametrize("seed", range(20))
    def test_random_games(self, seed):
        report = saddle_check(random_game(seed))
        assert report.passed, report.violations
        assert report.sup_inf == pytest.approx(report.value, abs=1e-12)
        assert report.inf_sup == pytest.approx(report.value, abs=1e-12)

    @pytest.mark.parametrize("seed", [1, 4])
    def test_nonlinear_utility(self, seed):
        utility = Utility.from_config({"kind": "power", "params": {"shift": 1.0, "p": 0.5}})
        assert saddle_check(random_game(seed, utility=utility)).passed

    def test_enumeration_value(self):
        game = random_game(3)
        lower, upper = enumeration_value(game)
        assert lower == pytest.approx(dynkin_value(game).root, abs=1e-12)
        assert upper == pytest.approx(lower, abs=1e-12)

    def test_enumeration_too_deep(self):
        with pytest.raises(GBSDECountExceeded):
            saddle_check(random_game(0, steps=4))

    @pytest.mark.parametrize("a", [2.0, 0.5, 4.0])
    def test_rules_under_affine_utility(self, a):
        utility = Utility.from_config({"kind": "affine", "params": {"a": a}})
        for seed in range(3):
            assert rule_sets(random_game(seed, utility=utility)) == rule_sets(random_game(seed))

    @pytest.mark.parametrize(
        "config",
        [
            {"kind": "affine", "params": {"a": -1.0}},
            {"kind": "exp", "params": {"theta": 0.0}},
            {"kind": "power", "params": {"p": -2.0}},
            {"kind": "logarithm"},
        ],
    )
    def test_invalid_utility(self, config):
        with pytest.raises(GBSDEConfigError):
            Utility.from_config(config)


class TestMarketModel(object):
    def test_arbitrage(self):
        with pytest.raises(GBSDEArbitrageError):
            MarketModel(spot=100.0, rate=1.0, up=1.1, down=0.9)

    def test_factors_out_of_order(self):
        with pytest.raises(GBSDEConfigError):
            MarketModel(spot=100.0, up=0.9, down=1.1)

    def test_default_factors(self):
        market = MarketModel(spot=100.0, volatility=0.2, steps=4)
        assert market.up == pytest.approx(np.exp(0.1))
        assert market.up * market.down == pytest.approx(1.0)
        assert market.risk_neutral_probability == pytest.approx((1.0 - market.down) / (market.up - market.down))

    def test_unreachable_drift(self):
        market = MarketModel(spot=100.0, drift=5.0, up=1.2, down=0.8)
        with pytest.raises(GBSDEConfigError):
            market.physical_measure()


class TestGameOption(object):
    def test_put_with_cancellation_penalty(self):
        market, payoffs = load_option(PUT_PENALTY_CONFIG)
        price = price_game_option(market, **payoffs)
        assert market.risk_neutral_probability == pytest.approx(0.5)
        assert price.price == pytest.approx(5.0)
        assert bool(price.cancel[0][0])
        assert verify_hedge(price).passed

    @pytest.mark.parametrize("steps", [1, 8, 64])
    def test_american_put_without_interest(self, steps):
        market = MarketModel(spot=100.0, rate=0.0, volatility=0.2, steps=steps)
        price = price_game_option(
            market, node_function(PUT), node_function(dict(PUT, offset=1e6))
        )
        expected, _ = american_put_binomial(100.0, 100.0, 0.0, 1.0, steps, market.up, market.down)
        assert price.price == pytest.approx(expected, abs=1e-12)
        assert price.cancel.max() == 0.0

    def test_american_put_with_interest(self):
        market = MarketModel(spot=100.0, rate=0.03, volatility=0.2, steps=32)
        price = price_game_option(market, node_function(PUT), node_function(dict(PUT, offset=1e6)))
        expected, _ = american_put_binomial(100.0, 100.0, 0.03, 1.0, 32, market.up, market.down)
        assert price.price == pytest.approx(expected, rel=1e-9)

    @pytest.mark.parametrize("rate", [0.0, 0.05])
    def test_hedge_superreplicates(self, rate):
        market = MarketModel(spot=100.0, rate=rate, volatility=0.3, steps=3)
        price = price_game_option(market, node_function(PUT), node_function(dict(PUT, offset=2.0)))
        report = verify_hedge(price)
        assert report.passed, report.violations
        assert report.paths == 8
        assert report.enumeration_gap is not None

    def test_rows(self):
        market, payoffs = load_option(PUT_PENALTY_CONFIG)
        rows = list(price_game_option(market, **payoffs).rows())
        assert len(rows) == 3
        step, level, stock, value, gamma, beta, cancel = rows[0]
        assert (step, level, stock, cancel) == (0, 0, 100.0, True)
        assert value == pytest.approx(5.0)
        assert rows[-1][4:] == (None, None, None)

    def test_negative_payoff(self):
        market = MarketModel(spot=100.0, up=1.2, down=0.8)
        with pytest.raises(GBSDEConfigError):
            price_game_option(market, -1.0, 1.0)

    def test_missing_payoffs(self, put_penalty_json):
        with pytest.raises(GBSDEConfigError):
            load_option(with_changes(put_penalty_json, payoffs={"L": PUT}))
