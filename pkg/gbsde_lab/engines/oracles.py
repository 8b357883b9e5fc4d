# -*- coding: utf-8 -*-
#
# Copyright Contributors to the gbsde-lab project.
# SPDX-License-Identifier: MIT
#

"""
Independent reference computations on small trees: optimal stopping and game
recursions, pathwise payoffs of stopping-rule pairs and the CRR American put.
"""

import logging

from typing import List, Sequence, Tuple

import numpy as np

from gbsde_lab.lattice import AdaptedField, BranchMeasure, StoppingRule, expect_step, path_levels

logger = logging.getLogger(__name__)


def snell_envelope(payoff: AdaptedField, measure: BranchMeasure = BranchMeasure()) -> AdaptedField:
    """Smallest supermartingale above payoff: V_N = payoff_N, V_k = max(payoff_k, E[V_{k+1}])."""
    grid = payoff.grid
    values = [None] * (grid.steps + 1)
    values[grid.steps] = payoff.step(grid.steps)
    for k in range(grid.steps - 1, -1, -1):
        values[k] = np.maximum(payoff.step(k), expect_step(values[k + 1], grid, k, measure))
    return AdaptedField(grid, values, name="snell envelope")


def game_recursion(
    lower: AdaptedField, upper: AdaptedField, terminal: np.ndarray, measure: BranchMeasure = BranchMeasure()
) -> AdaptedField:
    """V_N = terminal, V_k = min(U_k, max(L_k, E[V_{k+1}]))."""
    grid = lower.grid
    values = [None] * (grid.steps + 1)
    values[grid.steps] = np.asarray(terminal, dtype=float)
    for k in range(grid.steps - 1, -1, -1):
        values[k] = np.minimum(np.maximum(expect_step(values[k + 1], grid, k, measure), lower.step(k)), upper.step(k))
    return AdaptedField(grid, values, name="game value")


def path_values(field: AdaptedField, paths: np.ndarray) -> np.ndarray:
    return field.along(path_levels(paths))


def stop_matrix(rules: Sequence[StoppingRule], paths: np.ndarray) -> np.ndarray:
    """Stopping step of every rule on every path, shape (len(rules), len(paths))."""
    return np.array([rule.stop_steps(paths) for rule in rules], dtype=int).reshape(len(rules), len(paths))


def payoff_tensor(
    lower: np.ndarray,
    upper: np.ndarray,
    tie: np.ndarray,
    terminal: np.ndarray,
    stops_min: np.ndarray,
    stops_max: np.ndarray,
) -> np.ndarray:
    """
    J(lambda, sigma) for every minimizer rule, maximizer rule and path.

    lower, upper and tie are (P, N + 1) path values, terminal is (P,), the stop arrays
    are (R1, P) and (R2, P). The minimizer pays U when stopping first, the maximizer
    receives L when stopping first, ties before N pay Q and the horizon pays terminal.
    Result has shape (R1, R2, P).
    """
    horizon = lower.shape[1] - 1
    index = np.arange(lower.shape[0])[None, :]
    upper_at_min = upper[index, stops_min][:, None, :]
    lower_at_max = lower[index, stops_max][None, :, :]
    tie_at_max = tie[index, stops_max][None, :, :]
    first_min = stops_min[:, None, :]
    first_max = stops_max[None, :, :]
    return np.where(
        first_min < first_max,
        upper_at_min,
        np.where(
            first_max < first_min,
            lower_at_max,
            np.where(first_max < horizon, tie_at_max, np.asarray(terminal, dtype=float)[None, None, :]),
        ),
    )


def expected_payoffs(tensor: np.ndarray, probabilities: np.ndarray) -> np.ndarray:
    return tensor @ np.asarray(probabilities, dtype=float)


def sup_inf(expected: np.ndarray) -> Tuple[float, float]:
    """(sup over maximizer of inf over minimizer, inf over minimizer of sup over maximizer); rows minimize."""
    return float(np.max(np.min(expected, axis=0))), float(np.min(np.max(expected, axis=1)))


def stock_tree(spot: float, up: float, down: float, steps: int) -> List[np.ndarray]:
    return [spot * up ** np.arange(k + 1) * down ** (k - np.arange(k + 1)) for k in range(steps + 1)]


def american_put_binomial(
    spot: float, strike: float, rate: float, horizon: float, steps: int, up: float, down: float
) -> Tuple[float, float]:
    """
    Cox-Ross-Rubinstein American put by backward induction with early exercise.

    :return: (price, delta) where delta = (V_up - V_down) / (S_up - S_down) at the root
    """
    dt = horizon / steps
    p = (np.exp(rate * dt) - down) / (up - down)
    discount = np.exp(-rate * dt)
    stock = stock_tree(spot, up, down, steps)
    values = np.maximum(strike - stock[steps], 0.0)
    delta = 0.0
    for k in range(steps - 1, -1, -1):
        if k == 0:
            delta = float((values[1] - values[0]) / (stock[1][1] - stock[1][0]))
        values = np.maximum(discount * (p * values[1:] + (1.0 - p) * values[:-1]), strike - stock[k])
    logger.debug(f"CRR American put: {steps} steps, price {values[0]:.12g}")
    return float(values[0]), delta
