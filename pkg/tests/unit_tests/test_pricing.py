import itertools
import random

import numpy as np
import pytest

from gapnet.pricing import FixingSet, solve_pricing


def brute_force(values, weights, capacity, fixings):
    """Best value and lexicographically smallest optimal vertex over all 2^M subsets."""
    m = len(values)
    bits = np.array(list(itertools.product((0, 1), repeat=m)), dtype=int)
    feasible = bits @ np.asarray(weights) <= capacity
    for task, value in fixings.fixed.items():
        feasible &= bits[:, task] == value
    if not feasible.any():
        return None, None
    scores = bits @ np.asarray(values)
    best = scores[feasible].max()
    # product() enumerates in lexicographic order
    first = np.flatnonzero(feasible & (scores == best))[0]
    return float(best), tuple(int(b) for b in bits[first])


class TestFixingSet:
    def test_conflict(self) -> None:
        fixings = FixingSet({2: 0})
        assert fixings.with_fixing(2, 0) == fixings
        with pytest.raises(ValueError):
            fixings.with_fixing(2, 1)

    def test_values_are_binary(self) -> None:
        with pytest.raises(ValueError):
            FixingSet({0: 2})

    def test_admits(self) -> None:
        fixings = FixingSet({0: 1, 2: 0})
        assert fixings.admits((1, 1, 0))
        assert not fixings.admits((0, 1, 0))

    def test_insertion_order_does_not_matter(self) -> None:
        assert FixingSet({3: 1, 1: 0}) == FixingSet({1: 0, 3: 1})
        assert hash(FixingSet({3: 1, 1: 0})) == hash(FixingSet({1: 0, 3: 1}))


class TestSolvePricing:
    def test_small_knapsack(self) -> None:
        priced = solve_pricing([3, -1, 2], [2, 3, 1], 3, [0, 0, 0], 0.0)
        assert priced.vertex == (1, 0, 1)
        assert priced.pricing_value == 5
        assert priced.reduced_cost == 5

    def test_fixed_to_zero(self) -> None:
        priced = solve_pricing([3, -1, 2], [2, 3, 1], 3, [0, 0, 0], 0.0, FixingSet({0: 0}))
        assert priced.vertex == (0, 0, 1)
        assert priced.pricing_value == 2

    def test_fixed_item_does_not_fit(self) -> None:
        assert solve_pricing([4], [5], 3, [0], 0.0, FixingSet({0: 1})) is None

    def test_reduced_cost_subtracts_mu(self) -> None:
        priced = solve_pricing([6, 2], [1, 1], 1, [1, 0], 4.0)
        assert priced.vertex == (1, 0)
        assert priced.reduced_cost == pytest.approx(1.0)

    def test_ties_take_smallest_vertex(self) -> None:
        priced = solve_pricing([2, 2], [1, 1], 1, [0, 0], 0.0)
        assert priced.vertex == (0, 1)

    def test_fractional_capacity_is_floored(self) -> None:
        priced = solve_pricing([5, 5], [2, 2], 3.9, [0, 0], 0.0)
        assert sum(priced.vertex) == 1

    def test_non_integer_weights(self) -> None:
        with pytest.raises(ValueError):
            solve_pricing([1], [1.5], 2, [0], 0.0)

    def test_matches_brute_force(self) -> None:
        rng = random.Random(2024)
        for _ in range(500):
            m = rng.randint(1, 15)
            profits = [rng.randint(-10, 30) for _ in range(m)]
            pi = [rng.randint(-5, 15) for _ in range(m)]
            weights = [rng.randint(1, 25) for _ in range(m)]
            capacity = rng.randint(0, 12 * m)
            fixings = FixingSet({k: rng.randint(0, 1) for k in rng.sample(range(m), rng.randint(0, min(3, m)))})
            values = np.array(profits) - np.array(pi)

            priced = solve_pricing(profits, weights, capacity, pi, 0.0, fixings)
            best, vertex = brute_force(values, weights, capacity, fixings)
            if best is None:
                assert priced is None
                continue
            assert priced is not None
            assert priced.pricing_value == pytest.approx(best, abs=1e-9)
            assert priced.vertex == vertex
            assert np.dot(priced.vertex, weights) <= capacity
            assert fixings.admits(priced.vertex)


def test_adding_a_fixing_never_raises_the_value() -> None:
    rng = random.Random(7)
    for _ in range(300):
        m = rng.randint(1, 10)
        profits = [rng.randint(-10, 30) for _ in range(m)]
        pi = [rng.randint(-5, 15) for _ in range(m)]
        weights = [rng.randint(1, 25) for _ in range(m)]
        capacity = rng.randint(0, 12 * m)
        fixings = FixingSet({k: rng.randint(0, 1) for k in rng.sample(range(m), rng.randint(0, m - 1))})
        free = [k for k in range(m) if k not in fixings.fixed]
        tighter = fixings.with_fixing(rng.choice(free), rng.randint(0, 1))

        before = solve_pricing(profits, weights, capacity, pi, 0.0, fixings)
        after = solve_pricing(profits, weights, capacity, pi, 0.0, tighter)
        if before is None:
            assert after is None
        elif after is not None:
            assert after.pricing_value <= before.pricing_value + 1e-9
