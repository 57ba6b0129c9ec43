"""
二维速率区域与 Fourier-Motzkin 消元的测试。
"""
from fractions import Fraction

import numpy as np
import pytest

from twwclab.errors import ValidationError
from twwclab.polytope import (
    LinearSystem,
    RateRegion2D,
    fourier_motzkin,
    minkowski_combination,
    reduce_system,
)
from twwclab.regions import load_fm_fixture, rate_constraint_system


def _system(rows, variables=("x", "y")):
    return LinearSystem.from_dict({
        "variables": list(variables),
        "inequalities": [{"coeffs": c, "sense": s, "constant": k} for c, s, k in rows],
    })


def _lifted_feasible(system: LinearSystem, x: Fraction, y: Fraction) -> bool:
    """固定 (x, y) 后是否存在 z 使原系统成立。"""
    lower, upper = None, None
    for ineq in system.inequalities:
        row = ineq.upper_form()
        cz = row.coeffs[2]
        rest = row.constant - row.coeffs[0] * x - row.coeffs[1] * y
        if cz == 0:
            if (rest <= 0) if row.strict else (rest < 0):
                return False
            continue
        bound = (rest / cz, row.strict)
        if cz > 0:
            if upper is None or bound[0] < upper[0] or (bound[0] == upper[0] and bound[1]):
                upper = bound
        elif lower is None or bound[0] > lower[0] or (bound[0] == lower[0] and bound[1]):
            lower = bound
    if lower is None or upper is None:
        return True
    if lower[0] < upper[0]:
        return True
    return lower[0] == upper[0] and not lower[1] and not upper[1]


class TestRateRegion:

    def test_vertices_from_halfspaces(self):
        region = RateRegion2D.from_halfspaces([(1, 0, 1), (0, 1, 1), (1, 1, 1.5)])
        np.testing.assert_allclose(region.vertices, [[0, 0], [1, 0], [1, 0.5], [0.5, 1], [0, 1]], atol=1e-12)

    def test_contains(self):
        region = RateRegion2D.from_halfspaces([(1, 0, 1), (0, 1, 1), (1, 1, 1.5)])
        assert region.contains((0.5, 0.5))
        assert region.contains((1.0, 0.5))
        assert not region.contains((1.0, 1.0))
        assert not region.contains((-0.1, 0.0))

    def test_from_points_adds_origin(self):
        region = RateRegion2D.from_points([(1, 0), (0, 1)])
        np.testing.assert_allclose(region.vertices, [[0, 0], [1, 0], [0, 1]], atol=1e-12)
        assert region.contains((0.5, 0.5))
        assert not region.contains((0.6, 0.6))
        assert any(np.allclose(h, (1, 1, 1)) for h in region.halfspaces)

    def test_infeasible_halfspaces(self):
        region = RateRegion2D.from_halfspaces([(1, 0, -1), (0, 1, 1)])
        assert region.is_empty
        assert not region.contains((0, 0))

    def test_empty_region(self):
        region = RateRegion2D.empty({"flavor": "joint"})
        assert region.meta["flag"] == "empty"
        assert region.to_dict()["vertices"] == []
        assert region.issubset(RateRegion2D.from_points([(1, 1)]))

    def test_subset_and_equality(self):
        small = RateRegion2D.from_halfspaces([(1, 0, 0.5), (0, 1, 0.5)])
        big = RateRegion2D.from_halfspaces([(1, 0, 1), (0, 1, 1)])
        assert small.issubset(big)
        assert not big.issubset(small)
        assert big.same_as(RateRegion2D.from_points([(1, 1)]))

    def test_minkowski_halves(self):
        region = RateRegion2D.from_halfspaces([(1, 0, 1), (0, 1, 1), (1, 1, 1.5)])
        combined = minkowski_combination([region, region], [0.5, 0.5])
        assert combined.same_as(region)

    def test_minkowski_mixes_corners(self):
        a = RateRegion2D.from_halfspaces([(1, 0, 2), (0, 1, 0)])
        b = RateRegion2D.from_halfspaces([(1, 0, 0), (0, 1, 2)])
        combined = minkowski_combination([a, b], [0.5, 0.5])
        assert combined.same_as(RateRegion2D.from_points([(1, 1)]))

    def test_minkowski_with_empty(self):
        region = RateRegion2D.from_points([(1, 1)])
        assert minkowski_combination([region, RateRegion2D.empty()], [0.5, 0.5]).is_empty


class TestLinearSystem:

    def test_exact_unless_float(self):
        assert _system([({"x": "1/2"}, "<=", "1")]).is_exact
        assert not _system([({"x": 0.5}, "<=", 1)]).is_exact

    def test_unknown_variable(self):
        with pytest.raises(ValidationError):
            _system([({"w": 1}, "<=", 1)])

    def test_bad_sense(self):
        with pytest.raises(ValidationError):
            _system([({"x": 1}, "=<", 1)])

    def test_render(self):
        system = _system([({"x": "2", "y": "-1"}, "<=", "3"), ({"y": "1"}, ">", "-1/2")])
        assert system.render() == ["2*x - y <= 3", "y > -1/2"]
        assert system.to_dict()["rendered"] == system.render()

    def test_substitute(self):
        system = _system([({"x": 1, "y": 1}, "<=", 1)])
        exact = system.substitute({"y": Fraction(1)})
        assert exact.variables == ("x",)
        assert exact.canonical_set() == {((Fraction(1),), False, Fraction(0))}
        floating = system.substitute({"y": 0.25})
        assert not floating.is_exact
        assert floating.satisfied_by({"x": 0.75})
        assert not floating.satisfied_by({"x": 0.8})
        with pytest.raises(ValidationError):
            system.substitute({"w": 1})


class TestFourierMotzkin:

    def test_triangle_projection(self):
        system = _system([({"x": 1, "y": 1}, "<=", 1), ({"x": -1}, "<=", 0), ({"y": -1}, "<=", 0)])
        projected = fourier_motzkin(system, ["y"])
        assert projected.variables == ("x",)
        assert projected.canonical_set() == {((Fraction(1),), False, Fraction(1)), ((Fraction(-1),), False, Fraction(0))}

    def test_strictness_propagates(self):
        system = _system([({"x": 1, "y": 1}, "<", 1), ({"y": -1}, "<=", 0)])
        projected = fourier_motzkin(system, ["y"])
        assert projected.canonical_set() == {((Fraction(1),), True, Fraction(1))}

    def test_contradiction_detected(self):
        system = _system([({"x": 1}, "<=", 0), ({"x": 1}, ">", 1)], variables=("x",))
        projected = fourier_motzkin(system, ["x"])
        assert projected.is_infeasible()
        assert not system.extended([]).is_infeasible()

    def test_unknown_and_empty_elimination(self):
        system = _system([({"x": 1}, "<=", 1)])
        with pytest.raises(ValidationError):
            fourier_motzkin(system, ["z"])
        assert fourier_motzkin(system, []) is system

    def test_absent_variable_keeps_rows(self):
        rows = [({"x": 1}, "<=", 1), ({"x": 1}, "<=", 2), ({"x": 1, "y": 1}, "<", 3), ({"y": -1}, ">=", -1)]
        system = _system(rows, variables=("x", "y", "z"))
        projected = fourier_motzkin(system, ["z"])
        assert projected.variables == ("x", "y")
        assert len(projected.inequalities) == len(system.inequalities)
        for before, after in zip(system.inequalities, projected.inequalities):
            assert after.coeffs == before.coeffs[:2]
            assert after.sense == before.sense
            assert after.constant == before.constant

    def test_absent_variable_mixed_with_present(self):
        system = _system([({"x": 1, "y": 1}, "<=", 1), ({"x": -1}, "<=", 0), ({"y": -1}, "<=", 0)],
                         variables=("x", "y", "z"))
        projected = fourier_motzkin(system, ["z", "y"])
        assert projected.variables == ("x",)
        assert projected.canonical_set() == {((Fraction(1),), False, Fraction(1)), ((Fraction(-1),), False, Fraction(0))}

    def test_projection_exact_on_random_systems(self):
        rng = np.random.default_rng(7)
        checked = 0
        for _ in range(10):
            rows = []
            while len(rows) < 6:
                coeffs = rng.integers(-3, 4, size=3)
                if not coeffs.any():
                    continue
                rows.append(({v: int(c) for v, c in zip("xyz", coeffs)},
                             str(rng.choice(["<=", "<", ">="])), int(rng.integers(-5, 6))))
            system = _system(rows, variables=("x", "y", "z"))
            projected = fourier_motzkin(system, ["z"])
            assert projected.is_exact
            for _ in range(100):
                x, y = (Fraction(int(rng.integers(-12, 13)), int(rng.integers(1, 4))) for _ in range(2))
                assert projected.satisfied_by({"x": x, "y": y}) == _lifted_feasible(system, x, y)
                checked += 1
        assert checked == 1000

    def test_reduce_drops_redundant_rows(self):
        system = _system([({"x": 1}, "<=", 1), ({"x": 1}, "<=", 2), ({"x": 2}, "<=", 2),
                          ({"y": 1}, "<=", 1), ({"x": 1, "y": 1}, "<=", 3)])
        reduced = reduce_system(system)
        assert reduced.canonical_set() == {
            ((Fraction(1), Fraction(0)), False, Fraction(1)),
            ((Fraction(0), Fraction(1)), False, Fraction(1)),
        }

    def test_floating_system(self):
        system = _system([({"x": 0.5, "y": 1.0}, "<=", 1.0), ({"y": -1.0}, "<=", 0.0)])
        projected = fourier_motzkin(system, ["y"])
        assert not projected.is_exact
        assert projected.satisfied_by({"x": 2.0})
        assert not projected.satisfied_by({"x": 2.1})

    @pytest.mark.parametrize("name", ["joint", "individual"])
    def test_fixture_projection(self, name):
        system, order, expected = load_fm_fixture(name)
        assert order == ["r1", "r2"]
        projected = fourier_motzkin(system, order)
        assert projected.variables == expected.variables
        assert projected.canonical_set() == expected.canonical_set()
        reversed_order = fourier_motzkin(system, list(reversed(order)))
        assert reversed_order.canonical_set() == expected.canonical_set()

    @pytest.mark.parametrize("name", ["joint", "individual"])
    def test_builder_matches_fixture(self, name):
        system, _, _ = load_fm_fixture(name)
        assert rate_constraint_system(name).canonical_set() == system.canonical_set()
