"""
单字母信息量的数值验证：闭式、极限、单调性、可加性与网格搜索对照。
"""
import math

import numpy as np
import pytest

from twwclab import measures
from twwclab.errors import ConvergenceError, DomainError, ValidationError
from twwclab.measures import (
    ORDER_MINUS,
    ORDER_PLUS,
    as_pmf,
    augustin_mean,
    breve_mi,
    breve_mi_conditional,
    conditional_mutual_information,
    kl_divergence,
    mi_down,
    mi_up_conditional,
    mi_up_unconditional,
    mutual_information,
    renyi_entropy,
    renyi_relative_entropy,
    shannon_entropy,
    sibson_mi,
)

LN2 = math.log(2.0)


def _joint(chan: np.ndarray, p: np.ndarray) -> np.ndarray:
    """[x, z] 信道与输入律 -> [z, x] 联合分布。"""
    return (p[:, None] * chan).T


def _grid_breve(chan: np.ndarray, p: np.ndarray, order: float, step: float = 1e-4) -> float:
    """二元输出上对 Q 做穷举网格搜索。"""
    q = np.arange(step, 1.0, step)
    Q = np.stack([q, 1.0 - q], axis=1)                                 # [grid, z]
    sums = (chan[None, :, :] ** order * Q[:, None, :] ** (1.0 - order)).sum(axis=2)
    values = (np.log(sums) / (order - 1.0)) @ p
    return float(values.min())


class TestValidation:

    def test_rejects_bad_mass(self):
        with pytest.raises(ValidationError):
            as_pmf([0.5, 0.6])

    def test_rejects_negative(self):
        with pytest.raises(ValidationError):
            as_pmf([1.2, -0.2])

    def test_snaps_tiny_entries(self):
        p = as_pmf([1.0 - 1e-16, 1e-16])
        assert p[1] == 0.0

    def test_order_one_is_domain_error(self):
        with pytest.raises(DomainError):
            renyi_entropy([0.5, 0.5], 1.0)
        with pytest.raises(DomainError):
            sibson_mi(np.eye(2), [0.5, 0.5], 1.0)

    def test_s_out_of_range(self):
        joint = np.full((2, 2), 0.25)
        with pytest.raises(DomainError):
            mi_down(joint, 1.5)
        with pytest.raises(DomainError):
            mi_down(joint, -0.1)


class TestEntropies:

    def test_shannon_examples(self):
        assert shannon_entropy([0.5, 0.5]) == pytest.approx(LN2, abs=1e-12)
        assert shannon_entropy([1.0, 0.0, 0.0]) == 0.0
        expected = -(0.75 * math.log(0.75) + 0.25 * math.log(0.25))
        assert shannon_entropy([0.75, 0.25]) == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize("order", [0.3, 0.5, 2.0, 5.0])
    def test_renyi_uniform(self, order):
        assert renyi_entropy(np.full(5, 0.2), order) == pytest.approx(math.log(5), abs=1e-12)

    def test_renyi_half_order(self):
        expected = 2.0 * math.log(math.sqrt(0.75) + math.sqrt(0.25))
        assert renyi_entropy([0.75, 0.25], 0.5) == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize("order", [1.0 - 1e-4, 1.0 + 1e-4])
    def test_renyi_approaches_shannon(self, order):
        p = [0.6, 0.3, 0.1]
        assert renyi_entropy(p, order) == pytest.approx(shannon_entropy(p), abs=1e-3)


class TestRelativeEntropy:

    def test_identical_laws(self):
        p = [0.2, 0.3, 0.5]
        assert renyi_relative_entropy(p, p, 0.7) == pytest.approx(0.0, abs=1e-12)

    def test_direct_evaluation(self):
        assert renyi_relative_entropy([1.0, 0.0], [0.5, 0.5], 1.0) == pytest.approx(LN2, abs=1e-12)

    def test_support_violation_flagged(self):
        value, ok = renyi_relative_entropy([0.5, 0.5], [1.0, 0.0], 0.5, with_flag=True)
        assert math.isinf(value)
        assert not ok
        assert math.isinf(kl_divergence([0.5, 0.5], [1.0, 0.0]))

    def test_small_s_matches_kl(self, rng, make_pmf):
        for _ in range(20):
            p, q = make_pmf(rng, 4), make_pmf(rng, 4)
            assert renyi_relative_entropy(p, q, 1e-4) == pytest.approx(kl_divergence(p, q), abs=1e-3)

    def test_nondecreasing_in_s(self, rng, make_pmf):
        grid = np.round(np.arange(0.1, 1.01, 0.1), 10)
        for _ in range(100):
            p, q = make_pmf(rng, 4), make_pmf(rng, 4)
            values = np.array([renyi_relative_entropy(p, q, s) for s in grid])
            assert np.all(np.diff(values) >= -1e-12)


class TestMutualInformation:

    def test_independent_is_zero(self):
        joint = np.outer([0.3, 0.7], [0.4, 0.6])
        assert mutual_information(joint) == pytest.approx(0.0, abs=1e-12)
        assert mi_down(joint, 0.5) == pytest.approx(0.0, abs=1e-12)

    def test_copy_channel(self):
        joint = np.diag([0.5, 0.5])
        assert mutual_information(joint) == pytest.approx(LN2, abs=1e-12)
        assert mi_down(joint, 1.0) == pytest.approx(LN2, abs=1e-12)

    def test_mi_down_limit(self, rng, make_pmf):
        for _ in range(10):
            joint = make_pmf(rng, 12).reshape(3, 4)
            assert mi_down(joint, 1e-4) == pytest.approx(mutual_information(joint), abs=1e-3)

    def test_conditional_limit(self, rng, make_pmf):
        chan = make_pmf(rng, 3, 2, 3)
        inputs = make_pmf(rng, 6).reshape(3, 2)
        cmi = conditional_mutual_information(np.moveaxis(inputs[:, :, None] * chan, 2, 0))
        assert mi_up_conditional(chan, inputs, 1e-4) == pytest.approx(cmi, abs=1e-3)
        assert mi_up_conditional(chan, inputs, 0.0) == pytest.approx(cmi, abs=1e-12)


class TestSibsonUp:

    def test_uninformative_channel(self, rng, make_pmf):
        row = make_pmf(rng, 3)
        chan = np.tile(row, (2, 2, 1))
        inputs = make_pmf(rng, 4).reshape(2, 2)
        assert mi_up_conditional(chan, inputs, 0.5) == pytest.approx(0.0, abs=1e-12)
        assert mi_up_unconditional(np.tile(row, (4, 1)), np.full(4, 0.25), 0.3) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("p", [0.0, 0.1, 0.3])
    @pytest.mark.parametrize("s", [0.2, 0.5, 1.0])
    def test_binary_additive(self, p, s):
        noise = np.array([1.0 - p, p])
        chan = np.array([[noise, noise[::-1]]]).transpose(1, 0, 2)     # [x, y=1, z]
        inputs = np.array([[0.5], [0.5]])
        alpha = 1.0 / (1.0 + s)
        h = 0.0 if p == 0.0 else renyi_entropy(noise, alpha)
        assert mi_up_conditional(chan, inputs, s) == pytest.approx(LN2 - h, abs=1e-12)

    @pytest.mark.parametrize("s", [0.1, 0.5, 0.9])
    def test_identity_channel(self, s):
        for sign in (ORDER_PLUS, ORDER_MINUS):
            assert mi_up_unconditional(np.eye(3), np.full(3, 1 / 3), s, sign) == pytest.approx(math.log(3), abs=1e-12)

    def test_minus_order_at_one(self):
        with pytest.raises(DomainError):
            mi_up_unconditional(np.eye(2), [0.5, 0.5], 1.0, ORDER_MINUS)

    def test_additivity_on_products(self, rng, make_pmf):
        for s in (0.25, 0.6, 1.0):
            chan = make_pmf(rng, 2, 3, 2)
            inputs = make_pmf(rng, 6).reshape(2, 3)
            chan2 = np.einsum("abc,def->adbecf", chan, chan).reshape(4, 9, 4)
            inputs2 = np.einsum("ab,cd->acbd", inputs, inputs).reshape(4, 9)
            single = mi_up_conditional(chan, inputs, s)
            assert mi_up_conditional(chan2, inputs2, s) == pytest.approx(2.0 * single, abs=1e-9)

    def test_down_below_minus_order(self, rng, make_pmf):
        for _ in range(100):
            chan = make_pmf(rng, 3, 4)
            p = make_pmf(rng, 3)
            joint = _joint(chan, p)
            for s in np.round(np.arange(0.1, 0.91, 0.1), 10):
                assert mi_down(joint, s) <= mi_up_unconditional(chan, p, s, ORDER_MINUS) + 1e-12

    def test_domination(self, rng, make_pmf):
        for _ in range(20):
            P = make_pmf(rng, 3, 3)
            Q = make_pmf(rng, 3, 3)
            p = make_pmf(rng, 3)
            c = float(np.max(P / Q))
            for s in (0.2, 0.5, 0.8):
                lhs = math.exp(s * mi_up_unconditional(P, p, s, ORDER_MINUS))
                rhs = c * math.exp(s * mi_up_unconditional(Q, p, s, ORDER_MINUS))
                assert lhs <= rhs + 1e-12

    def test_relabeling_invariance(self, rng, make_pmf):
        chan = make_pmf(rng, 3, 2, 4)
        inputs = make_pmf(rng, 6).reshape(3, 2)
        px, pz = rng.permutation(3), rng.permutation(4)
        base = mi_up_conditional(chan, inputs, 0.4)
        moved = mi_up_conditional(chan[px][:, :, pz], inputs[px], 0.4)
        assert moved == pytest.approx(base, abs=1e-12)


class TestBreve:

    def test_uninformative_is_zero(self):
        chan = np.tile([0.2, 0.5, 0.3], (3, 1))
        assert breve_mi(chan, [0.2, 0.3, 0.5], 0.5) == pytest.approx(0.0, abs=1e-12)
        assert breve_mi(chan, [0.2, 0.3, 0.5], 2.0) == pytest.approx(0.0, abs=1e-12)

    def test_positive_for_distinct_rows(self, rng, make_pmf):
        chan = make_pmf(rng, 3, 3)
        assert breve_mi(chan, make_pmf(rng, 3), 0.7) > 0.0

    @pytest.mark.parametrize("order", [1.0 - 1e-4, 1.0 + 1e-4])
    def test_limit_is_shannon(self, rng, make_pmf, order):
        chan = make_pmf(rng, 3, 4)
        p = make_pmf(rng, 3)
        assert breve_mi(chan, p, order) == pytest.approx(mutual_information(_joint(chan, p)), abs=1e-3)

    @pytest.mark.parametrize("order", [0.5, 2.0])
    def test_matches_grid_search(self, order):
        chan = np.array([[0.8, 0.2], [0.3, 0.7]])
        p = np.array([0.4, 0.6])
        result = augustin_mean(chan, p, order)
        assert result.residual <= 1e-8
        assert result.value == pytest.approx(_grid_breve(chan, p, order), abs=1e-6)

    @pytest.mark.parametrize("order", [0.3, 3.0, 8.0])
    def test_never_worse_than_output_marginal(self, rng, make_pmf, monkeypatch, order):
        # 不允许步长减半时，被拒绝的步不得被接受
        monkeypatch.setattr(measures, "MAX_HALVINGS", 0)
        chan = make_pmf(rng, 4, 5)
        p = make_pmf(rng, 4)
        q0 = p @ chan
        start = float(p @ np.log((chan ** order * q0 ** (1.0 - order)).sum(axis=1)) / (order - 1.0))
        try:
            value = augustin_mean(chan, p, order).value
        except ConvergenceError as e:
            value = e.best_value
        assert value <= max(start, 0.0) + 1e-12

    def test_singleton_conditioning(self, rng, make_pmf):
        chan = make_pmf(rng, 3, 1, 4)
        p = make_pmf(rng, 3)
        expected = breve_mi(chan[:, 0, :], p, 0.6)
        for method in ("joint", "per_y"):
            assert breve_mi_conditional(chan, p[:, None], 0.6, method) == pytest.approx(expected, abs=1e-9)

    def test_per_y_matches_grid(self):
        chan = np.array([
            [[0.9, 0.1], [0.6, 0.4]],
            [[0.2, 0.8], [0.5, 0.5]],
        ])
        px, py = np.array([0.3, 0.7]), np.array([0.45, 0.55])
        order = 0.5
        c = (order - 1.0) / order
        minima = np.array([_grid_breve(chan[:, y, :], px, order) for y in range(2)])
        expected = math.log(float(np.dot(py, np.exp(c * minima)))) / c
        value = breve_mi_conditional(chan, np.outer(px, py), order, "per_y")
        assert value == pytest.approx(expected, abs=1e-6)

    def test_conditional_ignoring_x(self, rng, make_pmf):
        row = make_pmf(rng, 2, 3)
        chan = np.stack([row, row])
        inputs = np.outer([0.5, 0.5], [0.4, 0.6])
        for method in ("joint", "per_y"):
            assert breve_mi_conditional(chan, inputs, 2.0, method) == pytest.approx(0.0, abs=1e-12)

    def test_dependent_inputs_rejected(self):
        chan = np.full((2, 2, 2), 0.5)
        with pytest.raises(ValidationError):
            breve_mi_conditional(chan, np.diag([0.5, 0.5]), 0.5)
