"""
仿真器测试：码本生成与复现、编码译码、Monte Carlo 错误率、精确泄露、
可解析性与 Gallager 型界的手算对照。
"""
import math

import numpy as np
import pytest

from twwclab.channel import AdditiveChannelSpec, JointInputLaw, additive_to_tensor
from twwclab.config import config_manager
from twwclab.errors import SizingError, ValidationError
from twwclab.exponents import RateTuple
from twwclab.regions import region_joint
from twwclab.simulator import (
    Codebook,
    CodebookParams,
    SimResult,
    decoding_table,
    encode,
    error_trend,
    exact_leakage,
    generate_codebook,
    ml_decode,
    run_error_trials,
    sample_channel,
    secrecy_trend,
    sizes_from_rates,
    stream,
    verify_gallager,
    verify_resolvability,
    wilson_interval,
)
from twwclab.typelib import JointType, TypeVector

ONES = {"a1": 1, "b1": 1, "a2": 1, "b2": 1, "a3": 1, "b3": 1}
LN2 = math.log(2.0)
UNIFORM = JointInputLaw.uniform(2, 2)


def _tensor(n1, n2, n3):
    return additive_to_tensor(AdditiveChannelSpec(q=2, coeffs=ONES, noise=[n1, n2, n3]))


@pytest.fixture
def noiseless():
    """三路输出都等于 X1 ⊕ X2。"""
    return _tensor([1.0, 0.0], [1.0, 0.0], [1.0, 0.0])


@pytest.fixture
def pure_noise():
    return _tensor([0.5, 0.5], [0.5, 0.5], [0.5, 0.5])


class TestCodebook:

    def test_params_need_exactly_one_source(self):
        jt = JointType.identity(TypeVector((1, 1)))
        with pytest.raises(ValidationError):
            CodebookParams(n=2, M=(2, 2), L=(1, 1))
        with pytest.raises(ValidationError):
            CodebookParams(n=2, M=(2, 2), L=(1, 1), law=UNIFORM, types=(jt, jt))
        with pytest.raises(ValidationError):
            CodebookParams(n=3, M=(2, 2), L=(1, 1), types=(jt, jt))
        with pytest.raises(ValidationError):
            CodebookParams(n=2, M=(0, 2), L=(1, 1), law=UNIFORM)

    def test_same_seed_same_codebook(self):
        params = CodebookParams(n=20, M=(4, 3), L=(2, 2), law=UNIFORM)
        a = generate_codebook(params, seed=11)
        b = generate_codebook(params, seed=11)
        c = generate_codebook(params, seed=12)
        for user in (0, 1):
            np.testing.assert_array_equal(a.codewords[user], b.codewords[user])
        assert not np.array_equal(a.codewords[0], c.codewords[0])
        assert a.codewords[0].shape == (8, 20)
        assert a.codewords[1].shape == (6, 20)

    def test_row_layout(self):
        params = CodebookParams(n=1, M=(2, 1), L=(2, 1), law=UNIFORM)
        cb = Codebook.from_arrays(params, [[0], [1], [1], [0]], [[1]])
        assert cb.codeword(1, 1, 0)[0] == 1
        assert cb.codeword(1, 1, 1)[0] == 0

    def test_from_arrays_copies(self):
        params = CodebookParams(n=1, M=(2, 1), L=(1, 1), law=UNIFORM)
        cw1 = np.array([[0], [1]])
        cb = Codebook.from_arrays(params, cw1, [[0]])
        cw1[0, 0] = 1
        assert cb.codeword(1, 0, 0)[0] == 0
        assert cw1.flags.writeable

    def test_shape_and_alphabet_checked(self):
        params = CodebookParams(n=2, M=(2, 1), L=(1, 1), law=UNIFORM)
        with pytest.raises(ValidationError):
            Codebook(params, (np.zeros((3, 2), dtype=int), np.zeros((1, 2), dtype=int)))
        with pytest.raises(ValidationError):
            Codebook.from_arrays(params, [[0, 2], [1, 1]], [[0, 0]])

    def test_constant_composition_codewords(self):
        jt = JointType.identity(TypeVector((2, 2)))
        params = CodebookParams(n=4, M=(3, 2), L=(2, 1), types=(jt, jt))
        cb = generate_codebook(params, seed=3)
        for row in np.vstack(cb.codewords):
            assert tuple(np.bincount(row, minlength=2)) == (2, 2)
        with pytest.raises(ValidationError):
            Codebook.from_arrays(CodebookParams(n=4, M=(1, 1), L=(1, 1), types=(jt, jt)), [[0, 0, 0, 1]], [[0, 0, 1, 1]])

    def test_size_guard(self):
        params = CodebookParams(n=10 ** 4, M=(10 ** 4, 1), L=(1, 1), law=UNIFORM)
        with pytest.raises(SizingError):
            generate_codebook(params, seed=0)


class TestEncodeDecode:

    def test_message_range(self):
        params = CodebookParams(n=2, M=(2, 2), L=(1, 1), law=UNIFORM)
        cb = generate_codebook(params, seed=0)
        with pytest.raises(ValidationError):
            encode(cb, 1, 2, stream(0, 9))
        with pytest.raises(ValidationError):
            encode(cb, 3, 0, stream(0, 9))

    def test_identity_preprocessing(self):
        params = CodebookParams(n=6, M=(2, 2), L=(3, 1), law=UNIFORM)
        cb = generate_codebook(params, seed=5)
        v, x = encode(cb, 1, 1, stream(0, 1))
        np.testing.assert_array_equal(v, x)
        assert any(np.array_equal(v, cb.codeword(1, 1, l)) for l in range(3))

    def test_noiseless_channel_outputs(self, noiseless):
        x1, x2 = np.array([0, 1, 1, 0]), np.array([0, 0, 1, 1])
        y1, y2, z = sample_channel(noiseless, x1, x2, stream(1, 2))
        for out in (y1, y2, z):
            np.testing.assert_array_equal(out, x1 ^ x2)

    def test_decoding_table_shape(self, noiseless):
        params = CodebookParams(n=1, M=(2, 2), L=(1, 1), law=UNIFORM)
        table = decoding_table(noiseless, params, 1)
        assert table.shape == (2, 2, 2)
        assert table[1, 0, 1] == 0.0
        assert table[1, 0, 0] == -np.inf

    def test_ml_decode_and_ties(self, noiseless):
        params = CodebookParams(n=1, M=(2, 2), L=(1, 1), law=UNIFORM)
        cb = Codebook.from_arrays(params, [[0], [1]], [[0], [1]])
        assert ml_decode(noiseless, cb, 1, [1], [1]) == 0
        assert ml_decode(noiseless, cb, 1, [0], [1]) == 1
        tied = Codebook.from_arrays(params, [[0], [1]], [[1], [1]])
        assert ml_decode(noiseless, tied, 1, [0], [1]) == 0
        with pytest.raises(ValidationError):
            ml_decode(noiseless, cb, 1, [0, 1], [1])


class TestErrorTrials:

    def test_wilson(self):
        lo, hi = wilson_interval(0, 100)
        assert lo == 0.0 and 0.0 < hi < 0.05
        lo, hi = wilson_interval(50, 100)
        assert lo < 0.5 < hi
        with pytest.raises(ValidationError):
            wilson_interval(0, 0)

    def test_noiseless_distinct_codewords(self, noiseless):
        params = CodebookParams(n=1, M=(2, 2), L=(1, 1), law=UNIFORM)
        cb = Codebook.from_arrays(params, [[0], [1]], [[0], [1]])
        result = run_error_trials(noiseless, cb, trials=200, seed=1)
        assert result.errors == 0
        assert result.interval[0] == 0.0
        assert set(result.to_dict()) == {"trials", "errors", "estimate", "interval", "meta"}

    def test_pure_noise_fails_often(self, pure_noise):
        params = CodebookParams(n=1, M=(2, 2), L=(1, 1), law=UNIFORM)
        cb = Codebook.from_arrays(params, [[0], [1]], [[0], [1]])
        result = run_error_trials(pure_noise, cb, trials=2000, seed=4)
        # 任一方猜错即出错：1 - 1/4
        assert result.estimate == pytest.approx(0.75, abs=0.05)
        assert result.interval[0] < result.estimate < result.interval[1]

    def test_thread_count_does_not_change_result(self, additive_tensor):
        t = additive_tensor(0.1, 0.1, 0.3)
        params = CodebookParams(n=4, M=(2, 2), L=(2, 2), law=UNIFORM)
        cb = generate_codebook(params, seed=7)
        config_manager.override(THREADS=1, CHUNK_SIZE=64)
        single = run_error_trials(t, cb, trials=300, seed=7)
        config_manager.override(THREADS=4)
        multi = run_error_trials(t, cb, trials=300, seed=7)
        assert single.errors == multi.errors

    def test_csv_row(self):
        result = SimResult(10, 1, 0.1, (0.01, 0.4))
        assert result.csv_rows() == [[10, 1, 0.1, 0.01, 0.4, "", "", ""]]
        assert len(SimResult.csv_header) == 8


class TestLeakage:

    def test_xor_eavesdropper(self, noiseless):
        params = CodebookParams(n=1, M=(2, 2), L=(1, 1), law=UNIFORM)
        cb = Codebook.from_arrays(params, [[0], [1]], [[0], [1]])
        leak = exact_leakage(noiseless, cb)
        assert leak.joint == pytest.approx(LN2, abs=1e-12)
        assert leak.m1 == pytest.approx(0.0, abs=1e-12)
        assert leak.m2 == pytest.approx(0.0, abs=1e-12)

    def test_randomization_hides_message(self, noiseless):
        # 用户 2 在 {0,1} 上随机化，Z 与 (M1, M2) 独立
        params = CodebookParams(n=1, M=(2, 1), L=(1, 2), law=UNIFORM)
        cb = Codebook.from_arrays(params, [[0], [1]], [[0], [1]])
        assert exact_leakage(noiseless, cb).joint == pytest.approx(0.0, abs=1e-12)

    def test_pure_noise_leaks_nothing(self, pure_noise):
        params = CodebookParams(n=3, M=(2, 2), L=(1, 1), law=UNIFORM)
        leak = exact_leakage(pure_noise, generate_codebook(params, seed=2))
        assert max(leak) == pytest.approx(0.0, abs=1e-12)

    def test_invariant_under_message_relabeling(self, additive_tensor, rng):
        t = additive_tensor(0.1, 0.1, 0.2)
        params = CodebookParams(n=2, M=(3, 2), L=(2, 2), law=UNIFORM)
        cb = generate_codebook(params, seed=11)
        base = exact_leakage(t, cb)
        cw1, cw2 = cb.codewords
        for _ in range(5):
            blocks1 = cw1.reshape(3, 2, 2)[rng.permutation(3)][:, rng.permutation(2)]
            blocks2 = cw2.reshape(2, 2, 2)[rng.permutation(2)][:, rng.permutation(2)]
            relabeled = exact_leakage(t, Codebook.from_arrays(params, blocks1.reshape(6, 2), blocks2.reshape(4, 2)))
            np.testing.assert_allclose(list(relabeled), list(base), atol=1e-12)

    def test_size_guard(self, noiseless):
        params = CodebookParams(n=20, M=(4, 4), L=(4, 4), law=UNIFORM)
        with pytest.raises(SizingError):
            exact_leakage(noiseless, generate_codebook(params, seed=0))


class TestResolvability:

    def test_xor_single_letter(self, noiseless):
        report = verify_resolvability(noiseless, 1, 1, 1, law=UNIFORM, s_grid=[1.0])
        row = report.rows[0]
        assert report.lhs == pytest.approx(LN2, abs=1e-12)
        assert row["rhs"] == pytest.approx(4.0, abs=1e-9)
        assert row["rhs_tight"] == pytest.approx(math.log(5.0), abs=1e-9)
        assert row["verdict"] and row["verdict_tight"]
        assert report.all_hold

    def test_bound_holds_on_noisy_channel(self, additive_tensor):
        report = verify_resolvability(additive_tensor(0.1, 0.1, 0.2), 2, 1, 2, law=UNIFORM,
                                      s_grid=[0.25, 0.5, 1.0])
        assert report.all_hold
        assert report.meta["realizations"] == 4 ** 3
        assert all(0.0 <= row["lhs"] for row in report.rows)

    def test_sampled_mode(self, noiseless):
        report = verify_resolvability(noiseless, 1, 1, 1, law=UNIFORM, s_grid=[0.5, 1.0],
                                      sampled=True, samples=30, seed=3)
        assert report.lhs == pytest.approx(LN2, abs=1e-12)
        assert report.interval == pytest.approx((LN2, LN2), abs=1e-12)
        assert report.meta["sampled"]

    def test_sampled_interval_belongs_to_peak(self, additive_tensor):
        report = verify_resolvability(additive_tensor(0.1, 0.1, 0.2), 2, 1, 2, law=UNIFORM,
                                      s_grid=[0.1, 0.5, 1.0], sampled=True, samples=40, seed=5)
        peak = max(report.rows, key=lambda row: row["lhs"])
        assert report.lhs == pytest.approx(peak["lhs"], abs=1e-12)
        assert report.interval == pytest.approx((peak["ci_low"], peak["ci_high"]), abs=1e-12)
        assert report.interval[0] <= report.lhs <= report.interval[1]
        for row in report.rows:
            assert row["ci_low"] <= row["lhs"] <= row["ci_high"]

    def test_constant_composition(self, noiseless):
        jt = JointType.identity(TypeVector((1, 1)))
        report = verify_resolvability(noiseless, 1, 1, 2, types=(jt, jt), s_grid=[0.25, 0.5, 0.75])
        assert report.mode == "constant_composition"
        assert report.lhs == pytest.approx(LN2, abs=1e-12)
        assert report.all_hold
        assert "rhs_tight" not in report.rows[0]

    def test_csv_header(self, noiseless):
        report = verify_resolvability(noiseless, 1, 1, 1, law=UNIFORM, s_grid=[1.0])
        assert report.csv_header == ["s", "lhs", "rhs", "slack", "verdict", "rhs_tight", "verdict_tight"]
        assert report.csv_rows()[0][4] == 1


class TestGallager:

    def test_noiseless_collisions(self, noiseless):
        report = verify_gallager(noiseless, 2, 1, law=UNIFORM, s_grid=[0.5, 1.0])
        assert report.lhs == pytest.approx(0.25, abs=1e-12)
        for row in report.rows:
            assert row["rhs"] == pytest.approx(1.0, abs=1e-9)
        assert report.all_hold

    def test_pure_noise(self, pure_noise):
        report = verify_gallager(pure_noise, 2, 1, law=UNIFORM, s_grid=[1.0])
        assert report.lhs == pytest.approx(0.5, abs=1e-12)
        assert report.all_hold

    def test_second_receiver(self, additive_tensor):
        report = verify_gallager(additive_tensor(0.1, 0.2, 0.3), 3, 2, law=UNIFORM, s_grid=[0.3, 0.6, 1.0], user=2)
        assert report.meta["user"] == 2
        assert 0.0 < report.lhs < 1.0
        assert report.all_hold

    def test_constant_composition(self, noiseless):
        jt = JointType.identity(TypeVector((1, 1)))
        report = verify_gallager(noiseless, 2, 2, types=(jt, jt), s_grid=[0.5])
        assert report.lhs == pytest.approx(0.25, abs=1e-12)
        assert report.all_hold

    def test_sampled_close_to_exact(self, additive_tensor):
        t = additive_tensor(0.1, 0.1, 0.3)
        exact = verify_gallager(t, 2, 2, law=UNIFORM, s_grid=[1.0])
        sampled = verify_gallager(t, 2, 2, law=UNIFORM, s_grid=[1.0], sampled=True, samples=400, seed=9)
        assert abs(sampled.lhs - exact.lhs) < 0.05

    def test_bad_inputs(self, noiseless):
        with pytest.raises(ValidationError):
            verify_gallager(noiseless, 0, 1, law=UNIFORM)
        with pytest.raises(ValidationError):
            verify_gallager(noiseless, 2, 1, law=UNIFORM, user=3)


class TestTrends:

    def test_sizes_from_rates(self):
        M, L = sizes_from_rates(RateTuple(R1=0.1, R2=0.0, r1=0.4, r2=0.0), 4)
        assert M == (2, 1)
        assert L == (5, 1)

    def test_secrecy_trend_layout(self, additive_tensor):
        rates = RateTuple(R1=0.2, R2=0.2, r1=0.2, r2=0.2)
        rows = secrecy_trend(additive_tensor(), UNIFORM, rates, ns=(1, 2), codebooks=5, seed=1)
        assert [r["n"] for r in rows] == [1, 2]
        for r in rows:
            M1, M2 = r["M"]
            assert 0.0 <= r["median_joint"] <= math.log(M1 * M2) + 1e-12
            assert r["median_m1"] <= r["median_joint"] + 1e-12

    def test_error_trend_decreases(self):
        t = _tensor([1.0, 0.0], [1.0, 0.0], [0.5, 0.5])
        rates = RateTuple(R1=0.1, R2=0.1)
        rows = error_trend(t, UNIFORM, rates, ns=(1, 8), codebooks=10, trials=100, seed=2)
        assert rows[0]["M"] == [2, 2] and rows[1]["M"] == [3, 3]
        assert rows[1]["error"] < rows[0]["error"]

    def test_secrecy_trend_decreases(self, additive_tensor):
        t = additive_tensor()
        assert region_joint(t, UNIFORM).contains((0.2, 0.2))
        rates = RateTuple(R1=0.1, R2=0.1, r1=1.0, r2=1.0)
        rows = secrecy_trend(t, UNIFORM, rates, ns=(1, 2, 3, 4), codebooks=21, seed=4)
        medians = [r["median_joint"] for r in rows]
        assert [r["L"][0] for r in rows] == [3, 8, 21, 55]
        for a, b in zip(medians, medians[1:]):
            assert b <= a + 1e-12

    def test_error_trend_decreases_on_noisy_channel(self, additive_tensor):
        rates = RateTuple(R1=0.1, R2=0.1)
        rows = error_trend(additive_tensor(), UNIFORM, rates, ns=(2, 4, 6), codebooks=100, trials=100, seed=6)
        errors = [r["error"] for r in rows]
        assert errors[1] < errors[0]
        assert errors[2] < errors[1]
