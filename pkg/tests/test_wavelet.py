import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from wavedbn.errors import ValidationError
from wavedbn.wavelet import (DB2, HAAR, SUBBAND_NAMES, WaveletFilter, decompose_full_2level,
                             downsample_2x, dwt2, flatten, get_filter, idwt2, normalize)

FILTERS = [HAAR, DB2]


def dwt2_loops(img, wavelet):
    """Direct periodic filter-and-decimate, one output coefficient at a time."""
    img = np.asarray(img, dtype=float)
    h, w = img.shape
    lo, hi = wavelet.lowpass, wavelet.highpass

    def analyze(x, taps):
        n = len(x)
        return [sum(c * x[(2 * k + i) % n] for i, c in enumerate(taps)) for k in range(n // 2)]

    row_l = np.array([analyze(r, lo) for r in img])
    row_h = np.array([analyze(r, hi) for r in img])
    cols = lambda m, taps: np.array([analyze(c, taps) for c in m.T]).T
    return cols(row_l, lo), cols(row_l, hi), cols(row_h, lo), cols(row_h, hi)


even_dims = st.tuples(st.integers(1, 6), st.integers(1, 6)).map(lambda t: (2 * t[0], 2 * t[1]))
images = even_dims.flatmap(
    lambda s: arrays(np.float64, s, elements=st.floats(-100, 100, allow_nan=False))
)


class TestFilters:
    def test_haar_coefficients(self):
        assert HAAR.lowpass == pytest.approx((2 ** -0.5, 2 ** -0.5), abs=1e-15)
        assert HAAR.highpass == pytest.approx((2 ** -0.5, -(2 ** -0.5)), abs=1e-15)

    @pytest.mark.parametrize("f", FILTERS, ids=lambda f: f.name)
    def test_unit_norm_and_orthogonal(self, f):
        lo, hi = np.array(f.lowpass), np.array(f.highpass)
        assert abs(lo @ lo - 1) < 1e-12
        assert abs(hi @ hi - 1) < 1e-12
        assert abs(lo @ hi) < 1e-12

    def test_rejects_odd_or_unnormalized(self):
        with pytest.raises(ValidationError):
            WaveletFilter("bad", (1.0, 0.0, 0.0))
        with pytest.raises(ValidationError):
            WaveletFilter("bad", (1.0, 1.0))

    def test_lookup(self):
        assert get_filter("HAAR") is HAAR
        assert get_filter("d4") is DB2
        with pytest.raises(ValidationError):
            get_filter("sym8")


class TestNormalize:
    def test_endpoints(self):
        assert np.all(normalize(np.full((3, 3), 255.0), (0, 255)) == 1.0)
        assert np.all(normalize(np.zeros((3, 3)), (0, 255)) == 0.0)
        np.testing.assert_array_equal(normalize([[-1.0, 1.0]], (-1, 1)), [[0.0, 1.0]])

    def test_clamps(self):
        np.testing.assert_array_equal(normalize([[-5.0, 9.0]], (0, 1)), [[0.0, 1.0]])

    def test_degenerate_range(self):
        with pytest.raises(ValidationError):
            normalize([[1.0]], (3, 3))


class TestDownsample:
    def test_block_mean(self):
        np.testing.assert_array_equal(downsample_2x([[1, 3], [5, 7]]), [[4.0]])

    def test_constant(self):
        out = downsample_2x(np.full((128, 128), 0.3))
        assert out.shape == (64, 64)
        np.testing.assert_allclose(out, 0.3, rtol=0, atol=1e-15)

    def test_checkerboard(self):
        board = np.indices((4, 4)).sum(axis=0) % 2
        np.testing.assert_array_equal(downsample_2x(board), np.full((2, 2), 0.5))

    def test_odd_dimension(self):
        with pytest.raises(ValidationError):
            downsample_2x(np.zeros((3, 4)))


class TestDwt2:
    def test_constant_image(self):
        ll, lh, hl, hh = dwt2(np.full((6, 8), 1.5))
        np.testing.assert_allclose(ll, 3.0, atol=1e-12)
        for band in (lh, hl, hh):
            np.testing.assert_allclose(band, 0.0, atol=1e-12)

    def test_single_block(self):
        bands = dwt2([[1.0, 1.0], [1.0, 1.0]])
        np.testing.assert_allclose([b.item() for b in bands], [2, 0, 0, 0], atol=1e-15)

    def test_impulse_block(self):
        bands = dwt2([[1.0, 0.0], [0.0, 0.0]])
        np.testing.assert_allclose([b.item() for b in bands], [0.5] * 4, atol=1e-15)

    def test_ll_is_half_block_sum(self, rng):
        x = rng.normal(size=(4, 6))
        ll = dwt2(x)[0]
        blocks = x.reshape(2, 2, 3, 2).sum(axis=(1, 3))
        np.testing.assert_allclose(ll, blocks / 2, atol=1e-12)

    @pytest.mark.parametrize("f", FILTERS, ids=lambda f: f.name)
    def test_matches_loop_oracle(self, f, rng):
        x = rng.normal(size=(8, 12))
        for got, want in zip(dwt2(x, f), dwt2_loops(x, f)):
            np.testing.assert_allclose(got, want, atol=1e-12)

    def test_odd_dimension(self):
        with pytest.raises(ValidationError):
            dwt2(np.zeros((4, 5)))

    def test_batched_equals_single(self, rng):
        x = rng.normal(size=(3, 8, 8))
        batched = dwt2(x, DB2)
        for i in range(3):
            for b, single in zip(batched, dwt2(x[i], DB2)):
                np.testing.assert_array_equal(b[i], single)


class TestIdwt2:
    def test_inverse_example(self):
        out = idwt2([[[2.0]], [[0.0]], [[0.0]], [[0.0]]])
        np.testing.assert_allclose(out, np.ones((2, 2)), atol=1e-15)

    def test_zero_bands(self):
        z = np.zeros((3, 2))
        np.testing.assert_array_equal(idwt2([z, z, z, z]), np.zeros((6, 4)))

    def test_mismatched_bands(self):
        with pytest.raises(ValidationError):
            idwt2([np.zeros((2, 2))] * 3 + [np.zeros((2, 3))])


@pytest.mark.parametrize("f", FILTERS, ids=lambda f: f.name)
@given(x=images)
@settings(max_examples=60, deadline=None)
def test_perfect_reconstruction(f, x):
    np.testing.assert_allclose(idwt2(dwt2(x, f), f), x, rtol=0, atol=1e-10)


@pytest.mark.parametrize("f", FILTERS, ids=lambda f: f.name)
@given(x=images)
@settings(max_examples=60, deadline=None)
def test_energy_preserved(f, x):
    energy = np.sum(x ** 2)
    coeffs = sum(np.sum(b ** 2) for b in dwt2(x, f))
    assert abs(coeffs - energy) <= 1e-8 * max(energy, 1e-300)


@given(x=images, a=st.floats(-10, 10), b=st.floats(-10, 10), seed=st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_linearity(x, a, b, seed):
    y = np.random.default_rng(seed).normal(size=x.shape)
    combined = dwt2(a * x + b * y, DB2)
    for c, bx, by in zip(combined, dwt2(x, DB2), dwt2(y, DB2)):
        np.testing.assert_allclose(c, a * bx + b * by, rtol=0, atol=1e-10 * (1 + np.abs(x).max()))


class TestFullDecomposition:
    def test_paper_sizes(self):
        assert decompose_full_2level(np.zeros((64, 64))).shape == (16, 16, 16)
        assert decompose_full_2level(np.zeros((16, 16))).shape == (16, 4, 4)

    @given(st.integers(1, 8), st.integers(1, 8))
    @settings(max_examples=30, deadline=None)
    def test_size_law(self, hq, wq):
        out = decompose_full_2level(np.ones((4 * hq, 4 * wq)), DB2)
        assert out.shape == (16, hq, wq)

    def test_constant_image(self):
        out = decompose_full_2level(np.full((8, 12), 0.25))
        np.testing.assert_allclose(out[0], 1.0, atol=1e-12)
        np.testing.assert_allclose(out[1:], 0.0, atol=1e-12)

    def test_order_is_depth_first(self, rng):
        x = rng.normal(size=(8, 8))
        out = decompose_full_2level(x)
        level1 = dwt2(x)
        for j in range(16):
            expected = dwt2(level1[j // 4])[j % 4]
            np.testing.assert_array_equal(out[j], expected)
        assert SUBBAND_NAMES[:5] == ("LL.LL", "LL.LH", "LL.HL", "LL.HH", "LH.LL")

    def test_not_divisible_by_four(self):
        with pytest.raises(ValidationError):
            decompose_full_2level(np.zeros((6, 8)))

    def test_deterministic(self, rng):
        x = rng.normal(size=(16, 16))
        a = decompose_full_2level(x, DB2)
        b = decompose_full_2level(x.copy(), DB2)
        assert a.tobytes() == b.tobytes()


class TestFlatten:
    def test_row_major(self):
        np.testing.assert_array_equal(flatten([[1, 2], [3, 4]]), [1, 2, 3, 4])

    def test_lengths(self):
        assert flatten(np.zeros((16, 16))).shape == (256,)
        np.testing.assert_array_equal(flatten([[7.0]]), [7.0])
