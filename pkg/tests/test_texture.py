import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from lfqmli.errors import TooSmallMli
from lfqmli.texture import batch_ulbp_histogram, lbp_riu2_code, mli_range, ulbp_histogram

gray = st.integers(0, 255)


@pytest.mark.parametrize(
    "center, neighbours, expected",
    [
        (128, (128, 128, 128, 128), 4),
        (255, (0, 0, 0, 0), 0),
        (5, (10, 0, 10, 0), 5),
        (5, (0, 10, 0, 10), 5),
        (5, (10, 10, 0, 0), 2),
        (5, (10, 0, 0, 0), 1),
        (5, (10, 10, 10, 0), 3),
    ],
)
def test_code_examples(center, neighbours, expected):
    assert lbp_riu2_code(center, neighbours) == expected


def test_code_table_against_oracle():
    # every ordering pattern of 4 neighbours around a centre of 1
    for nb in itertools.product((0, 1, 2), repeat=4):
        assert lbp_riu2_code(1, nb) == oracles.lbp_class(1, nb)


def test_exactly_six_classes():
    seen = {lbp_riu2_code(1, nb) for nb in itertools.product((0, 2), repeat=4)}
    assert seen == set(range(6))


@given(gray, st.lists(gray, min_size=4, max_size=4), st.integers(0, 3))
def test_rotation_invariant(center, neighbours, k):
    rotated = neighbours[k:] + neighbours[:k]
    assert lbp_riu2_code(center, rotated) == lbp_riu2_code(center, neighbours)


@given(st.integers(0, 200), st.lists(st.integers(0, 200), min_size=4, max_size=4), st.integers(0, 55))
def test_gray_shift_invariant(center, neighbours, shift):
    assert lbp_riu2_code(center + shift, [g + shift for g in neighbours]) == lbp_riu2_code(center, neighbours)


def test_constant_histogram_point_mass():
    np.testing.assert_array_equal(ulbp_histogram(np.full((9, 9), 77)), [0, 0, 0, 0, 1, 0])


def test_random_histograms_match_oracle():
    rng = np.random.default_rng(21)
    for _ in range(50):
        img = rng.integers(0, 256, (9, 9))
        np.testing.assert_array_equal(ulbp_histogram(img), oracles.lbp_histogram(img))


def test_low_contrast_histograms_match_oracle():
    # few gray levels produce many ties, exercising s(0) = 1
    rng = np.random.default_rng(22)
    for shape in [(3, 3), (5, 9), (9, 9)]:
        img = rng.integers(0, 3, shape)
        np.testing.assert_array_equal(ulbp_histogram(img), oracles.lbp_histogram(img))


@given(arrays(np.uint8, st.tuples(st.integers(3, 10), st.integers(3, 10))))
def test_histogram_is_a_distribution(img):
    h = ulbp_histogram(img)
    assert h.shape == (6,)
    assert np.all((h >= 0) & (h <= 1))
    assert abs(h.sum() - 1.0) < 1e-12


def test_histogram_too_small():
    with pytest.raises(TooSmallMli):
        ulbp_histogram(np.zeros((2, 9)))


def test_batch_matches_single():
    stack = np.random.default_rng(23).integers(0, 256, (2, 3, 5, 5))
    out = batch_ulbp_histogram(stack)
    assert out.shape == (2, 3, 6)
    for idx in np.ndindex(2, 3):
        np.testing.assert_array_equal(out[idx], ulbp_histogram(stack[idx]))


def test_range_examples():
    assert mli_range(np.full((9, 9), 12)) == 0
    img = np.full((9, 9), 100, dtype=np.uint8)
    img[0, 0], img[8, 8] = 0, 255
    assert mli_range(img) == 255
    rng = np.random.default_rng(24)
    for _ in range(20):
        img = rng.integers(0, 256, (9, 9), dtype=np.uint8)
        assert mli_range(img) == oracles.value_range(img)


@given(arrays(np.uint8, st.tuples(st.integers(1, 9), st.integers(1, 9))), st.randoms(use_true_random=False))
def test_range_permutation_invariant(img, rnd):
    flat = list(img.ravel())
    rnd.shuffle(flat)
    assert mli_range(np.array(flat, dtype=np.uint8).reshape(img.shape)) == mli_range(img)
