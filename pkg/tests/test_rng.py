import numpy as np

from hcsenhance.rng import substream, substream_seed


def test_same_derivation_same_stream():
    a = substream(7, "x", "y").standard_normal(16)
    b = substream(7, "x", "y").standard_normal(16)
    assert np.array_equal(a, b)


def test_different_names_different_streams():
    a = substream(7, "x").standard_normal(16)
    b = substream(7, "y").standard_normal(16)
    assert not np.array_equal(a, b)


def test_different_seeds_different_streams():
    a = substream(7, "x").standard_normal(16)
    b = substream(8, "x").standard_normal(16)
    assert not np.array_equal(a, b)


def test_name_boundaries_are_not_ambiguous():
    # ("ab", "c") must not collide with ("a", "bc")
    assert substream_seed(0, "ab", "c") != substream_seed(0, "a", "bc")


def test_seed_fits_in_64_bits():
    s = substream_seed(123456789, "train", "torch")
    assert 0 <= s < 2 ** 64


def test_non_string_names_accepted():
    assert substream_seed(0, 1, 2.5) == substream_seed(0, "1", "2.5")
