import numpy as np
import pytest

from tests.helpers import random_image
from utils.errors import (
    ConfigError,
    DimensionTooSmallError,
    DuplicateRegionError,
    InsufficientPatchesError,
    RegionIndexError,
)
from utils.region_features import (
    FeatureExtractor,
    Image,
    LazyRegionFeatures,
    aggregate,
    build_codebook,
    central_region,
    decompose,
    gamma,
    parse_grid,
    phi,
)


def region_widths(grid):
    return [b - a for a, b in zip(grid.col_edges, grid.col_edges[1:])]


def test_decompose_exact_division():
    grid = decompose(Image(np.zeros((8, 8))), 4, 4)
    assert grid.size == 16
    for i in range(16):
        top, bottom, left, right = grid.bounds(i)
        assert (bottom - top, right - left) == (2, 2)


def test_decompose_remainder_goes_to_last_column():
    grid = decompose(Image(np.zeros((8, 9))), 4, 4)
    assert region_widths(grid) == [2, 2, 2, 3]


def test_decompose_rejects_empty_regions():
    with pytest.raises(DimensionTooSmallError):
        decompose(Image(np.zeros((3, 3))), 4, 4)


def test_regions_tile_image(rng):
    image = random_image(rng, width=13, height=11)
    grid = decompose(image, 3, 4)
    coverage = np.zeros((11, 13), dtype=int)
    for i in range(grid.size):
        top, bottom, left, right = grid.bounds(i)
        coverage[top:bottom, left:right] += 1
    assert np.all(coverage == 1)


def test_region_index_is_row_major():
    grid = decompose(Image(np.zeros((8, 8))), 4, 4)
    assert grid.position(6) == (1, 2)
    assert grid.index(1, 2) == 6
    with pytest.raises(RegionIndexError):
        grid.position(16)


def test_central_region():
    assert central_region(4, 4) == 5
    assert central_region(3, 3) == 4
    assert central_region(1, 1) == 0


def test_parse_grid():
    assert parse_grid("4x3") == (4, 3)
    with pytest.raises(ConfigError):
        parse_grid("four")


def test_phi_single_bin_mass():
    image = Image(np.zeros((4, 4)))
    grid = decompose(image, 1, 1)
    np.testing.assert_array_equal(phi(image, grid, 0, FeatureExtractor(k=4)), [1, 0, 0, 0])


def test_phi_half_and_half():
    pixels = np.zeros((4, 4))
    pixels[:, 2:] = 255
    image = Image(pixels)
    np.testing.assert_array_equal(phi(image, decompose(image, 1, 1), 0, FeatureExtractor(k=2)), [0.5, 0.5])


def test_phi_low_intensities_all_in_first_bin():
    # 0..15 都小于 64
    image = Image(np.arange(16).reshape(4, 4))
    np.testing.assert_array_equal(phi(image, decompose(image, 1, 1), 0, FeatureExtractor(k=4)), [1, 0, 0, 0])


def test_phi_255_lands_in_last_bin():
    image = Image(np.full((2, 2), 255))
    feature = phi(image, decompose(image, 1, 1), 0, FeatureExtractor(k=8))
    assert feature[-1] == 1.0


def test_phi_histograms_sum_to_one(rng):
    image = random_image(rng, 20, 20)
    grid = decompose(image, 4, 4)
    for i in range(grid.size):
        feature = phi(image, grid, i, FeatureExtractor(k=8))
        assert np.all(feature >= 0)
        assert abs(feature.sum() - 1.0) < 1e-9


def test_phi_index_out_of_range(rng):
    image = random_image(rng)
    with pytest.raises(RegionIndexError):
        phi(image, decompose(image, 4, 4), 16, FeatureExtractor(k=4))


def test_gamma_places_block():
    np.testing.assert_array_equal(gamma(np.array([0.5, 0.5]), 1, 4), [0, 0, 0.5, 0.5, 0, 0, 0, 0])
    np.testing.assert_array_equal(gamma(np.array([1.0, 0.0]), 0, 4), [1, 0, 0, 0, 0, 0, 0, 0])
    assert not gamma(np.zeros(3), 2, 4).any()
    with pytest.raises(RegionIndexError):
        gamma(np.ones(2), 4, 4)


def test_aggregate_disjoint_blocks():
    out = aggregate([(0, np.array([1.0, 0.0])), (2, np.array([0.0, 1.0]))], 4)
    np.testing.assert_array_equal(out, [1, 0, 0, 0, 0, 1, 0, 0])


def test_aggregate_empty_is_zero():
    assert not aggregate([], 4, k=3).any()
    assert aggregate([], 4, k=3).shape == (12,)


def test_aggregate_rejects_duplicates():
    with pytest.raises(DuplicateRegionError):
        aggregate([(1, np.ones(2)), (1, np.ones(2))], 4)


def test_aggregate_permutation_invariance(rng):
    extractor = FeatureExtractor(k=6)
    for _ in range(1000):
        image = random_image(rng, 12, 12)
        grid = decompose(image, 3, 3)
        length = int(rng.integers(1, grid.size + 1))
        trajectory = rng.permutation(grid.size)[:length]
        items = [(int(i), phi(image, grid, int(i), extractor)) for i in trajectory]
        shuffled = [items[j] for j in rng.permutation(length)]
        assert np.array_equal(aggregate(items, grid.size), aggregate(shuffled, grid.size))


def test_full_aggregate_is_concatenation(rng):
    image = random_image(rng)
    grid = decompose(image, 4, 4)
    extractor = FeatureExtractor(k=4)
    features = [phi(image, grid, i, extractor) for i in range(grid.size)]
    full = aggregate(list(enumerate(features))[::-1], grid.size)
    np.testing.assert_array_equal(full, np.concatenate(features))


def test_lazy_features_compute_each_region_once(rng):
    image = random_image(rng)
    cache = LazyRegionFeatures(image, decompose(image, 4, 4), FeatureExtractor(k=4))
    cache.aggregate([5, 1, 2])
    cache.aggregate([5, 1])
    assert cache.phi_calls == 3
    extended = cache.extend(cache.aggregate([5]), 9)
    np.testing.assert_array_equal(extended, cache.aggregate([9, 5]))
    assert cache.phi_calls == 4
    with pytest.raises(DuplicateRegionError):
        cache.extend(extended, 9)


def test_build_codebook_two_constant_clusters():
    images = [Image(np.zeros((4, 4))), Image(np.full((4, 4), 255))]
    extractor = build_codebook(images, patch_size=2, k=2, seed=0)
    centroids = sorted(extractor.codebook.tolist())
    assert centroids == [[0.0] * 4, [255.0] * 4]


def test_build_codebook_rejects_k_one():
    with pytest.raises(ConfigError):
        build_codebook([Image(np.zeros((4, 4)))], patch_size=2, k=1, seed=0)


def test_build_codebook_needs_enough_distinct_patches():
    with pytest.raises(InsufficientPatchesError):
        build_codebook([Image(np.zeros((4, 4)))], patch_size=2, k=2, seed=0)


def test_build_codebook_deterministic(rng):
    images = [random_image(rng, 16, 16) for _ in range(3)]
    first = build_codebook(images, patch_size=4, k=5, seed=11)
    second = build_codebook(images, patch_size=4, k=5, seed=11)
    assert first == second


def test_codebook_phi_counts_nearest_centroids():
    extractor = FeatureExtractor(kind="codebook", k=2, patch_size=2,
                                 codebook=np.array([[0.0] * 4, [255.0] * 4]))
    pixels = np.zeros((4, 4))
    pixels[:2, :2] = 250
    image = Image(pixels)
    np.testing.assert_array_equal(phi(image, decompose(image, 1, 1), 0, extractor), [0.75, 0.25])


def test_codebook_region_smaller_than_patch():
    extractor = FeatureExtractor(kind="codebook", k=2, patch_size=4, codebook=np.zeros((2, 16)) + [[0], [1]])
    image = Image(np.zeros((4, 4)))
    grid = decompose(image, 2, 2)
    with pytest.raises(DimensionTooSmallError):
        extractor.check_grid(grid)
    with pytest.raises(DimensionTooSmallError):
        phi(image, grid, 0, extractor)


def test_image_rejects_fractional_pixels():
    with pytest.raises(ConfigError):
        Image(np.full((2, 2), 12.7))
    with pytest.raises(ConfigError):
        Image(np.full((2, 2), 256))
    assert Image(np.full((2, 2), 12.0)).pixels.dtype == np.uint8


def test_extractor_validation():
    with pytest.raises(ConfigError):
        FeatureExtractor(k=1)
    with pytest.raises(ConfigError):
        FeatureExtractor(kind="codebook", k=2)
    with pytest.raises(ConfigError):
        FeatureExtractor(kind="sift", k=4)
