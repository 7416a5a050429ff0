from __future__ import annotations

import numpy as np
import pytest
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import pdist

from dc2.divide import (
    PatchImage,
    build_patch_tree,
    cluster_patches,
    cosine_distance,
    count_nodes,
    crop_patch,
    distance_matrix,
    merge_cluster,
    patch_feature,
)
from dc2.geometry import Region
from dc2.synthetic import random_blocky_image

from oracles import naive_average_linkage, triangle_downsample


def solid(w, h, rgb):
    return PatchImage.from_array(np.full((h, w, 3), rgb, dtype=np.uint8))


# -- features ------------------------------------------------------------


def test_feature_of_gray_patch():
    f = patch_feature(solid(100, 100, 128))
    assert f.shape == (32 * 32 * 3,)
    assert np.allclose(f, 0.5, atol=1 / 255)


def test_feature_of_black_patch():
    assert not patch_feature(solid(50, 70, 0)).any()


def test_feature_of_upscaled_checkerboard():
    board = np.array([[0, 255], [255, 0]], dtype=np.uint8)
    big = np.repeat(np.repeat(board, 32, axis=0), 32, axis=1)
    f = patch_feature(PatchImage.from_array(big))
    assert abs(f.mean() - 0.5) <= 0.02

    ref = triangle_downsample(np.repeat(big[:, :, None], 3, axis=2), 32, 32) / 255.0
    assert abs(ref.mean() - 0.5) <= 0.02
    assert np.allclose(f, ref.reshape(-1), atol=2 / 255)


def test_feature_matches_reference_resampler_on_noise():
    rng = np.random.default_rng(3)
    pixels = rng.integers(0, 256, size=(96, 128, 3), dtype=np.uint8)
    f = patch_feature(PatchImage.from_array(pixels))
    ref = triangle_downsample(pixels, 32, 32).reshape(-1) / 255.0
    assert np.abs(f - ref).max() <= 2 / 255


# -- cosine distance ------------------------------------------------------


def test_cosine_distance_zero_vectors():
    z = np.zeros(4)
    assert cosine_distance(z, z) == 0.0
    assert cosine_distance(z, np.ones(4)) == 1.0


def test_cosine_distance_snaps_tiny_values():
    v = np.array([0.1, 0.2, 0.3])
    assert cosine_distance(v, v * 3.0) == 0.0


def test_distance_matrix_rejects_mixed_lengths():
    with pytest.raises(ValueError):
        distance_matrix([np.ones(3), np.ones(4), np.ones(3), np.ones(3)])


# -- clustering ------------------------------------------------------------


def test_identical_vectors_form_one_cluster():
    v = np.array([0.2, 0.5, 0.1])
    assert cluster_patches([v] * 4, 0.05).clusters == ((0, 1, 2, 3),)


def test_orthogonal_vectors_stay_apart():
    vs = list(np.eye(4))
    assert cluster_patches(vs, 0.5).clusters == ((0,), (1,), (2,), (3,))


def test_two_pairs():
    raw = [(1, 0), (0.98, 0.2), (0, 1), (0, 0.97)]
    vs = [np.array(v) / np.linalg.norm(v) for v in raw]
    assert cluster_patches(vs, 0.1).clusters == ((0, 1), (2, 3))
    assert naive_average_linkage(vs, 0.1) == [(0, 1), (2, 3)]


def test_cluster_rejects_wrong_count_and_theta():
    with pytest.raises(ValueError):
        cluster_patches([np.ones(2)] * 3, 0.1)
    with pytest.raises(ValueError):
        cluster_patches([np.ones(2)] * 4, -0.1)


def corpus(n=100, seed=5):
    """4-vector inputs: random, near-duplicate, exact-duplicate and grouped."""
    rng = np.random.default_rng(seed)
    cases = []
    for i in range(n):
        dim = int(rng.integers(2, 7))
        kind = i % 4
        if kind == 0:
            vs = rng.random((4, dim)) + 0.01
        elif kind == 1:
            base = rng.random(dim) + 0.01
            vs = base + rng.normal(0, 0.05, size=(4, dim))
            vs = np.abs(vs) + 0.01
        elif kind == 2:
            a, b = rng.random((2, dim)) + 0.01
            vs = np.stack([a, a, b, rng.random(dim) + 0.01])
        else:
            centres = rng.random((2, dim)) + 0.01
            vs = np.stack([centres[j % 2] + rng.normal(0, 0.1, dim) for j in range(4)])
            vs = np.abs(vs) + 0.01
        cases.append([np.asarray(v, dtype=np.float64) for v in vs])
    return cases


def scipy_partition(vs, theta):
    d = pdist(np.stack(vs), metric="cosine")
    d[d <= 1e-12] = 0.0
    labels = fcluster(linkage(d, method="average"), t=theta, criterion="distance")
    groups = {}
    for i, lab in enumerate(labels):
        groups.setdefault(lab, []).append(i)
    return sorted(tuple(g) for g in groups.values())


@pytest.mark.parametrize("theta", [0.0, 0.01, 0.05, 0.1, 0.2, 0.3, 0.6, 2.0])
def test_clustering_matches_reference_implementations(theta):
    for vs in corpus():
        got = sorted(cluster_patches(vs, theta).clusters)
        assert got == scipy_partition(vs, theta)
        assert got == naive_average_linkage(vs, theta)


def test_theta_zero_merges_only_identical():
    rng = np.random.default_rng(9)
    for vs in corpus():
        for group in cluster_patches(vs, 0.0).clusters:
            for i in group:
                for j in group:
                    assert cosine_distance(vs[i], vs[j]) == 0.0
    # and identical features always merge at theta 0
    a = rng.random(5)
    assert cluster_patches([a, a, a, a], 0.0).k == 1


def test_theta_two_gives_one_cluster():
    for vs in corpus():
        assert cluster_patches(vs, 2.0).k == 1
    assert cluster_patches([np.zeros(3), np.ones(3), np.eye(3)[0], np.eye(3)[1]], 2.0).k == 1


def test_cluster_count_monotone_in_theta():
    thetas = [0.0, 0.05, 0.1, 0.2, 0.3, 2.0]
    for vs in corpus():
        ks = [cluster_patches(vs, t).k for t in thetas]
        assert ks == sorted(ks, reverse=True)


# -- merging ---------------------------------------------------------------


def test_merge_single_member_is_identity():
    p = solid(8, 8, 10)
    assert merge_cluster([p]) is p


def test_merge_black_and_white():
    black = solid(6, 6, 0)
    white = PatchImage(np.full((6, 6, 3), 255, np.uint8), (Region(6, 0, 6, 6),))
    m = merge_cluster([black, white])
    assert (m.pixels == 128).all()  # 127.5 rounds half up
    assert m.source_regions == (Region(0, 0, 6, 6), Region(6, 0, 6, 6))


def test_merge_concatenates_regions():
    a = PatchImage(np.zeros((4, 4, 3), np.uint8), (Region(0, 0, 512, 512),))
    b = PatchImage(np.zeros((4, 4, 3), np.uint8), (Region(512, 0, 512, 512),))
    assert tuples(merge_cluster([a, b]).source_regions) == [(0, 0, 512, 512), (512, 0, 512, 512)]


def test_merge_resizes_to_first_member():
    a = solid(10, 10, 100)
    b = solid(11, 9, 200)
    m = merge_cluster([a, b])
    assert m.pixels.shape == (10, 10, 3)
    assert (m.pixels == 150).all()


def tuples(regions):
    return [r.as_tuple() for r in regions]


def test_crop_patch_maps_every_source_region():
    pixels = np.zeros((10, 14, 3), np.uint8)
    patch = PatchImage(pixels, (Region(0, 0, 14, 10), Region(100, 50, 28, 20)))
    quads = crop_patch(patch)
    assert [q.pixels.shape[:2] for q in quads] == [(5, 7), (5, 7), (5, 7), (5, 7)]
    assert tuples(quads[3].source_regions) == [(7, 5, 7, 5), (114, 60, 14, 10)]


# -- tree ------------------------------------------------------------------


def test_small_image_is_a_single_leaf():
    root = build_patch_tree(solid(300, 300, 50), 336)
    assert root.is_leaf and count_nodes(root) == 1


def test_uniform_image_collapses_to_a_chain():
    root = build_patch_tree(solid(1344, 1344, 255), 336, 0.1, 4)
    assert len(root.children) == 1
    child = root.children[0]
    assert child.patch.width == 672 and len(child.patch.source_regions) == 4
    assert len(child.children) == 1
    leaf = child.children[0]
    assert leaf.is_leaf and leaf.patch.width == 336
    assert len(leaf.patch.source_regions) == 16
    assert root.depth() == 3  # root, 672, 336: two levels below the root


def test_distinct_quadrants_give_four_children():
    img = np.zeros((1344, 1344, 3), np.uint8)
    img[:672, :672] = (255, 0, 0)
    img[:672, 672:] = (0, 255, 0)
    img[672:, :672] = (0, 0, 255)
    img[672:, 672:] = (0, 0, 0)
    root = build_patch_tree(PatchImage.from_array(img), 336, 0.1)
    assert len(root.children) == 4
    assert [c.patch.source_regions[0].as_tuple() for c in root.children] == [
        (0, 0, 672, 672), (672, 0, 672, 672), (0, 672, 672, 672), (672, 672, 672, 672)
    ]


def test_max_depth_zero_stops_at_root():
    root = build_patch_tree(solid(1000, 1000, 9), 336, 0.1, max_depth=0)
    assert root.is_leaf


def test_tree_source_regions_tile_the_image():
    rng = np.random.default_rng(1)
    img = PatchImage.from_array(random_blocky_image(rng, 1344))
    root = build_patch_tree(img, 336, 0.1)
    for node in root.walk():
        if node.is_leaf:
            continue
        below = sorted(r.as_tuple() for c in node.children for r in c.patch.source_regions)
        expected = sorted(q.as_tuple() for r in node.patch.source_regions for q in _split(r))
        assert below == expected


def _split(r):
    from dc2.geometry import split_region
    return split_region(r)


def test_tree_is_deterministic():
    rng = np.random.default_rng(2)
    pixels = random_blocky_image(rng, 1344)
    a = build_patch_tree(PatchImage.from_array(pixels), 336, 0.1)
    b = build_patch_tree(PatchImage.from_array(pixels.copy()), 336, 0.1)
    assert [tuples(n.patch.source_regions) for n in a.walk()] == [tuples(n.patch.source_regions) for n in b.walk()]
    assert all(np.array_equal(x.patch.pixels, y.patch.pixels) for x, y in zip(a.walk(), b.walk()))


def test_node_count_non_increasing_in_theta():
    thetas = [0.0, 0.05, 0.1, 0.2, 0.3, 2.0]
    rng = np.random.default_rng(20)
    for _ in range(20):
        img = PatchImage.from_array(random_blocky_image(rng, 1344))
        counts = [count_nodes(build_patch_tree(img, 336, t)) for t in thetas]
        assert counts == sorted(counts, reverse=True), counts
        assert counts[-1] == 3  # everything merges: root, one 672 node, one leaf


def test_empty_image_rejected():
    with pytest.raises(ValueError):
        PatchImage.from_array(np.zeros((0, 5, 3), np.uint8))
