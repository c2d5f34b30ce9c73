import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from splinetrack.boundary import (
    EmptyRegionError,
    LabelMaskSequence,
    MaskFormatError,
    Structure,
    build_candidate_set,
    extract_boundary_candidates,
    load_mask_sequence,
    nearest,
    sequence_candidates,
    write_mask_sequence,
)
from splinetrack.kdtree import KdTree, linear_scan_nearest
from splinetrack.pgm import PGMFormatError, encode_pgm, parse_pgm, read_pgm, write_pgm
from splinetrack.synth import PhantomConfig, generate_annulus_phantom

from .oracles import brute_force_boundary


def as_set(points):
    return {tuple(p) for p in np.asarray(points).tolist()}


# --- PGM -------------------------------------------------------------------


def test_pgm_roundtrip(tmp_path, rng):
    img = rng.integers(0, 4, size=(7, 11)).astype(np.uint8)
    write_pgm(tmp_path / "a.pgm", img)
    np.testing.assert_array_equal(read_pgm(tmp_path / "a.pgm"), img)


def test_pgm_header_comments():
    data = b"P5\n# made by hand\n3 2\n# max\n255\n" + bytes([0, 1, 2, 3, 2, 1])
    np.testing.assert_array_equal(parse_pgm(data), [[0, 1, 2], [3, 2, 1]])


@pytest.mark.parametrize(
    "data",
    [b"P2\n1 1\n255\n0", b"P5\n2 2\n255\n\x00", b"P5\n2 2\n65535\n" + b"\x00" * 8, b"P5\n2"],
)
def test_pgm_rejects_bad_files(data):
    with pytest.raises(PGMFormatError):
        parse_pgm(data)


def test_encode_pgm_header():
    assert encode_pgm(np.zeros((2, 3), dtype=np.uint8)).startswith(b"P5\n3 2\n255\n")


# --- loading ---------------------------------------------------------------


def test_load_phantom_directory(tmp_path):
    masks, _ = generate_annulus_phantom(PhantomConfig(n_frames=25))
    write_mask_sequence(tmp_path, masks)
    loaded = load_mask_sequence(tmp_path)
    assert loaded.n_frames == 25
    assert (loaded.width, loaded.height) == (128, 128)
    for a, b in zip(masks.frames, loaded.frames):
        np.testing.assert_array_equal(a, b)


def test_load_reads_meta(tmp_path):
    frames = [np.zeros((4, 4), np.uint8)] * 2
    write_mask_sequence(tmp_path, LabelMaskSequence(frames, (0.7, 0.8), 33.0))
    loaded = load_mask_sequence(tmp_path)
    assert loaded.pixel_spacing == (0.7, 0.8)
    assert loaded.frame_interval_ms == 33.0


def test_load_meta_defaults(tmp_path):
    for t in range(2):
        write_pgm(tmp_path / f"frame_{t:04d}.pgm", np.zeros((3, 3), np.uint8))
    loaded = load_mask_sequence(tmp_path)
    assert loaded.pixel_spacing == (1.0, 1.0)
    assert loaded.frame_interval_ms == 0.0


def test_load_empty_directory(tmp_path):
    with pytest.raises(OSError):
        load_mask_sequence(tmp_path)


def test_load_gap_names_first_missing(tmp_path):
    for t in (0, 1, 3, 5):
        write_pgm(tmp_path / f"frame_{t:04d}.pgm", np.zeros((3, 3), np.uint8))
    with pytest.raises(OSError, match="missing frame index 2"):
        load_mask_sequence(tmp_path)


def test_load_bad_label_reports_location(tmp_path):
    bad = np.zeros((5, 6), np.uint8)
    bad[3, 4] = 7
    write_pgm(tmp_path / "frame_0000.pgm", np.zeros((5, 6), np.uint8))
    write_pgm(tmp_path / "frame_0001.pgm", bad)
    with pytest.raises(MaskFormatError, match="row 3, column 4"):
        load_mask_sequence(tmp_path)


def test_load_inconsistent_dimensions(tmp_path):
    write_pgm(tmp_path / "frame_0000.pgm", np.zeros((5, 6), np.uint8))
    write_pgm(tmp_path / "frame_0001.pgm", np.zeros((6, 5), np.uint8))
    with pytest.raises(MaskFormatError, match="dimensions"):
        load_mask_sequence(tmp_path)


def test_sequence_needs_two_frames():
    with pytest.raises(MaskFormatError):
        LabelMaskSequence([np.zeros((3, 3), np.uint8)])


# --- boundary extraction ---------------------------------------------------


def test_block_boundary_is_ring():
    mask = np.zeros((7, 7), np.uint8)
    mask[2:5, 2:5] = 2
    pts = extract_boundary_candidates(mask, Structure.LV_ENDO)
    assert len(pts) == 8
    assert (3.5, 3.5) not in as_set(pts)


def test_single_pixel():
    mask = np.zeros((5, 5), np.uint8)
    mask[1, 3] = 3
    np.testing.assert_array_equal(extract_boundary_candidates(mask, Structure.RV_ENDO), [[3.5, 1.5]])


def test_row_major_order():
    mask = np.zeros((6, 6), np.uint8)
    mask[1:5, 1:5] = 2
    pts = extract_boundary_candidates(mask, Structure.LV_ENDO)
    keys = [(y, x) for x, y in pts]
    assert keys == sorted(keys)


def test_empty_region():
    assert extract_boundary_candidates(np.zeros((5, 5), np.uint8), Structure.LV_ENDO).shape == (0, 2)


def test_region_touching_border():
    mask = np.full((3, 3), 2, np.uint8)
    assert len(extract_boundary_candidates(mask, Structure.LV_ENDO)) == 8


def test_largest_component_only():
    mask = np.zeros((20, 20), np.uint8)
    mask[2:10, 2:10] = 2
    mask[15, 15] = 2
    mask[15:17, 2] = 2
    pts = extract_boundary_candidates(mask, Structure.LV_ENDO)
    assert len(pts) == 28
    assert (15.5, 15.5) not in as_set(pts)


def test_diagonal_pixels_are_separate_components():
    mask = np.zeros((6, 6), np.uint8)
    mask[1:3, 1:3] = 2
    mask[3, 3] = 2
    assert len(extract_boundary_candidates(mask, Structure.LV_ENDO)) == 4


@pytest.mark.parametrize("structure", list(Structure))
def test_phantom_boundary_matches_brute_force(structure):
    masks, _ = generate_annulus_phantom(PhantomConfig(amplitude=0.25, rv_enabled=True))
    from splinetrack.boundary import largest_component

    for t in (0, 12):
        frame = masks.frames[t]
        pts = extract_boundary_candidates(frame, structure)
        ref = brute_force_boundary(largest_component(structure.region(frame)))
        assert len(pts) == len(ref)
        assert as_set(pts) == as_set(ref)


def test_interior_pixels_absent(rng):
    masks, _ = generate_annulus_phantom(PhantomConfig(amplitude=0.1))
    frame = masks.frames[5]
    region = Structure.LV_EPI.region(frame)
    pts = as_set(extract_boundary_candidates(frame, Structure.LV_EPI))
    rows, cols = np.nonzero(region[1:-1, 1:-1] & region[:-2, 1:-1] & region[2:, 1:-1] & region[1:-1, :-2] & region[1:-1, 2:])
    for r, c in zip(rows + 1, cols + 1):
        assert (c + 0.5, r + 0.5) not in pts


def test_epicardium_ignores_internal_interface():
    masks, truth = generate_annulus_phantom(PhantomConfig(amplitude=0.0))
    pts = extract_boundary_candidates(masks.frames[0], Structure.LV_EPI)
    d = np.linalg.norm(pts - truth.center, axis=1)
    assert d.min() > truth.endo_radii[0] + 1
    assert np.all(d <= truth.epi_radii[0])


@settings(max_examples=30, deadline=None)
@given(st.integers(-5, 5), st.integers(-5, 5), st.integers(0, 2**31))
def test_translation_equivariance(dx, dy, seed):
    rng = np.random.default_rng(seed)
    mask = np.zeros((40, 40), np.uint8)
    mask[12:28, 12:28] = (rng.random((16, 16)) < 0.8) * 2
    shifted = np.roll(np.roll(mask, dy, axis=0), dx, axis=1)
    a = extract_boundary_candidates(mask, Structure.LV_ENDO)
    b = extract_boundary_candidates(shifted, Structure.LV_ENDO)
    np.testing.assert_array_equal(a + [dx, dy], b)


def test_sequence_candidates_empty_frame():
    frames = [np.full((8, 8), 2, np.uint8), np.zeros((8, 8), np.uint8)]
    with pytest.raises(EmptyRegionError) as info:
        sequence_candidates(LabelMaskSequence(frames), Structure.LV_ENDO)
    assert info.value.frame == 1


# --- Kd-tree ----------------------------------------------------------------


def test_single_point_tree():
    cs = build_candidate_set([(3.0, 4.0)], 0)
    assert cs.index.depth == 0
    np.testing.assert_array_equal(nearest(cs, (100.0, -7.0)), [3.0, 4.0])


def test_empty_candidate_set():
    with pytest.raises(ValueError):
        build_candidate_set(np.zeros((0, 2)), 3)


def test_tree_conserves_points(rng):
    pts = rng.uniform(0, 100, size=(257, 2))
    tree = KdTree(pts)
    assert len(tree) == 257
    assert sorted(tree._index) == list(range(257))


def test_nearest_examples():
    cs = build_candidate_set([(0.0, 0.0), (10.0, 0.0)], 0)
    np.testing.assert_array_equal(nearest(cs, (4.0, 0.0)), [0.0, 0.0])
    np.testing.assert_array_equal(nearest(cs, (5.0, 0.0)), [0.0, 0.0])
    np.testing.assert_array_equal(nearest(cs, (6.0, 0.0)), [10.0, 0.0])


def test_tie_break_prefers_smaller_row():
    cs = build_candidate_set([(5.0, 6.0), (6.0, 5.0), (4.0, 5.0), (5.0, 4.0)], 0)
    np.testing.assert_array_equal(nearest(cs, (5.0, 5.0)), [5.0, 4.0])
    cs = build_candidate_set([(6.0, 5.0), (4.0, 5.0)], 0)
    np.testing.assert_array_equal(nearest(cs, (5.0, 5.0)), [4.0, 5.0])


def test_kdtree_matches_linear_scan_random(rng):
    pts = rng.uniform(0, 128, size=(1000, 2))
    tree = KdTree(pts)
    queries = rng.uniform(-20, 148, size=(1000, 2))
    found = tree.query(queries)
    for i, q in zip(found, queries):
        assert i == linear_scan_nearest(pts, q)


def test_kdtree_matches_linear_scan_grid_ties(rng):
    cells = rng.choice(64 * 64, size=600, replace=False)
    pts = np.stack([cells % 64 + 0.5, cells // 64 + 0.5], axis=1)
    tree = KdTree(pts)
    queries = rng.integers(0, 129, size=(2000, 2)) / 2.0
    for q in queries:
        assert tree.nearest_index(*q) == linear_scan_nearest(pts, q)


def test_kdtree_duplicates(rng):
    pts = np.repeat(rng.uniform(0, 10, size=(20, 2)), 3, axis=0)
    tree = KdTree(pts)
    for q in rng.uniform(0, 10, size=(200, 2)):
        assert tree.nearest_index(*q) == linear_scan_nearest(pts, q)


def test_build_is_deterministic(rng):
    pts = rng.integers(0, 20, size=(300, 2)).astype(float)
    a, b = KdTree(pts), KdTree(pts)
    assert a._index == b._index and a._left == b._left and a._right == b._right
