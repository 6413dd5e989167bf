"""Backend equivalence: the numba kernels must match the numpy reference."""

import os
import subprocess
import sys

import numpy as np
import pytest

from grainconc import _accel, _cover

needs_numba = pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")


@pytest.fixture
def geometry():
    rng = np.random.default_rng(3)
    points = rng.uniform(-1.0, 11.0, size=(5000, 2))
    centers = rng.uniform(0.0, 10.0, size=(40, 2))
    radii = rng.uniform(0.2, 1.5, size=40)
    halves = rng.uniform(0.1, 1.0, size=(40, 2))
    return points, centers, radii, halves


@needs_numba
def test_count_cover_balls_matches(geometry):
    points, centers, radii, _ = geometry
    a = _cover.count_cover_balls_numpy(points, centers, radii)
    b = _cover.count_cover_balls_numba(points, centers, radii)
    assert np.array_equal(a, b)


@needs_numba
def test_count_cover_boxes_matches(geometry):
    points, centers, _, halves = geometry
    a = _cover.count_cover_boxes_numpy(points, centers, halves)
    b = _cover.count_cover_boxes_numba(points, centers, halves)
    assert np.array_equal(a, b)


@needs_numba
def test_union_and_once_match():
    rng = np.random.default_rng(11)
    starts = rng.uniform(-2.0, 10.0, size=3000)
    ends = starts + rng.uniform(0.0, 2.0, size=3000)
    for lo, hi in ((0.0, 10.0), (-5.0, 3.0)):
        assert _cover.union_length_1d_numpy(starts, ends, lo, hi) == pytest.approx(
            _cover.union_length_1d_numba(starts, ends, lo, hi), rel=1e-12
        )
        assert _cover.once_length_1d_numpy(starts, ends, lo, hi) == pytest.approx(
            _cover.once_length_1d_numba(starts, ends, lo, hi), rel=1e-12, abs=1e-12
        )


@needs_numba
def test_ball_box_overlaps_match():
    rng = np.random.default_rng(5)
    centers = rng.uniform(-1.0, 11.0, size=(500, 2))
    radii = rng.uniform(0.3, 1.2, size=500)
    unit = 2.0 * rng.random((128, 2)) - 1.0
    unit = unit[(unit**2).sum(axis=1) <= 1.0]
    lo = np.zeros(2)
    hi = np.full(2, 10.0)
    a = _cover.ball_box_overlaps_numpy(centers, radii, unit, lo, hi, np.pi)
    b = _cover.ball_box_overlaps_numba(centers, radii, unit, lo, hi, np.pi)
    assert np.allclose(a, b, rtol=1e-12)


def test_empty_grain_lists():
    points = np.zeros((5, 2))
    assert np.array_equal(_cover.count_cover_balls(points, np.zeros((0, 2)), np.zeros(0)), np.zeros(5, dtype=np.int64))
    assert _cover.union_length_1d(np.zeros(0), np.zeros(0), 0.0, 1.0) == 0.0
    assert _cover.once_length_1d(np.zeros(0), np.zeros(0), 0.0, 1.0) == 0.0


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, GRAINCONC_NO_NUMBA="1")
    code = (
        "from grainconc import _accel, _cover;"
        "assert not _accel.NUMBA_ACTIVE;"
        "assert _cover.count_cover_balls is _cover.count_cover_balls_numpy"
    )
    subprocess.run([sys.executable, "-c", code], check=True, env=env)
