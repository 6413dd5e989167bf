import numpy as np
import pytest

from grainconc import _cover


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Trigger numba compilation once so timed tests measure runtime only."""
    pts = np.zeros((2, 2))
    centers = np.zeros((1, 2))
    _cover.count_cover_balls(pts, centers, np.ones(1))
    _cover.count_cover_boxes(pts, centers, np.ones((1, 2)))
    _cover.union_length_1d(np.array([0.0]), np.array([1.0]), 0.0, 2.0)
    _cover.once_length_1d(np.array([0.0]), np.array([1.0]), 0.0, 2.0)
    _cover.ball_box_overlaps(
        np.zeros((1, 2)), np.ones(1), np.zeros((4, 2)), np.zeros(2), np.ones(2), np.pi
    )
