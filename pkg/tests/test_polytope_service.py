import numpy as np
import pytest

from polyapprox.exceptions import EmptyPolytopeError, UnboundedPolytopeError, UsageError, ZeroRowError
from polyapprox.models import Polytope
from polyapprox.services import polytope_service


def test_normalize_rows():
    P = polytope_service.normalize_rows(Polytope.unscaled([[2.0, 0.0], [0.0, 3.0]], [2.0, 6.0]))
    np.testing.assert_allclose(np.linalg.norm(P.A, axis=1), 1.0)
    np.testing.assert_allclose(P.b, [1.0, 2.0])


def test_normalize_rows_rejects_zero_row():
    with pytest.raises(ZeroRowError) as err:
        polytope_service.normalize_rows(Polytope.unscaled([[1.0, 0.0], [0.0, 0.0]], [1.0, 1.0]))
    assert err.value.row == 1


class TestSupportAndProjection:
    def test_support(self, unit_square):
        np.testing.assert_allclose(polytope_service.support_pt(unit_square, [1.0, 1.0]), [1.0, 1.0], atol=1e-12)
        np.testing.assert_allclose(polytope_service.support_pt(unit_square, [-1.0, 0.5]), [0.0, 1.0], atol=1e-12)

    def test_unbounded(self):
        with pytest.raises(UnboundedPolytopeError):
            polytope_service.support_pt(Polytope.unscaled([[1.0, 0.0], [0.0, 1.0]], [1.0, 1.0]), [-1.0, 0.0])

    def test_empty(self):
        with pytest.raises(EmptyPolytopeError):
            polytope_service.support_pt(Polytope.unscaled([[1.0], [-1.0]], [0.0, -1.0]), [1.0])

    def test_dimension_mismatch(self, unit_square):
        with pytest.raises(UsageError):
            polytope_service.support_pt(unit_square, [1.0, 0.0, 0.0])

    def test_projection(self, unit_square):
        np.testing.assert_allclose(polytope_service.project_pt(unit_square, [2.0, 2.0]), [1.0, 1.0], atol=1e-8)
        np.testing.assert_allclose(polytope_service.project_pt(unit_square, [0.5, -3.0]), [0.5, 0.0], atol=1e-8)


def test_active_at(unit_square):
    assert polytope_service.active_at(unit_square, [1.0, 1.0]).indices == [0, 2]
    assert polytope_service.active_at(unit_square, [0.5, 0.5]).indices == []
    assert polytope_service.active_at(unit_square, [0.0, 1.0 - 1e-7]).indices == [1, 2]


def test_contains(unit_square):
    assert polytope_service.contains(unit_square, [0.3, 1.0])
    assert not polytope_service.contains(unit_square, [0.3, 1.01])


@pytest.mark.parametrize('A, bounded', [
    ([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]], True),
    ([[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]], True),
    ([[1.0, 0.0], [0.0, 1.0]], False),
    ([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]], False),
])
def test_is_bounded(A, bounded):
    assert polytope_service.is_bounded(A) is bounded


def test_is_bounded_matches_the_angular_gap(rng):
    # planar rows bound a polygon exactly when no angular gap between them reaches pi
    for _ in range(50):
        angles = np.sort(rng.uniform(0, 2 * np.pi, rng.integers(3, 6)))
        gaps = np.diff(np.r_[angles, angles[0] + 2 * np.pi])
        if np.min(np.abs(gaps - np.pi)) < 1e-3:
            continue
        A = np.column_stack([np.cos(angles), np.sin(angles)])
        assert polytope_service.is_bounded(A) is bool(gaps.max() < np.pi)


class TestRepair:
    def test_nonempty_is_untouched(self, unit_square):
        P, inflation = polytope_service.repair_nonempty(unit_square)
        assert P is unit_square
        assert inflation == 0.0

    def test_collapsed_polytope_is_inflated(self):
        P, inflation = polytope_service.repair_nonempty(Polytope.unscaled([[1.0], [-1.0]], [0.0, -1.0]))
        assert inflation == pytest.approx(0.5 + polytope_service.REPAIR_MARGIN)
        np.testing.assert_allclose(P.b, np.array([0.0, -1.0]) + inflation)
        assert P.b[0] + P.b[1] >= 0


class TestInitialDirections:
    def test_axes(self, rng):
        np.testing.assert_array_equal(polytope_service.initial_directions(2, 4, 'axes', rng),
                                      [[1, 0], [-1, 0], [0, 1], [0, -1]])

    def test_axes_with_extra_rows(self, rng):
        A = polytope_service.initial_directions(2, 6, 'axes', rng)
        assert A.shape == (6, 2)
        np.testing.assert_array_equal(A[:4], [[1, 0], [-1, 0], [0, 1], [0, -1]])
        np.testing.assert_allclose(np.linalg.norm(A, axis=1), 1.0)

    def test_axes_fall_back_to_random_when_unbounded(self, rng):
        A = polytope_service.initial_directions(2, 3, 'axes', rng)
        assert A.shape == (3, 2)
        assert polytope_service.is_bounded(A)

    def test_rotated(self, rng):
        A = polytope_service.initial_directions(3, 6, 'rotated', rng)
        np.testing.assert_allclose(A[1], -A[0])
        np.testing.assert_allclose(A[0] @ A[2], 0.0, atol=1e-12)
        np.testing.assert_allclose(np.linalg.norm(A, axis=1), 1.0)

    def test_random(self, rng):
        A = polytope_service.initial_directions(3, 8, 'random', rng)
        np.testing.assert_allclose(np.linalg.norm(A, axis=1), 1.0)
        assert polytope_service.is_bounded(A)

    def test_too_few_rows(self, rng):
        with pytest.raises(UsageError):
            polytope_service.initial_directions(3, 3, 'axes', rng)

    def test_unknown_mode(self, rng):
        with pytest.raises(UsageError):
            polytope_service.initial_directions(2, 4, 'sobol', rng)


class TestHitAndRun:
    def test_samples_stay_inside(self, unit_square, rng):
        samples = polytope_service.hit_and_run(unit_square, 400, rng, burn_in=100)
        assert samples.shape == (400, 2)
        assert np.all(unit_square.A @ samples.T <= unit_square.b[:, None] + 1e-9)
        np.testing.assert_allclose(samples.mean(axis=0), [0.5, 0.5], atol=0.1)

    def test_thinning(self, unit_square, rng):
        assert polytope_service.hit_and_run(unit_square, 10, rng, burn_in=5, thin=3).shape == (10, 2)

    def test_flat_polytope(self, rng):
        flat = Polytope.unscaled([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]], [0.0, 0.0, 1.0, 0.0])
        with pytest.raises(EmptyPolytopeError):
            polytope_service.hit_and_run(flat, 5, rng)


def test_to_raw(box_rows):
    P = Polytope(box_rows, np.array([1.0, 0.0, 1.0, 0.0]), np.array([2.0, 4.0]), np.array([1.0, 0.0]))
    raw = P.to_raw()
    assert raw.is_unscaled
    np.testing.assert_allclose(raw.A, box_rows)
    np.testing.assert_allclose(raw.b, [3.0, -1.0, 4.0, 0.0])
