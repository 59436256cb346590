"""Feature maps, the exact isometric reduction, and gradient back-projection."""

import numpy as np
import pytest

from spdalign.checks import central_difference, projected_distance_grads, relative_gap
from spdalign.distances import DistanceKind, dist_sq
from spdalign.errors import DimensionError, SingularityError
from spdalign.nystrom import Projection, backproject_grad, isometric_project, nystrom_map
from spdalign.scatter import FeatureBlock, mean_and_scatter
from spdalign.spd import regularize


def scatter_of(columns):
    return mean_and_scatter(
        FeatureBlock(columns, np.zeros(columns.shape[1], dtype=int))
    ).scatter


class TestNystromMap:
    def test_orthonormal_pivots_give_identity(self):
        z = np.eye(2)
        out = nystrom_map(z, z)
        assert np.abs(out - np.eye(2)).max() < 1e-9

    def test_self_pivots_reproduce_gram_exactly(self, rng):
        for _ in range(25):
            d = int(rng.integers(2, 9))
            n = int(rng.integers(1, d + 1))
            x = rng.normal(size=(d, n))
            mapped = nystrom_map(x, x)
            assert np.abs(mapped.T @ mapped - x.T @ x).max() <= 1e-10

    def test_single_pivot_hand_value(self):
        z = np.array([[1.0], [0.0]])
        x = np.eye(2)
        out = nystrom_map(z, x)
        assert out == pytest.approx(np.array([[1.0, 0.0]]), abs=1e-9)

    def test_duplicate_pivots_survive_jitter(self):
        # Rank-deficient PSD pivot kernels are exactly what the jitter rescues;
        # structure keeps the map bounded and the Gram reproduction tight.
        z = np.ones((3, 2))
        x = np.eye(3)
        out = nystrom_map(z, x)
        assert np.isfinite(out).all()
        assert np.abs(out.T @ out - (z.T @ x).T @ np.linalg.pinv(z.T @ z) @ (z.T @ x)).max() < 1e-6

    def test_indefinite_kernel_rejected(self):
        z = np.eye(2)
        with pytest.raises(SingularityError):
            nystrom_map(z, z, kernel=lambda a, b: -(a.T @ b))

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            nystrom_map(np.ones((2, 1)), np.ones((3, 1)))


class TestIsometricProject:
    def test_orthonormal_columns_give_identity_gram(self):
        phi_s = np.array([[1.0], [0.0], [0.0]])
        phi_t = np.array([[0.0], [1.0], [0.0]])
        red_s, red_t, proj = isometric_project(phi_s, phi_t)
        assert red_s == pytest.approx(np.array([[1.0], [0.0]]), abs=1e-12)
        assert red_t == pytest.approx(np.array([[0.0], [1.0]]), abs=1e-12)
        assert proj.reduced_dim == 2 and proj.ambient_dim == 3

    def test_gram_preserved(self, rng):
        for _ in range(25):
            d = int(rng.integers(4, 40))
            n_s = int(rng.integers(1, 5))
            n_t = int(rng.integers(1, 5))
            phi_s = rng.normal(size=(d, n_s))
            phi_t = rng.normal(size=(d, n_t))
            red_s, red_t, _ = isometric_project(phi_s, phi_t)
            x = np.concatenate([phi_s, phi_t], axis=1)
            y = np.concatenate([red_s, red_t], axis=1)
            assert np.abs(y.T @ y - x.T @ x).max() < 1e-9 * max(1.0, np.abs(x.T @ x).max())

    def test_single_column_reduces_to_norm(self, rng):
        v = rng.normal(size=(7, 1))
        red_s, red_t, _ = isometric_project(v, np.empty((7, 0)))
        assert red_s == pytest.approx(np.array([[np.linalg.norm(v)]]))
        assert red_t.shape == (1, 0)

    def test_projector_rows_orthonormal(self, rng):
        for _ in range(10):
            d = 64
            phi_s = rng.normal(size=(d, 5))
            phi_t = rng.normal(size=(d, 3))
            _, _, proj = isometric_project(phi_s, phi_t)
            gram = proj.projector @ proj.projector.T
            assert np.abs(gram - np.eye(proj.reduced_dim)).max() < 1e-7

    def test_rank_deficient_duplicate_columns(self):
        v = np.array([[1.0], [2.0]])
        phi_s = np.concatenate([v, v], axis=1)  # duplicated column
        red_s, red_t, proj = isometric_project(phi_s, np.empty((2, 0)))
        x = phi_s
        assert np.abs(red_s.T @ red_s - x.T @ x).max() < 1e-9
        assert np.isfinite(proj.projector).all()

    def test_isometry_of_distances_high_dimension(self, rng):
        # d = 512, N = 12, N* = 8, same eps on both sides, all three kinds.
        eps = 1e-6
        for _ in range(3):
            phi_s = rng.normal(size=(512, 12))
            phi_t = rng.normal(size=(512, 8))
            red_s, red_t, _ = isometric_project(phi_s, phi_t)
            for kind in DistanceKind:
                ambient = dist_sq(
                    kind,
                    regularize(scatter_of(phi_s), eps),
                    regularize(scatter_of(phi_t), eps),
                )
                reduced = dist_sq(
                    kind,
                    regularize(scatter_of(red_s), eps),
                    regularize(scatter_of(red_t), eps),
                )
                assert abs(ambient - reduced) <= 1e-7 * max(abs(ambient), abs(reduced))


class TestBackprojectGrad:
    def test_zero_gradient(self, rng):
        _, _, proj = isometric_project(rng.normal(size=(5, 2)), rng.normal(size=(5, 2)))
        out = backproject_grad(proj, np.zeros((4, 2)))
        assert np.abs(out).max() == 0.0

    def test_identity_projector_passthrough(self, rng):
        grad = rng.normal(size=(3, 4))
        proj = Projection(projector=np.eye(3))
        assert backproject_grad(proj, grad) == pytest.approx(grad)

    def test_dimension_mismatch(self, rng):
        _, _, proj = isometric_project(rng.normal(size=(5, 2)), rng.normal(size=(5, 2)))
        with pytest.raises(DimensionError):
            backproject_grad(proj, np.zeros((5, 2)))

    @pytest.mark.parametrize("kind", list(DistanceKind))
    def test_full_pipeline_matches_finite_differences(self, kind, rng):
        from spdalign.checks import _projected_distance

        worst = 0.0
        for _ in range(5):
            d = int(rng.integers(6, 12))
            n_s, n_t = 3, 2
            eps = float(10.0 ** rng.uniform(-3, -1))
            phi_s = rng.normal(size=(d, n_s))
            phi_t = rng.normal(size=(d, n_t))
            grad_s, grad_t = projected_distance_grads(kind, phi_s, phi_t, eps)
            fd_s = central_difference(
                lambda flat: _projected_distance(kind, flat.reshape(d, n_s), phi_t, eps), phi_s
            )
            fd_t = central_difference(
                lambda flat: _projected_distance(kind, phi_s, flat.reshape(d, n_t), eps), phi_t
            )
            worst = max(worst, relative_gap(grad_s, fd_s), relative_gap(grad_t, fd_t))
        assert worst < 1e-4
