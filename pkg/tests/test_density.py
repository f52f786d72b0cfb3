import numpy as np
import pytest

from sitopt import errors
from sitopt._kernels import numpy_backend
from sitopt.detect import dbscan_cluster, optics_cluster

from oracles import reference_dbscan, reference_optics, same_partition


def two_clumps(n_per=50, gap=50.0):
    """Two rings of evenly spaced points, far apart.

    Ring symmetry keeps within-clump reachability flat, so the density
    structure is exactly two clusters with a hard gap between them.
    """
    theta = np.linspace(0.0, 2.0 * np.pi, n_per, endpoint=False)
    ring = np.column_stack([np.cos(theta), np.sin(theta)])
    return np.vstack([ring, ring + gap])


class TestDbscan:
    def test_nothing_can_be_core(self):
        pts = np.arange(5, dtype=float)[:, None]
        out = dbscan_cluster(pts, eps=10.0, min_samples=10)
        assert (out.labels == -1).all()

    def test_two_clumps_two_clusters_no_noise(self):
        pts = two_clumps()
        out = dbscan_cluster(pts, eps=1.5, min_samples=5)
        reference = reference_dbscan(pts, 1.5, 5)
        assert same_partition(out.labels, reference)
        assert set(out.labels) == {0, 1}
        assert (out.labels[:50] == out.labels[0]).all()
        assert (out.labels[50:] == out.labels[50]).all()

    def test_clump_plus_outlier(self):
        pts = np.vstack([two_clumps()[:50], [[60.0, 60.0]]])
        out = dbscan_cluster(pts, eps=1.5, min_samples=5)
        assert same_partition(out.labels, reference_dbscan(pts, 1.5, 5))
        assert out.labels[-1] == -1
        assert (out.labels[:-1] == 0).all()

    def test_empty_input(self):
        with pytest.raises(errors.EmptyInputError):
            dbscan_cluster(np.empty((0, 2)), eps=1.0, min_samples=3)

    def test_neighborhood_is_inclusive_and_counts_self(self):
        # two points exactly eps apart, min_samples=2: both core, one cluster
        pts = np.array([[0.0], [1.0]])
        out = dbscan_cluster(pts, eps=1.0, min_samples=2)
        assert list(out.labels) == [0, 0]


class TestOptics:
    def test_identical_points_single_cluster(self):
        pts = np.zeros((12, 2))
        out = optics_cluster(pts, min_samples=5, min_cluster_size=5)
        assert (out.labels == 0).all()

    def test_two_clumps(self):
        pts = two_clumps()
        out = optics_cluster(pts, min_samples=5, min_cluster_size=5)
        assert same_partition(
            out.labels, reference_optics(pts, 5, 5)
        )
        non_noise = set(out.labels[out.labels >= 0])
        assert len(non_noise) == 2
        # each clump maps to one cluster
        assert len(set(out.labels[:50]) - {-1}) == 1
        assert len(set(out.labels[50:]) - {-1}) == 1

    def test_too_few_points_all_noise(self):
        pts = np.random.default_rng(1).normal(size=(4, 2))
        out = optics_cluster(pts, min_samples=5, min_cluster_size=5)
        assert (out.labels == -1).all()

    def test_clump_plus_outlier_is_noise(self):
        pts = np.vstack([two_clumps()[:50], [[60.0, 60.0]]])
        out = optics_cluster(pts, min_samples=5, min_cluster_size=5)
        assert same_partition(out.labels, reference_optics(pts, 5, 5))
        assert out.labels[-1] == -1

    def test_empty_input(self):
        with pytest.raises(errors.EmptyInputError):
            optics_cluster(np.empty((0, 2)), min_samples=3, min_cluster_size=3)


def random_instance(rng):
    """Blobs of varying tightness plus uniform background noise."""
    d = int(rng.integers(1, 4))
    n_blobs = int(rng.integers(1, 5))
    points = []
    for _ in range(n_blobs):
        center = rng.uniform(-10, 10, d)
        spread = rng.uniform(0.05, 0.6)
        count = int(rng.integers(5, 60))
        points.append(center + rng.normal(0, spread, (count, d)))
    points.append(rng.uniform(-12, 12, (int(rng.integers(0, 25)), d)))
    pts = np.vstack(points)[:200]
    return pts


class TestOracleEquivalence:
    def test_dbscan_matches_reference_on_random_instances(self):
        rng = np.random.default_rng(2024)
        for trial in range(50):
            pts = random_instance(rng)
            eps = float(rng.uniform(0.2, 1.5))
            min_samples = int(rng.integers(2, 12))
            ours = dbscan_cluster(pts, eps=eps, min_samples=min_samples).labels
            reference = reference_dbscan(pts, eps, min_samples)
            assert same_partition(ours, reference), f"trial {trial}"

    def test_optics_matches_reference_on_random_instances(self):
        rng = np.random.default_rng(999)
        for trial in range(50):
            pts = random_instance(rng)
            min_samples = int(rng.integers(3, 10))
            min_cluster_size = int(rng.integers(3, 15))
            ours = optics_cluster(
                pts, min_samples=min_samples, min_cluster_size=min_cluster_size
            ).labels
            reference = reference_optics(pts, min_samples, min_cluster_size)
            assert same_partition(ours, reference), f"trial {trial}"

    def test_density_reachability_invariant(self):
        # every clustered point is within eps of some core point of its cluster
        rng = np.random.default_rng(7)
        for _ in range(10):
            pts = random_instance(rng)
            eps, min_samples = float(rng.uniform(0.3, 1.2)), int(rng.integers(2, 8))
            labels = dbscan_cluster(pts, eps=eps, min_samples=min_samples).labels
            d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
            core = (d2 <= eps * eps).sum(1) >= min_samples
            for i, lab in enumerate(labels):
                if lab < 0:
                    continue
                mates = (labels == lab) & core
                assert (d2[i][mates] <= eps * eps).any()


class TestBackendAgreement:
    def test_dbscan_backends_identical(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            pts = random_instance(rng)
            eps, min_samples = float(rng.uniform(0.3, 1.2)), int(rng.integers(2, 10))
            from sitopt import _kernels

            a = _kernels.dbscan_labels(pts, eps, min_samples)
            b = numpy_backend.dbscan_labels(pts, eps, min_samples)
            assert (a == b).all()

    def test_optics_backends_identical(self):
        from sitopt import _kernels

        rng = np.random.default_rng(6)
        for _ in range(10):
            pts = random_instance(rng)
            min_samples = int(rng.integers(2, 10))
            order_a, reach_a, core_a = _kernels.optics_graph(pts, min_samples)
            order_b, reach_b, core_b = numpy_backend.optics_graph(pts, min_samples)
            assert (order_a == order_b).all()
            assert np.allclose(reach_a, reach_b, equal_nan=True)
            assert np.allclose(core_a, core_b, equal_nan=True)
