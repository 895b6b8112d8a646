"""Mesh, coarse partition, neighborhood and partition-of-unity tests."""

import numpy as np
import pytest

from mselast.grid import (
    CoarsePartition,
    build_coarse_partition,
    build_fine_mesh,
    build_partition_of_unity,
)


class TestFineMesh:
    def test_small_lattice_counts(self):
        mesh = build_fine_mesh(2, 2)
        assert mesh.n_nodes == 9
        assert mesh.n_elements == 4
        assert mesh.n_dofs == 18

    def test_10x10_counts(self):
        mesh = build_fine_mesh(10, 10)
        assert mesh.n_nodes == 121
        assert mesh.n_elements == 100

    def test_400x400_node_count(self):
        assert build_fine_mesh(400, 400).n_nodes == 160801

    @pytest.mark.parametrize("nx,ny", [(0, 4), (4, 0), (-1, 3)])
    def test_bad_counts_rejected(self, nx, ny):
        with pytest.raises(ValueError):
            build_fine_mesh(nx, ny)

    def test_element_nodes_counterclockwise(self):
        mesh = build_fine_mesh(2, 2)
        assert list(mesh.element_nodes()[0]) == [0, 1, 4, 3]

    def test_boundary_nodes(self):
        mesh = build_fine_mesh(3, 3)
        bn = set(mesh.boundary_nodes())
        assert bn == set(range(16)) - {5, 6, 9, 10}


class TestCoarsePartition:
    def test_100x100_over_10x10(self):
        mesh = build_fine_mesh(100, 100)
        part = build_coarse_partition(mesh, 10, 10)
        assert part.n_blocks == 100
        assert all(len(b) == 100 for b in part.blocks())
        assert part.n_neighborhoods == 81
        assert all(p.shape == (20, 20) for p in part.neighborhoods)

    def test_400x400_over_20x20_block_shape(self):
        mesh = build_fine_mesh(400, 400)
        part = build_coarse_partition(mesh, 20, 20)
        assert all(len(b) == 400 for b in part.blocks())

    def test_smallest_case_single_interior_node(self):
        mesh = build_fine_mesh(4, 4)
        part = build_coarse_partition(mesh, 2, 2)
        assert part.n_neighborhoods == 1
        omega = part.neighborhoods[0]
        assert omega.shape == (4, 4)  # covers the whole domain

    def test_non_nested_rejected(self):
        mesh = build_fine_mesh(10, 10)
        with pytest.raises(ValueError):
            build_coarse_partition(mesh, 3, 3)

    def test_blocks_partition_elements(self):
        mesh = build_fine_mesh(20, 20)
        part = build_coarse_partition(mesh, 4, 4)
        seen = np.concatenate(part.blocks())
        assert np.array_equal(np.sort(seen), np.arange(mesh.n_elements))

    def test_element_in_at_most_four_neighborhoods(self):
        mesh = build_fine_mesh(30, 30)
        part = build_coarse_partition(mesh, 6, 6)
        counts = np.zeros(mesh.n_elements, dtype=int)
        for p in part.neighborhoods:
            counts[p.element_ids(mesh)] += 1
        assert counts.max() <= 4

    def test_include_boundary_keeps_all_coarse_nodes(self):
        mesh = build_fine_mesh(20, 20)
        part = CoarsePartition(mesh, 4, 4, include_boundary=True)
        assert part.n_neighborhoods == 25


class TestPartitionOfUnity:
    def setup_method(self):
        self.mesh = build_fine_mesh(30, 30)
        self.part = build_coarse_partition(self.mesh, 6, 6)
        self.pou = build_partition_of_unity(self.part)

    def test_unit_value_at_own_coarse_node(self):
        coords = self.mesh.node_coords()
        for k in range(self.part.n_neighborhoods):
            chi = self.pou.dense(k)
            yk = self.part.coarse_node_coords(k)
            node = int(np.argmin(np.linalg.norm(coords - yk, axis=1)))
            assert chi[node] == pytest.approx(1.0, abs=1e-12)

    def test_sums_to_one_at_interior_nodes(self):
        total = self.pou.total()
        interior = np.setdiff1d(
            np.arange(self.mesh.n_nodes), self.mesh.boundary_nodes()
        )
        assert np.all(np.abs(total[interior] - 1.0) <= 1e-12)

    def test_bounded_and_supported_on_neighborhood(self):
        for k in range(self.part.n_neighborhoods):
            chi = self.pou.dense(k)
            assert chi.min() >= 0.0 and chi.max() <= 1.0 + 1e-12
            outside = np.setdiff1d(
                np.arange(self.mesh.n_nodes),
                self.part.neighborhoods[k].node_ids(self.mesh),
            )
            assert np.all(chi[outside] == 0.0)
