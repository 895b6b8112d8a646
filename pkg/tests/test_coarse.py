"""Coarse-space construction, rotation enrichment, and the coarse operator."""

import numpy as np
import pytest
import scipy.sparse as sp

from mselast.assembly import CoefficientField, assemble_elasticity, rigid_body_modes
from mselast.coarse import (
    CoarseBasis,
    assemble_coarse_operator,
    build_coarse_basis_elasticity,
    build_coarse_basis_heat,
    enrich_rotations,
)
from mselast.coefficients import generate_coefficient
from mselast.grid import (
    build_coarse_partition,
    build_fine_mesh,
    build_partition_of_unity,
)
from mselast.schwarz import EigOptions, build_coarse_space, get_variant


def setup_problem(nx=40, Nx=4, eta=1.0, include_boundary=False, dirichlet=True):
    mesh = build_fine_mesh(nx, nx)
    part = build_coarse_partition(mesh, Nx, Nx, include_boundary=include_boundary)
    pou = build_partition_of_unity(part)
    coeff = generate_coefficient("channels-and-inclusions", mesh, eta)
    nodes = mesh.boundary_nodes() if dirichlet else ()
    op = assemble_elasticity(mesh, coeff, nodes)
    return mesh, part, pou, coeff, nodes, op


def coarse_space(tag, problem, n_max, rule=None):
    mesh, part, pou, coeff, nodes, op = problem
    opts = EigOptions(n_max=n_max, rule=rule)
    basis, counts, _ = build_coarse_space(
        get_variant(tag), op, mesh, part, coeff, nodes, opts, pou
    )
    return basis


class TestCoarseDimensions:
    def test_elasticity_three_modes_per_node_is_243(self):
        # 10x10 coarse grid, 81 interior nodes x 3 modes
        problem = setup_problem(nx=100, Nx=10)
        basis = coarse_space("EE;Rand", problem, n_max=3)
        assert basis.N_c == 243
        assert basis.kind == "E"
        assert all(c == 3 for c in basis.modes_per_center)

    def test_heat_single_mode_162_and_enriched_243(self):
        problem = setup_problem(nx=100, Nx=10)
        basis = coarse_space("EH", problem, n_max=1, rule="fixed")
        assert basis.N_c == 162  # 81 nodes x 1 mode x 2 components
        mesh, part, pou, coeff, nodes, op = problem
        enriched = enrich_rotations(basis, op, mesh, part, pou)
        assert enriched.N_c == 243
        assert enriched.kind == "H+Rot"

    def test_gram_rank_full(self):
        problem = setup_problem(nx=20, Nx=2, eta=1e4)
        basis = coarse_space("EE", problem, n_max=4)
        assert basis.gram_rank() == basis.N_c


class TestBasisStructure:
    def test_support_inside_neighborhood(self):
        mesh, part, pou, coeff, nodes, op = problem = setup_problem(nx=30, Nx=3)
        basis = coarse_space("EE", problem, n_max=2)
        # rows are grouped by center, modes_per_center modes each
        row = 0
        for center, patch in enumerate(part.neighborhoods):
            inside = set(patch.node_ids(mesh))
            free = op.free_dofs
            for _ in range(basis.modes_per_center[center]):
                vec = basis.R0[row].toarray().ravel()
                for dof in np.nonzero(vec)[0]:
                    node = free[dof] % mesh.n_nodes
                    assert node in inside
                row += 1

    def test_heat_slots_are_componentwise(self):
        mesh, part, pou, coeff, nodes, op = problem = setup_problem(nx=20, Nx=2)
        basis = coarse_space("EH", problem, n_max=1, rule="fixed")
        n_free_x = int(np.searchsorted(op.free_dofs, mesh.n_nodes))
        # per center: x-slot row then y-slot row
        x_row = basis.R0[0].toarray().ravel()
        y_row = basis.R0[1].toarray().ravel()
        assert np.all(x_row[n_free_x:] == 0.0)
        assert np.all(y_row[:n_free_x] == 0.0)

    def test_rotation_vanishes_at_own_coarse_node(self):
        mesh, part, pou, coeff, nodes, op = problem = setup_problem(nx=20, Nx=2)
        basis = coarse_space("EH", problem, n_max=1, rule="fixed")
        enriched = enrich_rotations(basis, op, mesh, part, pou)
        free_index = op.free_index()
        rot = enriched.R0[basis.N_c].toarray().ravel()  # first enrichment row
        cx, cy = part.coarse_node_coords(0)
        node = mesh.node_id(round(cx / mesh.h), round(cy / mesh.h))
        for dof in (free_index[node], free_index[node + mesh.n_nodes]):
            if dof >= 0:
                assert rot[dof] == 0.0

    def test_double_enrichment_rejected(self):
        mesh, part, pou, coeff, nodes, op = problem = setup_problem(nx=20, Nx=2)
        basis = coarse_space("EH", problem, n_max=1, rule="fixed")
        enriched = enrich_rotations(basis, op, mesh, part, pou)
        with pytest.raises(ValueError):
            enrich_rotations(enriched, op, mesh, part, pou)


class TestCoarseOperator:
    def test_symmetric_and_dimension(self):
        problem = setup_problem(nx=20, Nx=2, eta=1e4)
        basis = coarse_space("EE", problem, n_max=3)
        op = problem[-1]
        K0 = assemble_coarse_operator(op, basis).K0
        assert np.array_equal(K0, K0.T)
        assert K0.shape == (basis.N_c, basis.N_c)

    def test_identity_basis_reproduces_operator(self):
        mesh, part, pou, coeff, nodes, op = setup_problem(nx=10, Nx=2)
        eye = CoarseBasis(sp.identity(op.n_free, format="csr"), "E", [])
        K0 = assemble_coarse_operator(op, eye).K0
        assert np.allclose(K0, op.matrix.toarray(), atol=1e-15)

    def test_rank_deficient_basis_rejected(self):
        mesh, part, pou, coeff, nodes, op = setup_problem(nx=10, Nx=2)
        row = sp.csr_matrix(np.ones((2, op.n_free)))  # duplicated row
        with pytest.raises(ValueError):
            assemble_coarse_operator(op, CoarseBasis(row, "E", []))

    def test_galerkin_optimality(self, rng):
        mesh, part, pou, coeff, nodes, op = problem = setup_problem(nx=20, Nx=2)
        basis = coarse_space("EE", problem, n_max=3)
        coarse = assemble_coarse_operator(op, basis)
        f = rng.standard_normal(op.n_free)
        u0 = coarse.R0.T @ coarse.solve(coarse.R0 @ f)
        A = op.matrix
        u = np.linalg.solve(A.toarray(), f)

        def energy_err(v):
            d = u - v
            return d @ (A @ d)

        base = energy_err(u0)
        for _ in range(20):
            w = rng.standard_normal(basis.N_c)
            assert energy_err(u0 + 1e-3 * (coarse.R0.T @ w)) >= base - 1e-12 * base


class TestRbmCapture:
    """Reproduction of the localized rigid modes chi_l * RBM(omega_l).

    These are exactly the near-kernel components a robust coarse space must
    carry: the elasticity-eigenvector basis contains them by construction,
    the heat basis only reaches the translations (its scalar modes are
    constants here), and rotation enrichment restores the missing mode.
    """

    def build_unconstrained(self, tag, n_max, rule):
        mesh = build_fine_mesh(20, 20)
        part = build_coarse_partition(mesh, 4, 4)
        pou = build_partition_of_unity(part)
        coeff = generate_coefficient("homogeneous", mesh, 1.0)
        op = assemble_elasticity(mesh, coeff, ())
        basis, _, _ = build_coarse_space(
            get_variant(tag), op, mesh, part, coeff, (), EigOptions(n_max=n_max, rule=rule), pou
        )
        return mesh, part, pou, basis

    def localized_rbm_residuals(self, mesh, part, pou, basis):
        R0 = basis.R0.toarray()
        worst = [0.0, 0.0, 0.0]
        coords = mesh.node_coords()
        for center in range(part.n_neighborhoods):
            chi = np.zeros(mesh.n_nodes)
            chi[pou.node_ids[center]] = pou.values[center]
            rbm = rigid_body_modes(coords, center=part.coarse_node_coords(center))
            for mode in range(3):
                target = np.concatenate(
                    [chi * rbm[: mesh.n_nodes, mode], chi * rbm[mesh.n_nodes :, mode]]
                )
                coef, *_ = np.linalg.lstsq(R0.T, target, rcond=None)
                res = np.linalg.norm(R0.T @ coef - target) / np.linalg.norm(target)
                worst[mode] = max(worst[mode], res)
        return worst  # x-translation, y-translation, rotation

    def test_elasticity_kind_captures_all_rigid_modes(self):
        mesh, part, pou, basis = self.build_unconstrained("EE", n_max=3, rule="fixed")
        assert max(self.localized_rbm_residuals(mesh, part, pou, basis)) <= 1e-8

    def test_heat_plus_rot_captures_all_rigid_modes(self):
        mesh, part, pou, basis = self.build_unconstrained("EH+Rot", n_max=1, rule="fixed")
        assert max(self.localized_rbm_residuals(mesh, part, pou, basis)) <= 1e-8

    def test_heat_without_enrichment_misses_rotation(self):
        mesh, part, pou, basis = self.build_unconstrained("EH", n_max=1, rule="fixed")
        res = self.localized_rbm_residuals(mesh, part, pou, basis)
        assert max(res[:2]) <= 1e-8  # translations still fine
        assert res[2] > 1e-3  # the localized rotation is not representable
