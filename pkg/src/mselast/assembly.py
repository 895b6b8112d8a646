"""Q1 finite element assembly on the structured mesh.

Provides the plane-stress elasticity operator, the scalar diffusion operator,
weighted mass matrices, load vectors, and the SIMP / density-filter pipeline.
Dirichlet conditions are imposed by dof elimination; the operators act on the
remaining free dofs.  Element integrals use 2x2 Gauss quadrature, which is
exact for bilinear shape functions on square elements.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp


# ---------------------------------------------------------------------------
# coefficient and load descriptions


@dataclass
class CoefficientField:
    """Per-element modulus E_e with bounds and Poisson ratio."""

    values: np.ndarray  # (n_elements,) row-major
    nu: float
    E_min: float
    E_max: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        if self.E_min <= 0:
            raise ValueError("E_min must be positive")
        tol = 1e-12 * self.E_max
        if self.values.min() < self.E_min - tol or self.values.max() > self.E_max + tol:
            raise ValueError("element moduli out of [E_min, E_max]")

    @property
    def contrast(self):
        return self.E_max / self.E_min

    def to_text(self, path, mesh):
        np.savetxt(path, self.values.reshape(mesh.ny, mesh.nx))

    @classmethod
    def from_text(cls, path, nu, E_min=None, E_max=None):
        vals = np.loadtxt(path).ravel()
        if E_min is None:
            E_min = float(vals.min())
        if E_max is None:
            E_max = float(vals.max())
        return cls(vals, nu, E_min, E_max)


@dataclass
class LoadSpec:
    """Point loads (node, component, magnitude) plus optional uniform body force."""

    point_loads: list = field(default_factory=list)
    body_force: tuple | None = None  # (fx, fy) per unit area


def build_load_vector(mesh, load):
    f = np.zeros(mesh.n_dofs)
    for node, comp, mag in load.point_loads:
        if not (0 <= node < mesh.n_nodes) or comp not in (0, 1):
            raise ValueError(f"invalid point load ({node}, {comp})")
        f[node + comp * mesh.n_nodes] += mag
    if load.body_force is not None:
        fx, fy = load.body_force
        me = mass_element_scalar(mesh.h)
        nodal = np.zeros(mesh.n_nodes)
        np.add.at(nodal, mesh.element_nodes().ravel(),
                  np.tile(me.sum(axis=1), mesh.n_elements))
        f[: mesh.n_nodes] += fx * nodal
        f[mesh.n_nodes:] += fy * nodal
    return f


# ---------------------------------------------------------------------------
# element matrices (square elements; 2x2 Gauss)


def _gauss2():
    a = 0.5 - 0.5 / np.sqrt(3.0)
    b = 0.5 + 0.5 / np.sqrt(3.0)
    return [(x, y) for x in (a, b) for y in (a, b)]


def _dshape(xi, eta):
    """Reference derivatives of the 4 bilinear shape functions (unit square)."""
    return np.array(
        [
            [-(1 - eta), (1 - eta), eta, -eta],
            [-(1 - xi), -xi, xi, (1 - xi)],
        ]
    )


@lru_cache(maxsize=None)
def _unit_elasticity_element(nu):
    """8x8 plane-stress element stiffness, E=1, unit square, component-grouped."""
    C = np.array([[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, (1.0 - nu) / 2.0]]) / (
        1.0 - nu * nu
    )
    K = np.zeros((8, 8))
    for xi, eta in _gauss2():
        dN = _dshape(xi, eta)
        B = np.zeros((3, 8))
        B[0, :4] = dN[0]
        B[1, 4:] = dN[1]
        B[2, :4] = dN[1]
        B[2, 4:] = dN[0]
        K += 0.25 * B.T @ C @ B
    # enforce bitwise symmetry (matmul rounding makes K[i,j] != K[j,i] at ~1e-18)
    return 0.5 * (K + K.T)


def element_stiffness_elasticity(E, nu, h=1.0):
    """Plane-stress Q1 element stiffness on a square of side h.

    In 2D the matrix is independent of h; the argument is kept for interface
    symmetry with the mass matrices.  Ordering: [x1..x4, y1..y4], corners
    counterclockwise from the lower-left.
    """
    if E <= 0:
        raise ValueError("modulus must be positive")
    if not (0 <= nu < 0.5):
        raise ValueError(f"Poisson ratio {nu} outside [0, 0.5)")
    return E * _unit_elasticity_element(float(nu))


@lru_cache(maxsize=None)
def laplace_element_scalar():
    """4x4 scalar Q1 Laplacian element (unit conductivity, h-independent)."""
    A = np.zeros((4, 4))
    for xi, eta in _gauss2():
        dN = _dshape(xi, eta)
        A += 0.25 * (np.outer(dN[0], dN[0]) + np.outer(dN[1], dN[1]))
    return A


def mass_element_scalar(h):
    """4x4 scalar Q1 mass element on a square of side h (exact)."""
    return (h * h / 36.0) * np.array(
        [[4.0, 2.0, 1.0, 2.0], [2.0, 4.0, 2.0, 1.0], [1.0, 2.0, 4.0, 2.0], [2.0, 1.0, 2.0, 4.0]]
    )


# ---------------------------------------------------------------------------
# global operators


@dataclass
class SymmetricSparseOperator:
    """Symmetric sparse operator restricted to free dofs.

    ``free_dofs`` indexes into the full dof vector (length ``n_full``);
    ``matrix`` is the SPD restriction after Dirichlet elimination.
    """

    matrix: sp.csr_matrix
    free_dofs: np.ndarray
    n_full: int

    @property
    def n_free(self):
        return self.free_dofs.size

    def free_index(self):
        """Map full dof id -> free index (-1 if constrained)."""
        idx = np.full(self.n_full, -1, dtype=np.int64)
        idx[self.free_dofs] = np.arange(self.n_free)
        return idx

    def expand(self, x_free):
        x = np.zeros(self.n_full)
        x[self.free_dofs] = x_free
        return x

    def restrict(self, x_full):
        return x_full[self.free_dofs]


def _assemble(element_dofs, element_mats, n_dofs, free_dofs):
    n_el, width = element_dofs.shape
    rows = np.repeat(element_dofs, width, axis=1).ravel()
    cols = np.tile(element_dofs, (1, width)).ravel()
    A = sp.coo_matrix(
        (element_mats.ravel(), (rows, cols)), shape=(n_dofs, n_dofs)
    ).tocsr()
    # mirror: duplicate summation order is not bit-stable across (i,j)/(j,i)
    A = 0.5 * (A + A.T)
    if free_dofs.size == 0:
        raise ValueError("empty free-dof set")
    return SymmetricSparseOperator(A[free_dofs][:, free_dofs].tocsr(), free_dofs, n_dofs)


def vector_dirichlet_dofs(mesh, nodes):
    nodes = np.asarray(nodes, dtype=np.int64)
    return np.concatenate([nodes, nodes + mesh.n_nodes])


def _free_from_constrained(n_dofs, constrained):
    return np.setdiff1d(np.arange(n_dofs), np.asarray(constrained, dtype=np.int64))


def assemble_elasticity(mesh, coeff, dirichlet_nodes):
    """Assemble the plane-stress operator on free dofs.

    ``dirichlet_nodes`` are clamped in both components.  Dof ordering groups
    components: all x-displacements first, so the operator has the block form
    [[K_xx, K_xy], [K_xy^T, K_yy]].
    """
    if coeff.values.size != mesh.n_elements:
        raise ValueError("coefficient field does not match mesh")
    Ke = _unit_elasticity_element(float(coeff.nu))
    mats = coeff.values[:, None, None] * Ke[None, :, :]
    free = _free_from_constrained(mesh.n_dofs, vector_dirichlet_dofs(mesh, dirichlet_nodes))
    return _assemble(mesh.element_dofs(), mats, mesh.n_dofs, free)


def assemble_diffusion(mesh, kappa, dirichlet_nodes):
    """Scalar Q1 Laplacian weighted by the per-element conductivity."""
    kappa = np.asarray(kappa, dtype=float).ravel()
    if kappa.size != mesh.n_elements:
        raise ValueError("conductivity field does not match mesh")
    if kappa.min() <= 0:
        raise ValueError("conductivity must be positive")
    Ae = laplace_element_scalar()
    mats = kappa[:, None, None] * Ae[None, :, :]
    free = _free_from_constrained(mesh.n_nodes, np.asarray(dirichlet_nodes, dtype=np.int64))
    return _assemble(mesh.element_nodes(), mats, mesh.n_nodes, free)


def assemble_weighted_mass(mesh, weight, kind, dirichlet_nodes=()):
    """Mass matrix with element integrals weighted by the coefficient.

    kind='diffusion' gives the scalar matrix; kind='elasticity' the
    block-diagonal two-component version (both components share the weight).
    """
    weight = np.asarray(weight, dtype=float).ravel()
    if weight.size != mesh.n_elements:
        raise ValueError("weight field does not match mesh")
    if weight.min() <= 0:
        raise ValueError("weight must be positive")
    Me = mass_element_scalar(mesh.h)
    mats = weight[:, None, None] * Me[None, :, :]
    if kind == "diffusion":
        free = _free_from_constrained(mesh.n_nodes, np.asarray(dirichlet_nodes, dtype=np.int64))
        return _assemble(mesh.element_nodes(), mats, mesh.n_nodes, free)
    if kind == "elasticity":
        zero = np.zeros_like(mats)
        big = np.block([[mats, zero], [zero, mats]])
        free = _free_from_constrained(
            mesh.n_dofs, vector_dirichlet_dofs(mesh, np.asarray(dirichlet_nodes, dtype=np.int64))
        )
        return _assemble(mesh.element_dofs(), big, mesh.n_dofs, free)
    raise ValueError(f"unknown mass kind {kind!r}")


def rigid_body_modes(coords, center=(0.0, 0.0)):
    """Columns: x-translation, y-translation, rotation about ``center``.

    ``coords`` is (n_nodes, 2); output rows are component-grouped dofs.
    """
    n = coords.shape[0]
    Z = np.zeros((2 * n, 3))
    Z[:n, 0] = 1.0
    Z[n:, 1] = 1.0
    Z[:n, 2] = -(coords[:, 1] - center[1])
    Z[n:, 2] = coords[:, 0] - center[0]
    return Z


# ---------------------------------------------------------------------------
# SIMP and density filtering


def simp_modulus(rho_f, p, E_min, E_max):
    """E = E_min + rho^p (E_max - E_min)."""
    rho_f = np.asarray(rho_f, dtype=float)
    if rho_f.min() < -1e-12 or rho_f.max() > 1 + 1e-12:
        raise ValueError("density out of [0, 1]")
    if p < 1:
        raise ValueError("penalization exponent must be >= 1")
    return E_min + np.clip(rho_f, 0.0, 1.0) ** p * (E_max - E_min)


class DensityFilter:
    """Linear (cone) density filter with row-normalized weights.

    rho_f = W rho with w_ek = max(0, r - dist(centroid_e, centroid_k)).
    ``adjoint`` applies W^T, the chain-rule map for sensitivities when the
    filtered field is the physical one.
    """

    def __init__(self, mesh, radius):
        if radius < 0:
            raise ValueError("filter radius must be nonnegative")
        self.mesh = mesh
        self.radius = float(radius)
        nx, ny, h = mesh.nx, mesh.ny, mesh.h
        reach = int(np.ceil(radius / h)) - 1 if radius > 0 else 0
        reach = max(reach, 0)
        rows, cols, vals = [], [], []
        offs = [
            (di, dj)
            for di in range(-reach, reach + 1)
            for dj in range(-reach, reach + 1)
            if radius - h * np.hypot(di, dj) > 0
        ]
        if not offs:
            offs = [(0, 0)]
        ii = np.tile(np.arange(nx), ny)
        jj = np.repeat(np.arange(ny), nx)
        e = jj * nx + ii
        for di, dj in offs:
            ik, jk = ii + di, jj + dj
            ok = (ik >= 0) & (ik < nx) & (jk >= 0) & (jk < ny)
            w = max(radius - h * np.hypot(di, dj), 0.0) if radius > 0 else 1.0
            rows.append(e[ok])
            cols.append((jk * nx + ik)[ok])
            vals.append(np.full(ok.sum(), w))
        W = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(mesh.n_elements, mesh.n_elements),
        ).tocsr()
        rowsum = np.asarray(W.sum(axis=1)).ravel()
        self.W = (sp.diags(1.0 / rowsum) @ W).tocsr()

    def apply(self, rho):
        return self.W @ np.asarray(rho, dtype=float).ravel()

    def adjoint(self, v):
        return self.W.T @ np.asarray(v, dtype=float).ravel()


def density_filter(mesh, rho, radius):
    """One-shot filter application (builds the weight matrix internally)."""
    return DensityFilter(mesh, radius).apply(rho)
