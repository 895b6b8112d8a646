"""Local generalized eigenproblems on coarse-node neighborhoods.

Each neighborhood gets a Neumann problem (Dirichlet only where it touches the
globally clamped boundary): elasticity K phi = lambda M phi with the mass
weighted by E, or the scalar diffusion analogue weighted by kappa.  A dense
reference solver and the randomized snapshot solver are provided, plus the
mode-count selection rules.
"""

import warnings
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import assembly
from .grid import FineMesh


@dataclass
class LocalEigProblem:
    """Stiffness/mass pair on a neighborhood patch, restricted to free dofs."""

    K: sp.csr_matrix
    M: sp.csr_matrix
    kind: str  # 'elasticity' | 'diffusion'
    patch_mesh: FineMesh
    free_dofs: np.ndarray  # patch-local dof ids kept after Dirichlet elimination
    n_full: int

    @property
    def dim(self):
        return self.K.shape[0]

    def kernel_basis(self):
        """Near-null candidates on free dofs: RBMs (elasticity) or constants."""
        coords = self.patch_mesh.node_coords()
        center = coords.mean(axis=0)
        if self.kind == "elasticity":
            Z = assembly.rigid_body_modes(coords, center)
        else:
            Z = np.ones((self.patch_mesh.n_nodes, 1))
        return Z[self.free_dofs]


@dataclass
class EigSelection:
    """Ascending generalized eigenpairs, M-orthonormal vectors as columns."""

    eigenvalues: np.ndarray
    vectors: np.ndarray
    kind: str
    problem: LocalEigProblem
    rule: str = "none"

    @property
    def n_sel(self):
        return self.eigenvalues.size


def build_local_eigproblem(mesh, coeff, patch, kind, dirichlet_nodes=()):
    """Assemble the neighborhood eigenproblem for one patch.

    Homogeneous Neumann on the patch boundary except where patch nodes
    coincide with globally constrained nodes (Dirichlet there).
    """
    pnx, pny = patch.shape
    pmesh = FineMesh(pnx, pny, mesh.h)
    evals = coeff.values.reshape(mesh.ny, mesh.nx)[
        patch.ey0 : patch.ey1, patch.ex0 : patch.ex1
    ].ravel()

    global_ids = patch.node_ids(mesh)
    constrained = np.isin(global_ids, np.asarray(dirichlet_nodes, dtype=np.int64))
    local_dirichlet = np.nonzero(constrained)[0]

    if kind == "elasticity":
        coeff_local = assembly.CoefficientField(evals, coeff.nu, coeff.E_min, coeff.E_max)
        K_op = assembly.assemble_elasticity(pmesh, coeff_local, local_dirichlet)
        M_op = assembly.assemble_weighted_mass(pmesh, evals, "elasticity", local_dirichlet)
    elif kind == "diffusion":
        K_op = assembly.assemble_diffusion(pmesh, evals, local_dirichlet)
        M_op = assembly.assemble_weighted_mass(pmesh, evals, "diffusion", local_dirichlet)
    else:
        raise ValueError(f"unknown eigenproblem kind {kind!r}")
    return LocalEigProblem(
        K_op.matrix, M_op.matrix, kind, pmesh, K_op.free_dofs, K_op.n_full
    )


def solve_local_eig_dense(prob, k):
    """First k generalized eigenpairs via a dense solver (the oracle path)."""
    if k > prob.dim:
        raise ValueError(f"requested {k} modes from a {prob.dim}-dof problem")
    w, v = sla.eigh(
        prob.K.toarray(), prob.M.toarray(), subset_by_index=[0, k - 1]
    )
    return EigSelection(w, v, prob.kind, prob)


def solve_local_eig_randomized(prob, k, n_snapshots=None, seed=0, n_passes=4):
    """Randomized snapshot approximation of the first k eigenpairs.

    Draw zero-mean random forcings orthogonal to the near-null space, run a
    few passes of block inverse iteration with the shift-regularized operator
    (re-orthogonalizing the block between passes), enrich the snapshot span
    with the RBMs (or constants), orthonormalize by SVD, and solve the reduced
    eigenproblem.  Eigenvalues are Rayleigh-Ritz values, hence upper bounds of
    the dense ones.  The kernel component is deflated after every solve: the
    tiny shift amplifies any round-off in the near-null directions by ~1/sigma,
    which would otherwise swamp the snapshots.
    """
    if n_snapshots is None:
        n_snapshots = k + 5
    if n_snapshots < k:
        raise ValueError("need at least k snapshots")
    if n_passes < 1:
        raise ValueError("need at least one inverse-iteration pass")
    rng = np.random.default_rng(seed)

    n = prob.dim
    Z = prob.kernel_basis()
    MZ = prob.M @ Z
    G = Z.T @ MZ
    F = rng.uniform(-1.0, 1.0, size=(n, n_snapshots))
    F = F - MZ @ np.linalg.solve(G, Z.T @ F)

    def deflate(X):
        return X - Z @ np.linalg.solve(G, MZ.T @ X)

    sigma = 1e-8 * (prob.K.diagonal().sum() / n)
    lu = spla.splu((prob.K + sigma * prob.M).tocsc())
    U = deflate(lu.solve(F))
    for _ in range(n_passes - 1):
        U, _ = np.linalg.qr(U)
        U = deflate(lu.solve(prob.M @ U))

    W = np.hstack([U, Z])
    norms = np.linalg.norm(W, axis=0)
    norms[norms == 0.0] = 1.0
    Q, s, _ = np.linalg.svd(W / norms, full_matrices=False)
    keep = s > 1e-10 * s[0]
    if not np.all(keep):
        warnings.warn(
            f"snapshot basis rank-deficient: {keep.sum()}/{keep.size} kept",
            stacklevel=2,
        )
    Q = Q[:, keep]

    Kr = Q.T @ (prob.K @ Q)
    Mr = Q.T @ (prob.M @ Q)
    Kr = 0.5 * (Kr + Kr.T)
    Mr = 0.5 * (Mr + Mr.T)
    w, v = sla.eigh(Kr, Mr)
    m = min(k, w.size)
    return EigSelection(w[:m], Q @ v[:, :m], prob.kind, prob)


def select_modes(sel, n_max, rule="fixed", gap_threshold=50.0):
    """Keep a prefix of the eigenpairs.

    rule='fixed' keeps min(n_max, available).  rule='gap' (heat kind only)
    keeps everything below the last significant relative gap within the first
    n_max + 1 eigenvalues: the largest i <= n_max with
    lambda_{i+1} / max(lambda_i, eps) >= gap_threshold, at least 1 mode.
    """
    if n_max < 1:
        raise ValueError("mode cap must be >= 1")
    lam = sel.eigenvalues
    if rule == "fixed":
        n = min(n_max, lam.size)
    elif rule == "gap":
        if sel.kind == "elasticity":
            raise ValueError("gap rule is not reliable for elasticity eigenproblems")
        window = lam[: min(n_max + 1, lam.size)]
        eps = 1e-14 * abs(window[-1]) if window[-1] != 0 else 1e-300
        n = 1
        for i in range(1, window.size):
            if window[i] / max(window[i - 1], eps) >= gap_threshold:
                n = i
        n = min(n, n_max)
    else:
        raise ValueError(f"unknown selection rule {rule!r}")
    return replace(sel, eigenvalues=lam[:n], vectors=sel.vectors[:, :n], rule=rule)
