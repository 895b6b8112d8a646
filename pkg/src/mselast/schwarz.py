"""Two-level additive Schwarz preconditioners for the elasticity operator.

Level 1 solves local Dirichlet problems on the overlapping subdomains (which
coincide with the coarse-node neighborhoods); either restrictions of the full
elasticity matrix or, for the heat-block variants, one scalar diffusion
factorization applied independently to the x- and y-displacement blocks.
Level 2 is the factorized spectral coarse space; both levels act additively
on the same residual.  All seven named variants share this machinery and
differ only in the level-1 kind and in how the coarse space is built.
"""

import time
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from . import assembly, coarse, spectral
from .grid import build_partition_of_unity


@dataclass(frozen=True)
class PreconditionerVariant:
    tag: str
    level1: str  # 'elasticity' | 'heat'
    eig_kind: str | None  # 'elasticity' | 'heat' | None (no coarse space)
    randomized: bool
    enrich: bool


VARIANTS = {
    v.tag: v
    for v in [
        PreconditionerVariant("EE", "elasticity", "elasticity", False, False),
        PreconditionerVariant("EE;Rand", "elasticity", "elasticity", True, False),
        PreconditionerVariant("HH", "heat", "heat", False, False),
        PreconditionerVariant("HH+Rot", "heat", "heat", False, True),
        PreconditionerVariant("EH", "elasticity", "heat", False, False),
        PreconditionerVariant("EH+Rot", "elasticity", "heat", False, True),
        PreconditionerVariant("EH+Rot;Rand", "elasticity", "heat", True, True),
    ]
}


def get_variant(tag):
    try:
        return VARIANTS[tag]
    except KeyError:
        raise ValueError(f"unknown preconditioner variant {tag!r}; "
                         f"choose from {sorted(VARIANTS)}") from None


@dataclass
class EigOptions:
    n_max: int = 6
    rule: str | None = None  # None -> 'fixed' for elasticity, 'gap' for heat
    n_snapshots: int | None = None  # None -> n_max + 5
    seed: int = 0


class TwoLevelPreconditioner:
    """Additive combination of factorized local solves and the coarse solve."""

    def __init__(self, variant, level1_solvers, coarse_op, n_free, info):
        self.variant = variant
        self._level1 = level1_solvers  # list of (free-index array, solver)
        self.coarse = coarse_op
        self.n_free = n_free
        self.info = info  # build metadata: timings, coarse dim, mode counts

    @property
    def coarse_dim(self):
        return 0 if self.coarse is None else self.coarse.dim

    def apply(self, r):
        if r.shape[0] != self.n_free:
            raise ValueError("residual dimension mismatch")
        z = np.zeros_like(r)
        for idx, solve in self._level1:
            z[idx] += solve(r[idx])
        if self.coarse is not None:
            z += self.coarse.apply_inverse(r)
        return z


class IdentityPreconditioner:
    """The 'None' variant: plain CG."""

    coarse_dim = 0
    info = {}

    def apply(self, r):
        return r


def _subdomain_elasticity_solvers(op, mesh, part):
    free_index = op.free_index()
    solvers = []
    for patch in part.neighborhoods:
        nodes = patch.interior_node_ids(mesh)
        idx = np.concatenate([free_index[nodes], free_index[nodes + mesh.n_nodes]])
        idx = idx[idx >= 0]
        if idx.size == 0:
            warnings.warn("subdomain with no free dofs skipped", stacklevel=2)
            continue
        K_i = op.matrix[idx][:, idx].tocsc()
        solvers.append((idx, spla.splu(K_i).solve))
    return solvers


def _subdomain_heat_solvers(op, mesh, part, coeff, dirichlet_nodes):
    """One scalar diffusion factorization per subdomain, shared by both blocks.

    Relies on the component-grouped free-dof layout: because whole nodes are
    constrained, free x-dofs and free y-dofs enumerate the same node set.
    """
    D_op = assembly.assemble_diffusion(mesh, coeff.values, dirichlet_nodes)
    n_free_nodes = D_op.n_free
    scalar_index = D_op.free_index()
    solvers = []
    for patch in part.neighborhoods:
        nodes = patch.interior_node_ids(mesh)
        sidx = scalar_index[nodes]
        sidx = sidx[sidx >= 0]
        if sidx.size == 0:
            warnings.warn("subdomain with no free dofs skipped", stacklevel=2)
            continue
        H_i = D_op.matrix[sidx][:, sidx].tocsc()
        lu = spla.splu(H_i)
        idx = np.concatenate([sidx, sidx + n_free_nodes])

        def solve(r, lu=lu, m=sidx.size):
            out = np.empty_like(r)
            out[:m] = lu.solve(r[:m])
            out[m:] = lu.solve(r[m:])
            return out

        solvers.append((idx, solve))
    return solvers


def build_coarse_space(variant, op, mesh, part, coeff, dirichlet_nodes, opts, pou=None):
    """Eigenproblems, mode selection and basis for one variant's coarse level.

    Returns (CoarseBasis, per-center mode counts, eigensolver wall time).
    """
    if pou is None:
        pou = build_partition_of_unity(part)
    kind = "elasticity" if variant.eig_kind == "elasticity" else "diffusion"
    rule = opts.rule or ("fixed" if kind == "elasticity" else "gap")
    t0 = time.perf_counter()
    selections = []
    for center, patch in enumerate(part.neighborhoods):
        prob = spectral.build_local_eigproblem(mesh, coeff, patch, kind, dirichlet_nodes)
        k = min(opts.n_max + 1, prob.dim)
        if variant.randomized:
            n_snap = opts.n_snapshots or (opts.n_max + 5)
            sel = spectral.solve_local_eig_randomized(
                prob, k, n_snapshots=min(n_snap, prob.dim), seed=[opts.seed, center]
            )
        else:
            sel = spectral.solve_local_eig_dense(prob, k)
        selections.append(spectral.select_modes(sel, opts.n_max, rule=rule))
    t_eig = time.perf_counter() - t0

    if kind == "elasticity":
        basis = coarse.build_coarse_basis_elasticity(op, mesh, part, pou, selections)
    else:
        basis = coarse.build_coarse_basis_heat(op, mesh, part, pou, selections)
        if variant.enrich:
            basis = coarse.enrich_rotations(basis, op, mesh, part, pou)
    return basis, [s.n_sel for s in selections], t_eig


def build_preconditioner(tag, op, mesh, part, coeff, dirichlet_nodes, opts=None):
    """Build a Table-style two-level preconditioner by variant name.

    ``op`` is the assembled elasticity operator on free dofs, ``part`` the
    coarse partition whose neighborhoods double as the overlapping subdomains.
    """
    if tag == "None":
        return IdentityPreconditioner()
    variant = get_variant(tag)
    opts = opts or EigOptions()

    t0 = time.perf_counter()
    if variant.level1 == "elasticity":
        level1 = _subdomain_elasticity_solvers(op, mesh, part)
    else:
        level1 = _subdomain_heat_solvers(op, mesh, part, coeff, dirichlet_nodes)
    t_level1 = time.perf_counter() - t0

    pou = build_partition_of_unity(part)
    t0 = time.perf_counter()
    basis, mode_counts, t_eig = build_coarse_space(
        variant, op, mesh, part, coeff, dirichlet_nodes, opts, pou
    )
    coarse_op = coarse.assemble_coarse_operator(op, basis)
    t_coarse = time.perf_counter() - t0

    info = {
        "t_level1": t_level1,
        "t_coarse": t_coarse,
        "t_eig": t_eig,
        "coarse_dim": basis.N_c,
        "mode_counts": mode_counts,
        "basis_kind": basis.kind,
        "selection_rule": opts.rule or ("fixed" if variant.eig_kind == "elasticity" else "gap"),
    }
    return TwoLevelPreconditioner(variant, level1, coarse_op, op.n_free, info)


class BlockSplitPreconditioner:
    """Exact displacement-splitting preconditioner diag(K_xx, K_yy).

    One global factorization per displacement block, no domain decomposition;
    its PCG condition number is bounded by 2 / (1 - nu/(1-nu)).
    """

    coarse_dim = 0
    info = {}

    def __init__(self, op, mesh):
        n_nodes = mesh.n_nodes
        self.m = int(np.searchsorted(op.free_dofs, n_nodes))
        A = op.matrix
        self.lu_xx = spla.splu(A[: self.m][:, : self.m].tocsc())
        self.lu_yy = spla.splu(A[self.m :][:, self.m :].tocsc())

    def apply(self, r):
        out = np.empty_like(r)
        out[: self.m] = self.lu_xx.solve(r[: self.m])
        out[self.m :] = self.lu_yy.solve(r[self.m :])
        return out


def block_split_condition_bound(nu):
    """2 / (1 - nu_tilde) with nu_tilde = nu / (1 - nu)."""
    if not (0 <= nu < 0.5):
        raise ValueError(f"Poisson ratio {nu} outside [0, 0.5)")
    return 2.0 / (1.0 - nu / (1.0 - nu))
