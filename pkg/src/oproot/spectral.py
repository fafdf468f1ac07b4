"""Non-Hermitian eigenstructure, Riesz projections and moment identities.

Everything here operates on the solved operator root: its eigenvalues are
the (possibly complex) points where the continued transfer function is
singular, the Riesz projections resolve the identity over eigenvalue
clusters, and the inverse-transfer moments recover the root and the
coupling operator Omega from circle integrals alone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from ._quad import cauchy_circle, integrate_path
from .contour import Contour, mirror, polyline_distance, certificate_scale, require_anchored
from .errors import (EigenvalueOnCircle, GapConditionViolated,
                     SingularTransferOnGamma, SpectrumTouchesContour)
from .model import ProblemInstance, problem_scale
from .transfer import m1_on_grid

__all__ = [
    "EigenCluster", "EigenStructure", "eigendecompose", "riesz_projection",
    "ProjectionFamily", "build_projection_family", "OmegaReport",
    "omega_operator", "inverse_transfer_moment", "moment_circles",
    "CompletenessReport", "completeness_report", "BasisFamilyReport",
    "basis_family_report", "spectrum_match_distance",
]


# ---------------------------------------------------------------------------
# eigenstructure

@dataclass(frozen=True)
class EigenCluster:
    value: complex
    multiplicity: int
    chains: tuple          # tuple of chains; each chain is a tuple of vectors
    residuals: tuple       # per-vector chain defects

    @property
    def vectors(self):
        return tuple(v for ch in self.chains for v in ch)


@dataclass(frozen=True)
class EigenStructure:
    clusters: tuple
    condition_number: float
    ill_conditioned: bool

    @property
    def eigenvalues(self):
        return tuple(c.value for c in self.clusters)

    @property
    def multiplicities(self):
        return tuple(c.multiplicity for c in self.clusters)

    def all_eigenvalues(self):
        """Eigenvalues repeated with algebraic multiplicity."""
        return tuple(c.value for c in self.clusters for _ in range(c.multiplicity))

    def vectors_matrix(self):
        cols = [v for c in self.clusters for v in c.vectors]
        return np.stack(cols, axis=1)


def _null_basis(a, tol):
    u, s, vh = np.linalg.svd(a)
    rank = int(np.sum(s > tol))
    return vh[rank:].conj().T


def _orthonormal(cols, tol):
    if not cols:
        return np.zeros((0, 0))
    a = np.stack(cols, axis=1)
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    rank = int(np.sum(s > tol * max(1.0, s[0] if len(s) else 1.0)))
    return u[:, :rank]


def _jordan_chains(h1, lam, mult, scale):
    """Chains [psi_1 .. psi_k] with (h1-lam) psi_i = psi_{i-1}, psi_0 = 0."""
    m = h1.shape[0]
    mm = h1 - lam * np.eye(m)
    tol = 1e-10 * scale
    powers = [np.eye(m)]
    nulls = [np.zeros((m, 0))]
    p = mult
    for k in range(1, mult + 1):
        powers.append(powers[-1] @ mm)
        smax = float(np.linalg.norm(powers[-1], 2))
        nb = _null_basis(powers[-1], max(tol, 1e-12 * smax))
        nulls.append(nb)
        if nb.shape[1] >= mult:
            p = k
            break
    dims = [nb.shape[1] for nb in nulls]
    chains = []
    for k in range(p, 0, -1):
        at_level = [ch[k - 1] for ch in chains if len(ch) >= k]
        occupied = _orthonormal([nulls[k - 1][:, j]
                                 for j in range(nulls[k - 1].shape[1])]
                                + at_level, 1e-12)
        needed = dims[k] - dims[k - 1] - len(at_level)
        if needed <= 0:
            continue
        cand = nulls[k]
        if occupied.shape[1]:
            proj = cand - occupied @ (occupied.conj().T @ cand)
        else:
            proj = cand
        u, s, _ = np.linalg.svd(proj, full_matrices=False)
        for j in range(needed):
            head = u[:, j]
            chain = [head]
            for _ in range(k - 1):
                chain.append(mm @ chain[-1])
            chain.reverse()
            nrm = max(float(np.linalg.norm(v)) for v in chain)
            chains.append([v / nrm for v in chain])
    residuals = []
    out_chains = []
    for chain in chains:
        res = [float(np.linalg.norm(mm @ chain[0]))] + [
            float(np.linalg.norm(mm @ chain[i] - chain[i - 1]))
            for i in range(1, len(chain))]
        residuals.append(tuple(res))
        out_chains.append(tuple(chain))
    return tuple(out_chains), tuple(residuals)


def eigendecompose(h1, *, scale: float | None = None) -> EigenStructure:
    """Complete root-vector system of a dense matrix (m <= 64).

    Eigenvalues are clustered at relative tolerance 1e-8 and generalized
    eigenvectors are extracted from staged kernels of (h1 - lam)^k.
    """
    h1 = np.asarray(h1, dtype=complex)
    m = h1.shape[0]
    if m > 64:
        raise ValueError("eigendecompose is a desk-scale routine (m <= 64)")
    if scale is None:
        scale = 1.0 + float(np.linalg.norm(h1, 2))
    vals = np.linalg.eigvals(h1)
    order = np.lexsort((vals.imag, vals.real))
    vals = vals[order]
    ctol = 1e-8 * scale
    groups = []
    for v in vals:
        placed = False
        for g in groups:
            if any(abs(v - w) <= ctol for w in g):
                g.append(v)
                placed = True
                break
        if not placed:
            groups.append([v])
    clusters = []
    for g in sorted(groups, key=lambda g: (np.mean(g).real, np.mean(g).imag)):
        lam = complex(np.mean(g))
        mult = len(g)
        if mult == 1:
            mm = h1 - lam * np.eye(m)
            _, s, vh = np.linalg.svd(mm)
            vec = vh[-1].conj()
            res = float(np.linalg.norm(mm @ vec))
            chains, residuals = ((vec,),), ((res,),)
        else:
            chains, residuals = _jordan_chains(h1, lam, mult, scale)
        clusters.append(EigenCluster(value=lam, multiplicity=mult,
                                     chains=chains, residuals=residuals))
    struct = EigenStructure(clusters=tuple(clusters), condition_number=math.nan,
                            ill_conditioned=False)
    v = struct.vectors_matrix()
    s = np.linalg.svd(v, compute_uv=False)
    cond = float(s[0] / s[-1]) if s[-1] > 0 else math.inf
    return EigenStructure(clusters=tuple(clusters), condition_number=cond,
                          ill_conditioned=cond > 1e12)


# ---------------------------------------------------------------------------
# Riesz projections

def riesz_projection(h1, center, radius, *, scale: float | None = None,
                     quad_order: int = 64, rtol: float = 1e-10) -> np.ndarray:
    """-(1/2pi i) integral of the resolvent around the circle."""
    h1 = np.asarray(h1, dtype=complex)
    m = h1.shape[0]
    if scale is None:
        scale = 1.0 + float(np.linalg.norm(h1, 2))
    eigs = np.linalg.eigvals(h1)
    gap = np.min(np.abs(np.abs(eigs - center) - radius))
    if gap < 1e-6 * scale:
        raise EigenvalueOnCircle(
            f"eigenvalue within {gap:.3e} of the circle |z-{center}|={radius}")
    eye = np.eye(m)

    def f(zs):
        a = h1[None] - zs[:, None, None] * eye
        return np.linalg.solve(a, np.broadcast_to(eye, a.shape).copy())

    return cauchy_circle(f, center, radius, rtol=rtol, start_n=quad_order)


@dataclass(frozen=True)
class ProjectionFamily:
    clusters: tuple        # index sets into the eigenvalue list
    circles: tuple         # (center, radius) per cluster, leading circle first
    projections: tuple
    cluster_radius: float
    i0: int                # first singleton position (1-based, distinct centers)
    ranks: tuple
    localized_counts: tuple


def build_projection_family(instance: ProblemInstance, root,
                            r: float) -> ProjectionFamily:
    """Leading circle over the head cluster plus radius-r circles per gap.

    Requires r > ||X|| and center gaps > 2r from the first singleton on.
    """
    x_norm = float(np.linalg.norm(root.x, 2))
    if not r > x_norm:
        raise ValueError(f"cluster radius {r} must exceed ||X|| = {x_norm:.6g}")
    lam = list(instance.a1_eigenvalues)
    scale = certificate_scale(instance, root.certificate)
    centers = []
    members = []
    for i, v in enumerate(lam):
        if centers and abs(v - centers[-1]) <= 1e-12 * scale:
            members[-1].append(i)
        else:
            centers.append(v)
            members.append([i])
    k = len(centers)
    gaps = [centers[i] - centers[i - 1] for i in range(1, k)]
    # i0 = first position from which every gap exceeds 2r (1-based centers)
    last_fail = 0
    for j, g in enumerate(gaps):
        if not g > 2.0 * r:
            last_fail = j + 2
    if k >= 2 and last_fail >= k:
        raise GapConditionViolated(
            f"gap {gaps[last_fail - 2]:.6g} at index {last_fail} is not above "
            f"2r = {2 * r:.6g}; no singleton tail exists", index=last_fail)
    i0 = max(2, last_fail + 1)
    head = [j for c in members[:i0 - 1] for j in c]
    circles = []
    clusters = []
    c0 = (centers[0] + centers[i0 - 2]) / 2.0
    rad0 = (centers[i0 - 2] - centers[0]) / 2.0 + r
    circles.append((complex(c0), float(rad0)))
    clusters.append(tuple(head))
    for i in range(i0 - 1, k):
        circles.append((complex(centers[i]), float(r)))
        clusters.append(tuple(members[i]))
    h1 = np.asarray(root.h1, dtype=complex)
    eigs = np.linalg.eigvals(h1)
    projections = []
    ranks = []
    counts = []
    for (c, rad) in circles:
        q = riesz_projection(h1, c, rad, scale=scale)
        projections.append(q)
        ranks.append(int(round(float(np.trace(q).real))))
        counts.append(int(np.sum(np.abs(eigs - c) < rad)))
    return ProjectionFamily(clusters=tuple(clusters), circles=tuple(circles),
                            projections=tuple(projections), cluster_radius=r,
                            i0=i0, ranks=tuple(ranks),
                            localized_counts=tuple(counts))


# ---------------------------------------------------------------------------
# Omega and the inverse-transfer moments

def moment_circles(instance: ProblemInstance, root):
    """Disjoint circles inside the half-vicinity enclosing the root spectrum."""
    d0 = root.certificate.d0
    rho = 0.49 * d0
    lam = sorted(set(instance.a1_eigenvalues))
    groups = [[lam[0]]]
    for v in lam[1:]:
        if v - groups[-1][-1] <= 2.0 * rho * 1.05:
            groups[-1].append(v)
        else:
            groups.append([v])
    out = []
    for g in groups:
        c = (g[0] + g[-1]) / 2.0
        out.append((complex(c), float((g[-1] - g[0]) / 2.0 + rho)))
    return tuple(out)


def inverse_transfer_moment(instance: ProblemInstance, contour: Contour,
                            root, k: int, *, circles=None,
                            rtol: float = 1e-10) -> np.ndarray:
    """-(1/2pi i) sum of circle integrals of z^k [M1(z,Gamma)]^(-1)."""
    require_anchored(instance, contour)
    if k not in (0, 1):
        raise ValueError("only moments k = 0, 1 are defined")
    if circles is None:
        circles = moment_circles(instance, root)
    scale = certificate_scale(instance, root.certificate)
    m = instance.dim_m
    floor = 1e-10 * scale

    def f(zs):
        m1 = m1_on_grid(instance, contour, zs, rtol=rtol)
        smin = np.linalg.svd(m1, compute_uv=False)[:, -1]
        if np.any(smin < floor):
            zbad = zs[int(np.argmin(smin))]
            raise SingularTransferOnGamma(
                f"transfer function singular at circle node {zbad}")
        rhs = (zs[:, None, None] ** k) * np.eye(m)
        return np.linalg.solve(m1, rhs)

    total = np.zeros((m, m), dtype=complex)
    for c, rad in circles:
        if contour.distance_to(c) <= rad:
            raise SpectrumTouchesContour(
                f"moment circle around {c} reaches the contour")
        total = total + cauchy_circle(f, c, rad, rtol=rtol)
    return total


@dataclass(frozen=True)
class OmegaReport:
    l: int
    omega: np.ndarray
    norm: float
    adjoint_defect: float
    moment0_defect: float
    moment1_defect: float
    reconstruction_defect: float
    spectrum_conjugation_defect: float


def _omega_on(instance, contour, left_star, right, rtol):
    eye = np.eye(instance.dim_m)
    sep = 1e-6 * problem_scale(instance)
    for mat, tag in ((left_star, "adjoint root"), (right, "root")):
        eigs = np.linalg.eigvals(mat)
        d = float(np.min(polyline_distance(eigs, contour.vertices)))
        if d <= sep:
            raise SpectrumTouchesContour(
                f"spectrum of the {tag} within {d:.3e} of the contour")

    def f(mu):
        kp = instance.kprime(mu)
        a_left = left_star[None] - mu[:, None, None] * eye
        lhs = np.linalg.solve(a_left, kp)
        a_right = right[None] - mu[:, None, None] * eye
        return np.linalg.solve(a_right.transpose(0, 2, 1),
                               lhs.transpose(0, 2, 1)).transpose(0, 2, 1)

    return integrate_path(contour.edges(), f, rtol=rtol,
                          order=contour.nodes_per_edge)


def spectrum_match_distance(eigs_a, eigs_b) -> float:
    """Optimal-matching distance between two eigenvalue multisets."""
    a = np.asarray(eigs_a, dtype=complex)
    b = np.asarray(eigs_b, dtype=complex)
    if a.shape != b.shape:
        raise ValueError("eigenvalue multisets must have equal cardinality")
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(np.max(cost[rows, cols])) if len(rows) else 0.0


def omega_operator(instance: ProblemInstance, contour: Contour,
                   root_plus, root_minus, *, rtol: float = 1e-10) -> OmegaReport:
    """Coupling operator between the two roots plus the moment identities.

    On the given contour (index l) this integrates
    (H^(-l)* - mu)^(-1) K'(mu) (H^(l) - mu)^(-1); the mirrored contour
    gives the opposite index, which must be the adjoint.
    """
    require_anchored(instance, contour)
    l = contour.half_plane_l
    root_l = root_minus if l == -1 else root_plus
    root_ml = root_plus if l == -1 else root_minus
    h_l = np.asarray(root_l.h1, dtype=complex)
    h_ml = np.asarray(root_ml.h1, dtype=complex)
    omega_l = _omega_on(instance, contour, h_ml.conj().T, h_l, rtol)
    omega_ml = _omega_on(instance, mirror(contour), h_l.conj().T, h_ml, rtol)
    adjoint_defect = float(np.linalg.norm(omega_ml - omega_l.conj().T, 2))
    eye = np.eye(instance.dim_m)
    m0 = inverse_transfer_moment(instance, contour, root_l, 0, rtol=rtol)
    m1 = inverse_transfer_moment(instance, contour, root_l, 1, rtol=rtol)
    m0_defect = float(np.linalg.norm(m0 - np.linalg.inv(eye + omega_l), 2))
    m1_defect = float(np.linalg.norm(m1 @ (eye + omega_l) - h_l, 2))
    recon = float(np.linalg.norm(m1 @ np.linalg.inv(m0) - h_l, 2))
    conj_defect = spectrum_match_distance(
        np.conj(np.linalg.eigvals(root_minus.h1)),
        np.linalg.eigvals(root_plus.h1))
    return OmegaReport(l=l, omega=omega_l,
                       norm=float(np.linalg.norm(omega_l, 2)),
                       adjoint_defect=adjoint_defect,
                       moment0_defect=m0_defect, moment1_defect=m1_defect,
                       reconstruction_defect=recon,
                       spectrum_conjugation_defect=conj_defect)


# ---------------------------------------------------------------------------
# completeness / basis reports

@dataclass(frozen=True)
class CompletenessReport:
    rank: int
    dim: int
    condition_number: float

    @property
    def complete(self) -> bool:
        return self.rank == self.dim


def completeness_report(eig: EigenStructure) -> CompletenessReport:
    """Rank and conditioning of the assembled root-vector matrix."""
    v = eig.vectors_matrix()
    s = np.linalg.svd(v, compute_uv=False)
    rank = int(np.sum(s > 1e-10 * s[0])) if len(s) else 0
    cond = float(s[0] / s[-1]) if len(s) and s[-1] > 0 else math.inf
    return CompletenessReport(rank=rank, dim=v.shape[0],
                              condition_number=cond)


@dataclass(frozen=True)
class BasisFamilyReport:
    sum_defect: float
    idempotency_max: float
    cross_max: float
    partial_residuals: tuple
    c_max: float
    subset_count: int
    joint_rank: int


def basis_family_report(family: ProjectionFamily, *, subset_budget: int = 1024,
                        seed: int = 2024) -> BasisFamilyReport:
    """Resolution-of-identity and uniform subset-norm diagnostics.

    All nonempty subsets are enumerated when there are at most
    log2(budget) projections, otherwise `subset_budget` random subsets are
    sampled with a fixed seed.
    """
    qs = family.projections
    kq = len(qs)
    m = qs[0].shape[0]
    eye = np.eye(m)
    total = np.zeros((m, m), dtype=complex)
    partial = []
    for q in qs:
        total = total + q
        partial.append(float(np.linalg.norm(total - eye, 2)))
    sum_defect = partial[-1]
    idem = max(float(np.linalg.norm(q @ q - q, 2)) for q in qs)
    cross = 0.0
    for i in range(kq):
        for j in range(kq):
            if i != j:
                cross = max(cross, float(np.linalg.norm(qs[i] @ qs[j], 2)))
    masks = []
    if 2 ** kq - 1 <= subset_budget:
        masks = list(range(1, 2 ** kq))
    else:
        rng = np.random.default_rng(seed)
        masks = [int(x) for x in
                 rng.integers(1, 2 ** kq, size=subset_budget, endpoint=False)]
    c_max = 0.0
    for mask in masks:
        acc = np.zeros((m, m), dtype=complex)
        for i in range(kq):
            if mask >> i & 1:
                acc = acc + qs[i]
        c_max = max(c_max, float(np.linalg.norm(acc, 2)))
    bases = []
    for q in qs:
        u, s, _ = np.linalg.svd(q)
        r = int(np.sum(s > 0.5))
        bases.append(u[:, :r])
    joint = np.concatenate(bases, axis=1)
    sj = np.linalg.svd(joint, compute_uv=False)
    joint_rank = int(np.sum(sj > 1e-10 * sj[0])) if len(sj) else 0
    return BasisFamilyReport(sum_defect=sum_defect, idempotency_max=idem,
                             cross_max=cross, partial_residuals=tuple(partial),
                             c_max=c_max, subset_count=len(masks),
                             joint_rank=joint_rank)
