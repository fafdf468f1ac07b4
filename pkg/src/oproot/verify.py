"""Named-invariant verification suite over a solved instance.

Each check produces (name, value, threshold, passed); the suite is fully
deterministic for a fixed configuration, so repeated runs must reproduce
every defect to the last digit.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .contour import (build_dip_contour, check_solvability, certificate_scale,
                      in_deformation_region, mirror, polyline_distance)
from .model import problem_scale
from .rootsolve import solve_fixed_point
from .spectral import (basis_family_report, build_projection_family,
                       completeness_report, eigendecompose, omega_operator,
                       spectrum_match_distance)
from .transfer import m1_continued, m1_on_grid, m1_physical, v1_physical, w1_factor
from .errors import GapConditionViolated

__all__ = ["CheckResult", "VerificationReport", "run_verification"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    threshold: float
    passed: bool
    comparator: str = "<="

    @staticmethod
    def le(name, value, threshold):
        value = float(value)
        return CheckResult(name, value, float(threshold),
                           value <= float(threshold), "<=")

    @staticmethod
    def ge(name, value, threshold):
        value = float(value)
        return CheckResult(name, value, float(threshold),
                           value >= float(threshold), ">=")

    @staticmethod
    def eq(name, value, threshold):
        value = float(value)
        return CheckResult(name, value, float(threshold),
                           value == float(threshold), "==")


@dataclass(frozen=True)
class VerificationReport:
    checks: tuple
    passed: bool
    metrics: dict
    landscape: tuple    # (re, im, sigma_min) arrays for plotting dumps

    def check(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def _region_probes(contour, count_x=5, count_y=4):
    """Deterministic probe grid strictly inside the deformation region."""
    off = [v for v in contour.vertices if v.imag != 0.0]
    x_lo = min(v.real for v in off)
    x_hi = max(v.real for v in off)
    depth = max(abs(v.imag) for v in off)
    l = contour.half_plane_l
    xs = np.linspace(x_lo + 0.15 * (x_hi - x_lo), x_hi - 0.15 * (x_hi - x_lo),
                     count_x)
    ys = l * np.linspace(0.2, 0.8, count_y) * depth
    probes = []
    for x in xs:
        for y in ys:
            z = complex(x, y)
            if (in_deformation_region(contour, z)
                    and contour.distance_to(z) > 0.1 * depth):
                probes.append(z)
    return probes


def _grid_in_vicinity(instance, radius, n):
    lam = np.array(instance.a1_eigenvalues)
    xs = np.linspace(lam.min() - radius, lam.max() + radius, n)
    ys = np.linspace(-radius, radius, n)
    zx, zy = np.meshgrid(xs, ys, indexing="ij")
    zs = zx + 1j * zy
    dist = np.min(np.abs(zs[..., None] - lam[None, None, :]), axis=-1)
    mask = dist <= radius
    return zs, mask


def run_verification(instance, contour, *, tol=1e-12, max_iter=200,
                     landscape_n=50) -> VerificationReport:
    """Run every module invariant on one instance/contour pair."""
    cert = check_solvability(instance, contour)
    scale = certificate_scale(instance, cert)
    l = contour.half_plane_l
    checks = []
    metrics = {"v0": cert.v0, "d0": cert.d0, "omega_gap": cert.omega,
               "r_min": cert.r_min, "r_max": cert.r_max, "scale": scale}

    root = solve_fixed_point(instance, contour, tol=tol, max_iter=max_iter)
    root_m = solve_fixed_point(instance, mirror(contour), tol=tol,
                               max_iter=max_iter)

    # --- continuation: residue relation against the physical sheet
    probes = _region_probes(contour)
    worst = 0.0
    for z in probes:
        cont = m1_continued(instance, contour, z).m1
        phys = m1_physical(instance, z).m1
        kp = instance.kprime(np.array([z]))[0]
        worst = max(worst, float(np.linalg.norm(
            cont - phys - 2j * np.pi * l * kp, 2)))
    checks.append(CheckResult.le("continuation_residue_max", worst,
                                 1e-8 * scale))
    metrics["continuation_probes"] = len(probes)

    # --- holomorphy of the continued map (Cauchy-Riemann, centered steps)
    h = 1e-5 * scale
    cr_worst = 0.0
    cr_pts = [p for p in probes[:3]]
    lam0 = instance.a1_eigenvalues[0]
    cr_pts.append(complex(lam0 + 0.3, -l * 0.4))  # opposite half-plane probe
    for z in cr_pts:
        fpx = m1_continued(instance, contour, z + h).m1
        fmx = m1_continued(instance, contour, z - h).m1
        fpy = m1_continued(instance, contour, z + 1j * h).m1
        fmy = m1_continued(instance, contour, z - 1j * h).m1
        dx = (fpx - fmx) / (2 * h)
        dy = (fpy - fmy) / (2j * h)
        cr_worst = max(cr_worst, float(np.linalg.norm(dx - dy, 2)))
    checks.append(CheckResult.le("holomorphy_cr_max", cr_worst, 1e-6))

    # --- two-sheet jump across the deformed span (Richardson in eps)
    off = [v for v in contour.vertices if v.imag != 0.0]
    x_lo, x_hi = min(v.real for v in off), max(v.real for v in off)
    lams = np.array(instance.a1_eigenvalues)
    cand = [x for x in
            np.linspace(x_lo + 0.2 * (x_hi - x_lo), x_hi - 0.2 * (x_hi - x_lo), 3)
            if np.min(np.abs(lams - x)) > 1e-3]
    eps = 1e-4
    jump_worst = 0.0
    for x in cand:
        def jump(e):
            return (v1_physical(instance, x + 1j * e)
                    - v1_physical(instance, x - 1j * e))
        extr = 2.0 * jump(eps / 2) - jump(eps)
        kp = instance.kprime(np.array([complex(x)]))[0]
        jump_worst = max(jump_worst, float(np.linalg.norm(
            extr + 2j * np.pi * kp, 2)))
    checks.append(CheckResult.le("two_sheet_jump_max", jump_worst, 1e-6))

    # --- deformation invariance of the solved root
    alt = _alternate_contour(instance, contour)
    cert_b = check_solvability(instance, alt)
    if cert_b.admissible:
        root_b = solve_fixed_point(instance, alt, tol=tol, max_iter=max_iter)
        diff = float(np.linalg.norm(root.x - root_b.x, 2))
        checks.append(CheckResult.le("deformation_invariance_x", diff,
                                     1e-8 * scale))
        sdist = spectrum_match_distance(np.linalg.eigvals(root.h1),
                                        np.linalg.eigvals(root_b.h1))
        checks.append(CheckResult.le("deformation_invariance_spectrum", sdist,
                                     1e-8))
    # --- ball and contraction certificates
    checks.append(CheckResult.le("root_norm_minus_r_min",
                                 root.norm_x - cert.r_min, 1e-9 * scale))
    q = cert.contraction_factor
    ratios = root.contraction_ratios(floor=100 * tol * scale)
    worst_ratio = max(ratios) if ratios else 0.0
    checks.append(CheckResult.le("contraction_ratio_max", worst_ratio,
                                 q + 0.05))
    checks.append(CheckResult.le("fixed_point_residual", root.final_residual,
                                 1e-10 * scale))

    # --- eigenstructure, transport, localization
    eig = eigendecompose(root.h1, scale=scale)
    transport = 0.0
    for cl in eig.clusters:
        for vec in cl.vectors:
            m1 = m1_continued(instance, contour, cl.value).m1
            transport = max(transport, float(np.linalg.norm(m1 @ vec)))
    checks.append(CheckResult.le("eigenpair_transport_max", transport,
                                 1e-8 * scale))
    lamv = np.array(instance.a1_eigenvalues)
    excess = max(float(np.min(np.abs(lamv - z))) - cert.r_min
                 for z in eig.all_eigenvalues())
    checks.append(CheckResult.le("localization_excess_max", excess, 1e-8))
    if l == -1:
        top = max(z.imag for z in eig.all_eigenvalues())
        checks.append(CheckResult.le("resonance_half_plane_im_max", top,
                                     1e-8 * scale))
    chain_worst = max(max(max(r) for r in cl.residuals)
                      for cl in eig.clusters)
    checks.append(CheckResult.le("root_chain_residual_max", chain_worst,
                                 1e-8 * scale))
    comp = completeness_report(eig)
    checks.append(CheckResult.eq("root_vector_rank_defect",
                                 comp.dim - comp.rank, 0))
    metrics["root_vector_condition"] = comp.condition_number
    metrics["eigenvalues"] = [[z.real, z.imag] for z in eig.all_eigenvalues()]

    # --- factorization on a grid in the half-vicinity
    half = cert.d0 / 2.0
    grid_pts = []
    for lam0 in instance.a1_eigenvalues:
        for dz in (0.0, 0.55 * half, -0.55 * half, 0.55j * half, -0.55j * half):
            grid_pts.append(complex(lam0) + dz)
    grid_pts = grid_pts[:25]
    fact_worst = 0.0
    w1_sigma_min = math.inf
    eye = np.eye(instance.dim_m)
    for z in grid_pts:
        fe = w1_factor(instance, contour, root, z)
        m1 = m1_continued(instance, contour, z).m1
        fact_worst = max(fact_worst, float(np.linalg.norm(
            m1 - fe.w1 @ (root.h1 - z * eye), 2)))
        w1_sigma_min = min(w1_sigma_min, float(
            np.linalg.svd(fe.w1, compute_uv=False)[-1]))
    checks.append(CheckResult.le("factorization_residual_max", fact_worst,
                                 1e-8 * scale))
    checks.append(CheckResult.ge("w1_sigma_min_on_grid", w1_sigma_min, 1e-3))

    # --- min-singular-value landscape over the half-vicinity
    zs, mask = _grid_in_vicinity(instance, half, landscape_n)
    smin = np.full(zs.shape, np.nan)
    flat = zs[mask]
    m1s = m1_on_grid(instance, contour, flat, rtol=1e-8)
    smin_flat = np.linalg.svd(m1s, compute_uv=False)[:, -1]
    smin[mask] = smin_flat
    eigz = np.array(eig.all_eigenvalues())
    spurious = 0
    dx = zs[1, 0] - zs[0, 0] if landscape_n > 1 else 0
    dy = zs[0, 1] - zs[0, 0] if landscape_n > 1 else 0
    for i in range(zs.shape[0]):
        for j in range(zs.shape[1]):
            if not mask[i, j] or not smin[i, j] < 1e-5 * scale:
                continue
            v = smin[i, j]
            is_min = True
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    ii, jj = i + di, j + dj
                    if (0 <= ii < zs.shape[0] and 0 <= jj < zs.shape[1]
                            and mask[ii, jj] and not (di == 0 and dj == 0)
                            and smin[ii, jj] < v):
                        is_min = False
            if not is_min:
                continue
            d_eig = np.min(np.abs(zs[i, j] - eigz))
            if d_eig > 2.0 * max(abs(dx), abs(dy)) + 1e-15:
                spurious += 1
    checks.append(CheckResult.eq("landscape_spurious_minima", spurious, 0))
    landscape = (zs.real.ravel(), zs.imag.ravel(), smin.ravel())

    # --- Omega and the inverse-transfer moments
    root_plus = root_m if l == -1 else root
    root_minus = root if l == -1 else root_m
    om = omega_operator(instance, contour, root_plus, root_minus)
    checks.append(CheckResult.le("omega_norm", om.norm, 1.0 - 1e-12))
    checks.append(CheckResult.le("omega_adjoint_defect", om.adjoint_defect,
                                 1e-8 * scale))
    checks.append(CheckResult.le("moment0_defect", om.moment0_defect,
                                 1e-6 * scale))
    checks.append(CheckResult.le("moment1_defect", om.moment1_defect,
                                 1e-6 * scale))
    checks.append(CheckResult.le("moment_reconstruction_defect",
                                 om.reconstruction_defect, 1e-6 * scale))
    checks.append(CheckResult.le("spectrum_conjugation_defect",
                                 om.spectrum_conjugation_defect, 1e-7 * scale))
    metrics["omega_norm"] = om.norm

    # --- projection family (when the gaps allow a radius above ||X||)
    gaps = np.diff(np.unique(lamv))
    r_try = None
    if len(gaps) == 0:
        r_try = 2.0 * root.norm_x + 0.1 * scale
    elif float(np.min(gaps)) / 2.0 > root.norm_x * 1.05:
        r_try = min(0.49 * float(np.min(gaps)),
                    max(2.0 * root.norm_x, root.norm_x + 0.05 * cert.d0))
    if r_try is not None:
        try:
            fam = build_projection_family(instance, root, r_try)
        except GapConditionViolated:
            fam = None
        if fam is not None:
            bas = basis_family_report(fam)
            checks.append(CheckResult.le("projection_idempotency_max",
                                         bas.idempotency_max, 1e-9 * scale))
            checks.append(CheckResult.le("projection_cross_max",
                                         bas.cross_max, 1e-9 * scale))
            checks.append(CheckResult.le("projection_sum_defect",
                                         bas.sum_defect, 1e-9 * scale))
            checks.append(CheckResult.eq(
                "projection_rank_mismatch",
                sum(abs(a - b) for a, b in zip(fam.ranks,
                                               fam.localized_counts)), 0))
            checks.append(CheckResult.eq("projection_joint_rank_defect",
                                         instance.dim_m - bas.joint_rank, 0))
            metrics["projection_c_max"] = bas.c_max
            metrics["projection_subsets"] = bas.subset_count
            metrics["projection_radius"] = r_try

    passed = all(c.passed for c in checks)
    return VerificationReport(checks=tuple(checks), passed=passed,
                              metrics=metrics, landscape=landscape)


def _alternate_contour(instance, contour):
    """A second admissible dip for the deformation-invariance check."""
    off = [v for v in contour.vertices if v.imag != 0.0]
    depth = max(abs(v.imag) for v in off)
    x_lo = min(v.real for v in off)
    x_hi = max(v.real for v in off)
    l = contour.half_plane_l
    new_depth = 0.8 * depth
    if contour.closes_interval:
        return build_dip_contour(instance, l, depth=new_depth,
                                 span=(x_lo * 1.1, x_hi),
                                 r_max=None, order=contour.nodes_per_edge)
    r_join = contour.vertices[-2].real
    r_max = contour.vertices[-1].real
    return build_dip_contour(instance, l, depth=new_depth,
                             span=(x_lo * 1.1, x_hi + 0.2),
                             r_max=r_max, order=contour.nodes_per_edge,
                             r_join=r_join + 0.3)
