"""Contraction solve of the operator-root equation X = V1(A1 + X).

Under the certificate v0 < d0^2/4 the iteration started at X0 = 0 is a
contraction with factor q = r_min/(d0 - r_min); the solution stays inside
the ball of radius r_min and does not depend on the admissible contour
chosen within a half-plane.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .contour import (Contour, build_dip_contour, check_solvability,
                      certificate_scale, require_admissible)
from .errors import GeometryError, MaxIterExceeded, NoAdmissibleContour
from .model import ProblemInstance
from .transfer import v1_of_operator

__all__ = [
    "RootSolution", "solve_fixed_point", "contour_independence_check",
    "IndependenceReport", "DipFamily", "RZeroEstimate", "estimate_r0",
]


@dataclass(frozen=True)
class RootSolution:
    l: int
    x: np.ndarray
    h1: np.ndarray
    iterations: int
    final_residual: float
    certificate: object
    contour_used: Contour
    diff_history: tuple

    @property
    def norm_x(self) -> float:
        return float(np.linalg.norm(self.x, 2))

    def contraction_ratios(self, floor: float = 0.0):
        """Successive-difference ratios while the steps are above the floor."""
        d = self.diff_history
        return tuple(d[i + 1] / d[i] for i in range(len(d) - 1)
                     if d[i] > floor and d[i + 1] > 0.0)


def solve_fixed_point(instance: ProblemInstance, contour: Contour, *,
                      tol: float = 1e-12, max_iter: int = 200,
                      rtol: float = 1e-10) -> RootSolution:
    """Iterate X <- V1(A1 + X) from X = 0 until the step is below tol*scale."""
    cert = check_solvability(instance, contour)
    require_admissible(cert)
    scale = certificate_scale(instance, cert)
    a1 = instance.a1_matrix
    m = instance.dim_m
    x = np.zeros((m, m), dtype=complex)
    diffs = []
    for it in range(1, max_iter + 1):
        x_next = v1_of_operator(instance, contour, a1 + x, rtol=rtol)
        step = float(np.linalg.norm(x_next - x, 2))
        diffs.append(step)
        x = x_next
        if step <= tol * scale:
            residual = float(np.linalg.norm(
                x - v1_of_operator(instance, contour, a1 + x, rtol=rtol), 2))
            return RootSolution(l=contour.half_plane_l, x=x, h1=a1 + x,
                                iterations=it, final_residual=residual,
                                certificate=cert, contour_used=contour,
                                diff_history=tuple(diffs))
    raise MaxIterExceeded(
        f"no convergence in {max_iter} iterations (last step "
        f"{diffs[-1]:.3e}, target {tol * scale:.3e}); the tolerance and the "
        f"contour certificate are inconsistent")


@dataclass(frozen=True)
class IndependenceReport:
    difference: float
    tolerance: float
    passed: bool
    certificate_a: object
    certificate_b: object
    root_a: RootSolution
    root_b: RootSolution


def contour_independence_check(instance: ProblemInstance,
                               l: int, contour_a: Contour, contour_b: Contour,
                               tol: float = 1e-8) -> IndependenceReport:
    """Solve on two admissible contours of the same half-plane and compare."""
    if contour_a.half_plane_l != l or contour_b.half_plane_l != l:
        raise ValueError("both contours must carry the requested half-plane index")
    ra = solve_fixed_point(instance, contour_a)
    rb = solve_fixed_point(instance, contour_b)
    scale = certificate_scale(instance, ra.certificate)
    diff = float(np.linalg.norm(ra.x - rb.x, 2))
    return IndependenceReport(difference=diff, tolerance=tol * scale,
                              passed=diff <= tol * scale,
                              certificate_a=ra.certificate,
                              certificate_b=rb.certificate,
                              root_a=ra, root_b=rb)


@dataclass(frozen=True)
class DipFamily:
    """Three-parameter grid of trapezoidal dips searched for small r_min."""
    depths: tuple
    spans: tuple           # tuple of (x_lo, x_hi) pairs
    r_joins: tuple
    r_max: float
    order: int = 24

    def members(self):
        return tuple(itertools.product(self.depths, self.spans, self.r_joins))


@dataclass(frozen=True)
class RZeroEstimate:
    r0: float
    argmin_contour: Contour
    family_grid: str
    evaluated: tuple       # (depth, span, r_join, r_min or nan) per member


def _r_min_of(instance, l, depth, span, r_join, family):
    try:
        ct = build_dip_contour(instance, l, depth, span, family.r_max,
                               order=family.order, r_join=r_join)
        cert = check_solvability(instance, ct)
    except GeometryError:
        return math.nan, None
    if not cert.admissible:
        return math.nan, None
    return cert.r_min, ct


def estimate_r0(instance: ProblemInstance, l: int,
                family: DipFamily) -> RZeroEstimate:
    """Grid search over the dip family, then golden-section on the depth axis.

    The result is an upper bound for the infimum of r_min over all
    admissible contours; enlarging the family can only lower it.
    """
    evaluated = []
    best = None
    for depth, span, r_join in family.members():
        r_min, ct = _r_min_of(instance, l, depth, span, r_join, family)
        evaluated.append((depth, span, r_join, r_min))
        if ct is not None and (best is None or r_min < best[0]):
            best = (r_min, ct, depth, span, r_join)
    if best is None:
        raise NoAdmissibleContour("no admissible contour in the search family")
    _, ct, depth, span, r_join = best
    depths = sorted(family.depths)
    idx = depths.index(depth)
    lo = depths[idx - 1] if idx > 0 else max(0.25 * depth, 0.5 * depth)
    hi = depths[idx + 1] if idx + 1 < len(depths) else 1.5 * depth
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc, cc = _r_min_of(instance, l, c, span, r_join, family)
    fd, cd = _r_min_of(instance, l, d, span, r_join, family)
    for _ in range(40):
        if b - a < 1e-6 * (1.0 + hi):
            break
        # treat inadmissible depths as +inf
        vc = fc if not math.isnan(fc) else math.inf
        vd = fd if not math.isnan(fd) else math.inf
        if vc < vd:
            b, d, fd, cd = d, c, fc, cc
            c = b - phi * (b - a)
            fc, cc = _r_min_of(instance, l, c, span, r_join, family)
        else:
            a, c, fc, cc = c, d, fd, cd
            d = a + phi * (b - a)
            fd, cd = _r_min_of(instance, l, d, span, r_join, family)
    r0, argmin = best[0], best[1]
    for val, ct2 in ((fc, cc), (fd, cd)):
        if ct2 is not None and not math.isnan(val) and val < r0:
            r0, argmin = val, ct2
    grid = (f"depths={family.depths}, spans={family.spans}, "
            f"r_joins={family.r_joins}, golden-section on depth")
    return RZeroEstimate(r0=r0, argmin_contour=argmin, family_grid=grid,
                         evaluated=tuple(evaluated))
