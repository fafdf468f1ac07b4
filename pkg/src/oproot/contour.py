"""Deformation contours, their geometry, and quadrature along them.

A contour is an oriented polyline anchored at the finite endpoint of the
spectral interval.  For a half-line interval it dips into the chosen
half-plane, rejoins the real axis and continues to a truncation point
whose discarded tail is certified analytically from the coupling decay.
For a finite interval both endpoints stay fixed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ._quad import LINEAR, SQRT_END, SQRT_START, PathEdge, integrate_path
from .errors import GeometryError, NotAdmissible, TailBoundFailure
from .model import ProblemInstance, problem_scale

__all__ = [
    "Contour", "SolvabilityCertificate", "build_dip_contour", "mirror",
    "variation", "check_solvability", "integrate_matrix",
    "polyline_distance", "in_deformation_region",
]


@dataclass(frozen=True)
class Contour:
    half_plane_l: int
    vertices: tuple
    nodes_per_edge: int = 24
    endpoint_map: bool = True
    closes_interval: bool = False   # True when the last vertex is the finite upper endpoint

    def __post_init__(self):
        object.__setattr__(self, "vertices",
                           tuple(complex(v) for v in self.vertices))
        if self.half_plane_l not in (-1, 1):
            raise GeometryError("half-plane index must be +1 or -1")
        if len(self.vertices) < 2:
            raise GeometryError("a contour needs at least two vertices")
        l = self.half_plane_l
        for v in self.vertices:
            if v.imag != 0.0 and (l * v.imag) <= 0.0:
                raise GeometryError(
                    f"vertex {v} lies in the wrong half-plane for l={l}")
        _check_simple(self.vertices)

    @property
    def anchor(self) -> complex:
        return self.vertices[0]

    def edges(self):
        """Path edges with sqrt reparametrization at anchored endpoints."""
        vs = self.vertices
        out = []
        for i in range(len(vs) - 1):
            mapping = LINEAR
            if self.endpoint_map and i == 0:
                mapping = SQRT_START
            if self.endpoint_map and self.closes_interval and i == len(vs) - 2:
                mapping = SQRT_END
            out.append(PathEdge(vs[i], vs[i + 1], mapping))
        return out

    def arc_length(self) -> float:
        vs = self.vertices
        return float(sum(abs(vs[i + 1] - vs[i]) for i in range(len(vs) - 1)))

    def min_node_spacing_near(self, z: complex) -> float:
        """Effective node spacing of the edge nearest to z (post-refinement scale)."""
        best = None
        for e in self.edges():
            d = _segment_distance(np.array([complex(z)]), e.start, e.end)[0]
            h = e.length / (self.nodes_per_edge * 64.0)
            if best is None or d < best[0]:
                best = (d, h)
        return best[1]

    def distance_to(self, z) -> float:
        pts = np.atleast_1d(np.asarray(z, dtype=complex))
        return float(np.min(polyline_distance(pts, self.vertices)))


def polyline_distance(points, vertices):
    """Exact distance from each complex point to the polyline (min over segments)."""
    pts = np.atleast_1d(np.asarray(points, dtype=complex))
    dmin = np.full(pts.shape, np.inf)
    for a, b in zip(vertices[:-1], vertices[1:]):
        np.minimum(dmin, _segment_distance(pts, a, b), out=dmin)
    return dmin


def _segment_distance(pts, a, b):
    ab = complex(b) - complex(a)
    denom = abs(ab) ** 2
    if denom == 0.0:
        return np.abs(pts - a)
    t = ((pts - a) * np.conj(ab)).real / denom
    t = np.clip(t, 0.0, 1.0)
    return np.abs(pts - (a + t * ab))


def _orient(a, b, c):
    return (b.real - a.real) * (c.imag - a.imag) - (b.imag - a.imag) * (c.real - a.real)


def _on_segment(a, b, p):
    return (min(a.real, b.real) - 1e-15 <= p.real <= max(a.real, b.real) + 1e-15
            and min(a.imag, b.imag) - 1e-15 <= p.imag <= max(a.imag, b.imag) + 1e-15)


def _segments_cross(a, b, c, d):
    o1, o2 = _orient(a, b, c), _orient(a, b, d)
    o3, o4 = _orient(c, d, a), _orient(c, d, b)
    if ((o1 > 0) != (o2 > 0)) and ((o3 > 0) != (o4 > 0)) and o1 != 0 and o2 != 0 \
            and o3 != 0 and o4 != 0:
        return True
    for (p, q, r) in ((a, b, c), (a, b, d), (c, d, a), (c, d, b)):
        if _orient(p, q, r) == 0 and _on_segment(p, q, r):
            return True
    return False


def _check_simple(vertices):
    n = len(vertices) - 1
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1 and vertices[0] == vertices[-1]:
                continue  # closed paths may share the endpoint
            if _segments_cross(vertices[i], vertices[i + 1],
                               vertices[j], vertices[j + 1]):
                raise GeometryError(
                    f"edges {i} and {j} of the contour intersect")


def build_dip_contour(instance: ProblemInstance, l: int, depth: float,
                      span, r_max: float | None = None, order: int = 24,
                      r_join: float | None = None,
                      endpoint_map: bool = True) -> Contour:
    """Trapezoidal dip below/above [x_lo, x_hi], anchored at the interval ends.

    Half-line interval: anchor -> (x_lo - i l depth) -> (x_hi - i l depth)
    -> r_join on the axis -> r_max (truncation).  Finite interval: the
    rise returns to the fixed upper endpoint and there is no tail.
    """
    e1, e2 = instance.j0
    x_lo, x_hi = float(span[0]), float(span[1])
    depth = float(depth)
    if l not in (-1, 1):
        raise GeometryError("half-plane index must be +1 or -1")
    if depth <= 0.0:
        raise GeometryError("dip depth must be positive: the contour has to "
                            "leave the axis to deform the interval")
    if not x_lo > e1:
        raise GeometryError(f"span start {x_lo} must exceed the anchor {e1}")
    if not x_hi > x_lo:
        raise GeometryError("span must be increasing")
    dip = 1j * l * depth
    finite = math.isfinite(e2)
    if finite:
        if not x_hi < e2:
            raise GeometryError(f"span end {x_hi} must stay below {e2}")
        verts = (complex(e1), x_lo + dip, x_hi + dip, complex(e2))
        return Contour(half_plane_l=l, vertices=verts, nodes_per_edge=order,
                       endpoint_map=endpoint_map, closes_interval=True)
    if r_join is None:
        r_join = x_hi + depth
    r_join = float(r_join)
    if not r_join > x_hi:
        raise GeometryError("rejoin point must lie beyond the dip span")
    if r_max is None:
        raise GeometryError("half-line contours need a truncation point r_max")
    r_max = float(r_max)
    if not r_max > r_join:
        raise GeometryError("truncation point must lie beyond the rejoin point")
    verts = (complex(e1), x_lo + dip, x_hi + dip, complex(r_join), complex(r_max))
    return Contour(half_plane_l=l, vertices=verts, nodes_per_edge=order,
                   endpoint_map=endpoint_map, closes_interval=False)


def mirror(contour: Contour) -> Contour:
    """Reflection across the real axis (swaps the half-plane index)."""
    return replace(contour,
                   half_plane_l=-contour.half_plane_l,
                   vertices=tuple(v.conjugate() for v in contour.vertices))


def require_anchored(instance: ProblemInstance, contour: Contour):
    e1, e2 = instance.j0
    if contour.anchor != complex(e1):
        raise GeometryError(
            f"contour anchor {contour.anchor} != interval endpoint {e1}")
    if contour.closes_interval and contour.vertices[-1] != complex(e2):
        raise GeometryError("closed contour must end at the upper endpoint")
    if not contour.closes_interval and math.isfinite(e2):
        raise GeometryError("finite interval requires a closed contour")


def in_deformation_region(contour: Contour, z: complex) -> bool:
    """Point strictly between the deformed interval and the contour.

    The region is the polygon bounded by the off-axis part of the contour
    and the segment of the real axis it replaces.
    """
    verts = [v for v in contour.vertices]
    if not contour.closes_interval:
        # drop the pure tail vertex; region closes at the rejoin point
        while len(verts) > 2 and verts[-1].imag == 0.0 and verts[-2].imag == 0.0:
            verts.pop()
    poly = verts + [verts[0]]
    x, y = complex(z).real, complex(z).imag
    inside = False
    for a, b in zip(poly[:-1], poly[1:]):
        if (a.imag > y) != (b.imag > y):
            xs = a.real + (y - a.imag) * (b.real - a.real) / (b.imag - a.imag)
            if x < xs:
                inside = not inside
    return inside


def integrate_matrix(contour: Contour, integrand, *, rtol=1e-10,
                     max_panels=4096) -> np.ndarray:
    """Composite Gauss-Legendre integral of a matrix-valued map along the contour."""
    return integrate_path(contour.edges(), integrand, rtol=rtol,
                          order=contour.nodes_per_edge, max_panels=max_panels)


def variation(instance: ProblemInstance, contour: Contour, *,
              rtol=1e-8) -> float:
    """Arclength integral of ||K'(mu)|| along the contour, tail certified.

    For half-line intervals the discarded tail beyond the truncation point
    must be bounded below 1e-12 of the computed total.
    """
    require_anchored(instance, contour)

    def f(mu):
        return np.linalg.norm(instance.kprime(mu), ord=2, axis=(-2, -1))

    v0 = float(integrate_path(contour.edges(), f, rtol=rtol,
                              order=contour.nodes_per_edge, absolute=True))
    if not contour.closes_interval:
        r_trunc = contour.vertices[-1].real
        tail = instance.coupling.tail_bound(instance.j0, r_trunc)
        if tail > 1e-12 * v0 and tail > 0.0:
            raise TailBoundFailure(
                f"tail beyond {r_trunc} bounded by {tail:.3e}, "
                f"exceeds 1e-12 of the variation {v0:.6e}")
    return v0


@dataclass(frozen=True)
class SolvabilityCertificate:
    v0: float
    d0: float
    omega: float
    r_min: float
    r_max: float
    admissible: bool

    @property
    def contraction_factor(self) -> float:
        return self.r_min / (self.d0 - self.r_min) if self.admissible else math.nan


def check_solvability(instance: ProblemInstance,
                      contour: Contour) -> SolvabilityCertificate:
    """Contraction certificate: v0 < d0^2/4 with the two ball radii."""
    v0 = variation(instance, contour, rtol=1e-10)
    lam = np.array(instance.a1_eigenvalues, dtype=complex)
    d0 = float(np.min(polyline_distance(lam, contour.vertices)))
    om = d0 * d0 - 4.0 * v0
    admissible = v0 < d0 * d0 / 4.0
    if admissible:
        s = math.sqrt(d0 * d0 / 4.0 - v0)
        r_min = d0 / 2.0 - s
        r_max = d0 - math.sqrt(v0)
    else:
        r_min = math.nan
        r_max = math.nan
    return SolvabilityCertificate(v0=v0, d0=d0, omega=om,
                                  r_min=r_min, r_max=r_max,
                                  admissible=admissible)


def require_admissible(cert: SolvabilityCertificate):
    if not cert.admissible:
        raise NotAdmissible(
            f"variation {cert.v0:.12g} is not strictly below d0^2/4 = "
            f"{cert.d0 * cert.d0 / 4.0:.12g}; the solvability condition "
            f"requires v0 < d0^2/4")


def certificate_scale(instance: ProblemInstance,
                      cert: SolvabilityCertificate) -> float:
    return problem_scale(instance, cert.v0)
