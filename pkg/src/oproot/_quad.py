"""Composite Gauss-Legendre quadrature on polyline paths and circles.

All integrators are deterministic: node layouts depend only on the path,
the order and the refinement level, and sums are accumulated in a fixed
order.  Adaptivity is dyadic panel doubling per edge, compared in the
Frobenius norm.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NonFiniteIntegrand, QuadratureError

LINEAR = "linear"
SQRT_START = "sqrt_start"   # mu = a + t^2 (b-a): absorbs (mu-a)^(-1/2) endpoint blowup
SQRT_END = "sqrt_end"       # mu = b - (1-t)^2 (b-a)


@dataclass(frozen=True)
class PathEdge:
    start: complex
    end: complex
    mapping: str = LINEAR

    @property
    def length(self) -> float:
        return abs(self.end - self.start)


@lru_cache(maxsize=32)
def _gauss_rule(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def edge_nodes(edge: PathEdge, order: int, panels: int):
    """Quadrature nodes mu and complex weights w with sum(w f(mu)) ~ int_edge f dmu."""
    x, wg = _gauss_rule(order)
    # t runs over [0,1] split into `panels` equal panels
    offs = (np.arange(panels)[:, None] + (x[None, :] + 1.0) / 2.0) / panels
    t = offs.reshape(-1)
    dt = np.tile(wg / (2.0 * panels), panels)
    span = edge.end - edge.start
    if edge.mapping == LINEAR:
        mu = edge.start + t * span
        w = dt * span
    elif edge.mapping == SQRT_START:
        mu = edge.start + t * t * span
        w = dt * 2.0 * t * span
    elif edge.mapping == SQRT_END:
        u = 1.0 - t
        mu = edge.end - u * u * span
        w = dt * 2.0 * u * span
    else:
        raise ValueError(f"unknown edge mapping {edge.mapping!r}")
    return mu, w


def _edge_sum(edge, f, order, panels, absolute):
    mu, w = edge_nodes(edge, order, panels)
    vals = np.asarray(f(mu))
    if not np.all(np.isfinite(vals)):
        bad = mu[~np.isfinite(vals.reshape(len(mu), -1)).all(axis=1)][0]
        raise NonFiniteIntegrand(f"non-finite integrand value near mu={bad}")
    if absolute:
        w = np.abs(w)
    return np.tensordot(w, vals, axes=(0, 0))


def integrate_path(edges, f, *, rtol=1e-10, order=24, max_panels=4096,
                   absolute=False, min_panels=1):
    """Adaptive integral of f along the given edges.

    f maps an array of complex nodes to an array of values whose leading
    axis matches the nodes (scalars or stacked matrices).  With
    ``absolute=True`` the arclength measure |dmu| is used; f should then
    return nonnegative reals.
    """
    if not edges:
        raise ValueError("empty edge list")
    coarse = [_edge_sum(e, f, order, min_panels, absolute) for e in edges]
    norms = [np.linalg.norm(np.atleast_1d(c)) for c in coarse]
    path_scale = float(sum(norms))
    total = None
    for e, start in zip(edges, coarse):
        panels = min_panels
        cur = start
        converged = False
        while panels <= max_panels:
            panels *= 2
            nxt = _edge_sum(e, f, order, panels, absolute)
            delta = np.linalg.norm(np.atleast_1d(nxt - cur))
            goal = rtol * (np.linalg.norm(np.atleast_1d(nxt))
                           + 0.05 * path_scale + 1e-300) / 4.0
            cur = nxt
            if delta <= goal:
                converged = True
                break
        if not converged:
            raise QuadratureError(
                f"edge {e.start}->{e.end} did not converge within "
                f"{max_panels} panels (rtol={rtol})")
        total = cur if total is None else total + cur
    return total


def edge_panels_for(edges, f, *, rtol=1e-10, order=24, max_panels=4096,
                    min_panels=1):
    """Per-edge panel counts that meet rtol for integrand f, plus one doubling."""
    coarse = [_edge_sum(e, f, order, min_panels, False) for e in edges]
    path_scale = float(sum(np.linalg.norm(np.atleast_1d(c)) for c in coarse))
    out = []
    for e, start in zip(edges, coarse):
        panels = min_panels
        cur = start
        while panels <= max_panels:
            panels *= 2
            nxt = _edge_sum(e, f, order, panels, False)
            delta = np.linalg.norm(np.atleast_1d(nxt - cur))
            goal = rtol * (np.linalg.norm(np.atleast_1d(nxt))
                           + 0.05 * path_scale + 1e-300) / 4.0
            cur = nxt
            if delta <= goal:
                break
        else:
            raise QuadratureError("panel budget exhausted while profiling edge")
        out.append(min(2 * panels, max_panels))  # safety doubling
    return out


def cauchy_circle(f, center, radius, *, rtol=1e-10, start_n=64, max_n=65536):
    """-(1/2pi i) * closed integral of f over the positively oriented circle.

    Trapezoid rule with node doubling; spectrally accurate for integrands
    analytic in an annulus around the circle.
    """
    center = complex(center)

    def level(n):
        theta = 2.0 * np.pi * np.arange(n) / n
        z = center + radius * np.exp(1j * theta)
        vals = np.asarray(f(z))
        if not np.all(np.isfinite(vals)):
            raise NonFiniteIntegrand("non-finite value on circle")
        fmax = float(np.max(np.linalg.norm(vals.reshape(n, -1), axis=1)))
        acc = -(radius / n) * np.tensordot(np.exp(1j * theta), vals, axes=(0, 0))
        return acc, fmax

    n = start_n
    cur, fmax = level(n)
    while n <= max_n:
        n *= 2
        nxt, fmax = level(n)
        delta = np.linalg.norm(np.atleast_1d(nxt - cur))
        floor = 1e-13 * radius * fmax
        cur = nxt
        if delta <= max(rtol * np.linalg.norm(np.atleast_1d(nxt)), floor):
            return cur
    raise QuadratureError(f"circle quadrature did not converge by n={max_n}")
