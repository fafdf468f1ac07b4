"""Transfer function on the physical sheet and its analytic continuation.

The physical-sheet value integrates the kernel along the real spectral
interval (with singularity subtraction when the probe sits close to the
axis); the continued value integrates along a deformation contour.  Both
routes are kept independent so they can cross-check each other through
the residue relation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._quad import LINEAR, SQRT_START, PathEdge, edge_panels_for, edge_nodes, integrate_path
from .contour import Contour, polyline_distance, require_anchored
from .errors import ProbeOnContour, ProbeOnSpectrum, SpectrumTouchesContour, TailBoundFailure
from .model import ProblemInstance, cutoff_for_tail, problem_scale

__all__ = [
    "TransferEval", "FactorEval", "v1_physical", "m1_physical",
    "m1_continued", "v1_of_operator", "w1_factor", "m1_on_grid",
]

SPECTRUM_SEPARATION = 1e-6   # relative to the problem scale


@dataclass(frozen=True)
class TransferEval:
    z: complex
    sheet: str
    m1: np.ndarray
    v1: np.ndarray


@dataclass(frozen=True)
class FactorEval:
    z: complex
    w1: np.ndarray
    invertible_certified: bool


def _interval_distance(z: complex, lo: float, hi: float) -> float:
    x, y = z.real, z.imag
    if x < lo:
        return math.hypot(lo - x, y)
    if x > hi:
        return math.hypot(x - hi, y)
    return abs(y)


def v1_physical(instance: ProblemInstance, z: complex, *, rtol=1e-10,
                r_max: float | None = None) -> np.ndarray:
    """Physical-sheet integral of K'(mu)/(z - mu) over the spectral interval.

    Near-axis probes are handled by subtracting K' at the foot point and
    integrating the remaining smooth part; the subtracted pole term has
    the closed form K'(x0) * [log(z - a) - log(z - b)] on the window.
    """
    z = complex(z)
    a, hi = instance.j0
    finite = math.isfinite(hi)
    if z.imag == 0.0 and (a <= z.real <= hi):
        raise ProbeOnSpectrum(f"probe {z} lies on the closure of j0")
    if r_max is None:
        probe = instance.kprime(np.array([a + 1.0 + 0.0j]))[0]
        target = 1e-13 * (1.0 + float(np.linalg.norm(probe, 2)))
        r_end = cutoff_for_tail(instance.coupling, instance.j0, target)
    else:
        r_end = hi if finite else float(r_max)
    m = instance.dim_m

    def plain(mu):
        return instance.kprime(mu) / (z - mu)[:, None, None]

    near = (_interval_distance(z, a, r_end) < 0.05 * (1.0 + abs(z))
            and a < z.real < r_end)
    if near:
        margin = 0.02 * min(r_end - a, 10.0)
        x0 = float(np.clip(z.real, a + 2 * margin, r_end - 2 * margin))
        w = min(1.0, (x0 - a) / 2.0, (r_end - x0) / 2.0)
        k0 = instance.kprime(np.array([complex(x0)]))[0]

        def smooth(mu):
            return (instance.kprime(mu) - k0) / (z - mu)[:, None, None]

        out = integrate_path([PathEdge(a, x0 - w, SQRT_START)], plain,
                             rtol=rtol, order=32)
        out = out + integrate_path([PathEdge(x0 - w, x0 + w, LINEAR)], smooth,
                                   rtol=rtol, order=32)
        out = out + k0 * (np.log(z - (x0 - w)) - np.log(z - (x0 + w)))
        if x0 + w < r_end:
            out = out + integrate_path([PathEdge(x0 + w, r_end, LINEAR)],
                                       plain, rtol=rtol, order=32)
    else:
        mid = min(a + 2.0, 0.5 * (a + r_end))
        edges = [PathEdge(a, mid, SQRT_START), PathEdge(mid, r_end, LINEAR)]
        out = integrate_path(edges, plain, rtol=rtol, order=32)
    if not finite:
        tail = instance.coupling.tail_bound(instance.j0, r_end)
        denom = _interval_distance(z, r_end, math.inf)
        lost = tail / max(denom, 1e-300)
        if lost > 1e-12 * (np.linalg.norm(out, 2) + 1e-300) and tail > 0.0:
            raise TailBoundFailure(
                f"physical-sheet tail beyond {r_end} not certified: {lost:.3e}")
    return out


def m1_physical(instance: ProblemInstance, z: complex, *, rtol=1e-10,
                r_max: float | None = None) -> TransferEval:
    v1 = v1_physical(instance, z, rtol=rtol, r_max=r_max)
    m1 = instance.a1_matrix - complex(z) * np.eye(instance.dim_m) + v1
    return TransferEval(z=complex(z), sheet="physical", m1=m1, v1=v1)


def _guard_probe(contour: Contour, z: complex):
    d = contour.distance_to(z)
    if d < 3.0 * contour.min_node_spacing_near(z):
        raise ProbeOnContour(
            f"probe {z} within safeguard distance of the contour (d={d:.3e})")


def m1_continued(instance: ProblemInstance, contour: Contour, z: complex, *,
                 rtol=1e-10) -> TransferEval:
    """Continued transfer function A1 - z + int_Gamma K'(mu)/(z-mu) dmu."""
    require_anchored(instance, contour)
    z = complex(z)
    _guard_probe(contour, z)

    def f(mu):
        return instance.kprime(mu) / (z - mu)[:, None, None]

    v1 = integrate_path(contour.edges(), f, rtol=rtol,
                        order=contour.nodes_per_edge)
    m1 = instance.a1_matrix - z * np.eye(instance.dim_m) + v1
    return TransferEval(z=z, sheet=f"continued({contour.half_plane_l:+d})",
                        m1=m1, v1=v1)


def m1_on_grid(instance: ProblemInstance, contour: Contour, zs, *,
               rtol=1e-10, chunk=256) -> np.ndarray:
    """Continued transfer function on a batch of probes sharing one node table.

    Panels are adapted at the probe closest to the contour and then reused;
    accuracy for the remaining probes is at least as good since the
    integrand is smoother there.
    """
    require_anchored(instance, contour)
    zs = np.asarray(zs, dtype=complex).reshape(-1)
    for z in zs:
        _guard_probe(contour, complex(z))
    edges = contour.edges()
    zref = zs[np.argmin(polyline_distance(zs, contour.vertices))]

    def fref(mu):
        return instance.kprime(mu) / (zref - mu)[:, None, None]

    panels = edge_panels_for(edges, fref, rtol=rtol,
                             order=contour.nodes_per_edge)
    mus, ws = [], []
    for e, p in zip(edges, panels):
        mu, w = edge_nodes(e, contour.nodes_per_edge, p)
        mus.append(mu)
        ws.append(w)
    mu = np.concatenate(mus)
    w = np.concatenate(ws)
    kp = instance.kprime(mu)                    # (N, m, m)
    wk = kp * w[:, None, None]
    m = instance.dim_m
    out = np.empty((len(zs), m, m), dtype=complex)
    eye = np.eye(m)
    for i0 in range(0, len(zs), chunk):
        zb = zs[i0:i0 + chunk]
        r = 1.0 / (zb[:, None] - mu[None, :])   # (B, N)
        v1 = np.einsum("bn,nij->bij", r, wk)
        out[i0:i0 + chunk] = (instance.a1_matrix[None] - zb[:, None, None] * eye
                              + v1)
    return out


def _check_separation(instance, contour, mat, what):
    eigs = np.linalg.eigvals(mat)
    d = float(np.min(polyline_distance(eigs, contour.vertices)))
    sep = SPECTRUM_SEPARATION * problem_scale(instance)
    if d <= sep:
        raise SpectrumTouchesContour(
            f"spectrum of {what} within {d:.3e} of the contour (limit {sep:.3e})")
    return d


def v1_of_operator(instance: ProblemInstance, contour: Contour,
                   y: np.ndarray, *, rtol=1e-10) -> np.ndarray:
    """Operator-argument transfer integral int_Gamma K'(mu) (Y - mu)^(-1) dmu.

    The resolvent at each node is a dense solve, never an explicit inverse.
    """
    require_anchored(instance, contour)
    y = np.asarray(y, dtype=complex)
    m = instance.dim_m
    _check_separation(instance, contour, y, "the operator argument")
    eye = np.eye(m)

    def f(mu):
        kp = instance.kprime(mu)
        a = y[None] - mu[:, None, None] * eye
        # K'(mu) (Y-mu)^(-1)  ==  solve((Y-mu)^T, K'(mu)^T)^T
        return np.linalg.solve(a.transpose(0, 2, 1),
                               kp.transpose(0, 2, 1)).transpose(0, 2, 1)

    return integrate_path(contour.edges(), f, rtol=rtol,
                          order=contour.nodes_per_edge)


def w1_factor(instance: ProblemInstance, contour: Contour, root, z: complex, *,
              rtol=1e-10) -> FactorEval:
    """Left factor W1(z) = I - int K'(mu) (H1-mu)^(-1) (mu-z)^(-1) dmu."""
    require_anchored(instance, contour)
    z = complex(z)
    _guard_probe(contour, z)
    h1 = np.asarray(root.h1, dtype=complex)
    m = instance.dim_m
    _check_separation(instance, contour, h1, "the operator root")
    eye = np.eye(m)

    def f(mu):
        kp = instance.kprime(mu)
        a = h1[None] - mu[:, None, None] * eye
        r = np.linalg.solve(a.transpose(0, 2, 1),
                            kp.transpose(0, 2, 1)).transpose(0, 2, 1)
        return r / (mu - z)[:, None, None]

    w1 = eye - integrate_path(contour.edges(), f, rtol=rtol,
                              order=contour.nodes_per_edge)
    lam = np.array(instance.a1_eigenvalues, dtype=complex)
    certified = float(np.min(np.abs(lam - z))) <= root.certificate.d0 / 2.0
    return FactorEval(z=z, w1=w1, invertible_certified=certified)
