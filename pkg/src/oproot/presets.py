"""Standard desk-scale instances shared by tests, scripts and example configs."""
from __future__ import annotations

import math

from .contour import Contour, build_dip_contour, check_solvability, variation
from .model import DirectRankCoupling, ProblemInstance, SchrodingerCoupling

__all__ = [
    "reference_instance", "reference_contour", "tuned_reference",
    "scalar_instance", "scalar_contour", "tuned_scalar",
    "squares_instance", "squares_contour", "tuned_squares",
    "finite_interval_instance", "finite_interval_contour", "tuned_finite",
    "tune_to_variation",
]


def tune_to_variation(instance: ProblemInstance, contour: Contour,
                      target_v0: float) -> ProblemInstance:
    """Rescale the coupling so the variation along the contour hits target_v0."""
    base = instance.with_coupling_scale(1.0)
    v0 = variation(base, contour, rtol=1e-12)
    if v0 == 0.0:
        raise ValueError("zero coupling cannot be tuned to a positive variation")
    return base.with_coupling_scale(math.sqrt(target_v0 / v0))


def reference_instance(scale: float = 1.0) -> ProblemInstance:
    coupling = SchrodingerCoupling(n=3, vectors=[(0.5, 0.5, 0.5, 0.5)],
                                   rates=[0.5], scale=scale)
    return ProblemInstance(a1_eigenvalues=(1.0, 2.5, 4.0, 6.0),
                           coupling=coupling, j0=(0.0, math.inf))


def reference_contour(l: int = -1, depth: float = 1.1, order: int = 24) -> Contour:
    inst = reference_instance()
    return build_dip_contour(inst, l, depth=depth, span=(0.35, 7.0),
                             r_max=40.0, order=order, r_join=8.0)


def tuned_reference(target_v0: float = 3.0 / 16.0, l: int = -1):
    """Reference instance with the coupling tuned to the target variation."""
    contour = reference_contour(l=l)
    instance = tune_to_variation(reference_instance(), contour, target_v0)
    cert = check_solvability(instance, contour)
    return instance, contour, cert


def scalar_instance(scale: float = 1.0) -> ProblemInstance:
    coupling = SchrodingerCoupling(n=3, vectors=[(1.0,)], rates=[0.5],
                                   scale=scale)
    return ProblemInstance(a1_eigenvalues=(2.0,), coupling=coupling,
                           j0=(0.0, math.inf))


def scalar_contour(l: int = -1) -> Contour:
    # floor at depth 1 directly under the single eigenvalue: d0 = 1 exactly
    inst = scalar_instance()
    return build_dip_contour(inst, l, depth=1.0, span=(0.4, 4.0),
                             r_max=40.0, r_join=5.0)


def tuned_scalar(target_v0: float = 3.0 / 16.0, l: int = -1):
    contour = scalar_contour(l=l)
    instance = tune_to_variation(scalar_instance(), contour, target_v0)
    cert = check_solvability(instance, contour)
    return instance, contour, cert


def squares_instance(m: int = 8, scale: float = 1.0) -> ProblemInstance:
    lam = tuple(float((i + 1) ** 2) for i in range(m))
    coupling = SchrodingerCoupling(n=3, vectors=[tuple(1.0 / math.sqrt(m)
                                                       for _ in range(m))],
                                   rates=[0.1], scale=scale)
    return ProblemInstance(a1_eigenvalues=lam, coupling=coupling,
                           j0=(0.0, math.inf))


def squares_contour(m: int = 8, l: int = -1) -> Contour:
    inst = squares_instance(m)
    top = inst.a1_eigenvalues[-1]
    return build_dip_contour(inst, l, depth=0.8, span=(0.3, top + 2.0),
                             r_max=200.0, r_join=top + 4.0)


def tuned_squares(m: int = 8, admissibility: float = 0.55, l: int = -1):
    """Growing-gap family with the variation at a fixed fraction of d0^2/4."""
    contour = squares_contour(m, l=l)
    inst = squares_instance(m)
    cert0 = check_solvability(inst, contour)
    target = admissibility * cert0.d0 ** 2 / 4.0
    instance = tune_to_variation(inst, contour, target)
    cert = check_solvability(instance, contour)
    return instance, contour, cert


def finite_interval_instance(scale: float = 1.0) -> ProblemInstance:
    coupling = DirectRankCoupling(weights=(1.0, 0.5), rates=(0.0, 0.0),
                                  vectors=[(1.0, 0.0), (0.3, 0.9)],
                                  scale=scale)
    return ProblemInstance(a1_eigenvalues=(3.0, 7.0), coupling=coupling,
                           j0=(0.0, 10.0))


def finite_interval_contour(l: int = -1) -> Contour:
    inst = finite_interval_instance()
    return build_dip_contour(inst, l, depth=1.5, span=(0.8, 9.2),
                             r_max=None, order=24)


def tuned_finite(admissibility: float = 0.5, l: int = -1):
    contour = finite_interval_contour(l=l)
    inst = finite_interval_instance()
    cert0 = check_solvability(inst, contour)
    target = admissibility * cert0.d0 ** 2 / 4.0
    instance = tune_to_variation(inst, contour, target)
    cert = check_solvability(instance, contour)
    return instance, contour, cert
