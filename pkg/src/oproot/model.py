"""Problem instances and analytically continued coupling kernels.

A problem instance is a finite selfadjoint diagonal block (eigenvalues
inside the continuous spectral interval ``j0``) plus a coupling model for
the spectral-density derivative ``K'(mu)``.  Both coupling families are
closed under analytic continuation off the interval, with the square-root
branch anchored at the finite endpoint of ``j0``.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import BranchCutViolation, TailBoundFailure

__all__ = [
    "SchrodingerCoupling", "DirectRankCoupling", "ProblemInstance",
    "KernelValue", "ValidationReport", "eval_kprime", "validate_instance",
    "problem_scale",
]


def _vec_tuple(vectors):
    return tuple(tuple(complex(c) for c in v) for v in vectors)


def _upper_gamma(a, x):
    """Unnormalized upper incomplete gamma for real a>0, x>=0."""
    return float(special.gammaincc(a, x) * special.gamma(a))


@dataclass(frozen=True)
class SchrodingerCoupling:
    """Momentum-space coupling b(p) = sum_k v_k exp(-alpha_k |p|^2).

    Radial Gaussians in space dimension n in {1, 3} keep the sphere
    average closed-form, so the continued kernel is rank one:

        n=3:  K'(mu) = 2 pi sqrt(w) B(w) Bbar(w)^T,    w = mu - e1,
        n=1:  K'(mu) = w^(-1/2)    B(w) Bbar(w)^T,

    with B(w) = sum_k v_k exp(-alpha_k w) and Bbar the coefficient-wise
    conjugate (so that real mu gives the Hermitian PSD outer product).
    ``scale`` multiplies b, hence the kernel carries scale**2.
    """
    n: int
    vectors: tuple
    rates: tuple
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "vectors", _vec_tuple(self.vectors))
        object.__setattr__(self, "rates", tuple(float(a) for a in self.rates))
        if self.n not in (1, 3):
            raise ValueError("space dimension must be 1 or 3")
        if len(self.vectors) != len(self.rates):
            raise ValueError("one decay rate per coupling vector required")
        if any(a <= 0 for a in self.rates):
            raise ValueError("decay rates must be positive")

    @property
    def dim(self) -> int:
        return len(self.vectors[0]) if self.vectors else 0

    def with_scale(self, scale: float) -> "SchrodingerCoupling":
        return dataclasses.replace(self, scale=float(scale))

    def requires_halfline(self) -> bool:
        return True

    def kprime(self, j0, mu):
        mu = np.asarray(mu, dtype=complex)
        w = mu - j0[0]
        _check_cut(w, None)
        V = np.array(self.vectors, dtype=complex)          # (K, m)
        E = np.exp(-np.multiply.outer(w, np.array(self.rates)))  # (..., K)
        B = E @ V
        Bb = E @ V.conj()
        s = np.sqrt(w)
        c = 2.0 * np.pi * s if self.n == 3 else 1.0 / s
        c = c * self.scale ** 2
        return c[..., None, None] * (B[..., :, None] * Bb[..., None, :])

    def tail_bound(self, j0, r: float) -> float:
        """Certified upper bound on int_r^inf ||K'(mu)|| dmu (half-line)."""
        wr = r - j0[0]
        if wr <= 0:
            return math.inf
        cs = [float(np.linalg.norm(v)) for v in
              (np.array(self.vectors, dtype=complex) if self.vectors else [])]
        total = 0.0
        for ck, ak in zip(cs, self.rates):
            for cl, al in zip(cs, self.rates):
                beta = ak + al
                if self.n == 3:
                    term = 2.0 * np.pi * beta ** -1.5 * _upper_gamma(1.5, beta * wr)
                else:
                    term = wr ** -0.5 * math.exp(-beta * wr) / beta
                total += ck * cl * term
        return self.scale ** 2 * total


@dataclass(frozen=True)
class DirectRankCoupling:
    """Finite-rank kernel K'(mu) = sum_k w_k(mu) v_k v_k^*.

    The scalar weights follow the interval: on a half-line (e1, inf),
    w_k = beta_k sqrt(mu - e1) exp(-alpha_k mu); on a finite interval
    (e1, e2), w_k = beta_k sqrt((mu - e1)(e2 - mu)).  Weights are real
    nonnegative on the interval and satisfy the Schwarz reflection
    w_k(conj mu) = conj w_k(mu).
    """
    weights: tuple
    rates: tuple
    vectors: tuple
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "vectors", _vec_tuple(self.vectors))
        object.__setattr__(self, "weights", tuple(float(b) for b in self.weights))
        object.__setattr__(self, "rates", tuple(float(a) for a in self.rates))
        if not (len(self.vectors) == len(self.weights) == len(self.rates)):
            raise ValueError("weights, rates and vectors must align")
        if any(b < 0 for b in self.weights):
            raise ValueError("weights must be nonnegative")

    @property
    def dim(self) -> int:
        return len(self.vectors[0]) if self.vectors else 0

    def with_scale(self, scale: float) -> "DirectRankCoupling":
        return dataclasses.replace(self, scale=float(scale))

    def requires_halfline(self) -> bool:
        return False

    def kprime(self, j0, mu):
        mu = np.asarray(mu, dtype=complex)
        e1, e2 = j0
        w1 = mu - e1
        finite = math.isfinite(e2)
        _check_cut(w1, (e2 - mu) if finite else None)
        if finite:
            root = np.sqrt(w1) * np.sqrt(e2 - mu)
        else:
            root = np.sqrt(w1)
        out = np.zeros(mu.shape + (self.dim, self.dim), dtype=complex)
        for beta, alpha, v in zip(self.weights, self.rates, self.vectors):
            vv = np.outer(v, np.conj(v))
            if finite:
                wk = beta * root
            else:
                wk = beta * root * np.exp(-alpha * mu)
            out += wk[..., None, None] * vv
        return self.scale ** 2 * out

    def tail_bound(self, j0, r: float) -> float:
        e1, e2 = j0
        if math.isfinite(e2):
            return 0.0
        wr = r - e1
        if wr <= 0:
            return math.inf
        total = 0.0
        for beta, alpha, v in zip(self.weights, self.rates, self.vectors):
            if beta == 0.0:
                continue
            if alpha <= 0:
                return math.inf
            nv2 = float(np.linalg.norm(v)) ** 2
            total += (beta * nv2 * math.exp(-alpha * e1)
                      * alpha ** -1.5 * _upper_gamma(1.5, alpha * wr))
        return self.scale ** 2 * total


def _check_cut(w_lo, w_hi):
    """Reject points exactly on the real cut(s) of the sqrt branch."""
    w = np.atleast_1d(w_lo)
    on = (w.imag == 0.0) & (w.real <= 0.0)
    if np.any(on):
        raise BranchCutViolation(
            f"evaluation point on the branch cut (offset {w[on][0]})")
    if w_hi is not None:
        w2 = np.atleast_1d(w_hi)
        on = (w2.imag == 0.0) & (w2.real <= 0.0)
        if np.any(on):
            raise BranchCutViolation(
                f"evaluation point on the upper-endpoint cut (offset {w2[on][0]})")


@dataclass(frozen=True)
class ProblemInstance:
    """Diagonal selfadjoint block with eigenvalues inside j0, plus a coupling."""
    a1_eigenvalues: tuple
    coupling: object
    j0: tuple = (0.0, math.inf)

    def __post_init__(self):
        object.__setattr__(self, "a1_eigenvalues",
                           tuple(float(x) for x in self.a1_eigenvalues))
        object.__setattr__(self, "j0",
                           (float(self.j0[0]), float(self.j0[1])))

    @property
    def dim_m(self) -> int:
        return len(self.a1_eigenvalues)

    @property
    def a1_matrix(self):
        return np.diag(np.array(self.a1_eigenvalues, dtype=complex))

    @property
    def a1_norm(self) -> float:
        return max((abs(x) for x in self.a1_eigenvalues), default=0.0)

    def with_coupling_scale(self, scale: float) -> "ProblemInstance":
        return dataclasses.replace(self, coupling=self.coupling.with_scale(scale))

    def kprime(self, mu):
        return self.coupling.kprime(self.j0, mu)


def problem_scale(instance: ProblemInstance, v0: float = 0.0) -> float:
    """Problem-intrinsic magnitude 1 + ||A1|| + v0 used for relative tolerances."""
    return 1.0 + instance.a1_norm + float(v0)


@dataclass(frozen=True)
class KernelValue:
    mu: complex
    matrix: np.ndarray
    norm: float


def eval_kprime(instance: ProblemInstance, mu: complex) -> KernelValue:
    """Continued kernel K'(mu); Hermitian PSD for real mu inside j0."""
    mat = instance.kprime(np.array([complex(mu)]))[0]
    return KernelValue(mu=complex(mu), matrix=mat,
                       norm=float(np.linalg.norm(mat, 2)))


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    violations: tuple

    def __bool__(self):
        return self.passed


def validate_instance(instance: ProblemInstance) -> ValidationReport:
    """Check the standing assumptions; report violations instead of raising."""
    bad = []
    lam = instance.a1_eigenvalues
    lo, hi = instance.j0
    if len(lam) < 1:
        bad.append("dim_m >= 1 required: eigenvalue list is empty")
    if not math.isfinite(lo):
        bad.append("lower endpoint of j0 must be finite")
    if not lo < hi:
        bad.append(f"j0 = ({lo}, {hi}) is not an interval")
    for i in range(1, len(lam)):
        if lam[i] < lam[i - 1]:
            bad.append(f"eigenvalues not sorted ascending at index {i}")
            break
    for i, x in enumerate(lam):
        if not (lo < x < hi):
            bad.append(f"eigenvalue {x} at index {i} outside open interval j0")
    coup = instance.coupling
    if coup.dim not in (0, len(lam)):
        bad.append(f"coupling dimension {coup.dim} != dim_m {len(lam)}")
    if coup.requires_halfline() and math.isfinite(hi):
        bad.append("this coupling family requires a half-line interval j0")
    if isinstance(coup, DirectRankCoupling) and not math.isfinite(hi):
        for k, (b, a) in enumerate(zip(coup.weights, coup.rates)):
            if b > 0 and a <= 0:
                bad.append(f"half-line weight {k} needs a positive decay rate")
    if not (math.isfinite(coup.scale) and coup.scale >= 0):
        bad.append("coupling scale must be finite and nonnegative")
    return ValidationReport(passed=not bad, violations=tuple(bad))


def cutoff_for_tail(coupling, j0, target: float, start: float | None = None) -> float:
    """Smallest convenient truncation point with tail_bound below target."""
    if math.isfinite(j0[1]):
        return j0[1]
    r = start if start is not None else j0[0] + 10.0
    for _ in range(200):
        if coupling.tail_bound(j0, r) <= target:
            return r
        r = j0[0] + (r - j0[0]) * 1.5
    raise TailBoundFailure(
        f"no truncation point certifies tail below {target}")
