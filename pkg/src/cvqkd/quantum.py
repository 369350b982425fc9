"""Coherent-state mathematics, unit conventions and a truncated Fock-basis oracle.

Quadratures follow X = (a + a^dag)/2, Y = i(a^dag - a)/2, so the vacuum operator
variance is 1/4 and [X, Y] = i/2.  A heterodyne measurement samples the
Q-function Q(beta) = <beta|rho|beta>/pi; in these "natural" coordinates
(Re beta, Im beta) the vacuum outcome variance is 1/2 per axis.

Shot-noise units (SNU) rescale heterodyne outcomes so that the vacuum outcome
variance is exactly 1 per axis, i.e. x_snu = sqrt(2) * Re(beta).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

#: Heterodyne outcome in SNU per unit of Q-function coordinate.
SNU_SCALE = math.sqrt(2.0)

#: Operator variance of X (or Y) for the vacuum.
VACUUM_QUADRATURE_VARIANCE = 0.25

#: Default Fock truncation for oracle computations.
DEFAULT_N_TRUNC = 60


class UnitConvention(enum.Enum):
    """Scale of heterodyne outcome moments."""

    NATURAL = "natural"  # Q-function coordinates, vacuum outcome variance 1/2
    SNU = "snu"  # vacuum outcome variance 1

    @property
    def scale(self) -> float:
        """Multiplier taking a natural-unit outcome to this convention."""
        return 1.0 if self is UnitConvention.NATURAL else SNU_SCALE


@dataclass(frozen=True)
class MomentSet:
    """First and second moments of heterodyne outcomes for one conditional state.

    ``cov_xy`` is the sample covariance of the two outcome axes, which equals the
    symmetrized operator covariance <(XY + YX)/2> - <X><Y> up to the unit scale.
    ``n_samples`` is 0 for analytic moments.
    """

    mean_x: float
    mean_y: float
    var_x: float
    var_y: float
    cov_xy: float = 0.0
    convention: UnitConvention = UnitConvention.SNU
    n_samples: int = 0

    def __post_init__(self):
        if self.var_x < 0 or self.var_y < 0:
            raise ValueError("variances must be non-negative")

    def to(self, convention: UnitConvention) -> MomentSet:
        """Re-express the moments in another unit convention."""
        if convention is self.convention:
            return self
        s = convention.scale / self.convention.scale
        return replace(
            self,
            mean_x=self.mean_x * s,
            mean_y=self.mean_y * s,
            var_x=self.var_x * s * s,
            var_y=self.var_y * s * s,
            cov_xy=self.cov_xy * s * s,
            convention=convention,
        )

    @property
    def stat_error(self) -> float:
        """Relative standard error of a Gaussian sample variance (0 if analytic)."""
        if self.n_samples <= 1:
            return 0.0
        return math.sqrt(2.0 / (self.n_samples - 1))

    @classmethod
    def coherent(cls, alpha: complex, convention: UnitConvention = UnitConvention.SNU) -> MomentSet:
        """Exact heterodyne moments of the coherent state |alpha>."""
        nat = cls(
            mean_x=float(np.real(alpha)),
            mean_y=float(np.imag(alpha)),
            var_x=0.5,
            var_y=0.5,
            convention=UnitConvention.NATURAL,
        )
        return nat.to(convention)

    @classmethod
    def from_quadrature_excess(
        cls,
        mean_x: float,
        excess_x: float,
        excess_y: float,
        mean_y: float = 0.0,
        convention: UnitConvention = UnitConvention.SNU,
        n_samples: int = 0,
    ) -> MomentSet:
        """Heterodyne moments of a Gaussian state with given operator excess variances.

        ``mean_x``/``mean_y`` are operator means <X>, <Y> (natural units) and the
        excess variances are relative to the vacuum operator variance, so that
        Var(X) = (1 + excess_x) / 4.  The heterodyne outcome variance adds the
        vacuum contribution 1/4 on top.
        """
        nat = cls(
            mean_x=mean_x,
            mean_y=mean_y,
            var_x=VACUUM_QUADRATURE_VARIANCE * (2.0 + excess_x),
            var_y=VACUUM_QUADRATURE_VARIANCE * (2.0 + excess_y),
            convention=UnitConvention.NATURAL,
            n_samples=n_samples,
        )
        return nat.to(convention)


def heterodyne_to_quadrature_excess(excess_heterodyne: float) -> float:
    """Convert an outcome-variance excess (heterodyne, vs vacuum) to the operator excess.

    Var_outcome = Var_op + 1/4 with vacuum Var_outcome = 1/2, hence the operator
    excess is twice the outcome excess.
    """
    return 2.0 * excess_heterodyne


def quadrature_to_heterodyne_excess(excess_quadrature: float) -> float:
    return 0.5 * excess_quadrature


def coherent_overlap(a: complex, b: complex) -> complex:
    """Inner product <b|a> of two coherent states.

    The magnitude is exp(-|a - b|^2 / 2); the phase factor
    exp((conj(b) a - b conj(a)) / 2) vanishes for real amplitudes.
    """
    a = complex(a)
    b = complex(b)
    mag = math.exp(-0.5 * abs(a - b) ** 2)
    phase = np.exp(0.5 * (b.conjugate() * a - b * a.conjugate()))
    return complex(mag * phase)


@dataclass(frozen=True)
class FockVector:
    coefficients: np.ndarray
    n_trunc: int

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.coefficients) ** 2))

    def dot(self, other: FockVector) -> complex:
        """<self|other>."""
        n = min(len(self.coefficients), len(other.coefficients))
        return complex(np.vdot(self.coefficients[:n], other.coefficients[:n]))


def fock_coefficients(a: complex, n_trunc: int = DEFAULT_N_TRUNC) -> FockVector:
    """Fock-basis amplitudes exp(-|a|^2/2) a^n / sqrt(n!) for n = 0..n_trunc."""
    if n_trunc < 1:
        raise ValueError("n_trunc must be >= 1")
    a = complex(a)
    if abs(a) ** 2 > n_trunc:
        raise ValueError(f"|alpha|^2 = {abs(a) ** 2:.3g} too large for n_trunc = {n_trunc}")
    c = np.empty(n_trunc + 1, dtype=complex)
    c[0] = math.exp(-0.5 * abs(a) ** 2)
    for n in range(1, n_trunc + 1):
        c[n] = c[n - 1] * a / math.sqrt(n)
    return FockVector(c, n_trunc)


def fock_operators(n_trunc: int = DEFAULT_N_TRUNC) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Truncated annihilation operator and the quadratures X, Y."""
    a = np.diag(np.sqrt(np.arange(1, n_trunc + 1, dtype=float)), k=1).astype(complex)
    ad = a.conj().T
    return a, 0.5 * (ad + a), 0.5j * (ad - a)


def fock_moment_matrix(rho: np.ndarray) -> np.ndarray:
    """Brute-force 3x3 matrix <B_k^dag B_l> over (1, X, Y) for a truncated density matrix.

    Operator products are formed in a space two levels larger than ``rho`` so
    that X^2 acting on the top Fock level is not clipped.
    """
    dim = rho.shape[0]
    _, X, Y = fock_operators(dim + 1)
    big = np.zeros((dim + 2, dim + 2), dtype=complex)
    big[:dim, :dim] = rho
    ops = [np.eye(dim + 2), X, Y]
    m = np.empty((3, 3), dtype=complex)
    for k in range(3):
        for l in range(3):
            m[k, l] = np.trace(big @ ops[k].conj().T @ ops[l])
    return m


def von_neumann_entropy(rho: np.ndarray) -> float:
    """Entropy in bits."""
    w = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    w = w[w > 1e-15]
    return float(-np.sum(w * np.log2(w)))


def q_value_coherent(center: complex, probe: complex) -> float:
    """Q-function of |center> evaluated at probe, in natural coordinates."""
    return math.exp(-abs(complex(probe) - complex(center)) ** 2) / math.pi


def h2(p):
    """Vectorized binary entropy without range checks; 0 log 0 = 0."""
    p = np.asarray(p, dtype=float)
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -np.where(p > 0, p * np.log2(p), 0.0) - np.where(q > 0, q * np.log2(q), 0.0)
    return out


def binary_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability {p} outside [0, 1]")
    return float(h2(p))


def holevo_two_pure(overlap_mag, prior):
    """Entropy of the mixture prior*|u><u| + (1-prior)*|v><v| with |<u|v>| = overlap_mag.

    For prior 1/2 this is the Holevo quantity of the two-state ensemble.
    Accepts arrays.
    """
    o = np.asarray(overlap_mag, dtype=float)
    p = np.asarray(prior, dtype=float)
    disc = np.clip(1.0 - 4.0 * p * (1.0 - p) * (1.0 - o * o), 0.0, 1.0)
    lam = 0.5 * (1.0 + np.sqrt(disc))
    out = h2(lam)
    return float(out) if out.ndim == 0 else out
