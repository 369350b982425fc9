"""Postselection key rates under the beam-splitting attack.

Bob's x outcome (SNU) is Gaussian with variance sigma2 around +-mu, where
mu = SNU_SCALE * sqrt(T) * alpha.  Splitting |x| into slices turns the link
into a family of binary symmetric channels with error e(|x|); each slice is
kept or dropped after announcing |x|.  Against a beam splitter tapping 1 - T,
Eve holds |-+sqrt(1-T) alpha> and her Holevo quantity is

* direct reconciliation: about Alice's bit, the same in every slice;
* reverse reconciliation: about Bob's bit in a slice of error e, for which her
  state given Bob's bit is the (1 - e, e) mixture of her two pure states.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import expit, ndtr

from .channel import RecordBatch, eve_overlap
from .quantum import SNU_SCALE, h2, holevo_two_pure

CASCADE_LIKE_EFFICIENCY = 1.2


class Direction(enum.Enum):
    DR = "DR"
    RR = "RR"


@dataclass(frozen=True)
class PostselectionConfig:
    threshold: float = 0.0
    slice_width: float = 0.01
    clip_negative_slices: bool = True
    tau_max: float = 5.0
    tau_points: int = 200

    def __post_init__(self):
        if self.threshold < 0:
            raise ValueError("threshold must be >= 0")
        if self.slice_width <= 0:
            raise ValueError("slice_width must be positive")


@dataclass(frozen=True)
class ECModel:
    """Error-correction leakage f * h(e) per bit."""

    efficiency_f: float = 1.0

    def __post_init__(self):
        if self.efficiency_f < 1.0:
            raise ValueError("efficiency_f must be >= 1")

    @classmethod
    def shannon(cls) -> ECModel:
        return cls(1.0)

    @classmethod
    def cascade_like(cls) -> ECModel:
        return cls(CASCADE_LIKE_EFFICIENCY)


@dataclass(frozen=True)
class BinaryChannelSlice:
    x_center: float
    weight: float
    error: float


@dataclass
class KeyRateReport:
    G_dr: float
    G_rr: float
    tau_opt_dr: float
    tau_opt_rr: float
    acceptance_dr: float
    acceptance_rr: float
    slices: list
    alpha: float
    T: float
    efficiency_f: float
    assumptions: dict = field(default_factory=lambda: {"excess_noise": 0.0, "attack": "beam-splitting"})

    @property
    def overlap(self) -> float:
        return math.exp(-2.0 * self.alpha**2)


def received_mean(alpha: float, T: float) -> float:
    """Mean of Bob's x outcome in SNU for the state |+sqrt(T) alpha>."""
    return SNU_SCALE * math.sqrt(T) * alpha


def conditional_error(x, mu: float, sigma2: float):
    """Posterior probability that sign(x) is the wrong bit, for equal-prior Gaussians at +-mu."""
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    out = expit(-2.0 * mu * np.abs(np.asarray(x, dtype=float)) / sigma2)
    return float(out) if np.ndim(out) == 0 else out


def acceptance_and_error(tau: float, mu: float, sigma2: float) -> tuple[float, float]:
    """P(|x| > tau) and the error rate of sign(x) among accepted outcomes."""
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    s = math.sqrt(sigma2)
    right = float(ndtr((mu - tau) / s))  # P(x > tau | +mu)
    wrong = float(ndtr(-(tau + mu) / s))  # P(x < -tau | +mu)
    frac = right + wrong
    if frac <= 0.0:
        return 0.0, 0.0
    return frac, wrong / frac


def holevo_dr(alpha: float, T: float) -> float:
    """Eve's Holevo quantity about Alice's bit from the tapped mode."""
    return holevo_two_pure(eve_overlap(alpha, T), 0.5)


def holevo_rr_slice(e, alpha: float, T: float):
    """Eve's Holevo quantity about Bob's bit in a slice with error rate e.

    chi = S(rho_E) - S(rho_E | Bob's bit), where rho_E is Eve's balanced mixture
    and rho_E | b = (1 - e)|eps_b><eps_b| + e|eps_{1-b}><eps_{1-b}|.
    """
    e = np.asarray(e, dtype=float)
    if np.any(e < 0) or np.any(e > 0.5 + 1e-12):
        raise ValueError("slice error must lie in [0, 1/2]")
    o = eve_overlap(alpha, T)
    out = np.maximum(holevo_two_pure(o, 0.5) - holevo_two_pure(o, np.minimum(e, 0.5)), 0.0)
    return float(out) if out.ndim == 0 else out


def _abs_density(x, mu: float, sigma2: float):
    """Density of |x| for the balanced mixture."""
    s = math.sqrt(sigma2)
    c = 1.0 / (s * math.sqrt(2.0 * math.pi))
    return c * (np.exp(-0.5 * (x - mu) ** 2 / sigma2) + np.exp(-0.5 * (x + mu) ** 2 / sigma2))


def slice_gain(e, alpha: float, T: float, ec: ECModel, direction: Direction):
    """Secret bits per kept bit in a slice of error e (may be negative)."""
    e = np.asarray(e, dtype=float)
    chi = holevo_dr(alpha, T) if direction is Direction.DR else holevo_rr_slice(e, alpha, T)
    return 1.0 - ec.efficiency_f * h2(e) - chi


def _integrand(alpha: float, T: float, ec: ECModel, direction: Direction, clip: bool, sigma2: float = 1.0):
    mu = received_mean(alpha, T)

    def g(x):
        e = conditional_error(x, mu, sigma2)
        gain = float(slice_gain(e, alpha, T, ec, direction))
        if clip:
            gain = max(0.0, gain)
        return float(_abs_density(x, mu, sigma2)) * gain

    return g, mu


def key_rate(
    alpha: float,
    T: float,
    tau: float,
    ec: ECModel,
    direction: Direction,
    clip_negative_slices: bool = True,
    sigma2: float = 1.0,
) -> float:
    """Secret bits per signal pulse keeping |x| > tau (continuum of slices)."""
    g, mu = _integrand(alpha, T, ec, direction, clip_negative_slices, sigma2)
    upper = mu + 12.0 * math.sqrt(sigma2)
    if tau >= upper:
        return 0.0
    val, _ = integrate.quad(g, tau, upper, epsabs=1e-9, epsrel=1e-9, limit=400)
    return max(0.0, val)


def _rate_profile(alpha, T, ec, direction, clip, taus, sigma2=1.0):
    """G(tau) on an increasing grid of thresholds via cumulative quadrature."""
    g, mu = _integrand(alpha, T, ec, direction, clip, sigma2)
    upper = max(mu + 12.0 * math.sqrt(sigma2), taus[-1])
    edges = list(taus) + [upper]
    pieces = [integrate.quad(g, a, b, epsabs=1e-10, epsrel=1e-10, limit=200)[0] for a, b in zip(edges[:-1], edges[1:])]
    tail = np.cumsum(pieces[::-1])[::-1]
    return np.maximum(tail, 0.0)


def binary_channel_slices(
    mu: float, sigma2: float = 1.0, tau: float = 0.0, width: float = 0.01, x_max: float | None = None
) -> list[BinaryChannelSlice]:
    """Discretize |x| > tau into slices; the last slice extends to infinity."""
    s = math.sqrt(sigma2)
    if x_max is None:
        x_max = mu + 12.0 * s
    n = max(1, int(math.ceil((x_max - tau) / width)))
    edges = tau + width * np.arange(n + 1)
    hi = np.append(edges[1:-1], np.inf)
    lo = edges[:-1]
    # mass of x in [lo, hi) plus (-hi, -lo] under the +mu component; by symmetry this is the mixture mass
    # upper-tail differences keep precision where ndtr rounds to 1
    right = ndtr((mu - lo) / s) - ndtr((mu - hi) / s)
    wrong = ndtr((-lo - mu) / s) - ndtr((-hi - mu) / s)
    weight = right + wrong
    err = np.where(weight > 0, wrong / np.where(weight > 0, weight, 1.0), 0.5)
    err = np.clip(err, 0.0, 0.5)
    centers = np.where(np.isinf(hi), lo + 0.5 * width, 0.5 * (lo + hi))
    return [BinaryChannelSlice(float(c), float(w), float(e)) for c, w, e in zip(centers, weight, err)]


def discrete_key_rate(
    slices: list[BinaryChannelSlice], alpha: float, T: float, ec: ECModel, direction: Direction, clip: bool = True
) -> float:
    w = np.array([s.weight for s in slices])
    e = np.clip(np.array([s.error for s in slices]), 0.0, 0.5)
    gain = slice_gain(e, alpha, T, ec, direction)
    if clip:
        gain = np.maximum(gain, 0.0)
    return float(max(0.0, np.sum(w * gain)))


def secret_key_rate(
    alpha: float,
    T: float,
    ps: PostselectionConfig | None = None,
    ec: ECModel | None = None,
    sigma2: float = 1.0,
) -> KeyRateReport:
    """DR and RR rates per signal pulse, each optimized over the threshold scan.

    Only thresholds >= ps.threshold are scanned.  The slice table is reported
    at the RR optimum.
    """
    ps = ps or PostselectionConfig()
    ec = ec or ECModel()
    mu = received_mean(alpha, T)
    taus = np.linspace(ps.threshold, max(ps.tau_max, ps.threshold), ps.tau_points)
    best = {}
    for d in Direction:
        prof = _rate_profile(alpha, T, ec, d, ps.clip_negative_slices, taus, sigma2)
        # with clipping G(tau) is flat below the first profitable slice; report its edge
        k = int(np.nonzero(prof >= prof.max() - 1e-10)[0][-1])
        best[d] = (float(prof[k]), float(taus[k]))
    acc = {d: acceptance_and_error(best[d][1], mu, sigma2)[0] for d in Direction}
    return KeyRateReport(
        G_dr=best[Direction.DR][0],
        G_rr=best[Direction.RR][0],
        tau_opt_dr=best[Direction.DR][1],
        tau_opt_rr=best[Direction.RR][1],
        acceptance_dr=acc[Direction.DR],
        acceptance_rr=acc[Direction.RR],
        slices=binary_channel_slices(mu, sigma2, best[Direction.RR][1], ps.slice_width),
        alpha=alpha,
        T=T,
        efficiency_f=ec.efficiency_f,
    )


def alpha_scan(T: float, ec: ECModel, alphas, ps: PostselectionConfig | None = None) -> list[KeyRateReport]:
    """Key-rate reports over a grid of amplitudes, for optimizing the signal strength."""
    return [secret_key_rate(float(a), T, ps, ec) for a in alphas]


@dataclass
class PostselectionResult:
    accepted_fraction: float
    error_rate: float
    n_accepted: int
    alice_key: np.ndarray
    bob_key: np.ndarray


def empirical_postselect(records: RecordBatch, tau: float) -> PostselectionResult:
    """Keep signal pulses with |x| > tau; Bob's bit is 1 for x > 0, else 0."""
    sig = records.signal
    if len(sig) == 0:
        raise ValueError("no signal records")
    keep = np.abs(sig.outcome_x) > tau
    alice = sig.bit[keep].astype(np.int8)
    bob = (sig.outcome_x[keep] > 0).astype(np.int8)
    n = int(keep.sum())
    err = float(np.mean(alice != bob)) if n else 0.0
    return PostselectionResult(n / len(sig), err, n, alice, bob)


def bits_per_second(rate_per_pulse: float, clock_hz: float) -> float:
    return rate_per_pulse * clock_hz
