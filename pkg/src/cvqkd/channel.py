"""Seeded Monte Carlo model of the prepare&measure link.

Alice sends |-alpha> for bit 0 and |+alpha> for bit 1, the channel is a pure-loss
beam splitter of transmission T (Eve keeps the reflected mode) with optional
Gaussian excess noise, and Bob samples the Q-function of what arrives.  Outcomes
are stored in SNU, so the vacuum outcome variance is 1 per axis and a received
amplitude sqrt(T)*alpha appears with mean SNU_SCALE*sqrt(T)*alpha on the x axis.
"""

from __future__ import annotations

import enum
import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .quantum import SNU_SCALE, coherent_overlap

#: Signal pulses per RNG chunk; outputs are independent of the worker count.
DEFAULT_CHUNK_PULSES = 1 << 15


def substream(seed: int, name: str, *index: int) -> np.random.Generator:
    """Independent generator for the named sub-stream of a run seed."""
    tag = int.from_bytes(hashlib.sha256(name.encode()).digest()[:8], "little")
    return np.random.default_rng(np.random.SeedSequence([seed & (2**64 - 1), tag, *index]))


class RecordKind(enum.IntEnum):
    SIGNAL = 0
    VACUUM = 1


@dataclass(frozen=True)
class SourceConfig:
    alpha: Optional[float] = None
    target_overlap: Optional[float] = None
    pulse_count: int = 250000
    vacuum_slots_per_signal: int = 5
    seed: int = 0

    def __post_init__(self):
        if (self.alpha is None) == (self.target_overlap is None):
            raise ValueError("set exactly one of alpha / target_overlap")
        if self.alpha is not None and not self.alpha >= 0:
            raise ValueError("alpha must be non-negative")
        if self.pulse_count < 1:
            raise ValueError("pulse_count must be >= 1")
        if self.vacuum_slots_per_signal < 0:
            raise ValueError("vacuum_slots_per_signal must be >= 0")

    @property
    def amplitude(self) -> float:
        if self.alpha is not None:
            return float(self.alpha)
        return amplitude_for_overlap(self.target_overlap)

    @property
    def overlap(self) -> float:
        return math.exp(-2.0 * self.amplitude**2)


@dataclass(frozen=True)
class ChannelConfig:
    """Transmission and excess noise (SNU, added to Bob's outcome variance per axis)."""

    transmission: float = 1.0
    excess_noise: float = 0.0
    excess_noise_xy: Optional[tuple[float, float]] = None

    def __post_init__(self):
        if not 0.0 < self.transmission <= 1.0:
            raise ValueError("transmission must lie in (0, 1]")
        if self.excess_noise < 0:
            raise ValueError("excess_noise must be >= 0")
        if self.excess_noise_xy is not None and min(self.excess_noise_xy) < 0:
            raise ValueError("excess noise must be >= 0")

    @property
    def noise_xy(self) -> tuple[float, float]:
        if self.excess_noise_xy is not None:
            return tuple(float(v) for v in self.excess_noise_xy)
        return (self.excess_noise, self.excess_noise)


@dataclass(frozen=True)
class TrialRecord:
    index: int
    kind: RecordKind
    bit: Optional[int]
    sent_amplitude: float
    outcome_x: float
    outcome_y: float


@dataclass
class RecordBatch:
    """Columnar storage of trial records.

    ``bit`` is -1 for vacuum calibration slots; ``sent_amplitude`` is the signed
    amplitude Alice prepared (natural units).
    """

    index: np.ndarray
    kind: np.ndarray
    bit: np.ndarray
    sent_amplitude: np.ndarray
    outcome_x: np.ndarray
    outcome_y: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.index)

    def __iter__(self) -> Iterator[TrialRecord]:
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, i: int) -> TrialRecord:
        kind = RecordKind(int(self.kind[i]))
        return TrialRecord(
            index=int(self.index[i]),
            kind=kind,
            bit=None if kind is RecordKind.VACUUM else int(self.bit[i]),
            sent_amplitude=float(self.sent_amplitude[i]),
            outcome_x=float(self.outcome_x[i]),
            outcome_y=float(self.outcome_y[i]),
        )

    def select(self, mask: np.ndarray) -> RecordBatch:
        return RecordBatch(
            self.index[mask],
            self.kind[mask],
            self.bit[mask],
            self.sent_amplitude[mask],
            self.outcome_x[mask],
            self.outcome_y[mask],
            dict(self.meta),
        )

    @property
    def signal(self) -> RecordBatch:
        return self.select(self.kind == RecordKind.SIGNAL)

    @property
    def vacuum(self) -> RecordBatch:
        return self.select(self.kind == RecordKind.VACUUM)

    def with_bit(self, bit: int) -> RecordBatch:
        return self.select((self.kind == RecordKind.SIGNAL) & (self.bit == bit))

    @classmethod
    def concatenate(cls, parts: list[RecordBatch], meta: Optional[dict] = None) -> RecordBatch:
        cols = ("index", "kind", "bit", "sent_amplitude", "outcome_x", "outcome_y")
        arrays = [np.concatenate([getattr(p, c) for p in parts]) for c in cols]
        return cls(*arrays, meta=dict(meta or {}))

    @classmethod
    def from_records(cls, records, meta: Optional[dict] = None) -> RecordBatch:
        records = list(records)
        return cls(
            np.array([r.index for r in records], dtype=np.int64),
            np.array([int(r.kind) for r in records], dtype=np.int8),
            np.array([-1 if r.bit is None else r.bit for r in records], dtype=np.int8),
            np.array([r.sent_amplitude for r in records], dtype=float),
            np.array([r.outcome_x for r in records], dtype=float),
            np.array([r.outcome_y for r in records], dtype=float),
            meta=dict(meta or {}),
        )


def amplitude_for_overlap(o: float) -> float:
    """Real amplitude alpha with <-alpha|+alpha> = exp(-2 alpha^2) = o."""
    if not 0.0 < o < 1.0:
        raise ValueError("overlap must lie in (0, 1)")
    return math.sqrt(-math.log(o) / 2.0)


def apply_channel(alpha_in: float, ch: ChannelConfig) -> tuple[float, float]:
    """Received mean amplitude and heterodyne outcome variance (SNU, x axis)."""
    return math.sqrt(ch.transmission) * alpha_in, 1.0 + ch.noise_xy[0]


def eve_tap_amplitude(alpha: float, T: float) -> float:
    if not 0.0 < T <= 1.0:
        raise ValueError("T must lie in (0, 1]")
    return math.sqrt(1.0 - T) * alpha


def eve_overlap(alpha: float, T: float) -> float:
    """Overlap of Eve's two tapped states, exp(-2 (1-T) alpha^2)."""
    beta = eve_tap_amplitude(alpha, T)
    return coherent_overlap(-beta, beta).real


def _sample_chunk(
    alpha: float, ch: ChannelConfig, n_signal: int, n_vac: int, seed: int, chunk: int, start: int
) -> RecordBatch:
    rng = substream(seed, "heterodyne", chunk)
    slots = 1 + n_vac
    bits = rng.integers(0, 2, size=n_signal).astype(np.int8)
    sign = 2.0 * bits - 1.0
    mean = SNU_SCALE * math.sqrt(ch.transmission) * alpha * sign
    nx, ny = ch.noise_xy
    n_total = n_signal * slots
    zx = rng.standard_normal(n_total).reshape(n_signal, slots)
    zy = rng.standard_normal(n_total).reshape(n_signal, slots)
    x = zx.copy()
    y = zy.copy()
    # excess noise acts on the signal slots only; calibration slots see pure vacuum
    x[:, 0] = mean + zx[:, 0] * math.sqrt(1.0 + nx)
    y[:, 0] = zy[:, 0] * math.sqrt(1.0 + ny)

    kind = np.full((n_signal, slots), RecordKind.VACUUM, dtype=np.int8)
    kind[:, 0] = RecordKind.SIGNAL
    bit = np.full((n_signal, slots), -1, dtype=np.int8)
    bit[:, 0] = bits
    amp = np.zeros((n_signal, slots))
    amp[:, 0] = alpha * sign
    index = start * slots + np.arange(n_total, dtype=np.int64)
    return RecordBatch(index, kind.ravel(), bit.ravel(), amp.ravel(), x.ravel(), y.ravel())


def sample_heterodyne_batch(
    src: SourceConfig,
    ch: ChannelConfig,
    workers: int = 1,
    chunk_pulses: int = DEFAULT_CHUNK_PULSES,
) -> RecordBatch:
    """Simulate ``src.pulse_count`` signal pulses with interleaved vacuum slots.

    Each signal slot is followed by ``vacuum_slots_per_signal`` calibration
    slots.  Chunk ``k`` draws from its own sub-stream of ``src.seed``, so the
    result is identical for any ``workers``.
    """
    alpha = src.amplitude
    bounds = [
        (k, s, min(chunk_pulses, src.pulse_count - s))
        for k, s in enumerate(range(0, src.pulse_count, chunk_pulses))
    ]

    def run(b):
        k, s, n = b
        return _sample_chunk(alpha, ch, n, src.vacuum_slots_per_signal, src.seed, k, s)

    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, bounds))
    else:
        parts = [run(b) for b in bounds]
    meta = {
        "seed": src.seed,
        "alpha": alpha,
        "T": ch.transmission,
        "xi": ch.excess_noise if ch.excess_noise_xy is None else list(ch.noise_xy),
    }
    return RecordBatch.concatenate(parts, meta=meta)


def stokes_to_quadrature(s2: float, s3: float, lo_power_photons: float) -> tuple[float, float]:
    """Map S2, S3 to the signal-mode quadratures for a strong real local oscillator.

    With b in a coherent state of real amplitude L >> |a|, S2 ~ 2 L X_a and
    S3 ~ 2 L Y_a, where L = sqrt(lo_power_photons).
    """
    if lo_power_photons <= 0:
        raise ValueError("local oscillator power must be positive")
    root = 2.0 * math.sqrt(lo_power_photons)
    return s2 / root, s3 / root


@dataclass(frozen=True)
class DetectorConfig:
    sample_rate: float = 20e6
    pulse_duration: float = 5e-6
    electronic_noise_rel: float = 10 ** (-14 / 10)
    lowpass_cutoff: float = 2e6
    quantum_efficiency: float = 0.91

    def __post_init__(self):
        n = self.sample_rate * self.pulse_duration
        if abs(n - round(n)) > 1e-9 or round(n) < 1:
            raise ValueError("pulse_duration * sample_rate must be a positive integer")
        if not 0.0 < self.quantum_efficiency <= 1.0:
            raise ValueError("quantum_efficiency must lie in (0, 1]")
        if self.electronic_noise_rel < 0:
            raise ValueError("electronic_noise_rel must be >= 0")

    @property
    def samples_per_pulse(self) -> int:
        return int(round(self.sample_rate * self.pulse_duration))


def homodyne_signal(p_lo: float, p_signal: float, phase: float) -> float:
    """Difference-photocurrent level sqrt(P_lo P_signal) cos(phase), up to the detector gain."""
    return math.sqrt(p_lo * p_signal) * math.cos(phase)


def pulse_envelope(det: DetectorConfig) -> np.ndarray:
    """Rectangular pulse after a first-order low-pass, scaled to sum to samples_per_pulse."""
    n = det.samples_per_pulse
    k = 1.0 - math.exp(-2.0 * math.pi * det.lowpass_cutoff / det.sample_rate)
    env = np.empty(n)
    y = 0.0
    for i in range(n):
        y += k * (1.0 - y)
        env[i] = y
    return env * (n / env.sum())


def simulate_pulse_waveform(
    det: DetectorConfig,
    modulation_amplitude: float,
    rng_seed,
    phase: float = 0.0,
    lo_on: bool = True,
    n_pulses: Optional[int] = None,
) -> np.ndarray:
    """Sampled detector trace(s) for one homodyne pulse.

    ``modulation_amplitude`` is the ideal integrated outcome in SNU.  Samples
    are normalized so the shot noise has unit variance per sample; detection
    efficiency scales the signal by sqrt(eta).  With ``lo_on=False`` only the
    electronic noise remains.  Noise is white at the sample rate; the low-pass
    shapes the pulse envelope.  Returns shape (samples,) or (n_pulses, samples).
    """
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    n = det.samples_per_pulse
    shape = (n,) if n_pulses is None else (n_pulses, n)
    level = math.sqrt(det.quantum_efficiency) * modulation_amplitude * math.cos(phase) / math.sqrt(n)
    trace = rng.standard_normal(shape) * math.sqrt(det.electronic_noise_rel)
    if lo_on:
        trace = trace + level * pulse_envelope(det) + rng.standard_normal(shape)
    return trace


def integrate_pulse(trace: np.ndarray) -> np.ndarray:
    """Integrated pulse amplitude in SNU (vacuum shot noise -> unit variance)."""
    trace = np.asarray(trace)
    return trace.sum(axis=-1) / math.sqrt(trace.shape[-1])
