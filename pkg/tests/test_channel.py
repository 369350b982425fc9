import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from cvqkd.channel import (
    ChannelConfig,
    DetectorConfig,
    RecordBatch,
    RecordKind,
    SourceConfig,
    TrialRecord,
    amplitude_for_overlap,
    apply_channel,
    eve_overlap,
    eve_tap_amplitude,
    integrate_pulse,
    pulse_envelope,
    sample_heterodyne_batch,
    simulate_pulse_waveform,
    stokes_to_quadrature,
    substream,
)
from cvqkd.estimation import excess_noise_report
from cvqkd.quantum import SNU_SCALE, coherent_overlap

from . import oracles

ALPHA_051 = 0.5802346737587153  # sqrt(-ln 0.51 / 2)


class TestAmplitudes:
    def test_overlap_inversion(self):
        assert amplitude_for_overlap(0.51) == pytest.approx(ALPHA_051, abs=1e-14)
        assert amplitude_for_overlap(0.51) == pytest.approx(0.58026, abs=1e-4)
        assert amplitude_for_overlap(math.exp(-2)) == pytest.approx(1.0, abs=1e-14)
        assert amplitude_for_overlap(1 - 1e-12) < 1e-5

    @given(st.floats(1e-6, 1 - 1e-6))
    def test_round_trip(self, o):
        a = amplitude_for_overlap(o)
        assert coherent_overlap(-a, a).real == pytest.approx(o, abs=1e-12)

    @pytest.mark.parametrize("o", [0.0, 1.0, -0.1, 1.5])
    def test_rejects(self, o):
        with pytest.raises(ValueError):
            amplitude_for_overlap(o)

    def test_apply_channel(self):
        assert apply_channel(0.7, ChannelConfig(1.0)) == (0.7, 1.0)
        mean, var = apply_channel(ALPHA_051, ChannelConfig(0.457, 0.03))
        assert mean == pytest.approx(0.3922489393494525, abs=1e-14)
        assert var == pytest.approx(1.03)

    def test_tap(self):
        assert eve_tap_amplitude(0.9, 1.0) == 0.0
        assert eve_tap_amplitude(ALPHA_051, 0.457) == pytest.approx(0.42756642315681465, abs=1e-14)

    @given(st.floats(0, 3), st.floats(1e-6, 1))
    def test_energy_conservation(self, a, T):
        bob = apply_channel(a, ChannelConfig(T))[0]
        assert bob**2 + eve_tap_amplitude(a, T) ** 2 == pytest.approx(a * a, abs=1e-14)

    def test_eve_overlap(self):
        assert eve_overlap(1.0, 1.0) == 1.0
        assert eve_overlap(1.0, 0.5) == pytest.approx(math.exp(-1.0))


class TestConfigs:
    def test_exactly_one_amplitude(self):
        with pytest.raises(ValueError):
            SourceConfig()
        with pytest.raises(ValueError):
            SourceConfig(alpha=0.5, target_overlap=0.5)

    def test_pulse_count(self):
        with pytest.raises(ValueError):
            SourceConfig(alpha=0.5, pulse_count=0)

    @pytest.mark.parametrize("T", [0.0, -0.1, 1.1])
    def test_transmission_range(self, T):
        with pytest.raises(ValueError):
            ChannelConfig(T)

    def test_negative_noise(self):
        with pytest.raises(ValueError):
            ChannelConfig(1.0, -0.01)

    def test_detector_samples(self):
        assert DetectorConfig().samples_per_pulse == 100
        with pytest.raises(ValueError):
            DetectorConfig(pulse_duration=5.01e-6)


class TestSampler:
    def test_row_layout(self):
        b = sample_heterodyne_batch(SourceConfig(target_overlap=0.51, pulse_count=1000, seed=42), ChannelConfig(1.0))
        assert len(b.signal) == 1000 and len(b.vacuum) == 5000
        assert np.array_equal(b.index, np.arange(6000))
        assert np.all(b.kind[::6] == RecordKind.SIGNAL)
        vac = b.vacuum
        assert np.all(vac.bit == -1) and np.all(vac.sent_amplitude == 0)

    def test_records_view(self):
        b = sample_heterodyne_batch(SourceConfig(alpha=0.3, pulse_count=3, seed=1), ChannelConfig(1.0))
        recs = list(b)
        assert isinstance(recs[0], TrialRecord)
        assert recs[0].kind is RecordKind.SIGNAL and recs[0].bit in (0, 1)
        assert recs[0].sent_amplitude == (0.3 if recs[0].bit == 1 else -0.3)
        assert recs[1].bit is None and recs[1].sent_amplitude == 0.0
        again = RecordBatch.from_records(recs)
        assert np.array_equal(again.outcome_x, b.outcome_x)

    def test_deterministic(self):
        src = SourceConfig(alpha=0.5, pulse_count=70000, seed=7)
        a = sample_heterodyne_batch(src, ChannelConfig(0.6, 0.02))
        b = sample_heterodyne_batch(src, ChannelConfig(0.6, 0.02))
        assert np.array_equal(a.outcome_x, b.outcome_x) and np.array_equal(a.bit, b.bit)

    @pytest.mark.parametrize("workers", [2, 4, 8])
    def test_worker_count_irrelevant(self, workers):
        src = SourceConfig(alpha=0.5, pulse_count=100000, seed=3)
        a = sample_heterodyne_batch(src, ChannelConfig(0.6))
        b = sample_heterodyne_batch(src, ChannelConfig(0.6), workers=workers)
        for f in ("index", "kind", "bit", "outcome_x", "outcome_y"):
            assert np.array_equal(getattr(a, f), getattr(b, f))

    def test_seed_changes_output(self):
        a = sample_heterodyne_batch(SourceConfig(alpha=0.5, pulse_count=100, seed=1), ChannelConfig())
        b = sample_heterodyne_batch(SourceConfig(alpha=0.5, pulse_count=100, seed=2), ChannelConfig())
        assert not np.array_equal(a.outcome_x, b.outcome_x)

    def test_vacuum_variance(self):
        b = sample_heterodyne_batch(
            SourceConfig(alpha=0.0, pulse_count=200000, vacuum_slots_per_signal=4, seed=11), ChannelConfig()
        )
        v = b.vacuum.outcome_x
        assert len(v) == 800000
        assert abs(np.var(v, ddof=1) - 1) < 3 * math.sqrt(2 / len(v))

    def test_zero_modulation_ks(self):
        b = sample_heterodyne_batch(SourceConfig(alpha=0.0, pulse_count=20000, seed=5), ChannelConfig(0.5))
        assert stats.ks_2samp(b.signal.outcome_x, b.vacuum.outcome_x).pvalue > 0.01

    @pytest.mark.parametrize("alpha,T,xi", [(0.58, 1.0, 0.0), (0.3, 0.457, 0.05), (0.9, 0.65, 0.2)])
    def test_moments_match_channel(self, alpha, T, xi):
        n = 100000
        b = sample_heterodyne_batch(SourceConfig(alpha=alpha, pulse_count=n, vacuum_slots_per_signal=0, seed=9), ChannelConfig(T, xi))
        mean, var = apply_channel(alpha, ChannelConfig(T, xi))
        for bit, sign in ((1, 1), (0, -1)):
            sel = b.with_bit(bit)
            m = len(sel)
            assert abs(sel.outcome_x.mean() - sign * SNU_SCALE * mean) < 4 * math.sqrt(var / m)
            assert abs(sel.outcome_y.mean()) < 4 * math.sqrt(var / m)
            assert abs(np.var(sel.outcome_x, ddof=1) - var) < 4 * var * math.sqrt(2 / m)

    def test_bits_balanced(self):
        b = sample_heterodyne_batch(SourceConfig(alpha=0.5, pulse_count=100000, seed=13), ChannelConfig())
        assert abs(b.signal.bit.mean() - 0.5) < 4 * math.sqrt(0.25 / 100000)

    def test_table_statistics(self):
        # o = 0.51, T = 1, xi = 0 over one 250000-pulse sequence: 1-sigma error below 0.5 %
        b = sample_heterodyne_batch(SourceConfig(target_overlap=0.51, pulse_count=250000, seed=42), ChannelConfig())
        rep = excess_noise_report(b)
        assert rep.stat_error_x < 0.005 and rep.stat_error_y < 0.005
        assert abs(rep.E_x) < 3 * rep.stat_error_x and abs(rep.E_y) < 3 * rep.stat_error_y

    def test_per_axis_noise(self):
        b = sample_heterodyne_batch(
            SourceConfig(alpha=0.2, pulse_count=100000, vacuum_slots_per_signal=1, seed=17),
            ChannelConfig(1.0, 0.0, (0.2, 0.0)),
        )
        rep = excess_noise_report(b)
        assert rep.E_x == pytest.approx(0.2, abs=4 * rep.stat_error_x)
        assert rep.E_y == pytest.approx(0.0, abs=4 * rep.stat_error_y)

    def test_substreams_independent(self):
        a = substream(1, "signal", 0).standard_normal(4)
        b = substream(1, "signal", 1).standard_normal(4)
        c = substream(1, "other", 0).standard_normal(4)
        assert not np.allclose(a, b) and not np.allclose(a, c)
        assert np.array_equal(a, substream(1, "signal", 0).standard_normal(4))


class TestStokes:
    def test_zero(self):
        assert stokes_to_quadrature(0, 0, 1e6) == (0.0, 0.0)

    def test_homogeneity(self):
        x, y = stokes_to_quadrature(3.0, -1.0, 1e6)
        x2, y2 = stokes_to_quadrature(6.0, -2.0, 4e6)
        assert abs(x - x2) < 1e-14 and abs(y - y2) < 1e-14

    def test_rejects_lo(self):
        with pytest.raises(ValueError):
            stokes_to_quadrature(1, 1, 0)

    def test_two_mode_coherent_state(self):
        # <S2> = <a_L^dag a_S + a_S^dag a_L> and <S3> = i<a_S^dag a_L - a_L^dag a_S> on |beta>_S |L>_L
        beta, L = 0.3 - 0.4j, 3.0
        dim = 40
        a = oracles.ladder(dim)
        ket_s = np.zeros(dim, complex)
        ket_l = np.zeros(dim, complex)
        ket_s[:] = oracles.coherent_ket(beta, keep=dim)
        ket_l[:] = oracles.coherent_ket(L, keep=dim)
        aS = np.kron(a, np.eye(dim))
        aL = np.kron(np.eye(dim), a)
        psi = np.kron(ket_s, ket_l)
        s2 = np.vdot(psi, (aL.conj().T @ aS + aS.conj().T @ aL) @ psi).real
        s3 = np.vdot(psi, 1j * (aS.conj().T @ aL - aL.conj().T @ aS) @ psi).real
        x, y = stokes_to_quadrature(s2, s3, L * L)
        assert x == pytest.approx(beta.real, abs=1e-9)
        assert y == pytest.approx(beta.imag, abs=1e-9)


class TestWaveform:
    det = DetectorConfig()

    def test_shape(self):
        assert simulate_pulse_waveform(self.det, 0.0, 1).shape == (100,)
        assert simulate_pulse_waveform(self.det, 0.0, 1, n_pulses=3).shape == (3, 100)

    def test_zero_modulation(self):
        tr = simulate_pulse_waveform(self.det, 0.0, 2, n_pulses=5000)
        n = tr.size
        assert abs(tr.mean()) < 4 / math.sqrt(n)
        expected = 1 + self.det.electronic_noise_rel
        assert abs(tr.var() - expected) < 4 * expected * math.sqrt(2 / n)

    def test_electronic_noise_ratio(self):
        shot_plus = simulate_pulse_waveform(self.det, 0.0, 3, n_pulses=10000)
        el = simulate_pulse_waveform(self.det, 0.0, 4, lo_on=False, n_pulses=10000)
        ratio_db = 10 * math.log10(el.var() / (shot_plus.var() - el.var()))
        assert abs(ratio_db + 14) < 0.5

    def test_integration_reduces_variance(self):
        tr = simulate_pulse_waveform(self.det, 0.0, 5, n_pulses=20000)
        single = tr[:, 50].var()
        averaged = tr.mean(axis=1).var()
        assert single / averaged == pytest.approx(100, rel=0.1)

    def test_integrated_matches_sampler(self):
        det = DetectorConfig(quantum_efficiency=1.0, electronic_noise_rel=0.0)
        mod = SNU_SCALE * 0.58
        out = integrate_pulse(simulate_pulse_waveform(det, mod, 6, n_pulses=20000))
        assert abs(out.mean() - mod) < 4 / math.sqrt(20000)
        assert abs(out.var() - 1) < 4 * math.sqrt(2 / 20000)

    def test_efficiency_scales_signal(self):
        out = integrate_pulse(simulate_pulse_waveform(self.det, 2.0, 7, n_pulses=20000))
        assert abs(out.mean() - 2.0 * math.sqrt(0.91)) < 4 * math.sqrt(1.05 / 20000)

    def test_envelope(self):
        env = pulse_envelope(self.det)
        assert env.sum() == pytest.approx(100)
        assert np.all(np.diff(env) >= 0)
