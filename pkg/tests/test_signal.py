import numpy as np
import pytest
import soundfile as sf

from app.errors import InvalidArgumentError, DegenerateSignalError, DataIntegrityError
from app.schemas import Waveform, MixtureExample
from app.signal import (
    power, truncate_to_shortest, snr_gain, simulate_mixture,
    target_interference_snr, load_wav, save_wav,
)


def _wave(samples, rate=16000) -> Waveform:
    return Waveform(samples=np.asarray(samples, dtype=np.float64), sample_rate=rate)


def _with_power(p: float, n: int = 1000) -> Waveform:
    """Сигнал +-sqrt(p) с мощностью ровно p"""
    return _wave(np.sqrt(p) * np.where(np.arange(n) % 2 == 0, 1.0, -1.0))


class TestWaveform:
    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            _wave([0.0, np.nan])

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            _wave([])

    def test_samples_are_read_only(self):
        wave = _wave([1.0, 2.0])
        with pytest.raises(ValueError):
            wave.samples[0] = 5.0


class TestTruncate:
    def test_shortest_length_wins(self):
        rng = np.random.default_rng(0)
        waves = [_wave(rng.standard_normal(n)) for n in (100, 80, 120)]
        out = truncate_to_shortest(waves)
        assert [w.num_samples for w in out] == [80, 80, 80]
        for original, cut in zip(waves, out):
            np.testing.assert_array_equal(cut.samples, original.samples[:80])

    def test_single_waveform_unchanged(self):
        wave = _wave(np.ones(50))
        (out,) = truncate_to_shortest([wave])
        assert out.num_samples == 50

    def test_equal_lengths_are_no_op(self):
        a, b = _wave([1.0, 2.0, 3.0]), _wave([4.0, 5.0, 6.0])
        out = truncate_to_shortest([a, b])
        np.testing.assert_array_equal(out[0].samples, a.samples)
        np.testing.assert_array_equal(out[1].samples, b.samples)

    def test_idempotent(self):
        rng = np.random.default_rng(1)
        waves = [_wave(rng.standard_normal(n)) for n in (30, 20)]
        once = truncate_to_shortest(waves)
        twice = truncate_to_shortest(once)
        for a, b in zip(once, twice):
            np.testing.assert_array_equal(a.samples, b.samples)

    def test_empty_list(self):
        with pytest.raises(InvalidArgumentError):
            truncate_to_shortest([])

    def test_mixed_rates(self):
        with pytest.raises(InvalidArgumentError):
            truncate_to_shortest([_wave([1.0, 2.0]), _wave([1.0, 2.0], rate=8000)])


class TestSnrGain:
    @pytest.mark.parametrize("p_ref,p_sig,snr_db,expected", [
        (1.0, 4.0, 0.0, 0.5),
        (1.0, 1.0, 0.0, 1.0),
        (1.0, 4.0, 10.0, 0.1581139),
    ])
    def test_known_gains(self, p_ref, p_sig, snr_db, expected):
        gain = snr_gain(_with_power(p_ref), _with_power(p_sig), snr_db)
        assert gain == pytest.approx(expected, abs=1e-7)

    def test_output_snr_matches_request(self):
        ref, sig = _with_power(1.0), _with_power(4.0)
        gain = snr_gain(ref, sig, 10.0)
        measured = 10 * np.log10(power(ref) / power(_wave(gain * sig.samples)))
        assert measured == pytest.approx(10.0, abs=1e-9)

    def test_scale_covariance(self):
        rng = np.random.default_rng(2)
        ref, sig = _wave(rng.standard_normal(500)), _wave(rng.standard_normal(500))
        base = snr_gain(ref, sig, 3.0)
        scaled = snr_gain(ref, _wave(7.5 * sig.samples), 3.0)
        assert scaled == pytest.approx(base / 7.5, rel=1e-9)

    def test_zero_power(self):
        with pytest.raises(DegenerateSignalError):
            snr_gain(_with_power(1.0), _wave(np.zeros(10)), 0.0)


class TestSimulateMixture:
    def test_unit_gain_case(self):
        t = _with_power(1.0, 64)
        b = _wave(-np.roll(t.samples, 1))
        example = simulate_mixture(t, [b], [0.0], seed=0)
        np.testing.assert_allclose(example.mixture.samples, t.samples + b.samples, atol=1e-12)

    def test_self_mixing(self):
        rng = np.random.default_rng(3)
        t = _wave(rng.standard_normal(100))
        example = simulate_mixture(t, [t], [0.0], seed=0)
        np.testing.assert_allclose(example.mixture.samples, 2 * t.samples, rtol=1e-12)

    def test_per_interferer_snr(self):
        rng = np.random.default_rng(4)
        t = _wave(rng.standard_normal(4000))
        interferers = [_wave(rng.standard_normal(4000)), _wave(3 * rng.standard_normal(4000))]
        example = simulate_mixture(t, interferers, [-5.0, 3.0], seed=1)
        for b, snr in zip(example.interferers, [-5.0, 3.0]):
            measured = 10 * np.log10(power(example.target) / power(b))
            assert measured == pytest.approx(snr, abs=1e-6)

    def test_closure_over_many_mixtures(self):
        rng = np.random.default_rng(5)
        for _ in range(1000):
            n = int(rng.integers(20, 60))
            t = _wave(rng.standard_normal(n))
            k = int(rng.integers(1, 3))
            interferers = [_wave(rng.standard_normal(int(rng.integers(20, 60)))) for _ in range(k)]
            snrs = rng.uniform(-10, 10, size=k)
            example = simulate_mixture(t, interferers, snrs, seed=0)
            rebuilt = example.target.samples + sum(b.samples for b in example.interferers)
            err = np.linalg.norm(rebuilt - example.mixture.samples) / np.linalg.norm(example.mixture.samples)
            assert err <= 1e-6
            for b, snr in zip(example.interferers, snrs):
                assert 10 * np.log10(power(example.target) / power(b)) == pytest.approx(snr, abs=1e-6)

    def test_truncates_to_shortest(self):
        rng = np.random.default_rng(6)
        example = simulate_mixture(_wave(rng.standard_normal(300)), [_wave(rng.standard_normal(200))], [0.0], 0)
        assert example.mixture.num_samples == 200
        assert example.target.num_samples == 200

    def test_deterministic(self):
        rng = np.random.default_rng(7)
        t, b = _wave(rng.standard_normal(100)), _wave(rng.standard_normal(100))
        a1 = simulate_mixture(t, [b], [2.0], seed=9)
        a2 = simulate_mixture(t, [b], [2.0], seed=9)
        np.testing.assert_array_equal(a1.mixture.samples, a2.mixture.samples)

    def test_count_mismatch(self):
        t = _with_power(1.0)
        with pytest.raises(InvalidArgumentError):
            simulate_mixture(t, [t], [0.0, 1.0], seed=0)
        with pytest.raises(InvalidArgumentError):
            simulate_mixture(t, [], [], seed=0)

    def test_broken_closure_rejected(self):
        t = _wave([1.0, 2.0])
        b = _wave([0.5, 0.5])
        with pytest.raises(ValueError):
            MixtureExample(
                target=t, interferers=[b], snrs_db=[0.0],
                mixture=_wave([9.0, 9.0]), num_interferers=1, seed=0,
            )


def test_target_interference_snr():
    rng = np.random.default_rng(8)
    t = _wave(rng.standard_normal(2000))
    one = simulate_mixture(t, [_wave(rng.standard_normal(2000))], [4.0], seed=0)
    assert target_interference_snr(one) == 4.0
    two = simulate_mixture(t, [_wave(rng.standard_normal(2000)), _wave(rng.standard_normal(2000))], [0.0, 0.0], 0)
    # две независимые помехи одной мощности: около -3 дБ
    assert target_interference_snr(two) == pytest.approx(-3.0, abs=0.5)


class TestWavIO:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(9)
        wave = _wave(0.1 * rng.standard_normal(1600))
        path = save_wav(wave, tmp_path / "a" / "x.wav")
        loaded = load_wav(path)
        assert loaded.sample_rate == 16000
        np.testing.assert_allclose(loaded.samples, wave.samples, atol=1e-7)

    def test_int16_input(self, tmp_path):
        path = tmp_path / "pcm.wav"
        sf.write(str(path), np.full(100, 0.5), 16000, subtype="PCM_16")
        loaded = load_wav(path)
        assert loaded.samples.dtype == np.float64
        np.testing.assert_allclose(loaded.samples, 0.5, atol=1e-4)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataIntegrityError) as info:
            load_wav(tmp_path / "nope.wav")
        assert "nope.wav" in str(info.value)

    def test_corrupt_file(self, tmp_path):
        path = tmp_path / "bad.wav"
        path.write_bytes(b"not a wav file")
        with pytest.raises(DataIntegrityError):
            load_wav(path)

    def test_wrong_rate(self, tmp_path):
        path = tmp_path / "r.wav"
        sf.write(str(path), np.zeros(80), 8000)
        with pytest.raises(DataIntegrityError):
            load_wav(path)

    def test_stereo_rejected(self, tmp_path):
        path = tmp_path / "st.wav"
        sf.write(str(path), np.zeros((80, 2)), 16000)
        with pytest.raises(DataIntegrityError):
            load_wav(path)
