import numpy as np
import pytest
import soundfile as sf

from src.dsp.signal_io import add_noise, convolve, measured_snr, read_wav, write_wav
from src.errors import (
    AudioFileNotFoundError,
    EmptyAudioError,
    SignalError,
    UnsupportedAudioError,
    UnwritablePathError,
)
from src.models.audio_models import Rir, TimeSignal


def test_mono_round_trip_within_quantization(tmp_path, short_speech):
    path = str(tmp_path / "mono.wav")
    write_wav(path, short_speech)
    back = read_wav(path)
    assert isinstance(back, TimeSignal)
    assert back.sample_rate == short_speech.sample_rate
    assert np.max(np.abs(back.samples - short_speech.samples)) <= 1.0 / 32768


def test_stereo_read_returns_channel_pair(tmp_path, stereo_pair):
    path = str(tmp_path / "stereo.wav")
    write_wav(path, stereo_pair)
    left, right = read_wav(path)
    assert len(left) == len(right) == len(stereo_pair[0])


def test_write_clips_out_of_range_samples(tmp_path):
    path = str(tmp_path / "loud.wav")
    write_wav(path, TimeSignal(np.array([1.5, -1.5, 0.25]), 16000))
    back = read_wav(path)
    assert back.samples.max() < 1.0
    assert back.samples.min() == -1.0


def test_float_wav_is_accepted(tmp_path):
    path = str(tmp_path / "float.wav")
    sf.write(path, np.linspace(-0.5, 0.5, 100), 16000, subtype="FLOAT")
    assert len(read_wav(path)) == 100


def test_unsupported_and_missing_files(tmp_path):
    pcm24 = str(tmp_path / "pcm24.wav")
    sf.write(pcm24, np.zeros(100), 16000, subtype="PCM_24")
    with pytest.raises(UnsupportedAudioError):
        read_wav(pcm24)
    with pytest.raises(AudioFileNotFoundError):
        read_wav(str(tmp_path / "nothing.wav"))


def test_empty_file_rejected(tmp_path):
    path = str(tmp_path / "empty.wav")
    sf.write(path, np.zeros(0), 16000, subtype="PCM_16")
    with pytest.raises(EmptyAudioError):
        read_wav(path)


def test_unwritable_destination(tmp_path):
    with pytest.raises(UnwritablePathError):
        write_wav(str(tmp_path / "missing" / "out.wav"), TimeSignal(np.zeros(10), 16000))


def test_convolve_keeps_full_tail():
    signal = TimeSignal(np.ones(100), 16000)
    out = convolve(signal, Rir(np.array([1.0, 0.5, 0.25]), 16000))
    assert len(out) == 102
    assert out.samples[50] == pytest.approx(1.75)
    with pytest.raises(SignalError):
        convolve(signal, Rir(np.ones(3), 8000))


def test_add_noise_hits_target_snr_exactly(short_speech):
    noisy = add_noise(short_speech, 10.0, seed=7)
    assert measured_snr(short_speech, noisy) == pytest.approx(10.0, abs=1e-9)
    again = add_noise(short_speech, 10.0, seed=7)
    np.testing.assert_array_equal(noisy.samples, again.samples)


def test_add_noise_infinite_snr_and_silence(short_speech):
    clean = add_noise(short_speech, float("inf"), seed=0)
    np.testing.assert_array_equal(clean.samples, short_speech.samples)
    with pytest.raises(SignalError):
        add_noise(TimeSignal(np.zeros(100), 16000), 20.0, seed=0)


def test_convolve_with_delayed_impulse_shifts(short_speech):
    taps = np.zeros(81)
    taps[80] = 1.0
    out = convolve(short_speech, Rir(taps, 16000))
    np.testing.assert_allclose(out.samples[80:], short_speech.samples, atol=1e-12)
    np.testing.assert_allclose(out.samples[:80], 0.0, atol=1e-12)
