import asyncio
import json
import os

import numpy as np
import pytest

from src.agents import dataset_agent, experiment_agent
from src.agents.dataset_agent import (
    DatasetAgent,
    RirBank,
    clip_plan,
    corpus_clips,
    generate_training_data,
    load_manifest,
    load_training_set,
    reverberation_side,
    training_plan,
)
from src.agents.dereverb_agent import DereverbAgent, dereverberate, output_path_for, product_mask
from src.agents.experiment_agent import (
    ExperimentAgent,
    condition_label,
    near_far_offsets,
    position_shift_offsets,
    scenarios_for,
)
from src.agents.ild_agent import build_net
from src.cli import main
from src.dsp import beamformer
from src.dsp.metrics import score_pair
from src.dsp.room_sim import scenario_rirs
from src.dsp.signal_io import add_noise, convolve, read_wav, write_wav
from src.errors import ConfigError, ShapeMismatchError, SignalError
from src.integrations.report_writer import aggregate_rows
from src.models.audio_models import BEAMFORMER, INTERAURAL, Rir, TfMask, TimeSignal
from src.models.learning_models import MaskClass, NetConfig
from src.models.report_models import DereverbOptions, ExperimentSpec, MetricName, ScoreRow
from src.models.scenario_models import default_room, default_scenario

from .conftest import decaying_rir, fractional_delay, speech_like

SR = 16000
NO_MASKS = DereverbOptions(use_ild_mask=False, use_ipd_mask=False)


def _impulse(delay: int, length: int = 64) -> Rir:
    taps = np.zeros(length)
    taps[delay] = 1.0
    return Rir(taps, SR)


def _synthetic_bank() -> RirBank:
    left = [decaying_rir(0.25, 2000, seed=k) for k in range(8)]
    right = [decaying_rir(0.25, 2000, seed=10 + k) for k in range(8)]
    steering = beamformer.steering_from_rirs([_impulse(10 + k // 3) for k in range(8)], BEAMFORMER)
    return RirBank(left_array=left, right_array=right, left_steering=steering, right_steering=steering,
                   direct_binaural=[_impulse(10), _impulse(12)])


def test_product_mask():
    ild = TfMask(np.full((3, 2), 0.5))
    ipd = TfMask(np.array([[1.0, 0.0], [0.5, 0.5], [0.2, 1.0]]))
    np.testing.assert_allclose(product_mask(ild, ipd).values, [[0.5, 0.0], [0.25, 0.25], [0.1, 0.5]])
    with pytest.raises(ShapeMismatchError):
        product_mask(ild, TfMask(np.ones((2, 3))))


@pytest.mark.parametrize("rt60, clean, reverberant, width", [
    (0.89, 16000, 26320, 100),
    (0.70, 15680, 24080, 92),
    (0.47, 16000, 21520, 82),
    (0.25, 16000, 18640, 70),
])
def test_clip_plan_table(rt60, clean, reverberant, width):
    plan = clip_plan(rt60)
    assert (plan.clean_samples, plan.reverberant_samples, plan.width) == (clean, reverberant, width)


def test_clip_plan_other_rt60_has_even_width():
    plan = clip_plan(0.6)
    assert plan.clean_samples == SR
    assert plan.width % 2 == 0
    assert plan.reverberant_samples >= SR + int(0.725 * 0.6 * SR)


def test_masks_off_reconstructs_input(speech):
    out = dereverberate(speech, speech, None, NO_MASKS)
    frames = INTERAURAL.num_frames(len(speech))
    assert len(out) == (frames - 1) * INTERAURAL.hop + INTERAURAL.frame_len
    interior = slice(INTERAURAL.frame_len, len(speech) - INTERAURAL.frame_len)
    np.testing.assert_allclose(out.samples[interior], speech.samples[interior], atol=1e-9)


def test_both_channels_are_masked_and_averaged(speech):
    other = speech_like(2.0, seed=5)
    out = dereverberate(speech, other, None, NO_MASKS)
    interior = slice(INTERAURAL.frame_len, len(speech) - INTERAURAL.frame_len)
    expected = 0.5 * (speech.samples + other.samples)
    np.testing.assert_allclose(out.samples[interior], expected[interior], atol=1e-9)


def test_dereverberate_input_checks(speech):
    with pytest.raises(ConfigError):
        dereverberate(speech, speech, None, DereverbOptions(use_ipd_mask=False))
    with pytest.raises(SignalError):
        dereverberate(speech, speech.fit_length(len(speech) - 1), None, NO_MASKS)
    low_rate = TimeSignal(speech.samples, 8000)
    with pytest.raises(SignalError):
        dereverberate(low_rate, low_rate, None, NO_MASKS)


def test_dereverberate_with_both_masks(stereo_pair):
    left, right = stereo_pair
    model = build_net(NetConfig(height=1024, width=8, channels=(2, 2)), seed=0)
    out = dereverberate(left, right, model, DereverbOptions(max_iterations=3))
    assert np.all(np.isfinite(out.samples))
    assert len(out) >= len(left)
    assert 0.0 < out.energy


def test_reverberation_side_without_beamformer_is_reference(monkeypatch, short_speech):
    monkeypatch.setattr(beamformer, "mvdr_beamform",
                        lambda specs, steering: specs[0].with_bins(np.zeros(specs[0].shape)))
    bank = _synthetic_bank()
    length = 18000
    rev = reverberation_side(short_speech, bank.left_array, bank.left_steering, length)
    expected = convolve(short_speech, bank.left_array[0]).fit_length(length)
    interior = slice(BEAMFORMER.frame_len, 17000 - BEAMFORMER.frame_len)
    np.testing.assert_allclose(rev.samples[interior], expected.samples[interior], atol=1e-9)


def test_generate_training_data(monkeypatch, tmp_path):
    monkeypatch.setattr(dataset_agent, "build_rir_bank", lambda scenario, sample_rate=None: _synthetic_bank())
    corpus = [("spk1_000", speech_like(1.0, seed=1)), ("spk2_000", speech_like(1.0, seed=2))]
    scenario = default_scenario(0.25)
    manifest = generate_training_data(scenario, corpus, str(tmp_path))

    assert manifest.counts == {"DP": 2, "REV": 2}
    assert (manifest.image_height, manifest.image_width) == (1024, 70)
    for entry in manifest.entries:
        assert os.path.exists(entry.image_path) and os.path.exists(entry.left_audio_path)

    loaded = load_manifest(str(tmp_path / "manifest.json"))
    images, masks = load_training_set(loaded)
    assert all(image.shape == (1024, 70) for image in images)
    assert all(0.0 <= image.min() and image.max() <= 1.0 for image in images)
    assert {mask.mask_class for mask in masks} == {MaskClass.DP, MaskClass.REV}


def test_dataset_agent_limits_images(monkeypatch, tmp_path):
    monkeypatch.setattr(dataset_agent, "build_rir_bank", lambda scenario, sample_rate=None: _synthetic_bank())
    corpus = [(f"clip_{k}", speech_like(1.0, seed=k)) for k in range(3)]
    manifest = asyncio.run(DatasetAgent(max_workers=2).build_dataset(
        default_scenario(0.25), corpus, str(tmp_path), images_per_class=2))
    assert manifest.counts == {"DP": 2, "REV": 2}
    assert json.loads((tmp_path / "manifest.json").read_text())["image_width"] == 70


def test_clip_seconds_sets_training_clip_length(monkeypatch, tmp_path):
    monkeypatch.setattr(dataset_agent, "build_rir_bank", lambda scenario, sample_rate=None: _synthetic_bank())
    plan = training_plan(0.25, clip_seconds=0.5)
    assert (plan.clean_samples, plan.reverberant_samples) == (8000, 10640)
    assert plan.width == INTERAURAL.num_frames(10640)
    assert training_plan(0.25) == clip_plan(0.25)

    corpus = [("clip", speech_like(0.5, seed=4))]
    manifest = generate_training_data(default_scenario(0.25), corpus, str(tmp_path), clip_seconds=0.5)
    assert manifest.image_width == plan.width
    assert len(read_wav(manifest.entries[0].left_audio_path)) == 10640


def test_gen_dataset_command_uses_configured_clip_length(monkeypatch, tmp_path):
    monkeypatch.setattr(dataset_agent, "build_rir_bank", lambda scenario, sample_rate=None: _synthetic_bank())
    corpus_dir = tmp_path / "corpus"
    corpus_dir.mkdir()
    for k in range(2):
        write_wav(str(corpus_dir / f"spk{k}.wav"), speech_like(1.0, seed=k))
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"scenario": default_scenario(0.25).model_dump(), "clip_seconds": 0.5}))
    out = tmp_path / "data"

    code = main(["gen-dataset", "--config", str(config), "--corpus", str(corpus_dir),
                 "--holdout", "0", "--out", str(out)])
    assert code == 0
    manifest = load_manifest(str(out / "manifest.json"))
    assert manifest.counts == {"DP": 4, "REV": 4}
    assert manifest.image_width == training_plan(0.25, clip_seconds=0.5).width


def test_short_clip_rejected():
    with pytest.raises(SignalError):
        dataset_agent.render_clip(speech_like(0.5), _synthetic_bank(), clip_plan(0.25))


def test_corpus_clips():
    corpus = [("a", speech_like(2.5, seed=3)), ("b", TimeSignal(np.zeros(SR), SR))]
    clips = corpus_clips(corpus, SR)
    assert [clip_id for clip_id, _ in clips] == ["a_000", "a_001"]
    assert all(len(clip) == SR for _, clip in clips)
    with pytest.raises(ConfigError):
        corpus_clips([("b", TimeSignal(np.zeros(SR), SR))], SR)
    with pytest.raises(ConfigError):
        load_manifest("/nonexistent/manifest.json")


def test_offset_protocols():
    shifts = position_shift_offsets()
    assert len(shifts) == 19 and len(set(shifts)) == 19
    assert (0.0, 0.0, -0.15) in shifts
    assert near_far_offsets() == [(0.0, 0.0, 0.0), (-0.05, 0.0, 0.0), (-0.5, 0.0, 0.0)]
    assert condition_label(default_room(0.47), (0.05, 0.0, 0.0)) == "rt470ms offset(+0.05,+0.00,+0.00)"


def test_invalid_offset_is_config_error():
    spec = ExperimentSpec(model_path="unused", scenario=default_scenario(0.25), offsets=[(-10.0, 0.0, 0.0)])
    with pytest.raises(ConfigError):
        scenarios_for(spec)


def test_aggregate_rows_means():
    rows = [ScoreRow(condition="c", system="s", file_id=str(k), cep=float(k), fwseg_snr=2.0 * k) for k in range(3)]
    rows.append(ScoreRow(condition="c", system="t", file_id="0", cep=4.0))
    aggregate = aggregate_rows(rows)
    assert [(row.system, row.cep, row.fwseg_snr) for row in aggregate] == [("s", 1.0, 2.0), ("t", 4.0, None)]


def test_experiment_run(monkeypatch, tmp_path):
    def fake_scene(scenario, label, with_beamformers):
        binaural = [decaying_rir(0.3, 3000, seed=1), decaying_rir(0.3, 3000, seed=2)]
        return experiment_agent.TestScene(label=label, binaural=binaural, reference=Rir(np.array([1.0]), SR))

    monkeypatch.setattr(experiment_agent, "build_scene", fake_scene)
    path = str(tmp_path / "utt.wav")
    write_wav(path, speech_like(2.0, seed=9))
    spec = ExperimentSpec(
        name="smoke",
        model_path="unused",
        scenario=default_scenario(0.25),
        offsets=[(0.0, 0.0, 0.0), (0.05, 0.0, 0.0)],
        metrics=[MetricName.CEP, MetricName.FWSEG_SNR],
        test_files=[path],
        dereverb=DereverbOptions(use_ild_mask=False, max_iterations=2),
    )
    agent = DereverbAgent(options=spec.dereverb)
    report = asyncio.run(ExperimentAgent(max_workers=2).run(spec, agent))
    assert len(report.rows) == 4
    assert {row.system for row in report.rows} == {"unprocessed", "benet"}
    assert len(report.aggregate) == 4
    assert all(row.srmr is None and row.cep is not None for row in report.rows)


def test_experiment_requires_model_for_ild_mask():
    spec = ExperimentSpec(model_path="/nonexistent/model.ckpt", scenario=default_scenario(0.25))
    with pytest.raises(ConfigError):
        asyncio.run(ExperimentAgent().run(spec))


def test_dereverb_agent_files(tmp_path, stereo_pair):
    source = str(tmp_path / "in.wav")
    write_wav(source, stereo_pair)
    agent = DereverbAgent(options=DereverbOptions(use_ild_mask=False, max_iterations=2))
    target = output_path_for(source, str(tmp_path))
    assert target.endswith("in_benet.wav")
    outputs = asyncio.run(agent.process_files([(source, target)]))
    assert isinstance(read_wav(target), TimeSignal)
    assert len(outputs) == 1

    mono = str(tmp_path / "mono.wav")
    write_wav(mono, stereo_pair[0])
    with pytest.raises(SignalError):
        agent.process_file(mono, str(tmp_path / "out.wav"))


def test_dereverb_on_delayed_pair_keeps_length(speech):
    right = TimeSignal(fractional_delay(speech.samples, -2.0), SR)
    out = DereverbAgent(options=DereverbOptions(use_ild_mask=False, max_iterations=2)).process(speech, right)
    assert len(out) == (INTERAURAL.num_frames(len(speech)) - 1) * INTERAURAL.hop + INTERAURAL.frame_len


def test_product_mask_algebra():
    rng = np.random.default_rng(0)
    a, b = TfMask(rng.random((4, 5))), TfMask(rng.random((4, 5)))
    np.testing.assert_array_equal(product_mask(a, b).values, product_mask(b, a).values)
    assert np.all(product_mask(a, b).values <= np.minimum(a.values, b.values))
    np.testing.assert_array_equal(product_mask(TfMask.ones((4, 5)), a).values, a.values)
    np.testing.assert_array_equal(product_mask(TfMask(np.zeros((4, 5))), a).values, 0.0)


def test_dereverberation_never_touches_the_beamformer(monkeypatch, stereo_pair):
    def forbidden(*args, **kwargs):
        raise AssertionError("beamformer invoked during binaural inference")

    monkeypatch.setattr(beamformer, "mvdr_beamform", forbidden)
    left, right = stereo_pair
    out = dereverberate(left, right, None, DereverbOptions(use_ild_mask=False, max_iterations=2))
    assert np.all(np.isfinite(out.samples))


def test_anechoic_scene_is_not_degraded():
    scenario = default_scenario(0.47)
    scenario = scenario.in_room(scenario.room.anechoic())
    clean = speech_like(2.0, seed=7)
    rirs = scenario_rirs(scenario, scenario.binaural_positions)
    reference = convolve(clean, rirs[0])
    left, right = (add_noise(convolve(clean, rir), 20.0, seed) for seed, rir in enumerate(rirs))
    output = dereverberate(left, right, None, DereverbOptions(use_ild_mask=False)).fit_length(len(reference))

    metrics = [MetricName.CEP, MetricName.FWSEG_SNR]
    before, after = score_pair(reference, left, metrics), score_pair(reference, output, metrics)
    assert after["cep"] <= before["cep"] + 0.5
    assert after["fwseg_snr"] >= before["fwseg_snr"] - 1.0
