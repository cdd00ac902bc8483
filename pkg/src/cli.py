"""
Command-line entry point: python -m src.cli <command> [options]

Exit codes: 0 success, 2 configuration, 3 audio/file I/O, 4 numerical
failure, 1 anything else.
"""

import argparse
import asyncio
import json
import logging
import os
import sys
from typing import List, Optional

import numpy as np
from pydantic import ValidationError

from .agents.dataset_agent import DatasetAgent, corpus_clips, load_manifest, load_training_set, training_plan
from .agents.dereverb_agent import DereverbAgent, output_path_for
from .agents.experiment_agent import ExperimentAgent
from .agents.ild_agent import IldMaskAgent
from .config.settings import configure_logging, settings
from .dsp.metrics import score_pair
from .dsp.room_sim import image_source_rir, rt60_estimate
from .dsp.signal_io import read_wav, write_wav
from .errors import BenetError, ConfigError
from .integrations.corpus import fetch_corpus, load_corpus
from .integrations.report_writer import write_report
from .models.audio_models import TimeSignal
from .models.learning_models import NetConfig, TrainHyper
from .models.report_models import BenetConfig, DereverbOptions, MetricName, MleMode, ScoreReport, ScoreRow
from .models.scenario_models import RoomSpec, default_scenario

logger = logging.getLogger(__name__)


def load_config(path: Optional[str]) -> BenetConfig:
    if not path:
        return BenetConfig()
    try:
        with open(path) as handle:
            return BenetConfig.model_validate_json(handle.read())
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {path}")
    except ValidationError as e:
        raise ConfigError(f"Invalid config {path}: {e}")


def _seed(args, config: BenetConfig) -> int:
    """--seed, then the config file's seed, then BENET_SEED"""
    if args.seed is not None:
        return args.seed
    return config.seed if args.config else settings.SEED


def _mono(path: str) -> TimeSignal:
    audio = read_wav(path)
    return audio[0] if isinstance(audio, tuple) else audio


def cmd_gen_rir(args) -> int:
    room = RoomSpec(dimensions=tuple(args.room), rt60=args.rt60)
    rir = image_source_rir(room, tuple(args.source), tuple(args.mic))
    peak = float(np.max(np.abs(rir.taps)))
    write_wav(args.out, TimeSignal(rir.taps / peak if args.normalize and peak > 0 else rir.taps, rir.sample_rate))
    message = f"Wrote {len(rir)}-tap RIR to {args.out}"
    if room.rt60 > 0:
        message += f" (Schroeder RT60 {rt60_estimate(rir):.3f} s)"
    print(message)
    return 0


def cmd_gen_dataset(args) -> int:
    config = load_config(args.config)
    scenario = config.scenario if args.config else default_scenario(args.rt60)
    corpus = load_corpus(args.corpus or settings.CORPUS_DIR)
    if args.holdout:
        corpus = corpus[:-args.holdout]
    clip_seconds = args.clip_seconds or config.clip_seconds
    clips = corpus_clips(corpus, training_plan(scenario.room.rt60, clip_seconds).clean_samples)
    images = args.images_per_class or config.images_per_class
    manifest = asyncio.run(DatasetAgent().build_dataset(scenario, clips, args.out, images, clip_seconds))
    print(f"Wrote {len(manifest.entries)} images ({manifest.counts}) to {args.out}")
    return 0


def cmd_train(args) -> int:
    config = load_config(args.config)
    manifest = load_manifest(args.manifest)
    images, masks = load_training_set(manifest)
    net = config.net or NetConfig(height=manifest.image_height, width=manifest.image_width)
    hyper = config.train or TrainHyper.for_rt60(manifest.scenario.room.rt60)
    if args.epochs:
        hyper = hyper.model_copy(update={"epochs": args.epochs})
    model = IldMaskAgent().fit(images, masks, net, hyper, seed=_seed(args, config),
                               checkpoint_path=args.out, log_path=args.log)
    print(f"Trained {model.metadata.epochs_run} epochs, accuracy {model.metadata.final_accuracy:.4f}")
    return 0


def _dereverb_options(args) -> DereverbOptions:
    return DereverbOptions(
        use_ild_mask=not args.no_ild,
        use_ipd_mask=not args.no_ipd,
        mle_mode=MleMode.SINGLE_PASS if args.single_pass else MleMode.EM,
    )


def cmd_dereverb(args) -> int:
    options = _dereverb_options(args)
    agent = DereverbAgent.from_checkpoint(args.model or settings.MODEL_PATH, options)
    os.makedirs(args.out_dir, exist_ok=True)
    jobs = [(path, output_path_for(path, args.out_dir)) for path in args.inputs]
    asyncio.run(agent.process_files(jobs))
    for _, destination in jobs:
        print(destination)
    return 0


def cmd_evaluate(args) -> int:
    metrics = [MetricName(name) for name in args.metrics] if args.metrics else list(MetricName)
    scores = score_pair(_mono(args.reference), _mono(args.degraded), metrics)
    row = ScoreRow(condition="evaluate", system=os.path.basename(args.degraded), **scores)
    if args.csv:
        write_report(ScoreReport(experiment="evaluate", rows=[row], aggregate=[row]), args.csv)
    print(json.dumps(scores, indent=2))
    return 0


def cmd_experiment(args) -> int:
    config = load_config(args.config)
    if config.experiment is None:
        raise ConfigError(f"{args.config} has no experiment section")
    spec = config.experiment
    if args.model:
        spec = spec.model_copy(update={"model_path": args.model})
    if args.seed is not None:
        spec = spec.model_copy(update={"seed": args.seed})
    report = asyncio.run(ExperimentAgent().run(spec))
    out = args.out or os.path.join(settings.OUTPUT_DIR, f"{spec.name}.csv")
    print(write_report(report, out))
    return 0


def cmd_fetch_corpus(args) -> int:
    print(fetch_corpus(args.url or settings.CORPUS_URL, args.dest or settings.CORPUS_DIR))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="benet", description="Pseudo-binaural dereverberation toolkit")
    parser.add_argument("--log-level", default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, handler, help_text: str, seeded: bool = False) -> argparse.ArgumentParser:
        command = sub.add_parser(name, help=help_text)
        if seeded:
            command.add_argument("--seed", type=int)
        command.set_defaults(handler=handler)
        return command

    rir = add("gen-rir", cmd_gen_rir, "Simulate one room impulse response")
    rir.add_argument("--room", type=float, nargs=3, default=[5.0, 4.0, 3.0])
    rir.add_argument("--rt60", type=float, default=0.47)
    rir.add_argument("--source", type=float, nargs=3, required=True)
    rir.add_argument("--mic", type=float, nargs=3, required=True)
    rir.add_argument("--normalize", action="store_true")
    rir.add_argument("--out", required=True)

    dataset = add("gen-dataset", cmd_gen_dataset, "Generate paired DP/REV training images")
    dataset.add_argument("--config")
    dataset.add_argument("--rt60", type=float, default=0.47)
    dataset.add_argument("--corpus")
    dataset.add_argument("--images-per-class", type=int)
    dataset.add_argument("--clip-seconds", type=float, help="clean clip length; defaults to the config or RT60 plan")
    dataset.add_argument("--holdout", type=int, default=5, help="trailing corpus files kept for testing")
    dataset.add_argument("--out", required=True)

    train = add("train", cmd_train, "Train the level U-Net", seeded=True)
    train.add_argument("--manifest", required=True)
    train.add_argument("--config")
    train.add_argument("--epochs", type=int)
    train.add_argument("--out", required=True)
    train.add_argument("--log")

    dereverb = add("dereverb", cmd_dereverb, "Dereverberate stereo WAV files")
    dereverb.add_argument("inputs", nargs="+")
    dereverb.add_argument("--model")
    dereverb.add_argument("--out-dir", required=True)
    dereverb.add_argument("--no-ild", action="store_true")
    dereverb.add_argument("--no-ipd", action="store_true")
    dereverb.add_argument("--single-pass", action="store_true")

    evaluate = add("evaluate", cmd_evaluate, "Score a degraded file against a reference")
    evaluate.add_argument("--reference", required=True)
    evaluate.add_argument("--degraded", required=True)
    evaluate.add_argument("--metrics", nargs="+", choices=[m.value for m in MetricName])
    evaluate.add_argument("--csv")

    experiment = add("experiment", cmd_experiment, "Run an experiment protocol from a config", seeded=True)
    experiment.add_argument("--config", required=True)
    experiment.add_argument("--model")
    experiment.add_argument("--out")

    fetch = add("fetch-corpus", cmd_fetch_corpus, "Download and unpack a speech corpus archive")
    fetch.add_argument("--url")
    fetch.add_argument("--dest")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.handler(args)
    except BenetError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except Exception as e:
        logger.error(f"Unexpected error: {str(e)}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
