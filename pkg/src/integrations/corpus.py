"""
Clean speech corpus handling: local loading, clip splitting and archive fetch.
"""

import logging
import os
import tarfile
import zipfile
from typing import List, Tuple

import httpx

from ..config.settings import settings
from ..dsp.signal_io import read_wav
from ..errors import AudioIOError, ConfigError, SignalError, UnwritablePathError
from ..models.audio_models import TimeSignal

logger = logging.getLogger(__name__)

DOWNLOAD_TIMEOUT = 120.0


def list_corpus(directory: str) -> List[str]:
    if not os.path.isdir(directory):
        raise ConfigError(f"Corpus directory not found: {directory}")
    paths = []
    for root, _, files in os.walk(directory):
        paths.extend(os.path.join(root, name) for name in files if name.lower().endswith(".wav"))
    return sorted(paths)


def load_corpus(directory: str, sample_rate: int = None) -> List[Tuple[str, TimeSignal]]:
    """
    All WAV files under directory as (file id, mono signal), sorted by path.

    Stereo files contribute their left channel; any other sample rate is rejected.
    """
    sample_rate = sample_rate or settings.SAMPLE_RATE
    corpus = []
    for path in list_corpus(directory):
        audio = read_wav(path)
        signal = audio[0] if isinstance(audio, tuple) else audio
        if signal.sample_rate != sample_rate:
            raise SignalError(f"{path} is sampled at {signal.sample_rate} Hz, expected {sample_rate} Hz")
        file_id = os.path.splitext(os.path.relpath(path, directory))[0].replace(os.sep, "_")
        corpus.append((file_id, signal))

    if not corpus:
        raise ConfigError(f"No WAV files found under {directory}")
    logger.info(f"Loaded {len(corpus)} corpus files from {directory}")
    return corpus


def split_clips(signals: List[TimeSignal], seconds: float) -> List[TimeSignal]:
    """Non-overlapping clips of exactly `seconds`; remainders are dropped"""
    clips = []
    for signal in signals:
        length = int(round(seconds * signal.sample_rate))
        if length <= 0:
            raise SignalError(f"Clip length must be positive, got {seconds} s")
        for start in range(0, len(signal) - length + 1, length):
            clips.append(TimeSignal(signal.samples[start:start + length], signal.sample_rate))
    return clips


def _extract(archive: str, destination: str) -> None:
    if zipfile.is_zipfile(archive):
        with zipfile.ZipFile(archive) as bundle:
            bundle.extractall(destination)
    elif tarfile.is_tarfile(archive):
        with tarfile.open(archive) as bundle:
            bundle.extractall(destination, filter="data")
    else:
        raise AudioIOError(f"Downloaded corpus {archive} is neither zip nor tar")


def fetch_corpus(url: str, destination: str) -> str:
    """Download a zip/tar archive of WAV files and unpack it into destination"""
    if not url:
        raise ConfigError("No corpus URL configured; set BENET_CORPUS_URL or pass --url")
    try:
        os.makedirs(destination, exist_ok=True)
    except OSError as e:
        raise UnwritablePathError(f"Cannot create corpus directory {destination}: {e}")

    archive = os.path.join(destination, os.path.basename(url.split("?")[0]) or "corpus.archive")
    logger.info(f"Fetching corpus from {url}")
    try:
        with httpx.stream("GET", url, follow_redirects=True, timeout=DOWNLOAD_TIMEOUT) as response:
            response.raise_for_status()
            with open(archive, "wb") as handle:
                for chunk in response.iter_bytes():
                    handle.write(chunk)
    except httpx.HTTPError as e:
        logger.error(f"Corpus download failed: {str(e)}")
        raise AudioIOError(f"Corpus download from {url} failed: {e}")

    _extract(archive, destination)
    os.remove(archive)
    logger.info(f"Corpus unpacked into {destination} ({len(list_corpus(destination))} WAV files)")
    return destination
