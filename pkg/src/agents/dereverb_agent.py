import asyncio
import logging
import os
from typing import List, Optional, Tuple

import numpy as np

from ..config.settings import settings
from ..dsp.signal_io import read_wav, write_wav
from ..dsp.spatial_cues import interaural_spectrogram
from ..dsp.stft import apply_mask, istft, stft
from ..errors import ConfigError, ShapeMismatchError, SignalError
from ..models.audio_models import INTERAURAL, TauGrid, TfMask, TimeSignal
from ..models.report_models import DereverbOptions
from .ild_agent import IldMaskAgent, LevelUNet
from .ipd_agent import IpdMaskAgent

logger = logging.getLogger(__name__)


def product_mask(ild_mask: TfMask, ipd_mask: TfMask) -> TfMask:
    if ild_mask.shape != ipd_mask.shape:
        raise ShapeMismatchError(f"Mask shapes differ: {ild_mask.shape} vs {ipd_mask.shape}")
    return TfMask(ild_mask.values * ipd_mask.values)


def dereverberate(left: TimeSignal, right: TimeSignal, model: Optional[LevelUNet],
                  options: Optional[DereverbOptions] = None, grid: Optional[TauGrid] = None) -> TimeSignal:
    """
    Mask both ears with the ILD x IPD product mask and add the results.

    Output length is the natural inverse-STFT length of the input framing.
    """
    options = options or DereverbOptions()
    if left.sample_rate != right.sample_rate or len(left) != len(right):
        raise SignalError("Left and right channels must share sample rate and length")
    if left.sample_rate != settings.SAMPLE_RATE:
        raise SignalError(f"Expected {settings.SAMPLE_RATE} Hz input, got {left.sample_rate} Hz")

    left_spec = stft(left, INTERAURAL)
    right_spec = stft(right, INTERAURAL)

    if options.use_ild_mask:
        if model is None:
            raise ConfigError("The ILD mask needs a trained level U-Net")
        ild_mask = IldMaskAgent(model).mask_for(interaural_spectrogram(left_spec, right_spec))
    else:
        ild_mask = TfMask.ones(left_spec.shape)

    if options.use_ipd_mask:
        ipd_mask = IpdMaskAgent(grid, options).mask_for(left_spec, right_spec).direct_mask
    else:
        ipd_mask = TfMask.ones(left_spec.shape)

    mask = product_mask(ild_mask, ipd_mask).values
    combined = options.output_scale * (apply_mask(left_spec, mask).bins + apply_mask(right_spec, mask).bins)
    return istft(left_spec.with_bins(combined))


class DereverbAgent:
    """
    Dereverberation Agent - binaural mask fusion and resynthesis

    Responsibilities:
    - Hold the trained level U-Net and the dereverberation options
    - Dereverberate stereo signals or WAV files
    - Fan out batches of files over worker threads
    """

    def __init__(self, model: Optional[LevelUNet] = None, options: Optional[DereverbOptions] = None,
                 max_workers: Optional[int] = None):
        self.model = model
        self.options = options or DereverbOptions()
        self.max_workers = max_workers or settings.MAX_WORKERS
        self.name = "Dereverberation Agent"

    @classmethod
    def from_checkpoint(cls, path: Optional[str], options: Optional[DereverbOptions] = None) -> "DereverbAgent":
        options = options or DereverbOptions()
        model = IldMaskAgent.from_checkpoint(path).model if (path and options.use_ild_mask) else None
        return cls(model, options)

    def process(self, left: TimeSignal, right: TimeSignal) -> TimeSignal:
        try:
            logger.info(f"Dereverberating {left.duration:.2f} s of stereo audio")
            output = dereverberate(left, right, self.model, self.options)
            logger.info(f"Dereverberation completed - {len(output)} samples")
            return output
        except Exception as e:
            logger.error(f"Error in dereverberation: {str(e)}")
            raise

    def process_file(self, input_path: str, output_path: str) -> TimeSignal:
        audio = read_wav(input_path)
        if not isinstance(audio, tuple):
            raise SignalError(f"{input_path} is mono; dereverberation needs a stereo recording")
        output = self.process(*audio)
        peak = np.max(np.abs(output.samples))
        if peak > 1.0:
            logger.warning(f"Output peak {peak:.2f} exceeds full scale and will be clipped")
        write_wav(output_path, output)
        return output

    async def process_files(self, jobs: List[Tuple[str, str]]) -> List[TimeSignal]:
        semaphore = asyncio.Semaphore(self.max_workers)

        async def run_one(input_path: str, output_path: str) -> TimeSignal:
            async with semaphore:
                return await asyncio.to_thread(self.process_file, input_path, output_path)

        logger.info(f"Dereverberating {len(jobs)} files with {self.max_workers} workers")
        return await asyncio.gather(*(run_one(src, dst) for src, dst in jobs))


def output_path_for(input_path: str, output_dir: str) -> str:
    stem = os.path.splitext(os.path.basename(input_path))[0]
    return os.path.join(output_dir, f"{stem}_benet.wav")
