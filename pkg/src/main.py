from fastapi import FastAPI, HTTPException
from pydantic import BaseModel
from typing import List, Optional

from src.agents.dereverb_agent import DereverbAgent
from src.config.settings import configure_logging, settings
from src.dsp.metrics import score_pair
from src.dsp.room_sim import rt60_estimate
from src.dsp.signal_io import read_wav
from src.errors import BenetError
from src.models.audio_models import BEAMFORMER, INTERAURAL, Rir
from src.models.report_models import DereverbOptions, MetricName, ScoreRow
from src.models.scenario_models import default_room

configure_logging()

app = FastAPI(
    title="BENET",
    description="Pseudo-binaural dereverberation with ILD and IPD time-frequency masks",
    version="1.0.0"
)


class DereverbRequest(BaseModel):
    input_path: str
    output_path: str
    model_path: Optional[str] = None
    options: DereverbOptions = DereverbOptions()


class DereverbResponse(BaseModel):
    output_path: str
    num_samples: int
    sample_rate: int


class EvaluateRequest(BaseModel):
    reference_path: str
    degraded_path: str
    metrics: List[MetricName] = list(MetricName)


class Rt60Request(BaseModel):
    rir_path: str


class Rt60Response(BaseModel):
    rir_path: str
    rt60: float


def _first_channel(path: str):
    audio = read_wav(path)
    return audio[0] if isinstance(audio, tuple) else audio


@app.post("/dereverberate", response_model=DereverbResponse)
async def dereverberate_file(request: DereverbRequest):
    try:
        agent = DereverbAgent.from_checkpoint(request.model_path or settings.MODEL_PATH, request.options)
        output = agent.process_file(request.input_path, request.output_path)
        return DereverbResponse(output_path=request.output_path, num_samples=len(output),
                                sample_rate=output.sample_rate)
    except BenetError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))


@app.post("/evaluate", response_model=ScoreRow)
async def evaluate_pair(request: EvaluateRequest):
    try:
        scores = score_pair(_first_channel(request.reference_path),
                            _first_channel(request.degraded_path), request.metrics)
        return ScoreRow(condition="evaluate", system=request.degraded_path, **scores)
    except BenetError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))


@app.post("/rt60", response_model=Rt60Response)
async def estimate_rt60(request: Rt60Request):
    try:
        signal = _first_channel(request.rir_path)
        return Rt60Response(rir_path=request.rir_path, rt60=rt60_estimate(Rir(signal.samples, signal.sample_rate)))
    except BenetError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        raise HTTPException(status_code=500, detail=str(e))


@app.get("/presets")
async def presets():
    stft_presets = {
        name: {"frame_len": cfg.frame_len, "hop": cfg.hop, "fft_len": cfg.fft_len, "window": cfg.window}
        for name, cfg in (("beamformer", BEAMFORMER), ("interaural", INTERAURAL))
    }
    rooms = {f"{int(round(rt * 1000))}ms": default_room(rt).model_dump() for rt in (0.25, 0.47, 0.70, 0.89)}
    return {"sample_rate": settings.SAMPLE_RATE, "stft": stft_presets, "rooms": rooms}


@app.get("/")
async def root():
    return {"message": "Welcome to the BENET dereverberation API"}
