
import os
import logging
from typing import Optional

from dotenv import load_dotenv

load_dotenv()

class Settings:
    # Audio
    SAMPLE_RATE: int = int(os.getenv("BENET_SAMPLE_RATE", "16000"))
    SPEED_OF_SOUND: float = float(os.getenv("BENET_SPEED_OF_SOUND", "343.0"))

    # Data locations
    CORPUS_DIR: str = os.getenv("BENET_CORPUS_DIR", "./corpus")
    CORPUS_URL: str = os.getenv("BENET_CORPUS_URL", "")
    OUTPUT_DIR: str = os.getenv("BENET_OUTPUT_DIR", "./runs")
    MODEL_PATH: str = os.getenv("BENET_MODEL_PATH", "")

    # System Configuration
    SEED: int = int(os.getenv("BENET_SEED", "0"))
    MAX_WORKERS: int = int(os.getenv("BENET_MAX_WORKERS", "4"))
    LOG_LEVEL: str = os.getenv("BENET_LOG_LEVEL", "INFO")


def configure_logging(level: Optional[str] = None) -> None:
    """Configure the root logger once for CLI and HTTP entry points"""
    logging.basicConfig(
        level=getattr(logging, (level or settings.LOG_LEVEL).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s"
    )

settings = Settings()
