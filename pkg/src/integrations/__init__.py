"""
Integration modules for BENET
File formats, report output and corpus access
"""

from .checkpoint import read_checkpoint, write_checkpoint
from .corpus import fetch_corpus, load_corpus, split_clips
from .matrix_store import load_matrix, save_matrix
from .report_writer import write_report, write_training_log

__all__ = [
    "fetch_corpus",
    "load_corpus",
    "load_matrix",
    "read_checkpoint",
    "save_matrix",
    "split_clips",
    "write_checkpoint",
    "write_report",
    "write_training_log",
]
