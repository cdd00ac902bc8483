"""
BENET - pseudo-binaural dereverberation toolkit
"""

__version__ = "1.0.0"
__author__ = "BENET Toolkit Team"
