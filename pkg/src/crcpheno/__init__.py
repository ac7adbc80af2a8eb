"""Colorectal cancer phenotyping from OCR'd colonoscopy and pathology reports."""

__version__ = "0.1.0"
