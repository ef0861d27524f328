"""formflow: court form (PDF/DOCX) to guided-interview pipeline."""

__version__ = "0.1.0"
