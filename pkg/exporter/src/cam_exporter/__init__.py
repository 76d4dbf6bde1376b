"""cam-exporter: bridge PyTorch classifiers to the camcal engine's formats."""

__version__ = "0.1.0"

from .export import ExportError, ExportJob, export

__all__ = ["ExportError", "ExportJob", "export", "__version__"]
