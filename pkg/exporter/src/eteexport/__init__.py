"""Export text-prompt banks and image-embedding streams as ETE files.

This package runs an encoder (a pretrained vision-language model, or the
built-in deterministic stand-in) over template/class lists and image folders
and writes the results in the binary container format the streaming
adaptation engine consumes. Coupling to that engine is wire-format only.
"""

from .encoders import EncoderLoadError, SeededEncoder, get_encoder
from .etewriter import write_bank_file, write_stream_file
from .export import ExportManifest, export_bank, export_stream, zero_shot_predictions

__version__ = "0.1.0"

__all__ = [
    "EncoderLoadError",
    "ExportManifest",
    "SeededEncoder",
    "export_bank",
    "export_stream",
    "get_encoder",
    "write_bank_file",
    "write_stream_file",
    "zero_shot_predictions",
]
