"""Binary-to-binary WebAssembly obfuscator with a validator and reference interpreter."""

from .binfmt import Module, decode_module, encode_module
from .config import MATRIX, PRESETS, ObfConfig
from .errors import PassError
from .pipeline import obfuscate, run_pipeline

__all__ = [
    "Module", "decode_module", "encode_module", "ObfConfig", "MATRIX", "PRESETS",
    "PassError", "obfuscate", "run_pipeline",
]
__version__ = "0.1.0"
