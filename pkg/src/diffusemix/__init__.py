"""Deterministic label-preserving image augmentation.

Each training image is transformed by a prompt-conditioned generator,
half-concatenated with its original under a binary mask, and blended with
a fractal image. The pipeline is seeded end to end: the same config and
seed reproduce every output byte regardless of worker count.
"""

from .errors import (
    AugmentationError,
    DecodeError,
    DiffuseMixError,
    DimensionMismatch,
    EmptyDataset,
    EmptyFractalSet,
    LambdaOutOfRange,
    NetworkError,
    NonPositiveBaseline,
    ProtocolError,
    RemoteError,
    UnknownPrompt,
)
from .fractal import FractalSource, blend, generate_fractal, load_fractal_dir, procedural_source
from .generator import CachedBackend, ProceduralBackend, RemoteBackend, procedural_stylize
from .imgcore import ImageBuffer, cover_crop_resize, load_image, resize_bilinear, save_image
from .masking import Mask, MaskKind, MaskSet, concatenate, make_mask
from .pipeline import AugmentationConfig, AugmentationRecord, Manifest, augment_one, run
from .prompts import PromptLibrary, default_library, load_prompt_file, render, sample_prompt

__version__ = "0.1.0"

__all__ = [
    "AugmentationConfig",
    "AugmentationError",
    "AugmentationRecord",
    "CachedBackend",
    "DecodeError",
    "DiffuseMixError",
    "DimensionMismatch",
    "EmptyDataset",
    "EmptyFractalSet",
    "FractalSource",
    "ImageBuffer",
    "LambdaOutOfRange",
    "Manifest",
    "Mask",
    "MaskKind",
    "MaskSet",
    "NetworkError",
    "NonPositiveBaseline",
    "ProceduralBackend",
    "PromptLibrary",
    "ProtocolError",
    "RemoteBackend",
    "RemoteError",
    "UnknownPrompt",
    "augment_one",
    "blend",
    "concatenate",
    "cover_crop_resize",
    "default_library",
    "generate_fractal",
    "load_fractal_dir",
    "load_image",
    "load_prompt_file",
    "make_mask",
    "procedural_source",
    "procedural_stylize",
    "render",
    "resize_bilinear",
    "run",
    "sample_prompt",
    "save_image",
    "__version__",
]
