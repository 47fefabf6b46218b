"""Dataset-level augmentation: traversal, per-image loop, manifest.

Every (image, augmentation-index) pair gets its own derived random
substream, so outputs are byte-identical regardless of worker count or
scheduling order. The manifest is a JSONL provenance log ordered by
(source path, augmentation index), one line per produced image, plus a
sidecar with the config digest.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import imgcore
from .errors import AugmentationError, EmptyDataset
from .fractal import FractalSource, blend, sample_fractal
from .generator import CachedBackend
from .imgcore import ImageBuffer
from .masking import Mask, MaskKind, MaskSet, concatenate, make_mask, sample_mask_kind
from .prompts import PromptLibrary, render, sample_prompt
from .seeding import make_rng, mix

MANIFEST_NAME = "manifest.jsonl"
MANIFEST_META_NAME = "manifest.meta.json"

_SOURCE_SUFFIXES = (".png", ".jpg", ".jpeg")

# Component tags keep image and augmentation indices from cancelling out
# when they are absorbed into the substream state.
_IMAGE_DOMAIN = 0x1000
_AUG_DOMAIN = 0x2000


@dataclass
class AugmentationConfig:
    """Everything a run needs; `input_dir`/`output_dir` may stay None for
    library use of `augment_one`, `run` requires them.

    Setting `cache_dir` wraps the backend in the content-addressed cache,
    so `backend` afterwards is the cache wrapper (counters included).
    """

    prompt_library: PromptLibrary
    backend: object
    fractal_source: FractalSource
    input_dir: Path | None = None
    output_dir: Path | None = None
    m: int = 1
    lam: float = 0.2
    seed: int = 0
    mask_set: MaskSet = MaskSet.FULL
    workers: int = 1
    cache_dir: Path | None = None

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must be within [0, 1], got {self.lam}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if self.cache_dir is not None and not isinstance(self.backend, CachedBackend):
            self.backend = CachedBackend(self.backend, self.cache_dir)

    def digest(self) -> str:
        """SHA-256 over the knobs that determine output pixels.

        Placement and execution knobs (directories, worker count, cache
        location) are excluded on purpose: the same semantic config must
        hash the same regardless of where or how parallel it ran.
        """
        payload = {
            "m": self.m,
            "lambda": self.lam,
            "seed": self.seed,
            "mask_set": self.mask_set.value,
            "prompts": list(self.prompt_library.entries),
            "template": self.prompt_library.template,
            "backend_id": self.backend.backend_id,
            "fractals": self.fractal_source.descriptor,
        }
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class AugmentationRecord:
    """One manifest row; paths are relative (outputs to the output
    directory, sources to the input directory)."""

    output_path: str
    source_path: str
    label: str
    prompt: str
    mask_kind: MaskKind
    fractal_id: str
    lam: float
    sub_seed: int
    backend_id: str

    def to_json(self) -> str:
        return json.dumps(
            {
                "output_path": self.output_path,
                "source_path": self.source_path,
                "label": self.label,
                "prompt": self.prompt,
                "mask_kind": self.mask_kind.value,
                "fractal_id": self.fractal_id,
                "lambda": self.lam,
                "sub_seed": self.sub_seed,
                "backend_id": self.backend_id,
            }
        )


@dataclass(frozen=True)
class Manifest:
    records: tuple
    config_digest: str


@dataclass(frozen=True)
class DrawLog:
    """The three random choices behind one augmented image."""

    prompt: str
    mask_kind: MaskKind
    fractal_id: str


@dataclass(frozen=True)
class StageImages:
    """Every intermediate of one augmentation, for previews and checks."""

    original: ImageBuffer
    generated: ImageBuffer
    mask: Mask
    hybrid: ImageBuffer
    fractal: ImageBuffer
    augmented: ImageBuffer


def derive_substream(seed: int, image_index: int, aug_index: int) -> np.random.Generator:
    """Independent RNG stream for one (image, augmentation) pair.

    SplitMix64-mixing the indices into the seed makes the stream a pure
    function of its coordinates, independent of scheduling order.
    """
    if image_index < 0 or aug_index < 0:
        raise ValueError("indices must be >= 0")
    return make_rng(substream_state(seed, image_index, aug_index))


def substream_state(seed: int, image_index: int, aug_index: int) -> int:
    return mix(seed, _IMAGE_DOMAIN + image_index, _AUG_DOMAIN + aug_index)


def augment_stages(
    img: ImageBuffer,
    rng: np.random.Generator,
    cfg: AugmentationConfig,
    prompt: str | None = None,
    mask_kind: MaskKind | None = None,
    fractal_id: str | None = None,
):
    """One augmentation, keeping every stage: generate, concatenate under a
    mask, blend a fractal.

    Draws prompt, mask kind and fractal id from `rng` unless forced by the
    caller (the preview command forces all three).
    """
    if prompt is None:
        prompt = sample_prompt(cfg.prompt_library, rng)
    rendered = render(cfg.prompt_library, prompt)

    generated = cfg.backend.generate(img, rendered)
    # Generated images cross an 8-bit boundary (wire format or cache PNG);
    # quantizing on every path keeps cached, remote and in-process runs
    # byte-identical.
    generated = imgcore.quantize_like_saved(generated)
    if not generated.same_dims(img):
        generated = imgcore.resize_bilinear(generated, img.width, img.height)

    if mask_kind is None:
        mask_kind = sample_mask_kind(cfg.mask_set, rng)
    mask = make_mask(img.width, img.height, mask_kind)
    hybrid = concatenate(img, generated, mask)

    if fractal_id is None:
        fractal_id = sample_fractal(cfg.fractal_source, rng)
    fitted = cfg.fractal_source.resolve_fitted(fractal_id, img.width, img.height)
    augmented = blend(hybrid, fitted, cfg.lam)

    stages = StageImages(
        original=img,
        generated=generated,
        mask=mask,
        hybrid=hybrid,
        fractal=fitted,
        augmented=augmented,
    )
    return stages, DrawLog(prompt=prompt, mask_kind=mask_kind, fractal_id=fractal_id)


def augment_one(
    img: ImageBuffer,
    rng: np.random.Generator,
    cfg: AugmentationConfig,
    prompt: str | None = None,
    mask_kind: MaskKind | None = None,
    fractal_id: str | None = None,
):
    """Like augment_stages, returning only the final image and the draws."""
    stages, draws = augment_stages(img, rng, cfg, prompt, mask_kind, fractal_id)
    return stages.augmented, draws


def discover_sources(input_dir: Path):
    """Class-per-subdirectory layout; returns (relative posix path, label)
    pairs sorted lexicographically by path."""
    sources = []
    for class_dir in sorted(p for p in input_dir.iterdir() if p.is_dir()):
        for f in sorted(class_dir.iterdir()):
            if f.is_file() and f.suffix.lower() in _SOURCE_SUFFIXES:
                sources.append((f.relative_to(input_dir).as_posix(), class_dir.name))
    sources.sort(key=lambda pair: pair[0])

    stems = {}
    for rel, label in sources:
        stem_key = (label, Path(rel).stem)
        if stem_key in stems:
            raise ValueError(
                f"duplicate output stem: {rel} collides with {stems[stem_key]}"
            )
        stems[stem_key] = rel
    return sources


def run(cfg: AugmentationConfig) -> Manifest:
    """Augment every source image m times and write outputs plus manifest.

    Individual image failures do not stop the run; if any occurred, an
    AugmentationError carrying the failure list (and the manifest of the
    successes, which is still written) is raised at the end.
    """
    if cfg.input_dir is None or cfg.output_dir is None:
        raise ValueError("run() requires input_dir and output_dir")
    input_dir = Path(cfg.input_dir)
    output_dir = Path(cfg.output_dir)
    if not input_dir.is_dir():
        raise EmptyDataset(f"input directory does not exist: {input_dir}")

    sources = discover_sources(input_dir)
    if not sources:
        raise EmptyDataset(f"no decodable images under {input_dir}")

    output_dir.mkdir(parents=True, exist_ok=True)
    for label in sorted({label for _, label in sources}):
        (output_dir / label).mkdir(exist_ok=True)

    jobs = [
        (image_index, rel, label, aug_index)
        for image_index, (rel, label) in enumerate(sources)
        for aug_index in range(cfg.m)
    ]

    def process(job):
        image_index, rel, label, aug_index = job
        sub_seed = substream_state(cfg.seed, image_index, aug_index)
        img = imgcore.load_image(input_dir / rel)
        rng = make_rng(sub_seed)
        augmented, draws = augment_one(img, rng, cfg)
        out_rel = f"{label}/{Path(rel).stem}_aug{aug_index}.png"
        imgcore.save_image(augmented, output_dir / out_rel)
        return AugmentationRecord(
            output_path=out_rel,
            source_path=rel,
            label=label,
            prompt=draws.prompt,
            mask_kind=draws.mask_kind,
            fractal_id=draws.fractal_id,
            lam=cfg.lam,
            sub_seed=sub_seed,
            backend_id=cfg.backend.backend_id,
        )

    records = []
    failures = []
    if cfg.workers == 1:
        outcomes = []
        for job in jobs:
            try:
                outcomes.append((job, process(job), None))
            except Exception as exc:
                outcomes.append((job, None, exc))
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [(job, pool.submit(process, job)) for job in jobs]
            outcomes = []
            for job, future in futures:
                try:
                    outcomes.append((job, future.result(), None))
                except Exception as exc:
                    outcomes.append((job, None, exc))

    for (image_index, rel, label, aug_index), record, exc in outcomes:
        if exc is None:
            records.append((rel, aug_index, record))
        else:
            failures.append((rel, aug_index, f"{type(exc).__name__}: {exc}"))

    records.sort(key=lambda item: (item[0], item[1]))
    manifest = Manifest(
        records=tuple(record for _, _, record in records),
        config_digest=cfg.digest(),
    )
    write_manifest(manifest, output_dir)

    if failures:
        failures.sort()
        raise AugmentationError(failures, manifest=manifest)
    return manifest


def write_manifest(manifest: Manifest, output_dir: Path) -> None:
    lines = [record.to_json() for record in manifest.records]
    (output_dir / MANIFEST_NAME).write_text(
        "".join(line + "\n" for line in lines), encoding="utf-8"
    )
    meta = {
        "config_digest": manifest.config_digest,
        "tool_version": _tool_version(),
        "record_count": len(manifest.records),
    }
    (output_dir / MANIFEST_META_NAME).write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _tool_version() -> str:
    from . import __version__

    return __version__
