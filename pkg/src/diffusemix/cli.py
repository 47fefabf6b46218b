"""Command-line surface.

Subcommands: augment, fractals, preview, overhead, validate. Exit codes:
0 success, 1 runtime failure, 2 usage or configuration error. Every
command is a thin shell over the library modules.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import fractal, imgcore, pipeline
from .errors import (
    AugmentationError,
    DiffuseMixError,
    EmptyDataset,
    NonPositiveBaseline,
)
from .generator import CachedBackend, ProceduralBackend, RemoteBackend
from .imgcore import ImageBuffer
from .masking import MaskKind, MaskSet
from .prompts import default_library, load_prompt_file
from .seeding import mix

CACHE_ENV_VAR = "DIFFUSEMIX_CACHE"
LAMBDA_SWEEP = (0.1, 0.2, 0.3, 0.4, 0.5)

PREVIEW_GUTTER = 4
_PREVIEW_PANELS = ("input", "generated", "mask", "hybrid", "fractal", "augmented")


class ConfigError(DiffuseMixError):
    """Invalid flag or config-file value; maps to exit code 2."""


def compute_overhead(t_aug: float, t_van: float) -> float:
    """Relative wall-time cost of augmentation over the vanilla baseline,
    in percent: (t_aug - t_van) / t_van * 100. May be negative."""
    if t_van <= 0:
        raise NonPositiveBaseline(f"baseline time must be > 0, got {t_van}")
    if t_aug < 0:
        raise ValueError(f"augmented time must be >= 0, got {t_aug}")
    return (t_aug - t_van) / t_van * 100.0


def _parse_backend(spec: str, strength: float | None = None):
    if spec == "procedural":
        return ProceduralBackend() if strength is None else ProceduralBackend(strength)
    if spec.startswith("remote:"):
        endpoint = spec.split(":", 1)[1]
        if not endpoint:
            raise ConfigError("--backend remote: requires a URL")
        return RemoteBackend(endpoint, strength=strength)
    raise ConfigError(
        f"--backend must be 'procedural' or 'remote:<URL>', got {spec!r}"
    )


def _parse_fractals(spec: str) -> fractal.FractalSource:
    if spec.startswith("dir:"):
        path = spec.split(":", 1)[1]
        if not Path(path).is_dir():
            raise ConfigError(f"--fractals directory does not exist: {path}")
        return fractal.load_fractal_dir(path)
    if spec.startswith("procedural:"):
        body = spec.split(":", 1)[1]
        count_part, _, seed_part = body.partition(",")
        try:
            count = int(count_part)
            seed = int(seed_part.removeprefix("seed=")) if seed_part else 0
        except ValueError as exc:
            raise ConfigError(f"bad --fractals spec {spec!r}: {exc}") from exc
        if count < 1:
            raise ConfigError("--fractals procedural count must be >= 1")
        return fractal.procedural_source(count, seed)
    raise ConfigError(
        f"--fractals must be 'dir:<path>' or 'procedural:<count>[,seed=<n>]', got {spec!r}"
    )


def _load_config_file(path: str) -> dict:
    """Key-value config; keys mirror the long flag names, flags override."""
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"--config: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"--config line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        values[key.strip().replace("_", "-")] = value.strip()
    return values


def _merged(args, file_values: dict, key: str, convert, default, dest=None):
    flag_value = getattr(args, dest or key.replace("-", "_"))
    if flag_value is not None:
        return flag_value
    if key in file_values:
        try:
            return convert(file_values[key])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"--config key {key!r}: {exc}") from exc
    return default


def cmd_augment(args) -> int:
    file_values = _load_config_file(args.config) if args.config else {}

    def setting(key, convert, default=None, dest=None):
        return _merged(args, file_values, key, convert, default, dest)

    input_dir = setting("input", str)
    output_dir = setting("output", str)
    seed = setting("seed", int)
    m = setting("m", int, 1)
    lam = setting("lambda", float, 0.2, dest="lam")
    mask_set_name = setting("mask-set", str, MaskSet.FULL.value)
    backend_spec = setting("backend", str, "procedural")
    prompts_path = setting("prompts", str)
    fractals_spec = setting("fractals", str, "procedural:100,seed=0")
    workers = setting("workers", int, 1)
    cache_dir = setting("cache-dir", str, os.environ.get(CACHE_ENV_VAR))

    if input_dir is None:
        raise ConfigError("--input is required")
    if output_dir is None:
        raise ConfigError("--output is required")
    if seed is None:
        raise ConfigError("--seed is required")
    if m < 1:
        raise ConfigError(f"--m must be >= 1, got {m}")
    if not 0.0 <= lam <= 1.0:
        raise ConfigError(f"--lambda must be within [0, 1], got {lam}")
    if workers < 1:
        raise ConfigError(f"--workers must be >= 1, got {workers}")
    if not Path(input_dir).is_dir():
        raise ConfigError(f"--input directory does not exist: {input_dir}")
    try:
        mask_set = MaskSet.parse(mask_set_name)
    except ValueError as exc:
        raise ConfigError(f"--mask-set: {exc}") from exc

    if prompts_path:
        try:
            library = load_prompt_file(prompts_path)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"--prompts: {exc}") from exc
    else:
        library = default_library()
    source = _parse_fractals(fractals_spec)

    cfg = pipeline.AugmentationConfig(
        prompt_library=library,
        backend=_parse_backend(backend_spec),
        fractal_source=source,
        input_dir=Path(input_dir),
        output_dir=Path(output_dir),
        m=m,
        lam=lam,
        seed=seed,
        mask_set=mask_set,
        workers=workers,
        cache_dir=Path(cache_dir) if cache_dir else None,
    )

    started = time.perf_counter()
    try:
        manifest = pipeline.run(cfg)
    except AugmentationError as exc:
        for source_path, aug_index, message in exc.failures:
            print(f"FAILED {source_path} aug {aug_index}: {message}", file=sys.stderr)
        print(f"{len(exc.failures)} augmentation(s) failed", file=sys.stderr)
        return 1
    wall = time.perf_counter() - started

    stats = (cfg.backend.stats() if isinstance(cfg.backend, CachedBackend)
             else {"hits": 0, "misses": 0})
    print(
        f"{len(manifest.records)} records written; "
        f"cache hits {stats['hits']}, misses {stats['misses']}; "
        f"wall time {wall:.2f}s"
    )
    return 0


def cmd_fractals(args) -> int:
    if args.count < 1:
        raise ConfigError(f"--count must be >= 1, got {args.count}")
    if args.size < 16:
        raise ConfigError(f"--size must be >= 16, got {args.size}")
    out = Path(args.output)
    try:
        out.mkdir(parents=True, exist_ok=True)
        for i in range(args.count):
            img = fractal.generate_fractal(mix(args.seed, i), args.size, args.size)
            imgcore.save_image(img, out / f"fractal_{i:04d}.png")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.count} fractal images to {out}")
    return 0


def _mask_to_image(mask) -> ImageBuffer:
    plane = mask.bits.astype(np.float64)
    return ImageBuffer(np.stack([plane, plane, plane], axis=-1))


def _compose_grid(panels, gutter: int = PREVIEW_GUTTER) -> ImageBuffer:
    h = panels[0].height
    w = panels[0].width
    gut = np.full((h, gutter, 3), 0.5)
    strips = []
    for i, panel in enumerate(panels):
        if i:
            strips.append(gut)
        strips.append(panel.data)
    return ImageBuffer(np.concatenate(strips, axis=1))


def cmd_preview(args) -> int:
    if not 0.0 <= args.lam <= 1.0:
        raise ConfigError(f"--lambda must be within [0, 1], got {args.lam}")
    try:
        kind = MaskKind(args.mask)
    except ValueError:
        valid = ", ".join(k.value for k in MaskKind)
        raise ConfigError(f"--mask must be one of: {valid}")

    try:
        img = imgcore.load_image(args.input)
    except (FileNotFoundError, DiffuseMixError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    source = _parse_fractals(args.fractals)
    if args.fractal in source.ids:
        fractal_id = args.fractal
    elif args.fractal.isdigit() and int(args.fractal) < len(source.ids):
        fractal_id = source.ids[int(args.fractal)]
    else:
        raise ConfigError(f"--fractal {args.fractal!r} is not in the source")

    library = default_library()
    if args.prompt not in library.entries:
        valid = ", ".join(library.entries)
        raise ConfigError(f"--prompt must be one of: {valid}")

    cfg = pipeline.AugmentationConfig(
        prompt_library=library,
        backend=_parse_backend(args.backend),
        fractal_source=source,
        lam=args.lam,
    )
    rng = np.random.default_rng(0)  # unused: all three draws are forced
    stages, _ = pipeline.augment_stages(
        img, rng, cfg, prompt=args.prompt, mask_kind=kind, fractal_id=fractal_id
    )

    grid = _compose_grid(
        [
            stages.original,
            stages.generated,
            _mask_to_image(stages.mask),
            stages.hybrid,
            stages.fractal,
            stages.augmented,
        ]
    )
    try:
        imgcore.save_image(grid, args.output)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(
        f"preview panels={','.join(_PREVIEW_PANELS)} "
        f"panel={img.width}x{img.height} gutter={PREVIEW_GUTTER} "
        f"output={args.output}"
    )
    return 0


def cmd_overhead(args) -> int:
    try:
        pct = compute_overhead(args.t_aug, args.t_van)
    except (NonPositiveBaseline, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"{pct:.2f}%")
    return 0


def cmd_validate(args) -> int:
    manifest_path = Path(args.manifest)
    if not manifest_path.is_file():
        print(f"error: manifest not found: {manifest_path}", file=sys.stderr)
        return 2
    base = manifest_path.parent
    valid_kinds = {k.value for k in MaskKind}
    required = {
        "output_path", "source_path", "label", "prompt",
        "mask_kind", "fractal_id", "lambda", "sub_seed", "backend_id",
    }

    problems = 0
    for lineno, line in enumerate(
        manifest_path.read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            print(f"line {lineno}: malformed JSON: {exc}", file=sys.stderr)
            return 2
        missing = required - record.keys()
        if missing:
            print(f"line {lineno}: malformed record, missing {sorted(missing)}",
                  file=sys.stderr)
            return 2

        def complain(message):
            nonlocal problems
            problems += 1
            print(f"line {lineno}: {message}", file=sys.stderr)

        out_path = base / record["output_path"]
        if not out_path.is_file():
            complain(f"missing output file: {out_path}")
        else:
            try:
                imgcore.load_image(out_path)
            except DiffuseMixError as exc:
                complain(f"undecodable output: {exc}")
        source_label = Path(record["source_path"]).parts[0]
        if record["label"] != source_label:
            complain(
                f"label {record['label']!r} does not match "
                f"source directory {source_label!r}"
            )
        if not 0.0 <= record["lambda"] <= 1.0:
            complain(f"lambda out of range: {record['lambda']}")
        if record["mask_kind"] not in valid_kinds:
            complain(f"invalid mask_kind: {record['mask_kind']!r}")

    if problems:
        print(f"{problems} problem(s) found", file=sys.stderr)
        return 1
    print("manifest OK")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diffusemix",
        description="Label-preserving image augmentation with prompt-conditioned "
        "generation, masked concatenation and fractal blending.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("augment", help="augment a labeled dataset")
    p.add_argument("--input", help="dataset root (one subdirectory per class)")
    p.add_argument("--output", help="destination for augmented images and manifest")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--m", type=int, help="augmentations per image (default 1)")
    p.add_argument("--lambda", dest="lam", type=float,
                   help=f"fractal blending factor (default 0.2; sweep grid {LAMBDA_SWEEP})")
    p.add_argument("--mask-set", choices=[s.value for s in MaskSet],
                   help="mask kinds to draw from (default full)")
    p.add_argument("--backend", help="'procedural' or 'remote:<URL>' (default procedural)")
    p.add_argument("--prompts", help="prompt file, one per line (default built-in nine)")
    p.add_argument("--fractals",
                   help="'dir:<path>' or 'procedural:<count>[,seed=<n>]' "
                        "(default procedural:100,seed=0)")
    p.add_argument("--workers", type=int, help="parallel workers (default 1)")
    p.add_argument("--cache-dir",
                   help=f"generation cache directory (default ${CACHE_ENV_VAR})")
    p.add_argument("--config", help="key = value file mirroring these flags")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("fractals", help="render a directory of procedural fractals")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_fractals)

    p = sub.add_parser("preview", help="render a six-panel stage contact sheet")
    p.add_argument("--input", required=True, help="one source image")
    p.add_argument("--output", required=True, help="output PNG")
    p.add_argument("--prompt", default="autumn")
    p.add_argument("--mask", default=MaskKind.LEFT_ON.value)
    p.add_argument("--fractal", default="0", help="fractal id or index")
    p.add_argument("--fractals", default="procedural:100,seed=0")
    p.add_argument("--lambda", dest="lam", type=float, default=0.2)
    p.add_argument("--backend", default="procedural")
    p.set_defaults(func=cmd_preview)

    p = sub.add_parser("overhead", help="augmentation overhead percentage")
    p.add_argument("t_aug", type=float, help="wall time with augmentation, seconds")
    p.add_argument("t_van", type=float, help="vanilla baseline wall time, seconds")
    p.set_defaults(func=cmd_overhead)

    p = sub.add_parser("validate", help="check a manifest against its outputs")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EmptyDataset as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DiffuseMixError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
