"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines; plain `pytest` runs them as ordinary tests.
"""

import base64
import time
from pathlib import Path

import numpy as np
import pytest

from diffusemix.cli import compute_overhead, main
from diffusemix.errors import NetworkError
from diffusemix.fractal import procedural_source
from diffusemix.generator import CachedBackend, ProceduralBackend, RemoteBackend
from diffusemix.imgcore import encode_png_bytes, load_image, to_uint8
from diffusemix.masking import Mask, MaskKind, MaskSet, concatenate, make_mask
from diffusemix.pipeline import (
    AugmentationConfig,
    augment_stages,
    derive_substream,
    run,
)
from diffusemix.prompts import default_library, render

from conftest import MockGenerationServer, echo_logic, make_dataset, rand_image, tree_hash

SEED = 42
DATASET_CLASSES = 10
IMAGES_PER_CLASS = 10
M = 2


def _report(number: int, description: str) -> None:
    print(f"criterion {number} PASS: {description}")


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


@pytest.fixture(scope="module")
def det_dataset(workspace):
    data = workspace / "data"
    make_dataset(data, classes=DATASET_CLASSES, per_class=IMAGES_PER_CLASS,
                 size=40, seed=777)
    return data


def _det_cfg(det_dataset, out_dir, cache_dir, workers):
    return AugmentationConfig(
        prompt_library=default_library(),
        backend=ProceduralBackend(),
        fractal_source=procedural_source(100, seed=0),
        input_dir=det_dataset,
        output_dir=out_dir,
        m=M,
        lam=0.2,
        seed=SEED,
        mask_set=MaskSet.FULL,
        workers=workers,
        cache_dir=cache_dir,
    )


@pytest.fixture(scope="module")
def det_runs(det_dataset, workspace):
    """Three runs of the determinism config: twice at one worker, once at
    eight, all sharing one generation cache."""
    cache = workspace / "cache"
    started = time.perf_counter()
    results = {}
    for name, workers in (("first", 1), ("second", 1), ("wide", 8)):
        out = workspace / f"run_{name}"
        cfg = _det_cfg(det_dataset, out, cache, workers)
        manifest = run(cfg)
        results[name] = (out, manifest, cfg)
    elapsed = time.perf_counter() - started
    return results, elapsed, cache


def test_criterion_1_equation_oracle_equivalence():
    # 1000 random 8x8 images; staged pipeline vs a straight-line closed-form
    # evaluator; float diff <= 1e-6 and quantized diff <= 1 level; < 10 s.
    cfg = AugmentationConfig(
        prompt_library=default_library(),
        backend=ProceduralBackend(),
        fractal_source=procedural_source(10, seed=123),
        lam=0.2,
    )
    lambdas = (0.0, 0.2, 1.0)
    rng = np.random.default_rng(31337)
    started = time.perf_counter()
    for trial in range(1000):
        lam = lambdas[trial % 3]
        cfg.lam = lam
        img = rand_image(rng, 8, 8)
        stages, draws = augment_stages(img, derive_substream(SEED, trial, 0), cfg)

        mask_plane = np.zeros((8, 8))
        if draws.mask_kind is MaskKind.LEFT_ON:
            mask_plane[:, :4] = 1.0
        elif draws.mask_kind is MaskKind.RIGHT_ON:
            mask_plane[:, 4:] = 1.0
        elif draws.mask_kind is MaskKind.TOP_ON:
            mask_plane[:4, :] = 1.0
        else:
            mask_plane[4:, :] = 1.0
        m = mask_plane[:, :, None]

        closed_form = lam * stages.fractal.data + (1.0 - lam) * (
            stages.generated.data * m + img.data * (1.0 - m)
        )
        assert np.max(np.abs(stages.augmented.data - closed_form)) <= 1e-6
        quant_pipeline = to_uint8(stages.augmented).astype(int)
        quant_oracle = np.clip(np.rint(closed_form * 255.0), 0, 255).astype(int)
        assert np.max(np.abs(quant_pipeline - quant_oracle)) <= 1
    elapsed = time.perf_counter() - started
    assert elapsed < 10.0, f"took {elapsed:.1f}s"
    _report(1, f"1000 staged-vs-closed-form checks within 1e-6 in {elapsed:.1f}s")


def test_criterion_2_endpoint_identities(np_rng):
    original = rand_image(np_rng, 12, 10)
    cfg = AugmentationConfig(
        prompt_library=default_library(),
        backend=ProceduralBackend(),
        fractal_source=procedural_source(3, seed=5),
        lam=0.0,
    )
    stages, _ = augment_stages(original, derive_substream(1, 0, 0), cfg)
    assert np.array_equal(stages.augmented.data, stages.hybrid.data)

    cfg.lam = 1.0
    stages, _ = augment_stages(original, derive_substream(1, 0, 0), cfg)
    assert np.array_equal(stages.augmented.data, stages.fractal.data)

    generated = rand_image(np_rng, 12, 10)
    ones = Mask(np.ones((10, 12), dtype=np.uint8))
    zeros = Mask(np.zeros((10, 12), dtype=np.uint8))
    assert np.array_equal(concatenate(original, generated, ones).data, generated.data)
    assert np.array_equal(concatenate(original, generated, zeros).data, original.data)
    _report(2, "lambda and mask endpoints are bit-exact")


def test_criterion_3_mask_invariants():
    kinds = list(MaskKind)
    for w in range(1, 17):
        for h in range(1, 17):
            for kind in kinds:
                mask = make_mask(w, h, kind)
                values = np.unique(mask.bits)
                assert set(values.tolist()) <= {0, 1}
                comp = make_mask(w, h, kind.flip())
                assert np.all(mask.bits + comp.bits == 1)
            if w % 2 == 0:
                assert make_mask(w, h, MaskKind.LEFT_ON).bits.sum() == h * w // 2
            if h % 2 == 0:
                assert make_mask(w, h, MaskKind.TOP_ON).bits.sum() == w * h // 2
    _report(3, "binary, complement and half-split invariants over 1..16 squared")


def test_criterion_4_determinism_across_runs_and_workers(det_runs):
    results, elapsed, _ = det_runs
    hashes = {name: tree_hash(out) for name, (out, _, _) in results.items()}
    assert hashes["first"] == hashes["second"], "repeat run diverged"
    assert hashes["first"] == hashes["wide"], "worker count changed bytes"
    first_manifest = results["first"][1]
    assert len(first_manifest.records) == DATASET_CLASSES * IMAGES_PER_CLASS * M
    assert elapsed < 60.0, f"took {elapsed:.1f}s"
    _report(4, f"three runs byte-identical ({len(first_manifest.records)} records, "
               f"{elapsed:.1f}s)")


def test_criterion_5_label_preservation_and_validate(det_runs, capsys):
    results, _, _ = det_runs
    out, manifest, _ = results["first"]
    assert len(manifest.records) == 200
    for record in manifest.records:
        assert record.label == Path(record.source_path).parts[0]
    rc = main(["validate", "--manifest", str(out / "manifest.jsonl")])
    assert rc == 0
    _report(5, "all 200 records keep their class label; validate exits 0")


def test_criterion_6_original_half_fidelity(det_dataset, workspace):
    out = workspace / "lam0"
    cfg = _det_cfg(det_dataset, out, workspace / "cache", workers=4)
    cfg.lam = 0.0
    cfg.m = 1
    manifest = run(cfg)
    assert manifest.records
    for record in manifest.records:
        produced = to_uint8(load_image(out / record.output_path))
        source = to_uint8(load_image(det_dataset / record.source_path))
        mask = make_mask(source.shape[1], source.shape[0], record.mask_kind)
        off = mask.bits == 0
        assert np.array_equal(produced[off], source[off]), record.output_path
    _report(6, f"mask-0 regions bit-identical to sources in {len(manifest.records)} records")


def test_criterion_7_warm_cache_zero_misses(det_dataset, det_runs, workspace):
    results, _, cache = det_runs
    out = workspace / "warm"
    cfg = _det_cfg(det_dataset, out, cache, workers=4)
    manifest = run(cfg)
    stats = cfg.backend.stats()
    assert stats["misses"] == 0, stats
    assert stats["hits"] == len(manifest.records)
    assert tree_hash(out) == tree_hash(results["first"][0])
    _report(7, f"warm repeat: 0 misses, {stats['hits']} hits, byte-identical tree")


def test_criterion_8_overhead_formula_exact():
    assert compute_overhead(150, 100) == 50.0
    assert compute_overhead(100, 100) == 0.0
    _report(8, "overhead formula exact at full float precision")


def test_criterion_9_lambda_sweep_distinct_digests(workspace):
    data = workspace / "sweep_data"
    make_dataset(data, classes=2, per_class=3, size=24, seed=11)
    digests = {}
    for lam in ("0.1", "0.2", "0.3", "0.4", "0.5"):
        out = workspace / f"sweep_{lam}"
        rc = main(["augment", "--input", str(data), "--output", str(out),
                   "--seed", "7", "--lambda", lam,
                   "--fractals", "procedural:6,seed=3"])
        assert rc == 0, lam
        digests[lam] = tree_hash(out)
    assert len(set(digests.values())) == 5, digests
    _report(9, "five-value lambda sweep completes with five distinct digests")


def test_criterion_10_remote_protocol_conformance(np_rng):
    img = rand_image(np_rng, 32, 32)

    with MockGenerationServer(echo_logic) as server:
        echoed = RemoteBackend(server.url, timeout=5).generate(img, "p")
    assert np.max(np.abs(echoed.data - img.data)) <= 1 / 255

    with MockGenerationServer(lambda payload: (500, {"error": "down"})) as server:
        backend = RemoteBackend(server.url, timeout=5, retries=2)
        with pytest.raises(NetworkError):
            backend.generate(img, "p")
        assert server.requests == 3

    bigger = rand_image(np_rng, 64, 48)
    blob = base64.b64encode(encode_png_bytes(bigger)).decode()
    with MockGenerationServer(lambda payload: (200, {"image": blob})) as server:
        cfg = AugmentationConfig(
            prompt_library=default_library(),
            backend=RemoteBackend(server.url, timeout=5),
            fractal_source=procedural_source(2, seed=1),
            lam=0.2,
        )
        stages, _ = augment_stages(img, derive_substream(3, 0, 0), cfg)
    assert stages.generated.width == 32 and stages.generated.height == 32
    _report(10, "echo, retry-exhaustion and resize-on-mismatch all conform")


def test_criterion_11_prompt_library():
    lib = default_library()
    assert lib.entries == (
        "autumn",
        "snowy",
        "sunset",
        "watercolor art",
        "rainbow",
        "aurora",
        "mosaic",
        "ukiyo-e",
        "a sketch with crayon",
    )
    assert len(lib.entries) == 9
    assert render(lib, "snowy") == "A transformed version of image into snowy"
    _report(11, "nine prompts in canonical order; snowy renders exactly")
