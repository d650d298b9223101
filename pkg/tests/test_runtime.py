import json
import os

import numpy as np
import pytest

from catpress.arch import Norm, arch_hash, build_resnet_template, iter_layers, load_arch
from catpress.errors import ArchHashMismatch
from catpress.macs import arch_macs
from catpress.pruning import apply_threshold_full, collect_scales, dead_body_prefixes
from catpress.runtime import (
    ExecModel,
    count_exec_macs,
    init_params,
    load_checkpoint,
    save_checkpoint,
    slice_params,
    sync_arch_norms,
    zero_masked_params,
)
from catpress.verify import random_small_arch


def test_init_params_deterministic():
    arch = build_resnet_template(4, 1, 1, 3, "incres", input_hw=8)
    a = init_params(arch, 7)
    b = init_params(arch, 7)
    assert list(a) == list(b)
    assert all(np.array_equal(a[k], b[k]) for k in a)
    c = init_params(arch, 8)
    assert any(not np.array_equal(a[k], c[k]) for k in a)


def test_norm_params_come_from_arch(rng):
    from catpress.verify import randomize_gammas

    arch = randomize_gammas(build_resnet_template(4, 1, 1, 3, "incres", input_hw=8), rng)
    params = init_params(arch, 0)
    for lid, layer in iter_layers(arch):
        if isinstance(layer, Norm):
            assert np.array_equal(params[f"{lid}.gamma"], layer.gamma)


def test_batch_norm_arch_has_buffers():
    arch = build_resnet_template(4, 1, 1, 3, "plain", norm="batch", input_hw=8)
    params = init_params(arch, 0)
    assert any(k.endswith(".running_mean") for k in params)


def test_exec_macs_equals_analytic(rng):
    for seed in range(6):
        arch = random_small_arch(rng)
        params = init_params(arch, seed)
        assert count_exec_macs(arch, params, tuple(arch.input_shape)) == arch_macs(arch).total


def test_taps_present_and_trunk_shaped():
    from catpress.engine import Tape

    arch = build_resnet_template(4, 3, 1, 3, "incres", input_hw=8)
    model = ExecModel.initialized(arch, 0)
    out, taps, _ = model.forward(Tape(), np.zeros((2, 1, 8, 8), np.float32), training=False, want_taps=True, trainable=False)
    assert list(taps) == ["head", "block1", "block2", "block3"]
    for v in taps.values():
        assert v.value.shape == (2, 16, 2, 2)


def test_checkpoint_roundtrip_and_byte_stability(tmp_path, rng):
    arch = random_small_arch(rng)
    params = init_params(arch, 3)
    d1 = tmp_path / "a"
    d2 = tmp_path / "b"
    save_checkpoint(d1, arch, params, report={"x": 1})
    save_checkpoint(d2, arch, params, report={"x": 1})
    for name in ("arch.json", "manifest.json", "weights.bin", "report.json"):
        assert (d1 / name).read_bytes() == (d2 / name).read_bytes()
    arch2, params2, disc_arch, disc_params = load_checkpoint(d1)
    assert disc_arch is None and disc_params is None
    assert list(params2) == list(params)
    assert all(np.array_equal(params[k], params2[k]) for k in params)
    # the saved arch carries the trained gamma/beta snapshot
    assert arch2 == sync_arch_norms(arch, params)


def test_checkpoint_with_discriminator(tmp_path):
    from catpress.training import build_patch_discriminator

    arch = build_resnet_template(4, 1, 1, 3, "incres", input_hw=8)
    disc = build_patch_discriminator(4, 8)
    save_checkpoint(tmp_path / "c", arch, init_params(arch, 0), disc, init_params(disc, 1))
    _, _, disc_arch, disc_params = load_checkpoint(tmp_path / "c")
    assert disc_arch == disc
    assert any(k.endswith(".w") for k in disc_params)


def test_arch_hash_mismatch(tmp_path, rng):
    arch = random_small_arch(rng)
    save_checkpoint(tmp_path / "c", arch, init_params(arch, 0))
    # tamper with the stored arch so the manifest hash no longer matches
    stored = load_arch(tmp_path / "c" / "arch.json")
    norm = next(l for _, l in iter_layers(stored) if isinstance(l, Norm))
    norm.gamma = norm.gamma + 1
    from catpress.arch import save_arch

    save_arch(stored, tmp_path / "c" / "arch.json")
    with pytest.raises(ArchHashMismatch):
        load_checkpoint(tmp_path / "c")


def test_manifest_contents(tmp_path, rng):
    arch = random_small_arch(rng)
    params = init_params(arch, 0)
    save_checkpoint(tmp_path / "c", arch, params)
    manifest = json.loads((tmp_path / "c" / "manifest.json").read_text())
    assert manifest["dtype"] == "float32"
    assert manifest["arch_hash"] == arch_hash(sync_arch_norms(arch, params))
    total = sum(e["nbytes"] for e in manifest["params"])
    assert total == os.path.getsize(tmp_path / "c" / "weights.bin")
    offsets = [e["offset"] for e in manifest["params"]]
    assert offsets == sorted(offsets)


def test_pruned_equivalence_exact(rng):
    for trial in range(4):
        arch = random_small_arch(rng)
        params = init_params(arch, trial)
        scales = collect_scales(arch)
        tau = float(scales[int(rng.integers(1, len(scales)))])
        pruned, masks, slices = apply_threshold_full(arch, tau, 2)
        sliced = slice_params(arch, slices, params)
        zeroed = zero_masked_params(arch, slices, params, dead_body_prefixes(arch, masks))
        x = rng.standard_normal((2, *arch.input_shape)).astype(np.float32)
        a = ExecModel(pruned, sliced).predict(x)
        b = ExecModel(arch, zeroed).predict(x)
        assert np.max(np.abs(a - b)) <= 1e-5


def test_predict_deterministic(rng):
    arch = random_small_arch(rng)
    model = ExecModel.initialized(arch, 0)
    x = rng.standard_normal((2, *arch.input_shape)).astype(np.float32)
    assert np.array_equal(model.predict(x), model.predict(x))
