import numpy as np
import pytest

from catpress.arch import (
    Conv,
    DepthwiseConv,
    GeneratorArch,
    Norm,
    build_resnet_template,
)
from catpress.errors import ShapeError
from catpress.macs import arch_macs, layer_macs
from catpress.pruning import PruneBudget, apply_threshold, collect_scales
from catpress.verify import random_small_arch


def brute_force_conv_multiplies(kernel, in_ch, out_ch, h, w, stride=1):
    """Count multiplies of a literal direct-convolution loop (same padding)."""
    pad = kernel // 2
    hp, wp = h + 2 * pad, w + 2 * pad
    ho = (hp - kernel) // stride + 1
    wo = (wp - kernel) // stride + 1
    count = 0
    for _o in range(out_ch):
        for _i in range(ho):
            for _j in range(wo):
                for _c in range(in_ch):
                    for _u in range(kernel):
                        for _v in range(kernel):
                            count += 1
    return count


def test_conv_macs_against_loop_count():
    expected = brute_force_conv_multiplies(3, 4, 8, 16, 16)
    assert expected == 73728
    assert layer_macs(Conv(3, 4, 8, 1), (4, 16, 16)) == expected


def test_depthwise_macs_against_loop_count():
    count = 0
    for _c in range(6):
        for _i in range(8):
            for _j in range(8):
                for _u in range(3):
                    for _v in range(3):
                        count += 1
    assert count == 3456
    assert layer_macs(DepthwiseConv(3, 6), (6, 8, 8)) == count


def test_tracked_norm_is_free():
    assert layer_macs(Norm("batch", 4, tracks_running_stats=True), (4, 8, 8)) == 0
    assert layer_macs(Norm("instance", 4, tracks_running_stats=False), (4, 8, 8)) == 2 * 4 * 64


def test_shape_error_on_mismatch():
    with pytest.raises(ShapeError):
        layer_macs(Conv(3, 4, 8, 1), (5, 16, 16))


def test_plain_template_golden_range():
    arch = build_resnet_template(64, 9, 3, 3, "plain")
    total = arch_macs(arch, (3, 256, 256)).total
    assert 55.7e9 <= total <= 58.0e9


def test_empty_arch_zero():
    assert arch_macs(GeneratorArch("empty", (3, 8, 8), [], [], [])).total == 0


def test_doubling_spatial_quadruples_every_layer():
    arch = build_resnet_template(6, 2, 3, 3, "incres", input_hw=16)
    small = arch_macs(arch, (3, 16, 16))
    large = arch_macs(arch, (3, 32, 32))
    for (lid, m_small), (lid2, m_large) in zip(small.layers, large.layers):
        assert lid == lid2
        assert m_large == 4 * m_small


def test_additivity():
    arch = build_resnet_template(6, 1, 1, 3, "incres", input_hw=16)
    cost = arch_macs(arch)
    assert cost.total == sum(m for _, m in cost.layers)


def test_monotone_under_pruning(rng):
    for _ in range(5):
        arch = random_small_arch(rng)
        scales = collect_scales(arch)
        prev = arch_macs(arch).total
        for tau in scales[:: max(1, len(scales) // 6)]:
            pruned, _ = apply_threshold(arch, float(tau), 1)
            cur = arch_macs(pruned).total
            assert cur <= prev or tau == 0.0
            prev = min(prev, cur)


def test_breakdown_dict_shape():
    arch = build_resnet_template(2, 1, 1, 3, "plain", input_hw=8)
    d = arch_macs(arch).to_dict()
    assert set(d) == {"total", "layers"}
    assert all(set(e) == {"id", "macs"} for e in d["layers"])
