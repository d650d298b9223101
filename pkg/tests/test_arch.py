import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from catpress.arch import (
    Conv,
    GeneratorArch,
    IncResBlock,
    Norm,
    build_resnet_template,
    deserialize,
    serialize,
    validate,
)
from catpress.errors import ChannelUnderflow, ParseError, SchemaError


def test_plain_template_validates():
    arch = build_resnet_template(64, 9, 3, 3, "plain")
    assert validate(arch) == []


def test_incres_channel_division_rule():
    arch = build_resnet_template(6, 1, 1, 3, "incres")
    assert validate(arch) == []
    block = arch.blocks[0]
    assert block.channels == 24
    assert [br.mid_ch for br in block.branches] == [4] * 6


def test_incres_six_branches_alive_equal_mid():
    for base in (6, 12, 18):
        arch = build_resnet_template(base, 2, 3, 3, "incres")
        for block in arch.blocks:
            assert len(block.branches) == 6
            mids = {br.mid_ch for br in block.branches}
            assert len(mids) == 1
            assert all(br.alive for br in block.branches)


def test_branch_structure_matches_schema():
    arch = build_resnet_template(6, 1, 1, 3, "incres")
    block = arch.blocks[0]
    kinds = [(br.op_type, br.kernel) for br in block.branches]
    assert kinds == [
        ("conventional", 1),
        ("conventional", 3),
        ("conventional", 5),
        ("depthwise", 1),
        ("depthwise", 3),
        ("depthwise", 5),
    ]
    for br in block.branches:
        prunable = [l for l in br.layers if isinstance(l, Norm) and l.prunable]
        assert len(prunable) == 1
        assert prunable[0].channels == br.mid_ch


def test_validate_reports_gamma_length_mismatch():
    arch = build_resnet_template(6, 1, 3, 3, "plain")
    norm = next(l for l in arch.head if isinstance(l, Norm))
    norm.gamma = np.ones(norm.channels + 2, np.float32)
    errors = validate(arch)
    assert any(e.code == "GammaLengthMismatch" for e in errors)


def test_validate_reports_channel_mismatch():
    arch = build_resnet_template(6, 1, 1, 3, "incres")
    branch = arch.blocks[0].branches[0]
    second_conv = [l for l in branch.layers if isinstance(l, Conv)][1]
    second_conv.in_ch += 1
    errors = validate(arch)
    assert any(e.code == "ChannelMismatch" for e in errors)


def test_validate_ok_over_sizes():
    for base, blocks in [(6, 1), (8, 4), (12, 16)]:
        assert validate(build_resnet_template(base, blocks, 3, 3, "incres")) == []


def test_channel_underflow():
    with pytest.raises(ChannelUnderflow):
        build_resnet_template(1, 1, 1, 3, "incres")
    with pytest.raises(ChannelUnderflow):
        build_resnet_template(0, 1, 3, 3, "plain")


@settings(max_examples=25, deadline=None)
@given(
    base=st.integers(2, 10),
    blocks=st.integers(1, 3),
    kind=st.sampled_from(["plain", "incres"]),
    norm=st.sampled_from(["instance", "batch"]),
    seed=st.integers(0, 2**31),
)
def test_serialize_roundtrip_identity(base, blocks, kind, norm, seed):
    from catpress.verify import randomize_gammas

    arch = build_resnet_template(base, blocks, 1, 3, kind, norm, input_hw=16)
    arch = randomize_gammas(arch, np.random.Generator(np.random.PCG64(seed)))
    text = serialize(arch)
    back = deserialize(text)
    assert back == arch
    assert serialize(back) == text  # byte-stable


def test_serialize_key_order_and_newlines():
    text = serialize(build_resnet_template(2, 1, 1, 3, "plain", input_hw=8))
    assert "\r" not in text and text.endswith("\n")
    # keys sorted at top level
    top_keys = [line.split('"')[1] for line in text.splitlines() if line.startswith('  "')]
    assert top_keys == sorted(top_keys)


def test_deserialize_malformed_json():
    with pytest.raises(ParseError) as ei:
        deserialize("{ not json }")
    assert ei.value.line >= 1


def test_deserialize_unknown_layer_kind():
    arch = build_resnet_template(2, 1, 1, 3, "plain", input_hw=8)
    text = serialize(arch).replace('"kind": "conv"', '"kind": "conv9d"', 1)
    with pytest.raises(SchemaError):
        deserialize(text)


def test_deserialize_rejects_unknown_keys():
    arch = build_resnet_template(2, 1, 1, 3, "plain", input_hw=8)
    d = arch.to_dict()
    d["bogus"] = 1
    import json

    with pytest.raises(SchemaError):
        deserialize(json.dumps(d))


def test_forward_shape_law():
    from catpress.runtime import ExecModel

    for hw in (8, 16):
        arch = build_resnet_template(6, 1, 1, 3, "incres", input_hw=hw)
        model = ExecModel.initialized(arch, 0)
        out = model.predict(np.zeros((2, 1, hw, hw), np.float32))
        assert out.shape == (2, 3, hw, hw)


def test_empty_arch_is_representable():
    arch = GeneratorArch("empty", (3, 8, 8), [], [], [])
    assert validate(arch) == []
    assert deserialize(serialize(arch)) == arch
