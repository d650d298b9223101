import numpy as np
import pytest

import catpress.pruning as pruning
from catpress.arch import (
    Activation,
    Conv,
    GeneratorArch,
    Norm,
    build_resnet_template,
    validate,
)
from catpress.errors import BudgetInfeasible, NoPrunableNorms
from catpress.macs import arch_macs
from catpress.pruning import (
    PruneBudget,
    apply_threshold,
    apply_threshold_full,
    collect_scales,
    plan_macs,
    prune,
    search_threshold,
)
from catpress.training import build_patch_discriminator
from catpress.verify import oracle_threshold, random_small_arch, randomize_gammas


def two_norm_arch(g1, g2):
    head = [
        Conv(3, 1, len(g1), 1, "zero", bias=False),
        Norm("instance", len(g1), np.asarray(g1, np.float32), prunable=True),
        Activation("relu"),
        Conv(3, len(g1), len(g2), 1, "zero", bias=False),
        Norm("instance", len(g2), np.asarray(g2, np.float32), prunable=True),
        Activation("relu"),
    ]
    tail = [Conv(3, len(g2), 3, 1, "zero", bias=True), Activation("tanh")]
    arch = GeneratorArch("toy", (1, 8, 8), head, [], tail)
    assert validate(arch) == []
    return arch


def f32s(*values):
    # gammas are stored as float32; candidates are their exact widenings
    return [float(np.float32(v)) for v in values]


def test_collect_scales_sorted_dedup_with_zero():
    arch = two_norm_arch([0.9, 0.01], [0.5, 0.01])
    assert collect_scales(arch).tolist() == f32s(0.0, 0.01, 0.5, 0.9)


def test_collect_scales_all_equal():
    arch = two_norm_arch([0.3, 0.3], [0.3, 0.3])
    assert collect_scales(arch).tolist() == f32s(0.0, 0.3)


def test_collect_scales_uses_magnitudes():
    arch = two_norm_arch([-0.9, 0.01], [0.5, -0.01])
    assert collect_scales(arch).tolist() == f32s(0.0, 0.01, 0.5, 0.9)


def test_collect_scales_requires_prunable_norms():
    with pytest.raises(NoPrunableNorms):
        collect_scales(build_patch_discriminator(4))


def test_zero_threshold_is_identity(rng):
    arch = random_small_arch(rng)
    pruned, masks = apply_threshold(arch, 0.0, 2)
    assert pruned == arch
    assert all(m.all() for m in masks.values())


def test_branch_funnel_shrinks():
    # block channels 4*3=12 -> mid 2 per branch
    arch = build_resnet_template(3, 1, 1, 3, "incres", input_hw=8)
    branch = arch.blocks[0].branches[1]
    norm = next(l for l in branch.layers if isinstance(l, Norm) and l.prunable)
    norm.gamma = np.array([0.2, 0.001], np.float32)
    pruned, masks = apply_threshold(arch, 0.01, 2)
    new_branch = pruned.blocks[0].branches[1]
    assert new_branch.mid_ch == 1
    convs = [l for l in new_branch.layers if isinstance(l, Conv)]
    assert convs[0].out_ch == 1 and convs[1].in_ch == 1
    assert validate(pruned) == []
    assert arch_macs(pruned).total < arch_macs(arch).total


def test_threshold_above_max_kills_branches_and_floors(rng):
    arch = randomize_gammas(build_resnet_template(6, 2, 1, 3, "incres", input_hw=16), rng)
    tau = float(np.max(np.abs(collect_scales(arch)))) + 1.0
    floor = 3
    pruned, masks = apply_threshold(arch, tau, floor)
    for block in pruned.blocks:
        assert all(not br.alive for br in block.branches)
    for part in (pruned.head, pruned.tail):
        for layer in part:
            if isinstance(layer, Norm) and layer.prunable:
                assert layer.channels == floor
    assert validate(pruned) == []


def test_search_returns_zero_for_generous_budget(rng):
    arch = random_small_arch(rng)
    tau, vacuous = search_threshold(arch, PruneBudget(arch_macs(arch).total, floor=1))
    assert tau == 0.0 and vacuous


def test_search_infeasible(rng):
    arch = random_small_arch(rng)
    with pytest.raises(BudgetInfeasible):
        search_threshold(arch, PruneBudget(1, floor=1))


def test_search_picks_second_smallest_scale():
    # two channels strictly below the second-smallest scale get pruned
    arch = build_resnet_template(6, 1, 1, 3, "incres", input_hw=16)
    rng = np.random.Generator(np.random.PCG64(5))
    arch = randomize_gammas(arch, rng)
    norm = next(l for l in arch.blocks[0].branches[1].layers if isinstance(l, Norm) and l.prunable)
    gammas = norm.gamma.copy()
    gammas[:2] = 0.005  # strictly below every grid value
    norm.gamma = gammas
    scales = collect_scales(arch)
    assert scales[1] == pytest.approx(0.005)
    second = float(scales[2])
    budget = PruneBudget(plan_macs(arch, second, 4), floor=4)
    tau, vacuous = search_threshold(arch, budget)
    assert tau == second and not vacuous
    _, masks = apply_threshold(arch, tau, 4)
    pruned_channels = sum(int((~m).sum()) for m in masks.values())
    assert pruned_channels == 2


def test_search_matches_oracle_on_random_archs(rng):
    matches = 0
    for _ in range(20):
        arch = random_small_arch(rng)
        full = arch_macs(arch).total
        floor = int(rng.choice([1, 2, 4]))
        budget = PruneBudget(max(1, int(full * float(rng.uniform(0.05, 1.05)))), floor=floor)
        try:
            expected = oracle_threshold(arch, budget)
        except BudgetInfeasible:
            with pytest.raises(BudgetInfeasible):
                search_threshold(arch, budget)
            matches += 1
            continue
        tau, _ = search_threshold(arch, budget)
        assert tau == expected
        matches += 1
    assert matches == 20


def test_plan_macs_equals_materialized(rng):
    for _ in range(8):
        arch = random_small_arch(rng)
        scales = collect_scales(arch)
        picks = [0.0, float(scales[len(scales) // 2]), float(np.nextafter(scales[-1], np.inf))]
        for tau in picks:
            pruned, _ = apply_threshold(arch, tau, 2)
            assert plan_macs(arch, tau, 2) == arch_macs(pruned).total


def test_prune_composition_and_budget(rng):
    for _ in range(5):
        arch = random_small_arch(rng)
        full = arch_macs(arch).total
        budget = PruneBudget(int(full * 0.5), floor=1)
        result = prune(arch, budget)
        assert result.achieved_macs <= budget.target_macs
        assert validate(result.arch) == []
        # any smaller candidate threshold would overshoot the budget
        scales = collect_scales(arch).tolist()
        if result.threshold in scales and scales.index(result.threshold) > 0:
            below = scales[scales.index(result.threshold) - 1]
            assert plan_macs(arch, below, 1) > budget.target_macs


def test_prune_keeps_everything_when_budget_is_full_cost(rng):
    arch = random_small_arch(rng)
    result = prune(arch, PruneBudget(arch_macs(arch).total, floor=1))
    assert result.pruned_channel_count == 0
    assert result.budget_vacuous
    assert result.arch == arch


def test_prune_idempotent(rng):
    arch = random_small_arch(rng)
    budget = PruneBudget(int(arch_macs(arch).total * 0.6), floor=1)
    first = prune(arch, budget)
    second = prune(first.arch, budget)
    assert second.pruned_channel_count == 0
    assert second.arch == first.arch


def test_prune_materializes_exactly_once(rng, monkeypatch):
    arch = random_small_arch(rng)
    calls = []
    original = pruning.apply_threshold_full

    def counting(*args, **kwargs):
        calls.append(1)
        return original(*args, **kwargs)

    monkeypatch.setattr(pruning, "apply_threshold_full", counting)
    prune(arch, PruneBudget(int(arch_macs(arch).total * 0.5), floor=1))
    assert len(calls) == 1


def test_masks_cover_exactly_prunable_norms(rng):
    arch = random_small_arch(rng)
    _, masks, _ = apply_threshold_full(arch, 0.1, 2)
    expected = {lid for lid, _, _ in pruning.iter_prunable_norms(arch)}
    assert set(masks) == expected


def test_report_dict_keys(rng):
    arch = random_small_arch(rng)
    result = prune(arch, PruneBudget(int(arch_macs(arch).total * 0.7), floor=1))
    report = result.report_dict()
    assert set(report) == {
        "threshold",
        "target_macs",
        "achieved_macs",
        "pruned_channels",
        "removed_branches",
        "budget_vacuous",
        "wall_clock_ms",
    }


def test_negative_threshold_rejected(rng):
    arch = random_small_arch(rng)
    with pytest.raises(ValueError):
        apply_threshold(arch, -0.5, 1)


def test_budget_validation():
    with pytest.raises(ValueError):
        PruneBudget(0)
    with pytest.raises(ValueError):
        PruneBudget(10, floor=0)
