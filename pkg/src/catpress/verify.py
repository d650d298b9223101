"""Independent brute-force oracles cross-checking the analytic paths.

Each oracle recomputes a result along a deliberately different route:
multiply counts by executing the network, thresholds by exhaustive linear
scan over materialized pruned archs, alignment scores by the textbook
four-loop formula.  `run_verify` sweeps all of them over seeded random
cases and reports pass/fail counts; it ships in the package (not only the
test suite) so end users can re-run it anywhere.
"""

from __future__ import annotations

import numpy as np

from .align import ka, ka_gram
from .arch import Conv, GeneratorArch, Norm, TransposedConv, build_resnet_template, iter_layers
from .errors import BudgetInfeasible
from .macs import arch_macs
from .pruning import PruneBudget, apply_threshold, collect_scales, search_threshold
from .runtime import count_exec_macs, init_params

VERIFY_SEED = 0xCA7


# ---------------------------------------------------------------------------
# oracles


def oracle_macs(arch: GeneratorArch, params: dict, input_shape: tuple = None) -> int:
    """Multiply count of an actual eval-mode forward pass at batch size 1.

    Intended for desk-sized archs (spatial <= 16, stem channels <= 8); the
    direct-convolution executor makes the count exact by construction.
    """
    if input_shape is None:
        input_shape = tuple(arch.input_shape)
    return count_exec_macs(arch, params, input_shape)


def oracle_threshold(arch: GeneratorArch, budget: PruneBudget) -> float:
    """First feasible threshold by ascending linear scan, fully materialized."""
    input_shape = budget.input_shape or tuple(arch.input_shape)
    scales = collect_scales(arch)
    candidates = np.concatenate([scales, [np.nextafter(scales[-1], np.inf)]])
    for tau in candidates:
        pruned, _ = apply_threshold(arch, float(tau), budget.floor)
        if arch_macs(pruned, input_shape).total <= budget.target_macs:
            return float(tau)
    raise BudgetInfeasible(f"no threshold reaches {budget.target_macs}")


def oracle_ka(x: np.ndarray, y: np.ndarray) -> float:
    """Textbook four-loop evaluation of the alignment index in float64."""
    x = np.asarray(x, np.float64)
    y = np.asarray(y, np.float64)
    n, p1 = x.shape
    _, p2 = y.shape
    num = 0.0
    for i in range(p2):
        for j in range(p1):
            dot = 0.0
            for k in range(n):
                dot += y[k, i] * x[k, j]
            num += dot * dot
    dx = 0.0
    for i in range(p1):
        for j in range(p1):
            dot = 0.0
            for k in range(n):
                dot += x[k, i] * x[k, j]
            dx += dot * dot
    dy = 0.0
    for i in range(p2):
        for j in range(p2):
            dot = 0.0
            for k in range(n):
                dot += y[k, i] * y[k, j]
            dy += dot * dot
    return num / (np.sqrt(dx) * np.sqrt(dy))


# ---------------------------------------------------------------------------
# random case generation


def randomize_gammas(arch: GeneratorArch, rng: np.random.Generator, grid: int = 24) -> GeneratorArch:
    """Replace every norm's gamma/beta with seeded values.

    Gammas draw from a small value grid (signs included) so ties between
    channels actually occur; betas are small and centered.
    """
    values = np.round(np.linspace(0.02, 1.25, grid), 4)
    out = arch.clone()
    for _, layer in iter_layers(out):
        if isinstance(layer, Norm) and layer.channels > 0:
            mags = rng.choice(values, layer.channels)
            signs = rng.choice([-1.0, 1.0], layer.channels)
            layer.gamma = (mags * signs).astype(np.float32)
            layer.beta = (rng.standard_normal(layer.channels) * 0.1).astype(np.float32)
    return out


def random_small_arch(rng: np.random.Generator) -> GeneratorArch:
    base = int(rng.integers(2, 7))
    blocks = int(rng.integers(1, 3))
    kind = "incres" if rng.integers(0, 2) else "plain"
    in_ch = int(rng.choice([1, 3]))
    norm = "batch" if rng.integers(0, 4) == 0 else "instance"
    hw = int(rng.choice([8, 12]))
    arch = build_resnet_template(base, blocks, in_ch, 3, kind, norm, input_hw=hw)
    return randomize_gammas(arch, rng)


# ---------------------------------------------------------------------------
# sweeps


def _check_macs_execution(rng, cases: int):
    failures = 0
    for i in range(cases):
        arch = random_small_arch(rng)
        params = init_params(arch, int(rng.integers(0, 2**31)))
        if oracle_macs(arch, params) != arch_macs(arch).total:
            failures += 1
    # degenerate empty arch counts as one extra case
    empty = GeneratorArch("empty", (3, 8, 8), [], [], [])
    if oracle_macs(empty, {}) != 0 or arch_macs(empty).total != 0:
        failures += 1
    return cases + 1, failures


def _floor_ok(original: GeneratorArch, pruned: GeneratorArch, floor: int) -> bool:
    for part in ("head", "tail"):
        for lo, lp in zip(getattr(original, part), getattr(pruned, part)):
            if isinstance(lo, (Conv, TransposedConv)):
                if lp.out_ch < min(floor, lo.out_ch):
                    return False
    return True


def _check_threshold_search(rng, cases: int):
    failures = 0
    for i in range(cases):
        arch = random_small_arch(rng)
        full = arch_macs(arch).total
        floor = int(rng.choice([1, 2, 4]))
        frac = float(rng.uniform(0.02, 1.1))
        budget = PruneBudget(max(1, int(full * frac)), floor=floor)
        try:
            expected = oracle_threshold(arch, budget)
            oracle_raised = False
        except BudgetInfeasible:
            oracle_raised = True
        try:
            tau, _ = search_threshold(arch, budget)
            searched_raised = False
        except BudgetInfeasible:
            searched_raised = True
        if oracle_raised or searched_raised:
            if oracle_raised != searched_raised:
                failures += 1
            continue
        if tau != expected:
            failures += 1
            continue
        pruned, _ = apply_threshold(arch, tau, floor)
        achieved = arch_macs(pruned).total
        if achieved > budget.target_macs or not _floor_ok(arch, pruned, floor):
            failures += 1
    return cases, failures


def _check_kernel_alignment(rng, cases: int):
    failures = 0
    for i in range(cases):
        n = int(rng.integers(2, 8))
        p1 = int(rng.integers(2, 24))
        p2 = int(rng.integers(2, 24))
        x = rng.standard_normal((n, p1))
        y = rng.standard_normal((n, p2))
        ref = oracle_ka(x, y)
        if abs(float(ka(x, y)) - ref) > 1e-5 * max(1.0, abs(ref)):
            failures += 1
            continue
        if abs(float(ka_gram(x, y)) - ref) > 1e-5 * max(1.0, abs(ref)):
            failures += 1
            continue
        if abs(float(ka(x, x)) - 1.0) > 1e-6:
            failures += 1
            continue
        q, _ = np.linalg.qr(rng.standard_normal((p1, p1)))
        if abs(float(ka(x @ q, y)) - ref) > 1e-5:
            failures += 1
    return cases, failures


def run_verify(seed: int = VERIFY_SEED, macs_cases: int = 20, threshold_cases: int = 100, ka_cases: int = 50) -> dict:
    """Run every oracle sweep; returns the machine-readable summary."""
    checks = []
    for ci, (name, fn, cases) in enumerate(
        (
            ("macs_execution", _check_macs_execution, macs_cases),
            ("threshold_search", _check_threshold_search, threshold_cases),
            ("kernel_alignment", _check_kernel_alignment, ka_cases),
        )
    ):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, ci))))
        ran, failures = fn(rng, cases)
        checks.append({"name": name, "cases": int(ran), "failures": int(failures)})
    return {"checks": checks, "ok": all(c["failures"] == 0 for c in checks)}
