import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from catpress.align import ka, ka_grad, ka_gram, ka_naive
from catpress.errors import BatchMismatch, DegenerateInput


def gram_f64(x, y):
    """Independent float64 evaluation used as the finite-difference target."""
    x = np.asarray(x, np.float64)
    y = np.asarray(y, np.float64)
    num = np.linalg.norm(y.T @ x, "fro") ** 2
    return num / (np.linalg.norm(x.T @ x, "fro") * np.linalg.norm(y.T @ y, "fro"))


def test_self_alignment_is_one(rng):
    for _ in range(5):
        x = rng.standard_normal((4, 9))
        assert abs(float(ka(x, x)) - 1.0) <= 1e-6
        assert abs(float(ka_gram(x, x)) - 1.0) <= 1e-6


def test_orthogonal_features_align_to_zero():
    x = np.array([[1.0, 0.0], [0.0, 0.0]])
    y = np.array([[0.0, 0.0], [0.0, 1.0]])
    assert float(ka(x, y)) == 0.0


def test_hand_computed_value():
    x = np.array([[1.0, 0.0], [0.0, 1.0]])
    y = np.array([[1.0], [1.0]])
    # ||Y^T X||_F^2 = 2, ||X^T X||_F = sqrt(2), ||Y^T Y||_F = 2
    assert abs(float(ka(x, y)) - 2.0 / (2.0 * np.sqrt(2.0))) <= 1e-6
    assert abs(float(ka(x, y)) - 0.7071068) <= 1e-6


def test_gram_equals_naive_on_random_pairs(rng):
    for _ in range(50):
        n = int(rng.integers(2, 9))
        x = rng.standard_normal((n, int(rng.integers(1, 65))))
        y = rng.standard_normal((n, int(rng.integers(1, 65))))
        a = float(ka_naive(x, y))
        b = float(ka_gram(x, y))
        assert abs(a - b) <= 1e-5 * max(1.0, abs(a))


def test_single_row_always_one(rng):
    for _ in range(5):
        x = rng.standard_normal((1, 7)) + 0.1
        y = rng.standard_normal((1, 3)) + 0.1
        assert abs(float(ka_gram(x, y)) - 1.0) <= 1e-6


def test_gradient_matches_finite_differences(rng):
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(2, 6))
        x = rng.standard_normal((n, int(rng.integers(2, 10))))
        y = rng.standard_normal((n, int(rng.integers(2, 10))))
        gx, gy = ka_grad(x, y)
        eps = 1e-3
        for target, grad in ((x, gx), (y, gy)):
            fd = np.zeros_like(target)
            it = np.nditer(target, flags=["multi_index"])
            for _ in it:
                i = it.multi_index
                old = target[i]
                target[i] = old + eps
                fp = gram_f64(x, y)
                target[i] = old - eps
                fm = gram_f64(x, y)
                target[i] = old
                fd[i] = (fp - fm) / (2 * eps)
            worst = max(worst, np.max(np.abs(grad - fd)) / max(1e-12, np.max(np.abs(fd))))
    assert worst < 1e-4


def test_gradient_scale_law(rng):
    x = rng.standard_normal((4, 6))
    y = rng.standard_normal((4, 5))
    gx, _ = ka_grad(x, y)
    gx2, _ = ka_grad(2.5 * x, y)
    assert np.allclose(gx2, gx / 2.5, rtol=1e-9, atol=1e-12)


def test_ascent_never_exceeds_one(rng):
    x = rng.standard_normal((4, 6))
    gx, _ = ka_grad(x, x.copy())
    for t in (0.01, 0.1, 1.0):
        assert float(ka(x + t * gx, x)) <= 1.0 + 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.01, 100.0), st.floats(0.01, 100.0))
def test_range_symmetry_and_scaling(seed, alpha, beta):
    r = np.random.Generator(np.random.PCG64(seed))
    x = r.standard_normal((3, 5)) + 0.01
    y = r.standard_normal((3, 4)) + 0.01
    v = float(ka(x, y))
    assert -1e-9 <= v <= 1.0 + 1e-9
    assert abs(v - float(ka(y, x))) <= 1e-6
    assert abs(float(ka(alpha * x, beta * y)) - v) <= 1e-5


def test_orthogonal_invariance(rng):
    x = rng.standard_normal((4, 6))
    y = rng.standard_normal((4, 5))
    v = float(ka(x, y))
    for _ in range(5):
        u, _ = np.linalg.qr(rng.standard_normal((6, 6)))
        w, _ = np.linalg.qr(rng.standard_normal((5, 5)))
        assert abs(float(ka(x @ u, y @ w)) - v) <= 1e-5


def test_sensitive_to_invertible_transform(rng):
    x = rng.standard_normal((5, 6))
    y = rng.standard_normal((5, 6))
    base = float(ka(x, y))
    deltas = []
    for _ in range(10):
        a = rng.standard_normal((6, 6)) + 2.0 * np.eye(6)
        if abs(np.linalg.det(a)) < 1e-6:
            continue
        deltas.append(abs(float(ka(x @ a, y)) - base))
    assert max(deltas) > 1e-3


def test_differing_widths_allowed(rng):
    x = rng.standard_normal((4, 3))
    y = rng.standard_normal((4, 17))
    assert 0.0 <= float(ka(x, y)) <= 1.0


def test_degenerate_and_mismatch_errors(rng):
    with pytest.raises(DegenerateInput):
        ka(np.zeros((3, 4)), rng.standard_normal((3, 4)))
    with pytest.raises(DegenerateInput):
        ka_gram(rng.standard_normal((3, 4)), np.zeros((3, 2)))
    with pytest.raises(BatchMismatch):
        ka(rng.standard_normal((3, 4)), rng.standard_normal((4, 4)))


def test_centered_variant_differs_but_defaults_off(rng):
    x = rng.standard_normal((5, 4)) + 3.0
    y = rng.standard_normal((5, 6)) + 3.0
    plain = float(ka(x, y))
    centered = float(ka(x, y, centered=True))
    assert plain != pytest.approx(centered, abs=1e-6)
    # centering makes the index invariant to constant row offsets
    shifted = float(ka_gram(x + 10.0, y, centered=True))
    assert abs(shifted - float(ka_gram(x, y, centered=True))) <= 1e-5
