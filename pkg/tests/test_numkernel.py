import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from screentags import numkernel as nk
from screentags.errors import InvalidInputError


def close(simd, scalar):
    return abs(float(simd) - float(scalar)) <= 1e-5 * (1 + abs(float(scalar)))


def test_scalar_examples():
    assert nk.dot_scalar([1, 0], [0, 1]) == 0
    assert nk.dot_scalar(np.ones(37), np.ones(37)) == 37
    assert nk.dot_scalar([], []) == 0


def test_scalar_is_sequential_f32():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=50).astype(np.float32), rng.normal(size=50).astype(np.float32)
    acc = np.float32(0)
    for x, y in zip(a, b):
        acc = np.float32(acc + np.float32(x * y))
    assert nk.dot_scalar(a, b) == acc


def test_tail_only_exact():
    a, b = [1.5, -2.0, 3.25], [2.0, 0.5, 4.0]
    assert nk.dot_simd(a, b) == nk.dot_scalar(a, b) == np.float32(15.0)


def test_length_mismatch():
    with pytest.raises(InvalidInputError):
        nk.dot_simd([1, 2], [1])
    with pytest.raises(InvalidInputError):
        nk.dot_scalar([1, 2], [1])
    with pytest.raises(InvalidInputError):
        nk.matvec(np.ones((2, 3)), np.ones(2))


def test_random_pairs_against_scalar():
    rng = np.random.default_rng(1)
    for n in list(range(0, 40)) + [255, 256, 257, 1023, 1024, 1025]:
        a = rng.uniform(-1e3, 1e3, n).astype(np.float32)
        b = rng.uniform(-1e3, 1e3, n).astype(np.float32)
        assert close(nk.dot_simd(a, b), nk.dot_scalar(a, b)), n


@given(arrays(np.float32, st.integers(0, 70), elements=st.floats(-1e3, 1e3, width=32)), st.floats(-4, 4, width=32))
def test_bilinearity(a, alpha):
    b = np.linspace(-1, 1, a.size, dtype=np.float32)
    lhs = nk.dot_simd(np.float32(alpha) * a, b)
    rhs = np.float32(alpha) * nk.dot_simd(a, b)
    scale = float(np.abs(alpha * a * b).sum())
    assert abs(float(lhs) - float(rhs)) <= 1e-5 * (1 + scale)


def test_scalar_fallback(monkeypatch):
    monkeypatch.setattr(nk, "SIMD", False)
    a = np.arange(20, dtype=np.float32)
    assert nk.dot_simd(a, a) == nk.dot_scalar(a, a)
    assert np.array_equal(nk.matvec(np.eye(20), a), a)


def test_matvec_examples():
    v = np.array([1.0, -2.0, 3.0], dtype=np.float32)
    assert np.array_equal(nk.matvec(np.eye(3), v), v)
    assert not nk.matvec(np.zeros((4, 3)), v).any()
    rng = np.random.default_rng(2)
    M = rng.normal(size=(8, 16)).astype(np.float32)
    w = rng.normal(size=16).astype(np.float32)
    ref = np.array([nk.dot_scalar(r, w) for r in M])
    for use_simd in (True, False):
        out = nk.matvec(M, w, use_simd=use_simd)
        assert out.shape == (8,) and all(close(x, y) for x, y in zip(out, ref))


def test_bench_report():
    rows = nk.bench_kernel(sizes=(256, 1024), repeat=5)
    kinds = {(r["size"], r["kernel"]) for r in rows}
    assert {(256, "scalar"), (256, "simd"), (256, "speedup"), (1024, "speedup")} <= kinds
    table = nk.format_bench_table(rows)
    assert "speedup" in table and "ns/op" in table
