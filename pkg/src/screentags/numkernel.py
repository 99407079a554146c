"""f32 dot-product and matrix-vector kernels.

Inputs and results are f32.  Products of two f32 values are exact in f64, so
both kernels widen and accumulate in f64 (a widening multiply-accumulate, as
vfmlal/vcvt pairs do); otherwise reordering a long f32 sum with cancellation
drifts far past a 1e-5 relative budget.  ``dot_scalar`` fixes the reference
accumulation order (index order, one accumulator).  ``dot_simd`` mirrors a NEON/AVX kernel: ``LANES`` independent
accumulators walk the vector-aligned body, a horizontal add folds them, and a
scalar loop finishes the tail.  numpy's f32 ufunc loops dispatch to the host's
vector units, so the lane-parallel body really runs vectorized.
"""

import time

import numpy as np

from .errors import InvalidInputError

LANES = 8

_VECTOR_FEATURES = ("ASIMD", "NEON", "SSE2", "AVX", "AVX2", "AVX512F", "VSX", "VX")


def simd_available():
    try:
        from numpy._core._multiarray_umath import __cpu_features__
    except ImportError:  # numpy < 2
        try:
            from numpy.core._multiarray_umath import __cpu_features__
        except ImportError:
            return False
    return any(__cpu_features__.get(f, False) for f in _VECTOR_FEATURES)


SIMD = simd_available()


def _vec(a):
    return np.ascontiguousarray(a, dtype=np.float32).reshape(-1)


def _check_pair(a, b):
    a, b = _vec(a), _vec(b)
    if a.shape != b.shape:
        raise InvalidInputError(f"length mismatch: {a.size} vs {b.size}")
    return a, b


def dot_scalar(a, b):
    """Sum of a[i]*b[i] accumulated strictly left to right, rounded to f32."""
    a, b = _check_pair(a, b)
    if a.size == 0:
        return np.float32(0.0)
    # add.accumulate is a sequential prefix sum: out[i] = out[i-1] + x[i]
    return np.float32(np.add.accumulate(np.multiply(a, b, dtype=np.float64))[-1])


def _hsum(lanes):
    # pairwise fold, as a vaddvq/hadd sequence would do it
    while lanes.shape[-1] > 1:
        half = lanes.shape[-1] // 2
        lanes = lanes[..., :half] + lanes[..., half:]
    return lanes[..., 0]


def dot_simd(a, b):
    a, b = _check_pair(a, b)
    if not SIMD:
        return dot_scalar(a, b)
    n = a.size
    body = n - n % LANES
    acc = 0.0
    if body:
        prods = np.multiply(a[:body], b[:body], dtype=np.float64).reshape(-1, LANES)
        # row-wise adds: lane j accumulates elements j, j+8, j+16, ...
        acc = _hsum(prods.sum(axis=0))
    for i in range(body, n):
        acc = acc + float(a[i]) * float(b[i])
    return np.float32(acc)


def matvec(M, v, use_simd=True):
    """Row-wise dot products of ``M`` (rows x n) with ``v`` (n)."""
    M = np.ascontiguousarray(M, dtype=np.float32)
    v = _vec(v)
    if M.ndim != 2 or M.shape[1] != v.size:
        raise InvalidInputError(f"shape mismatch: matrix {M.shape} with vector of length {v.size}")
    rows, n = M.shape
    if not (use_simd and SIMD):
        return np.array([dot_scalar(row, v) for row in M], dtype=np.float32).reshape(rows)
    body = n - n % LANES
    out = np.zeros(rows, dtype=np.float64)
    if body:
        prods = np.multiply(M[:, :body], v[:body], dtype=np.float64).reshape(rows, -1, LANES)
        out = _hsum(prods.sum(axis=1))
    for i in range(body, n):
        out = out + M[:, i].astype(np.float64) * float(v[i])
    return out.astype(np.float32)


def bench_kernel(sizes=(256, 4096, 65536), repeat=200, seed=0):
    """Time both kernels; returns rows of (size, kernel, ns_per_op) plus speedup."""
    rng = np.random.default_rng(seed)
    rows = []
    for n in sizes:
        a = rng.uniform(-1, 1, n).astype(np.float32)
        b = rng.uniform(-1, 1, n).astype(np.float32)
        timings = {}
        for name, fn in (("scalar", dot_scalar), ("simd", dot_simd)):
            fn(a, b)
            reps = max(3, repeat * 256 // max(n, 256))
            t0 = time.perf_counter_ns()
            for _ in range(reps):
                fn(a, b)
            timings[name] = (time.perf_counter_ns() - t0) / reps
            rows.append({"size": n, "kernel": name, "ns_per_op": timings[name]})
        rows.append({"size": n, "kernel": "speedup", "ns_per_op": timings["scalar"] / timings["simd"]})
    return rows


def format_bench_table(rows):
    lines = [f"{'size':>8}  {'kernel':<8}  {'ns/op':>12}"]
    for r in rows:
        if r["kernel"] == "speedup":
            lines.append(f"{r['size']:>8}  {'speedup':<8}  {r['ns_per_op']:>11.2f}x")
        else:
            lines.append(f"{r['size']:>8}  {r['kernel']:<8}  {r['ns_per_op']:>12.0f}")
    lines.append(f"simd backend: {'vector' if SIMD else 'scalar fallback'}, lanes={LANES}")
    return "\n".join(lines)
