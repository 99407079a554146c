"""Vectorized dot product against its scalar reference.

Run from the repository root: python3 demos/05_simd_kernel.py
"""

import numpy as np

from screentags import numkernel

rng = np.random.default_rng(0)
a = rng.uniform(-1e3, 1e3, 1025).astype(np.float32)
b = rng.uniform(-1e3, 1e3, 1025).astype(np.float32)
ref, fast = numkernel.dot_scalar(a, b), numkernel.dot_simd(a, b)
print(f"scalar {ref:.3f}  simd {fast:.3f}  rel diff {abs(float(fast) - float(ref)) / (1 + abs(float(ref))):.1e}")

M = rng.normal(size=(8, 16)).astype(np.float32)
v = rng.normal(size=16).astype(np.float32)
print("matvec max diff:", float(np.abs(numkernel.matvec(M, v) - numkernel.matvec(M, v, use_simd=False)).max()))

print(numkernel.format_bench_table(numkernel.bench_kernel()))
