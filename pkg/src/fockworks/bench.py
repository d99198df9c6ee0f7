"""Benchmark the compiled kernels against the pure-Python fallback.

Times the two hot paths (Ryser permanent, number-basis expansion) on both
backends and reports the speedup. Run via ``fockworks bench``.
"""

import math
import time

import numpy as np

from . import _kernels_py
from .optics import fourier_matrix, random_unitary

try:
    from . import _kernels as _compiled
except ImportError:
    _compiled = None


def _time(fn, reps):
    best = math.inf
    for _ in range(reps):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def benchmark(reps: int = 3):
    """Returns a list of row dicts: case, python time, compiled time, speedup."""
    rng = np.random.default_rng(2024)
    rows = []
    cases = []
    for n in (6, 8, 10, 12):
        mat = random_unitary(n, rng).matrix
        cases.append((f"permanent {n}x{n}", "permanent", (mat,)))
    for modes, photons in ((6, 4), (8, 5)):
        u = fourier_matrix(modes - 1).matrix
        occ = tuple([photons] + [0] * (modes - 1))
        cases.append((f"expand {photons} photons / {modes} modes", "expand_basis_state", (u, occ)))
    for label, fn_name, args in cases:
        t_py = _time(lambda: getattr(_kernels_py, fn_name)(*args), reps)
        row = {"case": label, "python_s": t_py, "compiled_s": None, "speedup": None}
        if _compiled is not None:
            t_c = _time(lambda: getattr(_compiled, fn_name)(*args), reps)
            row["compiled_s"] = t_c
            row["speedup"] = t_py / t_c if t_c > 0 else math.inf
        rows.append(row)
    return rows


def format_table(rows) -> str:
    lines = [f"{'case':38} {'python':>10} {'compiled':>10} {'speedup':>8}"]
    for r in rows:
        compiled = f"{r['compiled_s'] * 1e3:9.3f}ms" if r["compiled_s"] is not None else "       n/a"
        speedup = f"{r['speedup']:7.1f}x" if r["speedup"] is not None else "     n/a"
        lines.append(f"{r['case']:38} {r['python_s'] * 1e3:9.3f}ms {compiled} {speedup}")
    return "\n".join(lines)
