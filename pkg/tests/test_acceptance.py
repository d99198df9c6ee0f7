"""Acceptance gate: runs every criterion at its stated tolerance.

Each test prints one pass/fail line (visible with ``pytest -s`` or in the
captured output of a failure); ``fockworks verify all`` runs the same
checks from the command line.
"""

import time

import pytest

from fockworks import verify

NAMES = {
    1: "nonlinear sign flip: p = 1/4, amplitudes (1/2, 1/2, -1/2)",
    2: "conditional sign via two sign flips: p = 1/16, exact operator",
    3: "modified Bell resource circuit: p = 1/16, exact state",
    4: "splitter teleportation: p = 1/2, corrected fidelity 1",
    5: "multiport teleportation: failure 1/(n+1), fidelity 1 (n = 1..4)",
    6: "teleported conditional sign: p = (n/(n+1))^2, safe failures",
    7: "parity-tagged preparation and resource assembly",
    8: "nondestructive parity measurement and entanglement distribution",
    9: "fan-out counter misdetection: 1 - (N)_k/N^k, bounded by k(k-1)/2N",
    10: "independent oracles: permanents and squeezer exponentiation",
    11: "triangular decomposition round-trip (50 unitaries, m <= 6)",
    12: "heralded single-photon source fidelities",
    13: "Monte-Carlo rates within 3 sigma (4e5 trials total)",
    14: "preparation-cost recursion is subexponential to n = 400",
}

TIME_LIMITS = {1: 1.0, 2: 5.0, 5: 30.0, 13: 120.0}


@pytest.mark.parametrize("number", sorted(verify.CRITERIA), ids=lambda n: f"criterion-{n:02d}")
def test_criterion(number):
    start = time.perf_counter()
    checks = verify.CRITERIA[number]()
    elapsed = time.perf_counter() - start
    ok = all(c.passed for c in checks)
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {NAMES[number]} ({elapsed:.2f}s)")
    for c in checks:
        if not c.passed:
            print("       " + c.line())
    assert ok, [c.name for c in checks if not c.passed]
    limit = TIME_LIMITS.get(number)
    if limit is not None:
        assert elapsed < limit, f"criterion {number} took {elapsed:.1f}s (limit {limit}s)"
