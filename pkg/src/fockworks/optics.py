"""Passive linear optics: element matrices, Fock evolution, and decomposition.

Conventions
-----------
A network is described by its action on creation operators,
a_l^dag -> sum_m U[m, l] a_m^dag, with U unitary. The two primitive
elements are

    phase shifter  P_theta   : 1x1 matrix [e^{i theta}]
    beam splitter  B_theta   : [[cos t, -sin t], [sin t, cos t]]

"Balanced" means theta = pi/4 in this matrix convention. Protocol
literature often names the balanced splitter by its Hamiltonian angle
(twice the matrix angle); all quantities asserted by the test suite are
convention-independent.
"""

import cmath
import json
import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .fock import FockError, FockState, ModeMismatchError

UNITARY_TOL = 1e-10


class NonUnitaryError(FockError):
    """Matrix fails the unitarity check."""


class ModeUnitary:
    """An m x m unitary acting on creation operators.

    Unitarity (max-norm residual of U^dag U - I) is checked at
    construction; the wrapped array is never mutated.
    """

    __slots__ = ("matrix", "dim")

    def __init__(self, matrix, tol: float = UNITARY_TOL):
        m = np.array(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise NonUnitaryError(f"expected a square matrix, got shape {m.shape}")
        residual = unitarity_residual(m)
        if residual > tol:
            raise NonUnitaryError(f"unitarity residual {residual:.3e} exceeds {tol:.1e}")
        m.setflags(write=False)
        self.matrix = m
        self.dim = m.shape[0]

    def __matmul__(self, other: "ModeUnitary") -> "ModeUnitary":
        return ModeUnitary(self.matrix @ other.matrix)

    def dagger(self) -> "ModeUnitary":
        return ModeUnitary(self.matrix.conj().T)

    def __repr__(self):
        return f"ModeUnitary(dim={self.dim})"


def unitarity_residual(matrix) -> float:
    m = np.asarray(matrix, dtype=complex)
    return float(np.abs(m.conj().T @ m - np.eye(m.shape[0])).max())


@dataclass(frozen=True)
class PhaseShifter:
    mode: int
    theta: float


@dataclass(frozen=True)
class BeamSplitter:
    mode_a: int
    mode_b: int
    theta: float

    def __post_init__(self):
        if self.mode_a == self.mode_b:
            raise ValueError("beam splitter modes must be distinct")


OpticalElement = PhaseShifter | BeamSplitter


@dataclass(frozen=True)
class ElementSequence:
    """Time-ordered element list; compose() multiplies right-to-left."""

    modes: int
    elements: tuple = ()
    global_phase: complex = 1.0 + 0j


def element_matrix(element: OpticalElement) -> ModeUnitary:
    """Matrix of an element on its own mode(s)."""
    if isinstance(element, PhaseShifter):
        return ModeUnitary([[cmath.exp(1j * element.theta)]])
    c, s = math.cos(element.theta), math.sin(element.theta)
    return ModeUnitary([[c, -s], [s, c]])


def fourier_matrix(n: int) -> ModeUnitary:
    """(n+1)-point Fourier transform, entries w^{kl} / sqrt(n+1)."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    dim = n + 1
    k = np.arange(dim)
    mat = np.exp(2j * np.pi * np.outer(k, k) / dim) / math.sqrt(dim)
    return ModeUnitary(mat)


def embed(element: OpticalElement, modes: int) -> ModeUnitary:
    """Element matrix padded with identity to ``modes`` modes."""
    if isinstance(element, PhaseShifter):
        idx = (element.mode,)
    else:
        idx = (element.mode_a, element.mode_b)
    return embed_matrix(element_matrix(element), idx, modes)


def embed_matrix(small: ModeUnitary, indices, modes: int) -> ModeUnitary:
    """Place a k-mode unitary at the given mode indices of an m-mode identity."""
    indices = list(indices)
    if len(set(indices)) != len(indices):
        raise ValueError(f"duplicate mode indices {indices}")
    if any(i < 0 or i >= modes for i in indices):
        raise ValueError(f"mode indices {indices} out of range for {modes} modes")
    if len(indices) != small.dim:
        raise ModeMismatchError(f"{small.dim}-mode matrix placed on {len(indices)} indices")
    full = np.eye(modes, dtype=complex)
    for a, ia in enumerate(indices):
        for b, ib in enumerate(indices):
            full[ia, ib] = small.matrix[a, b]
    return ModeUnitary(full)


def apply_unitary(state: FockState, u: ModeUnitary, modes=None) -> FockState:
    """Evolve a state under a mode unitary.

    With ``modes`` given, ``u`` acts on that subset (in the listed order)
    and the remaining modes are untouched; otherwise u.dim must equal the
    state's mode count. Photon number and norm are preserved.
    """
    if modes is None:
        if u.dim != state.modes:
            raise ModeMismatchError(f"{u.dim}x{u.dim} matrix on {state.modes}-mode state")
        modes = list(range(state.modes))
    else:
        modes = list(modes)
        if len(modes) != u.dim:
            raise ModeMismatchError(f"{u.dim}-mode matrix applied to {len(modes)} modes")
        if len(set(modes)) != len(modes) or any(m < 0 or m >= state.modes for m in modes):
            raise ValueError(f"bad mode subset {modes}")
    mat = np.ascontiguousarray(u.matrix)
    expansions: dict = {}
    result: dict = {}
    for occ, amp in state.terms():
        sub = tuple(occ[m] for m in modes)
        expansion = expansions.get(sub)
        if expansion is None:
            expansion = kernels.expand_basis_state(mat, sub)
            expansions[sub] = expansion
        base = list(occ)
        for out_sub, coeff in expansion.items():
            for m, k in zip(modes, out_sub):
                base[m] = k
            key = tuple(base)
            result[key] = result.get(key, 0j) + amp * coeff
    return FockState(state.modes, result)


def apply_mode_unitary(state: FockState, u: ModeUnitary) -> FockState:
    """Full-width evolution (u.dim == state.modes)."""
    return apply_unitary(state, u)


def transition_amplitude(u: ModeUnitary, occ_in, occ_out) -> complex:
    """<out|U|in> via the matrix permanent.

    Independent of the multinomial expansion used by apply_unitary; serves
    as the cross-validation oracle. Equals
    perm(U[out, in]) / sqrt(prod in_i! prod out_j!) where rows/columns are
    repeated according to the occupations.
    """
    occ_in = tuple(int(k) for k in occ_in)
    occ_out = tuple(int(k) for k in occ_out)
    if len(occ_in) != u.dim or len(occ_out) != u.dim:
        raise ModeMismatchError("occupation length does not match matrix dimension")
    if sum(occ_in) != sum(occ_out):
        return 0j
    cols = [l for l, k in enumerate(occ_in) for _ in range(k)]
    rows = [m for m, k in enumerate(occ_out) for _ in range(k)]
    sub = u.matrix[np.ix_(rows, cols)]
    denom = 1.0
    for k in occ_in:
        denom *= math.factorial(k)
    for k in occ_out:
        denom *= math.factorial(k)
    return complex(kernels.permanent(sub)) / math.sqrt(denom)


def compose(seq: ElementSequence) -> ModeUnitary:
    """Ordered product of the embedded elements times the global phase."""
    total = np.eye(seq.modes, dtype=complex) * seq.global_phase
    for element in seq.elements:
        total = embed(element, seq.modes).matrix @ total
    return ModeUnitary(total)


def decompose_reck(u: ModeUnitary, tol: float = UNITARY_TOL) -> ElementSequence:
    """Triangular (Reck-style) decomposition into O(m^2) elements.

    Entries below the diagonal are eliminated column by column with
    two-mode rotations (each a beam splitter preceded, when the local
    ratio is not real, by a phase shifter); what remains of a unitary is
    a diagonal of phases, realized by phase shifters. compose() of the
    result reproduces u entrywise.
    """
    work = np.array(u.matrix, dtype=complex)
    m = u.dim
    # sequence of (p, q, theta, phi) with G = B(theta) . P_p(phi) satisfying
    # (G work) zeroing work[q, col]
    rotations = []
    for col in range(m - 1):
        for q in range(m - 1, col, -1):
            p = q - 1
            up, uq = work[p, col], work[q, col]
            if abs(uq) < 1e-14:
                continue
            if abs(up) < 1e-14:
                theta, phi = math.pi / 2, 0.0
            else:
                ratio = -uq / up
                if abs(ratio.imag) < 1e-14:
                    theta, phi = math.atan(ratio.real), 0.0
                else:
                    theta, phi = math.atan(abs(ratio)), cmath.phase(ratio)
            g = np.eye(m, dtype=complex)
            c, s = math.cos(theta), math.sin(theta)
            e = cmath.exp(1j * phi)
            g[p, p], g[p, q] = c * e, -s
            g[q, p], g[q, q] = s * e, c
            work = g @ work
            rotations.append((p, q, theta, phi))
    off_diag = float(np.abs(work - np.diag(np.diag(work))).max())
    if off_diag > tol:
        raise NonUnitaryError(f"triangularization residual {off_diag:.3e}; input not unitary")
    elements = []
    for mode in range(m):
        delta = cmath.phase(work[mode, mode])
        if abs(delta) > 1e-13:
            elements.append(PhaseShifter(mode, delta))
    # U = G_1^dag ... G_K^dag D, so apply D first, then the G^dag in reverse
    for p, q, theta, phi in reversed(rotations):
        # G^dag = P_p(-phi) . B(-theta): beam splitter first in time order
        if abs(theta) > 1e-13:
            elements.append(BeamSplitter(p, q, -theta))
        if abs(phi) > 1e-13:
            elements.append(PhaseShifter(p, -phi))
    return ElementSequence(modes=m, elements=tuple(elements), global_phase=1.0 + 0j)


def random_unitary(dim: int, rng) -> ModeUnitary:
    """Haar-ish random unitary from QR of a complex Gaussian matrix."""
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    return ModeUnitary(q)


# -- netlist interchange ----------------------------------------------------


def sequence_to_json(seq: ElementSequence) -> dict:
    elements = []
    for e in seq.elements:
        if isinstance(e, PhaseShifter):
            elements.append({"kind": "ps", "modes": [e.mode], "theta": e.theta})
        else:
            elements.append({"kind": "bs", "modes": [e.mode_a, e.mode_b], "theta": e.theta})
    return {
        "modes": seq.modes,
        "global_phase": {"re": complex(seq.global_phase).real, "im": complex(seq.global_phase).imag},
        "elements": elements,
    }


def sequence_from_json(data: dict) -> ElementSequence:
    elements = []
    for e in data["elements"]:
        if e["kind"] == "ps":
            elements.append(PhaseShifter(e["modes"][0], float(e["theta"])))
        elif e["kind"] == "bs":
            elements.append(BeamSplitter(e["modes"][0], e["modes"][1], float(e["theta"])))
        else:
            raise ValueError(f"unknown element kind {e['kind']!r}")
    phase = complex(data["global_phase"]["re"], data["global_phase"]["im"])
    return ElementSequence(modes=int(data["modes"]), elements=tuple(elements), global_phase=phase)


def dump_sequence(seq: ElementSequence) -> str:
    return json.dumps(sequence_to_json(seq), sort_keys=True, separators=(",", ":"))


def load_sequence(text: str) -> ElementSequence:
    return sequence_from_json(json.loads(text))
