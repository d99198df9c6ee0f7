"""Sparse multimode Fock states and elementary state algebra.

States are stored as a sparse map from occupation tuples (photons per
mode) to complex amplitudes. All operations are pure: a FockState never
mutates after construction, so values can be shared freely.

Mode indices are 0-based throughout.
"""

import cmath
import json
import math

import numpy as np

#: Default pruning tolerance, relative to the state norm. Exact protocol
#: amplitudes are dyadic/sqrt(2) combinations, far above rounding noise.
DEFAULT_TOL = 1e-12


class FockError(Exception):
    """Base class for state-algebra errors."""


class InvalidOccupationError(FockError):
    """Negative photon count or inconsistent occupation length."""


class ModeMismatchError(FockError):
    """Operands act on different numbers of modes."""


class ZeroStateError(FockError):
    """An operation produced or received a state with no support."""


class FockState:
    """Sparse state on a fixed number of bosonic modes.

    Amplitudes with magnitude <= tol * norm are dropped at construction;
    non-finite amplitudes are rejected.
    """

    __slots__ = ("modes", "_amp")

    def __init__(self, modes: int, amplitudes: dict, tol: float = DEFAULT_TOL):
        if modes < 0:
            raise InvalidOccupationError(f"mode count must be >= 0, got {modes}")
        cleaned = {}
        norm_sq = 0.0
        for occ, amp in amplitudes.items():
            occ = tuple(int(k) for k in occ)
            if len(occ) != modes:
                raise InvalidOccupationError(
                    f"occupation {occ} has length {len(occ)}, expected {modes}"
                )
            if any(k < 0 for k in occ):
                raise InvalidOccupationError(f"negative count in occupation {occ}")
            amp = complex(amp)
            if not (math.isfinite(amp.real) and math.isfinite(amp.imag)):
                raise InvalidOccupationError(f"non-finite amplitude for {occ}")
            if amp != 0:
                cleaned[occ] = cleaned.get(occ, 0j) + amp
        for occ, amp in cleaned.items():
            norm_sq += abs(amp) ** 2
        cutoff = tol * math.sqrt(norm_sq)
        self._amp = {occ: amp for occ, amp in cleaned.items() if abs(amp) > cutoff}
        self.modes = modes

    # -- accessors ---------------------------------------------------------

    def terms(self):
        """Iterate (occupation, amplitude) in canonical (lexicographic) order."""
        for occ in sorted(self._amp):
            yield occ, self._amp[occ]

    def amplitude(self, occ) -> complex:
        return self._amp.get(tuple(occ), 0j)

    def term_count(self) -> int:
        return len(self._amp)

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self._amp.values()))

    def total_photons(self):
        """Set of total photon numbers present across terms."""
        return {sum(occ) for occ in self._amp}

    def max_occupation(self, mode: int) -> int:
        if not self._amp:
            return 0
        return max(occ[mode] for occ in self._amp)

    # -- algebra -----------------------------------------------------------

    def normalized(self) -> "FockState":
        n = self.norm()
        if n == 0:
            raise ZeroStateError("cannot normalize a zero state")
        return self.scaled(1.0 / n)

    def scaled(self, factor: complex) -> "FockState":
        return FockState(self.modes, {o: a * factor for o, a in self._amp.items()}, tol=0.0)

    def __add__(self, other: "FockState") -> "FockState":
        if self.modes != other.modes:
            raise ModeMismatchError(f"{self.modes} vs {other.modes} modes")
        amp = dict(self._amp)
        for occ, a in other._amp.items():
            amp[occ] = amp.get(occ, 0j) + a
        return FockState(self.modes, amp, tol=0.0)

    def __repr__(self):
        parts = [f"{amp:.6g}|{','.join(map(str, occ))}>" for occ, amp in self.terms()]
        body = " + ".join(parts[:6]) + (" + ..." if len(parts) > 6 else "")
        return f"FockState({self.modes} modes: {body})"


def number_state(counts) -> FockState:
    """|k_0 k_1 ... k_{m-1}> with amplitude 1."""
    counts = tuple(int(k) for k in counts)
    return FockState(len(counts), {counts: 1.0 + 0j})


def vacuum(modes: int) -> FockState:
    return number_state((0,) * modes)


def tensor(a: FockState, b: FockState) -> FockState:
    """Tensor product; b's modes are appended after a's."""
    amp = {}
    for occ_a, amp_a in a._amp.items():
        for occ_b, amp_b in b._amp.items():
            amp[occ_a + occ_b] = amp_a * amp_b
    return FockState(a.modes + b.modes, amp, tol=0.0)


def inner_product(a: FockState, b: FockState) -> complex:
    """<a|b>, conjugate-linear in a."""
    if a.modes != b.modes:
        raise ModeMismatchError(f"{a.modes} vs {b.modes} modes")
    small, large = (a._amp, b._amp) if len(a._amp) <= len(b._amp) else (b._amp, a._amp)
    total = 0j
    if small is a._amp:
        for occ, amp in small.items():
            total += amp.conjugate() * large.get(occ, 0j)
    else:
        for occ, amp in small.items():
            total += large.get(occ, 0j).conjugate() * amp
    return total


def canonicalize(state: FockState, tol: float = DEFAULT_TOL, renormalize: bool = True) -> FockState:
    """Prune amplitudes with |amp| <= tol * norm, then optionally renormalize.

    The threshold is relative to the norm so the operation is idempotent
    regardless of the input's normalization.
    """
    if tol < 0:
        raise ValueError("tolerance must be >= 0")
    pruned = FockState(state.modes, state._amp, tol=tol)
    if pruned.term_count() == 0:
        raise ZeroStateError("all terms pruned")
    return pruned.normalized() if renormalize else pruned


def fidelity(a: FockState, b: FockState) -> float:
    """|<a|b>|^2 for normalized states; insensitive to global phase."""
    return abs(inner_product(a, b)) ** 2


def states_close(a: FockState, b: FockState, tol: float = 1e-10) -> bool:
    """Term-for-term amplitude agreement (phase-sensitive)."""
    if a.modes != b.modes:
        return False
    keys = set(a._amp) | set(b._amp)
    return all(abs(a.amplitude(k) - b.amplitude(k)) <= tol for k in keys)


def permute_modes(state: FockState, perm) -> FockState:
    """Relabel modes: output mode i holds what input mode perm[i] held."""
    perm = list(perm)
    if sorted(perm) != list(range(state.modes)):
        raise ModeMismatchError(f"{perm} is not a permutation of 0..{state.modes - 1}")
    amp = {tuple(occ[p] for p in perm): a for occ, a in state._amp.items()}
    return FockState(state.modes, amp, tol=0.0)


def swap_modes(state: FockState, i: int, j: int) -> FockState:
    perm = list(range(state.modes))
    perm[i], perm[j] = perm[j], perm[i]
    return permute_modes(state, perm)


def reduced_density_matrix(state: FockState, modes):
    """Density matrix of the given modes after tracing out the rest.

    Returns (matrix, basis) where basis lists the occupation tuples
    labelling the rows/columns. Used for entanglement diagnostics only;
    the simulator itself stays pure-state.
    """
    modes = list(modes)
    rest = [m for m in range(state.modes) if m not in modes]
    blocks = {}
    for occ, amp in state._amp.items():
        kept = tuple(occ[m] for m in modes)
        env = tuple(occ[m] for m in rest)
        blocks.setdefault(env, {})[kept] = amp
    basis = sorted({k for block in blocks.values() for k in block})
    index = {k: i for i, k in enumerate(basis)}
    rho = np.zeros((len(basis), len(basis)), dtype=complex)
    for block in blocks.values():
        for k1, a1 in block.items():
            for k2, a2 in block.items():
                rho[index[k1], index[k2]] += a1 * a2.conjugate()
    return rho, basis


def entanglement_entropy(state: FockState, modes) -> float:
    """Von Neumann entropy (bits) of the reduced state of ``modes``."""
    rho, _ = reduced_density_matrix(state.normalized(), modes)
    eigs = np.linalg.eigvalsh(rho)
    return float(-sum(p * math.log2(p) for p in eigs if p > 1e-15))


def schmidt_coefficients(state: FockState, modes):
    """Schmidt coefficients across the (modes | rest) bipartition, descending."""
    rho, _ = reduced_density_matrix(state.normalized(), modes)
    eigs = sorted((max(float(x), 0.0) for x in np.linalg.eigvalsh(rho)), reverse=True)
    return [math.sqrt(p) for p in eigs if p > 1e-15]


# -- JSON interchange ------------------------------------------------------


def state_to_json(state: FockState) -> dict:
    """{"modes": m, "terms": [{"occ": [...], "re": x, "im": y}, ...]}."""
    return {
        "modes": state.modes,
        "terms": [
            {"occ": list(occ), "re": amp.real, "im": amp.imag}
            for occ, amp in state.terms()
        ],
    }


def state_from_json(data: dict) -> FockState:
    amp = {tuple(t["occ"]): complex(t["re"], t["im"]) for t in data["terms"]}
    return FockState(int(data["modes"]), amp, tol=0.0)


def dump_state(state: FockState) -> str:
    return json.dumps(state_to_json(state), sort_keys=True, separators=(",", ":"))


def load_state(text: str) -> FockState:
    return state_from_json(json.loads(text))


def phase_on_mode(state: FockState, mode: int, angle: float) -> FockState:
    """Multiply each term by e^{i*angle*occ[mode]} (an ideal phase shifter)."""
    rot = cmath.exp(1j * angle)
    amp = {occ: a * rot ** occ[mode] for occ, a in state._amp.items()}
    return FockState(state.modes, amp, tol=0.0)
