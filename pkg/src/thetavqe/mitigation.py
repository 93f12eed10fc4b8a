"""Symmetry-based error mitigation.

Schemes, applied in this order when enabled:

* gauge filter: drop outcomes whose spin labels violate the vertex
  conditions (integer sum and triangle inequality);
* rotation projection: symmetrize two links with P = (1 + S)/2, where S
  swaps their registers, and report ⟨P H P⟩ / ⟨P⟩;
* in-bulk check: an extra ancilla collects the parity of the three
  half-integer flags part way through the circuit and shots with odd
  parity are discarded.

The final RZ layer of the SSP circuits needs no code here; it is part of
the ansatz and simply optimized along with everything else.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Mapping, Sequence

import numpy as np

from .circuit import Circuit, Gate
from .encoding import N_DATA, PauliTerm, is_physical_bitstring, physical_indices
from .measurement import GroupedObservables
from .simulator import AllShotsRejected, simulate_state

MAD_CLIP = 5.0


@dataclass(frozen=True)
class MitigationConfig:
    gauge_postselect: bool = False
    rotation_projector: bool = False
    inbulk_verification: bool = False
    pair: tuple[int, int] = (1, 2)  # 1-based register labels

    def __post_init__(self):
        a, b = self.pair
        if a == b or not {a, b} <= {1, 2, 3}:
            raise ValueError(f"projector pair must be two distinct registers in 1..3, got {self.pair}")

    @property
    def any(self) -> bool:
        return self.gauge_postselect or self.rotation_projector or self.inbulk_verification

    def label(self) -> str:
        parts = [name for name, on in (("gauge", self.gauge_postselect),
                                       ("rot", self.rotation_projector),
                                       ("inbulk", self.inbulk_verification)) if on]
        return "+".join(parts) or "none"


NO_MITIGATION = MitigationConfig()
DEFAULT_MITIGATION = MitigationConfig(gauge_postselect=True, rotation_projector=True)


# ----------------------------------------------------------------- gauge filter

@dataclass
class FilterResult:
    counts: dict[str, int]
    probabilities: dict[str, float]
    kept: int
    rejected: int

    @property
    def rejection_rate(self) -> float:
        total = self.kept + self.rejected
        return self.rejected / total if total else 0.0


def gauge_filter(hist: Mapping[str, int], data: Sequence[int] | None = None) -> FilterResult:
    """Keep only shots whose data bits decode to a physical spin triple.

    ``data`` lists the positions of the six data bits inside each key
    (default: the key is exactly the six data bits).
    """
    counts: dict[str, int] = {}
    rejected = 0
    for bits, k in hist.items():
        d = bits if data is None else "".join(bits[q] for q in data)
        if is_physical_bitstring(d):
            counts[bits] = counts.get(bits, 0) + int(k)
        else:
            rejected += int(k)
    kept = sum(counts.values())
    if kept == 0:
        raise AllShotsRejected("gauge filter rejected every shot")
    probs = {b: k / kept for b, k in counts.items()}
    return FilterResult(counts, probs, kept, rejected)


def gauge_projector() -> np.ndarray:
    """Diagonal projector onto the physical bitstrings of the data register."""
    d = np.zeros(2**N_DATA)
    d[physical_indices()] = 1.0
    return np.diag(d)


# ----------------------------------------------------------------- rotation projector

def _register_qubits(k: int) -> tuple[int, int]:
    return 2 * (k - 1), 2 * (k - 1) + 1


def swap_terms(pair: tuple[int, int] = (1, 2)) -> list[PauliTerm]:
    """S = ¼ Σ_{P,Q} P_a Q_a' P_b Q_b' over the two registers' qubit pairs."""
    (a0, a1), (b0, b1) = _register_qubits(pair[0]), _register_qubits(pair[1])
    out = []
    for p, q in product("IXYZ", repeat=2):
        letters = ["I"] * N_DATA
        letters[a0] = letters[b0] = p
        letters[a1] = letters[b1] = q
        out.append(PauliTerm(0.25, "".join(letters)))
    return out


def swap_operator(pair: tuple[int, int] = (1, 2)) -> np.ndarray:
    """Permutation matrix exchanging the two registers (dense, 64×64)."""
    (a0, a1), (b0, b1) = _register_qubits(pair[0]), _register_qubits(pair[1])
    n = N_DATA
    idx = np.arange(2**n)
    bits = [(idx >> (n - 1 - q)) & 1 for q in range(n)]
    bits[a0], bits[b0] = bits[b0], bits[a0]
    bits[a1], bits[b1] = bits[b1], bits[a1]
    img = sum(b << (n - 1 - q) for q, b in enumerate(bits))
    S = np.zeros((2**n, 2**n))
    S[img, idx] = 1.0
    return S


def rotation_projector(pair: tuple[int, int] = (1, 2)) -> np.ndarray:
    return 0.5 * (np.eye(2**N_DATA) + swap_operator(pair))


def check_symmetric(H: np.ndarray, pair: tuple[int, int] = (1, 2), tol: float = 1e-10) -> None:
    S = swap_operator(pair)
    if np.max(np.abs(S @ H - H @ S)) > tol:
        raise ValueError(f"observable does not commute with the swap of registers {pair}")


def project_state(psi: np.ndarray, pair: tuple[int, int] = (1, 2)) -> np.ndarray:
    """Normalized P|ψ⟩."""
    v = rotation_projector(pair) @ psi
    nrm = np.linalg.norm(v)
    if nrm < 1e-12:
        raise ValueError("projector support lost")
    return v / nrm


def rotation_project(state: np.ndarray, H: np.ndarray, pair: tuple[int, int] = (1, 2),
                     tol: float = 1e-12) -> float:
    """⟨P H P⟩ / ⟨P⟩ for a state vector or density matrix on the data register."""
    check_symmetric(H, pair)
    P = rotation_projector(pair)
    if state.ndim == 1:
        v = P @ state
        den = float(np.vdot(state, v).real)
        num = float(np.vdot(v, H @ v).real)
    else:
        den = float(np.trace(P @ state).real)
        num = float(np.trace(P @ H @ P @ state).real)
    if den <= tol:
        raise ValueError("projector support lost")
    return num / den


def mitigation_operator(cfg: MitigationConfig) -> np.ndarray:
    """Combined projector M applied to the post-selected data state."""
    M = np.eye(2**N_DATA)
    if cfg.gauge_postselect:
        M = gauge_projector() @ M
    if cfg.rotation_projector:
        M = rotation_projector(cfg.pair) @ M
    return M


# ----------------------------------------------------------------- in-bulk check

def _parity_conserved(c: Circuit, position: int, params) -> bool:
    head = c.copy(gates=c.gates[:position])
    psi = simulate_state(head, params)
    n = c.n_qubits
    idx = np.arange(1 << n)
    par = np.zeros(1 << n, dtype=int)
    for k in range(3):
        par ^= (idx >> (n - 1 - (2 * k + 1))) & 1
    return float(np.sum(np.abs(psi[par == 1]) ** 2)) < 1e-12


def insert_inbulk_check(c: Circuit, position: int | None = None, seed: int = 0) -> Circuit:
    """Copy of ``c`` with a parity ancilla fed by the three flag qubits.

    The ancilla is appended as the last qubit and post-selected on 0, i.e.
    an even number of half-integer links.  Without an explicit position the
    check goes to the latest gate boundary at or before the midpoint where a
    random parameter draw leaves the parity even with certainty.
    """
    flags = tuple(2 * k + 1 for k in range(3))
    if position is None:
        params = np.random.default_rng(seed).uniform(-np.pi, np.pi, c.n_slots)
        position = len(c.gates) // 2
        while position > 0 and not _parity_conserved(c, position, params):
            position -= 1
    if not 0 <= position <= len(c.gates):
        raise ValueError("check position outside the circuit")
    a = c.n_qubits
    check = [Gate("CNOT", (f, a)) for f in flags]
    out = Circuit(c.n_qubits + 1, c.data, c.ancillas + (a,),
                  c.gates[:position] + check + c.gates[position:],
                  c.n_slots, {**c.postselect, a: 0}, c.name + "+inbulk" if c.name else "inbulk")
    return out


# ----------------------------------------------------------------- readout statistics

def mad_clip(values: np.ndarray, k: float = MAD_CLIP) -> tuple[np.ndarray, int]:
    """Drop values more than k median absolute deviations from the median."""
    v = np.asarray(values, dtype=float)
    med = np.median(v)
    mad = np.median(np.abs(v - med))
    if mad == 0:
        return v, 0
    keep = np.abs(v - med) <= k * mad
    return v[keep], int(np.sum(~keep))


@dataclass
class MitigatedEnergy:
    median: float
    std: float
    delta: float
    exact: float
    estimates: np.ndarray = field(repr=False)
    n_clipped: int = 0
    acceptance: float = 1.0


def readout_estimates(state: np.ndarray, O: np.ndarray, cfg: MitigationConfig, shots: int,
                      repetitions: int, rng) -> np.ndarray:
    """Repeated shot estimates of the (mitigated) expectation of ``O``.

    ``state`` is the unnormalized post-selected data state (vector or
    density matrix).  Numerator M O M and denominator M are measured from
    the same shots, M being the enabled projectors.
    """
    M = mitigation_operator(cfg)
    if cfg.rotation_projector:
        check_symmetric(O, cfg.pair)
    obs = GroupedObservables([M @ O @ M, M])
    vals = obs.sample(state, shots, rng, repetitions)
    num, den = vals[:, 0], vals[:, 1]
    if np.any(den <= 0):
        raise ValueError("projector support lost")
    return num / den


def mitigated_observable(state: np.ndarray, O: np.ndarray, exact: float,
                         cfg: MitigationConfig = DEFAULT_MITIGATION, shots: int = 1000,
                         repetitions: int = 200, seed=None) -> MitigatedEnergy:
    """Median and spread of repeated readouts after 5-MAD outlier clipping."""
    if repetitions < 1:
        raise ValueError("need at least one repetition")
    rng = np.random.default_rng(seed)
    acc = float(np.trace(state).real) if state.ndim == 2 else float(np.vdot(state, state).real)
    est = readout_estimates(state, O, cfg, shots, repetitions, rng)
    kept, n_out = mad_clip(est)
    med = float(np.median(kept))
    std = float(np.std(kept, ddof=1)) if len(kept) > 1 else 0.0
    return MitigatedEnergy(med, std, med - exact, exact, est, n_out, acc)


def mitigated_energy(state: np.ndarray, H: np.ndarray, exact: float,
                     cfg: MitigationConfig = DEFAULT_MITIGATION, shots: int = 1000,
                     repetitions: int = 200, seed=None) -> MitigatedEnergy:
    """Energy readout with the enabled schemes; ``delta`` is median − exact E0."""
    return mitigated_observable(state, H, exact, cfg, shots, repetitions, seed)
