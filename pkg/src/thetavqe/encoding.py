"""Qubit encoding of the j_max = 3/2 Θ-model and Pauli decompositions.

Conventions (used everywhere in the package):

* qubit 0 is the most significant bit of a statevector index, so bitstrings
  and Pauli letter strings are written with qubit 0 on the left;
* register k (0-based) holds the binary digits of ``2*j_k`` on qubits
  ``(2k, 2k+1)``; the second qubit of each pair is the half-integer flag.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterable, Sequence

import numpy as np

from .recoupling import triangle_ok
from .theta import Coupling, ThetaBasis, ThetaState, enumerate_basis, hamiltonian

N_DATA = 6
DEFAULT_PENALTY = 50.0


@dataclass(frozen=True)
class RegisterLayout:
    n_registers: int = 3
    bits_per_register: int = 2
    n_ancillas: int = 0

    @property
    def n_data(self) -> int:
        return self.n_registers * self.bits_per_register

    @property
    def n_qubits(self) -> int:
        return self.n_data + self.n_ancillas

    def register_qubits(self, k: int) -> tuple[int, int]:
        return (2 * k, 2 * k + 1)

    def msb(self, k: int) -> int:
        return 2 * k

    def flag(self, k: int) -> int:
        return 2 * k + 1

    @property
    def flags(self) -> tuple[int, ...]:
        return tuple(self.flag(k) for k in range(self.n_registers))

    @property
    def ancillas(self) -> tuple[int, ...]:
        return tuple(range(self.n_data, self.n_qubits))


def encode(twice: Sequence[int]) -> str:
    """Bitstring (qubit 0 first) for a triple of twice-spins, each ≤ 3."""
    if any(t < 0 or t > 3 for t in twice):
        raise ValueError("each 2j must lie in 0..3 for two-qubit registers")
    return "".join(format(t, "02b") for t in twice)


def decode(bits: str) -> tuple[int, ...]:
    """Inverse of :func:`encode`; returns twice-spins."""
    if len(bits) % 2 or set(bits) - {"0", "1"}:
        raise ValueError(f"bad bitstring {bits!r}")
    return tuple(int(bits[i:i + 2], 2) for i in range(0, len(bits), 2))


def index_of(twice: Sequence[int]) -> int:
    return int(encode(twice), 2)


def is_physical_bitstring(bits: str) -> bool:
    if len(bits) != N_DATA:
        raise ValueError("expected a 6-bit string")
    return triangle_ok(*decode(bits))


def physical_indices(basis: ThetaBasis | None = None) -> np.ndarray:
    """Statevector indices of the basis states, in basis order."""
    basis = basis or enumerate_basis(3)
    return np.array([index_of(s.twice) for s in basis.states], dtype=int)


def embed_matrix(h_phys: np.ndarray, basis: ThetaBasis, penalty: float = DEFAULT_PENALTY) -> np.ndarray:
    """Place a basis-space matrix into the 64-dim register space."""
    if penalty < 0:
        raise ValueError("penalty must be non-negative")
    if basis.j_max != 3:
        raise ValueError("qubit embedding requires j_max = 3/2")
    n = 2**N_DATA
    out = np.zeros((n, n))
    idx = physical_indices(basis)
    out[np.ix_(idx, idx)] = h_phys
    phys = set(idx.tolist())
    for i in range(n):
        if i in phys:
            continue
        t = np.array(decode(format(i, "06b"))) / 2
        out[i, i] = float(np.sum(t * (t + 1))) + penalty
    return out


def embed_hamiltonian(basis: ThetaBasis | None, c: Coupling | float,
                      penalty: float = DEFAULT_PENALTY) -> np.ndarray:
    basis = basis or enumerate_basis(3)
    return embed_matrix(hamiltonian(basis, c), basis, penalty)


# ---------------------------------------------------------------- Pauli algebra

@dataclass(frozen=True)
class PauliTerm:
    coeff: float
    letters: str

    def __str__(self) -> str:
        return f"{self.coeff:.12g} {self.letters}"


_P1 = {
    "I": np.eye(2),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.diag([1.0, -1.0]).astype(complex),
}


def pauli_matrix(letters: str) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for ch in letters:
        out = np.kron(out, _P1[ch])
    return out


def _walsh_hadamard(v: np.ndarray, n: int) -> np.ndarray:
    v = v.reshape((2,) * n)
    for ax in range(n):
        a = np.take(v, 0, axis=ax)
        b = np.take(v, 1, axis=ax)
        v = np.stack([a + b, a - b], axis=ax)
    return v.reshape(-1)


def pauli_decompose(H: np.ndarray, tol: float = 1e-12) -> list[PauliTerm]:
    """Coefficients 2^-n Tr(P H) for all Pauli strings, small ones dropped.

    Uses the X-mask / Z-mask factorization: for a fixed X pattern the
    nonzero entries of P lie on a single permuted diagonal, and the Z
    pattern enters as a Walsh-Hadamard transform along that diagonal.
    Output is sorted by letter string.
    """
    H = np.asarray(H)
    dim = H.shape[0]
    n = dim.bit_length() - 1
    if H.shape != (dim, dim) or 2**n != dim:
        raise ValueError("matrix dimension must be a power of two")
    if n > 8:
        raise ValueError("at most 8 qubits supported")
    rows = np.arange(dim)
    terms = []
    for xmask in range(dim):
        diag = H[rows, rows ^ xmask]
        coeffs = _walsh_hadamard(diag.astype(complex), n) / dim
        for zmask in range(dim):
            # P = i^{#Y} X^x Z^z, so Tr(P H) = i^{#Y} Σ_s (-1)^{z·s} H[s, s^x]
            ny = bin(xmask & zmask).count("1")
            c = coeffs[zmask] * (1j) ** ny
            if abs(c) < tol:
                continue
            letters = "".join(
                "IXZY"[((xmask >> (n - 1 - q)) & 1) | (((zmask >> (n - 1 - q)) & 1) << 1)]
                for q in range(n)
            )
            terms.append((letters, c))
    out = []
    for letters, c in sorted(terms):
        if abs(c.imag) > 1e-10:
            raise ValueError("matrix is not Hermitian with real Pauli coefficients")
        out.append(PauliTerm(float(c.real), letters))
    return out


def pauli_reconstruct(terms: Iterable[PauliTerm], n: int) -> np.ndarray:
    out = np.zeros((2**n, 2**n), dtype=complex)
    for t in terms:
        out += t.coeff * pauli_matrix(t.letters)
    return out


def format_terms(terms: Iterable[PauliTerm]) -> str:
    return "".join(f"{t}\n" for t in sorted(terms, key=lambda t: t.letters))


def parse_terms(text: str) -> list[PauliTerm]:
    out = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        coeff, letters = line.split()
        out.append(PauliTerm(float(coeff), letters))
    return out


def qubitwise_commute(a: str, b: str) -> bool:
    return all(x == "I" or y == "I" or x == y for x, y in zip(a, b))


def group_measurements(terms: Sequence[PauliTerm]) -> list[list[PauliTerm]]:
    """Greedy qubit-wise-commuting grouping, largest |coeff| first."""
    order = sorted(terms, key=lambda t: (-abs(t.coeff), t.letters))
    groups: list[list[PauliTerm]] = []
    bases: list[list[str]] = []
    for t in order:
        for g, basis in zip(groups, bases):
            if qubitwise_commute("".join(basis), t.letters):
                g.append(t)
                for q, ch in enumerate(t.letters):
                    if ch != "I":
                        basis[q] = ch
                break
        else:
            groups.append([t])
            bases.append(list(t.letters))
    return groups


def group_basis(group: Sequence[PauliTerm]) -> str:
    """Shared measurement basis letters of a commuting group (I where unused)."""
    n = len(group[0].letters)
    basis = ["I"] * n
    for t in group:
        for q, ch in enumerate(t.letters):
            if ch != "I":
                basis[q] = ch
    return "".join(basis)


def all_bitstrings(n: int = N_DATA) -> list[str]:
    return ["".join(b) for b in product("01", repeat=n)]


def state_of(bits: str) -> ThetaState:
    return ThetaState(*decode(bits))
