"""Shot-based estimation of Pauli-decomposed observables.

An observable is split into qubit-wise commuting groups.  Each group is
read out in its own rotated basis: the state (or density matrix) on the
data register is rotated, bitstrings are drawn from the multinomial, and
every term in the group is estimated from the parity of its support.
Shots whose ancillas fail post-selection are discarded per group.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from .encoding import PauliTerm, group_basis, group_measurements, pauli_decompose
from .simulator import AllShotsRejected

_HAD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_SDG = np.diag([1, -1j])
_ROT = {"I": np.eye(2, dtype=complex), "Z": np.eye(2, dtype=complex),
        "X": _HAD, "Y": _HAD @ _SDG}


def basis_rotation(letters: str) -> np.ndarray:
    """Unitary U with U P U† diagonal for every Pauli P compatible with ``letters``."""
    return reduce(np.kron, [_ROT[ch] for ch in letters])


def _parity_signs(letters: str) -> np.ndarray:
    n = len(letters)
    idx = np.arange(1 << n)
    sign = np.ones(1 << n)
    for q, ch in enumerate(letters):
        if ch != "I":
            sign *= 1 - 2 * ((idx >> (n - 1 - q)) & 1)
    return sign


@dataclass
class _Group:
    basis: str
    rotation: np.ndarray
    # rows: observables; value of each observable's group part per bitstring
    weights: np.ndarray


class GroupedObservables:
    """One or more observables measured through a shared set of groups.

    Passing the numerator and denominator of a ratio estimator together
    means both are estimated from the same shots, as on hardware.
    """

    def __init__(self, observables: Sequence[np.ndarray | Sequence[PauliTerm]]):
        term_lists = [pauli_decompose(o) if isinstance(o, np.ndarray) else list(o)
                      for o in observables]
        self.n_obs = len(term_lists)
        coeffs: dict[str, np.ndarray] = {}
        for k, terms in enumerate(term_lists):
            for t in terms:
                coeffs.setdefault(t.letters, np.zeros(self.n_obs))[k] += t.coeff
        if not coeffs:
            raise ValueError("empty observable")
        self.n = len(next(iter(coeffs)))
        self.constant = coeffs.pop("I" * self.n, np.zeros(self.n_obs))
        merged = [PauliTerm(float(np.max(np.abs(c))), s) for s, c in coeffs.items()]
        self.groups: list[_Group] = []
        for g in group_measurements(merged):
            basis = group_basis(g)
            w = np.zeros((self.n_obs, 1 << self.n))
            for t in g:
                w += np.outer(coeffs[t.letters], _parity_signs(t.letters))
            self.groups.append(_Group(basis, basis_rotation(basis), w))

    def __len__(self) -> int:
        return len(self.groups)

    def probabilities(self, state: np.ndarray) -> np.ndarray:
        """Outcome probabilities per group, shape (G, 2^n).

        ``state`` is a (possibly unnormalized) vector or density matrix; its
        norm is the post-selection acceptance.
        """
        if not self.groups:
            return np.zeros((0, 1 << self.n))
        U = np.stack([g.rotation for g in self.groups])
        if state.ndim == 1:
            amp = U @ state
            return np.abs(amp) ** 2
        return np.einsum("gij,jk,gik->gi", U, state, U.conj()).real

    def exact(self, state: np.ndarray) -> np.ndarray:
        """Noise-free values of every observable (normalized by the acceptance)."""
        P = self.probabilities(state)
        acc = P[0].sum() if len(P) else 1.0
        total = self.constant.copy()
        for g, p in zip(self.groups, P):
            total += g.weights @ p / acc
        return total

    def sample(self, state: np.ndarray, shots: int, rng, repetitions: int = 1) -> np.ndarray:
        """Shot estimates of every observable, shape (repetitions, n_obs).

        Each group gets ``shots`` shots; rejected shots land in an extra
        bucket and are dropped.  A repetition in which some group keeps no
        shot raises :class:`AllShotsRejected`.
        """
        if shots < 1:
            raise ValueError("shots must be at least 1")
        P = np.clip(self.probabilities(state), 0.0, None)
        out = np.tile(self.constant, (repetitions, 1))
        for g, p in zip(self.groups, P):
            acc = min(p.sum(), 1.0)
            full = np.append(p, max(0.0, 1.0 - acc))
            full /= full.sum()
            counts = rng.multinomial(shots, full, size=repetitions)[:, :-1]
            kept = counts.sum(axis=1)
            if np.any(kept == 0):
                raise AllShotsRejected("all shots rejected by post-selection")
            out += (counts @ g.weights.T) / kept[:, None]
        return out
