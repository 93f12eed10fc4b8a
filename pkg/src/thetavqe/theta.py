"""Gauge-invariant Θ-graph model: basis, Hamiltonian and exact diagonalization.

A state is a triple of link spins ``(j1, j2, j3)`` obeying the triangle
conditions.  Spins are stored as twice-values throughout, so the triple
``(1, 1, 0)`` means ``(1/2, 1/2, 0)``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Sequence

import numpy as np

from .recoupling import HalfInt, SpinLike, triangle_ok, tw, wigner_6j

PAIRS = ((1, 2), (1, 3), (2, 3))
CSV_HEADER = ("lambda", "jmax", "E0", "E1", "gap", "cP", "band_width")


@dataclass(frozen=True)
class ThetaState:
    """Three link spins, each as a twice-value."""

    j1: int
    j2: int
    j3: int

    @property
    def twice(self) -> tuple[int, int, int]:
        return (self.j1, self.j2, self.j3)

    def spins(self) -> tuple[float, float, float]:
        return (self.j1 / 2, self.j2 / 2, self.j3 / 2)

    def physical(self) -> bool:
        return triangle_ok(self.j1, self.j2, self.j3)

    def __str__(self) -> str:
        return "(" + ",".join(str(HalfInt(t)) for t in self.twice) + ")"


@dataclass(frozen=True)
class IntertwinerLabels:
    """Intertwiner labels of the 6-valent vertex; only pi_o = 0 is modelled."""

    pi_plus: int
    pi_o: int
    pi_minus: int

    @classmethod
    def for_state(cls, state: ThetaState) -> "IntertwinerLabels":
        return cls(state.j3, 0, state.j3)


@dataclass(frozen=True)
class Coupling:
    lam: float

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam}")

    @property
    def g_e(self) -> float:
        return 1.0 - self.lam**2

    @property
    def g_b(self) -> float:
        return 2.0 * self.lam**2


@dataclass
class ThetaBasis:
    j_max: int  # twice-value
    states: list[ThetaState]
    index: dict[ThetaState, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.index:
            self.index = {s: i for i, s in enumerate(self.states)}

    def __len__(self) -> int:
        return len(self.states)

    def __iter__(self):
        return iter(self.states)

    def twice_array(self) -> np.ndarray:
        """(dim, 3) integer array of twice-spins."""
        return np.array([s.twice for s in self.states], dtype=int).reshape(-1, 3)


def enumerate_basis(j_max: SpinLike) -> ThetaBasis:
    """All physical triples with every spin at most ``j_max`` (twice-value)."""
    tmax = tw(j_max)
    if tmax < 0:
        raise ValueError("j_max must be non-negative")
    states = [
        ThetaState(*t)
        for t in product(range(tmax + 1), repeat=3)
        if triangle_ok(*t)
    ]
    return ThetaBasis(tmax, states)


def h_electric(basis: ThetaBasis) -> np.ndarray:
    """Diagonal electric term, sum of j(j+1) over the three links."""
    if len(basis) == 0:
        raise ValueError("empty basis")
    t = basis.twice_array().astype(float)
    return np.diag(np.sum(t / 2 * (t / 2 + 1), axis=1))


def plaquette_element(bra: ThetaState, ket: ThetaState, pair: tuple[int, int]) -> float:
    """⟨bra| H_plaquette(a,b) |ket⟩ for a single pair of links."""
    a, b = pair[0] - 1, pair[1] - 1
    c = 3 - a - b
    jk, jb_ = ket.twice, bra.twice
    if jk[c] != jb_[c]:
        return 0.0
    if abs(jk[a] - jb_[a]) != 1 or abs(jk[b] - jb_[b]) != 1:
        return 0.0
    ja, jb, jc = jk[a], jk[b], jk[c]
    ja2, jb2 = jb_[a], jb_[b]
    six = wigner_6j(ja, jb, jc, jb2, ja2, 1)
    return float(np.sqrt((ja + 1) * (ja2 + 1) * (jb + 1) * (jb2 + 1))) * six * six


def h_magnetic_plaquette(basis: ThetaBasis, pair: tuple[int, int]) -> np.ndarray:
    if tuple(pair) not in PAIRS:
        raise ValueError(f"pair must be one of {PAIRS}, got {pair}")
    n = len(basis)
    out = np.zeros((n, n))
    for i, ket in enumerate(basis.states):
        for k in range(i + 1, n):
            v = plaquette_element(basis.states[k], ket, pair)
            if v:
                out[k, i] = v
                out[i, k] = v
    return out


def h_magnetic(basis: ThetaBasis) -> np.ndarray:
    return sum(h_magnetic_plaquette(basis, p) for p in PAIRS)


def hamiltonian(basis: ThetaBasis, c: Coupling | float) -> np.ndarray:
    if not isinstance(c, Coupling):
        c = Coupling(float(c))
    return c.g_e * h_electric(basis) - c.g_b * h_magnetic(basis)


class ThetaModel:
    """Caches the λ-independent pieces so sweeps only rescale two matrices."""

    def __init__(self, j_max: SpinLike):
        self.basis = enumerate_basis(j_max)
        self.h_e = h_electric(self.basis)
        self.h_p = {p: h_magnetic_plaquette(self.basis, p) for p in PAIRS}
        self.h_b = sum(self.h_p.values())

    @property
    def dim(self) -> int:
        return len(self.basis)

    def hamiltonian(self, lam: float) -> np.ndarray:
        c = Coupling(lam)
        return c.g_e * self.h_e - c.g_b * self.h_b


def _check_symmetric(H: np.ndarray) -> np.ndarray:
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("matrix must be square")
    scale = max(1.0, float(np.max(np.abs(H)))) if H.size else 1.0
    if not np.allclose(H, H.T, atol=1e-12 * scale, rtol=0):
        raise ValueError("matrix is not symmetric")
    return H


def _fix_sign(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v)))
    return v if v[k] >= 0 else -v


def spectrum(H: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh(_check_symmetric(H))


def ground_state(H: np.ndarray) -> tuple[float, np.ndarray]:
    w, v = np.linalg.eigh(_check_symmetric(H))
    return float(w[0]), _fix_sign(v[:, 0])


def gap(H: np.ndarray) -> float:
    w = spectrum(H)
    if len(w) < 2:
        return 0.0
    return max(0.0, float(w[1] - w[0]))


def correlator(omega: np.ndarray, basis_or_model, pair: tuple[int, int] = (1, 2)) -> float:
    """Half the plaquette expectation value in the normalized state ``omega``."""
    omega = np.asarray(omega, dtype=float)
    if abs(np.linalg.norm(omega) - 1.0) > 1e-8:
        raise ValueError("state is not normalized")
    if isinstance(basis_or_model, ThetaModel):
        hp = basis_or_model.h_p[tuple(pair)]
    else:
        hp = h_magnetic_plaquette(basis_or_model, pair)
    return 0.5 * float(omega @ hp @ omega)


_MODELS: dict[int, ThetaModel] = {}


def model_for(j_max: SpinLike) -> ThetaModel:
    t = tw(j_max)
    if t not in _MODELS:
        _MODELS[t] = ThetaModel(t)
    return _MODELS[t]


def exact_energy(lam: float, j_max: SpinLike) -> float:
    return ground_state(model_for(j_max).hamiltonian(lam))[0]


def cutoff_band(lam: float, j_ref: SpinLike, j_conv: SpinLike = 8) -> tuple[float, float]:
    """Reference energy and the spread to a larger cutoff (default j=4)."""
    if tw(j_conv) <= tw(j_ref):
        raise ValueError("j_conv must exceed j_ref")
    e_ref = exact_energy(lam, j_ref)
    return e_ref, abs(e_ref - exact_energy(lam, j_conv))


def lambda_grid(n: int = 21) -> np.ndarray:
    return np.linspace(0.0, 1.0, n)


@dataclass
class SweepRow:
    lam: float
    jmax: str
    E0: float
    E1: float
    gap: float
    cP: float
    band_width: float


def sweep(j_max: SpinLike, lambdas: Iterable[float], j_conv: SpinLike = 8,
          pair: tuple[int, int] = (1, 2)) -> list[SweepRow]:
    m = model_for(j_max)
    conv = model_for(j_conv) if tw(j_conv) > tw(j_max) else None
    rows = []
    for lam in lambdas:
        w, v = np.linalg.eigh(m.hamiltonian(lam))
        omega = _fix_sign(v[:, 0])
        band = 0.0
        if conv is not None:
            band = abs(w[0] - ground_state(conv.hamiltonian(lam))[0])
        e1 = float(w[1]) if len(w) > 1 else float(w[0])
        rows.append(SweepRow(float(lam), str(HalfInt(m.basis.j_max)), float(w[0]), e1,
                             e1 - float(w[0]), correlator(omega, m, pair), float(band)))
    return rows


def rows_to_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([f"{r.lam:.6g}", r.jmax, f"{r.E0:.12g}", f"{r.E1:.12g}",
                    f"{r.gap:.12g}", f"{r.cP:.12g}", f"{r.band_width:.12g}"])
    return buf.getvalue()
