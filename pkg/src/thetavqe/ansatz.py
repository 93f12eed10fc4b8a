"""Ansatz families: gauge-preserving SSP circuits and the hardware-efficient HEA.

Qubits 0..5 hold the three spin registers (see :mod:`thetavqe.encoding`);
ancillas follow from qubit 6.  Block functions append gates to a circuit
in place and return the slots they allocated.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .circuit import Circuit
from .encoding import RegisterLayout

LAYOUT = RegisterLayout()
SSP_BUDGET = {2: (6, 1), 3: (10, 1), 4: (16, 2)}  # params, ancillas
HEA_SIZES = (18, 24, 30, 36, 42)


def msb(k: int) -> int:
    return LAYOUT.msb(k)


def flag(k: int) -> int:
    return LAYOUT.flag(k)


# ----------------------------------------------------------------- blocks

def raising_block(c: Circuit, k: int, control: int | None = None, phased: bool = False) -> None:
    """Cyclic increment 00→01→10→11→00 of register k.

    Without a control this is CNOT(flag→msb) then X(flag); with a control
    qubit the two gates become a Toffoli-class gate and a CNOT.
    """
    if control is None:
        c.add("CNOT", flag(k), msb(k))
        c.add("X", flag(k))
    else:
        c.add("PTOFFOLI" if phased else "TOFFOLI", control, flag(k), msb(k))
        c.add("CNOT", control, flag(k))


def lowering_block(c: Circuit, k: int, control: int | None = None, phased: bool = False) -> None:
    """Exact inverse of :func:`raising_block`."""
    if control is None:
        c.add("X", flag(k))
        c.add("CNOT", flag(k), msb(k))
    else:
        c.add("CNOT", control, flag(k))
        c.add("PTOFFOLI" if phased else "TOFFOLI", control, flag(k), msb(k))


def controlled_raise(c: Circuit, anc: int, regs: tuple[int, int], phased: bool = True) -> int:
    """RY on the ancilla, then raise both registers in the ancilla's |1⟩ branch."""
    s = c.rot("RY", anc)
    for k in regs:
        raising_block(c, k, control=anc, phased=phased)
    return s


def initial_excitation(c: Circuit, regs: tuple[int, int]) -> int:
    """cos θ |0,0⟩ + sin θ |½,½⟩ on a pair of registers known to be empty."""
    a, b = regs
    s = c.new_slot()
    c.add("RY", flag(a), slot=s, scale=2.0)
    c.add("CNOT", flag(a), flag(b))
    return s


def _cswap(c: Circuit, ctrl: int, qa: int, qb: int, phased: bool) -> None:
    if phased:
        # CSWAP with a sign on the swap branch when both bits are set
        c.add("CNOT", qb, qa)
        c.add("PTOFFOLI", ctrl, qa, qb)
        c.add("CNOT", qb, qa)
    else:
        c.add("CSWAP", ctrl, qa, qb)


def conditional_swap(c: Circuit, anc: int, regs: tuple[int, int], phased: bool = True) -> int:
    a, b = regs
    s = c.rot("RY", anc)
    _cswap(c, anc, msb(a), msb(b), phased)
    _cswap(c, anc, flag(a), flag(b), phased)
    return s


def phase_block(c: Circuit, anc: int, qubit: int) -> int:
    """RY on the ancilla followed by CZ onto a data qubit."""
    s = c.rot("RY", anc)
    c.add("CZ", anc, qubit)
    return s


def simplified_excitation(c: Circuit, anc: int, regs: tuple[int, int]) -> int:
    """Flags |00⟩ → cos θ|00⟩ + sin θ|11⟩ via an open-controlled CCRY."""
    a, b = regs
    fa, fb = flag(a), flag(b)
    s = c.new_slot()
    c.add("X", fa)
    c.add("X", fb)
    c.add("CRY", fa, fb, anc, slot=s, scale=2.0)
    c.add("X", fa)
    c.add("X", fb)
    c.add("CNOT", anc, fa)
    c.add("CNOT", anc, fb)
    return s


def guarded_plaquette_excitation(c: Circuit, regs: tuple[int, int], guards: tuple[int, int],
                                 ctrl: int, phased: bool = True) -> int:
    """Plaquette raise that is blocked when either register sits at j = 3/2.

    Guards flag the top state of each register, the CCRY on ``ctrl`` fires
    only with both guards clear, and the guards are uncomputed before the
    controlled raises so they return to |0⟩.
    """
    a, b = regs
    ga, gb = guards
    c.add("TOFFOLI", msb(a), flag(a), ga)
    c.add("TOFFOLI", msb(b), flag(b), gb)
    s = c.new_slot()
    c.add("X", ga)
    c.add("X", gb)
    c.add("CRY", ga, gb, ctrl, slot=s)
    c.add("X", ga)
    c.add("X", gb)
    c.add("TOFFOLI", msb(a), flag(a), ga)
    c.add("TOFFOLI", msb(b), flag(b), gb)
    for k in regs:
        raising_block(c, k, control=ctrl, phased=phased)
    return s


def rz_layer(c: Circuit, qubits) -> list[int]:
    return [c.rot("RZ", q) for q in qubits]


def close_ancillas(c: Circuit, ancillas) -> None:
    for q in ancillas:
        c.add("H", q)
        c.postselect[q] = 0


# ----------------------------------------------------------------- families

def build_ssp(n: int, phased: bool = True) -> Circuit:
    """SSP2/3/4 with 6/10/16 parameters and 1/1/2 ancillas.

    The schedule opens with an ancilla-free excitation on registers (0,1),
    then alternates conditional swaps (which spread excitations over the
    three links) with controlled plaquette raises; deeper variants add
    phase blocks and one simplified excitation.  A final RZ layer on the
    half-integer flags closes the circuit.
    """
    if n not in SSP_BUDGET:
        raise ValueError(f"SSP depth must be 2, 3 or 4, got {n}")
    n_anc = SSP_BUDGET[n][1]
    anc = 6
    c = Circuit(6 + n_anc, data=tuple(range(6)), ancillas=tuple(range(6, 6 + n_anc)),
                name=f"ssp{n}")
    initial_excitation(c, (0, 1))
    conditional_swap(c, anc, (1, 2), phased)
    if n == 2:
        controlled_raise(c, anc, (0, 1), phased)
    else:
        conditional_swap(c, anc, (0, 1), phased)
        controlled_raise(c, anc, (0, 1), phased)
        conditional_swap(c, anc, (1, 2), phased)
        controlled_raise(c, anc, (0, 1), phased)
        phase_block(c, anc, msb(0))
    if n == 4:
        # the second ancilla carries the simplified excitation and the
        # phase block right after it, which keeps routing overhead down
        conditional_swap(c, anc, (0, 2), phased)
        simplified_excitation(c, 7, (0, 1))
        conditional_swap(c, anc, (1, 2), phased)
        phase_block(c, 7, msb(1))
        phase_block(c, anc, msb(2))
        phase_block(c, anc, flag(2))
    rz_layer(c, LAYOUT.flags)
    close_ancillas(c, c.ancillas)
    c.check_slots()
    return c


def build_hea(m: int, entangler: str = "CNOT") -> Circuit:
    """RY layers on the six data qubits separated by linear entangling ladders."""
    if m % 6 or m < 12:
        raise ValueError(f"HEA size must be 6(k+1) with k >= 1, got {m}")
    k = m // 6 - 1
    c = Circuit(6, name=f"hea{m}")
    for layer in range(k + 1):
        for q in range(6):
            c.rot("RY", q)
        if layer < k:
            for q in range(5):
                c.add(entangler, q, q + 1)
    return c


def build_ansatz(ansatz_id: str, phased: bool = True) -> Circuit:
    m = re.fullmatch(r"(ssp|hea)(\d+)", ansatz_id.strip().lower())
    if not m:
        raise ValueError(f"unknown ansatz id {ansatz_id!r}")
    fam, size = m.group(1), int(m.group(2))
    return build_ssp(size, phased) if fam == "ssp" else build_hea(size)


@dataclass(frozen=True)
class AnsatzSpec:
    family: str
    depth: int
    layout: RegisterLayout = LAYOUT

    @property
    def ansatz_id(self) -> str:
        return f"{self.family.lower()}{self.depth}"

    def build(self) -> Circuit:
        return build_ansatz(self.ansatz_id)


@dataclass(frozen=True)
class QubitScaling:
    hilbert: float
    spin_network: float
    dressed_site: float


def qubit_scaling_report(N: int, d: int, j_max: float) -> QubitScaling:
    """Qubit counts for N vertices in d dimensions at cutoff j_max.

    ``hilbert`` is the full Wigner-D register count N(3d log2 d_j + 2d),
    ``spin_network`` removes 3N log2 d_j and adds 3, and ``dressed_site``
    is (4d-3)/(3d) of ``hilbert`` minus (4d-3).
    """
    if N < 1 or d not in (2, 3):
        raise ValueError("need N >= 1 and d in {2, 3}")
    lb = math.log2(2 * j_max + 1)
    hilbert = N * (3 * d * lb + 2 * d)
    spin = hilbert - 3 * N * lb + 3
    dressed = (4 * d - 3) / (3 * d) * hilbert - (4 * d - 3)
    return QubitScaling(hilbert, spin, dressed)
