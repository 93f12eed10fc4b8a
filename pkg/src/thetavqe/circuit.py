"""Gate-level circuit representation and text serialization.

Statevectors are big-endian: qubit 0 is the most significant bit of the
index.  A gate's local matrix uses the same rule over the gate's own qubit
list, so for ``CNOT (c, t)`` the control is the high bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

PARAM_KINDS = {"RY", "RZ", "CRY"}
ARITY = {
    "RY": 1, "RZ": 1, "H": 1, "X": 1, "MEASURE": 1,
    "CNOT": 2, "CZ": 2, "SWAP": 2,
    "TOFFOLI": 3, "PTOFFOLI": 3, "CSWAP": 3,
}
# CRY takes one or two controls followed by the target
KINDS = set(ARITY) | {"CRY"}
NATIVE_KINDS = {"RZ", "RY", "X", "CZ", "MEASURE"}


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    slot: Optional[int] = None
    theta: Optional[float] = None
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown gate kind {self.kind}")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"repeated qubit in {self.kind}{self.qubits}")
        if self.kind == "CRY":
            if len(self.qubits) not in (2, 3):
                raise ValueError("CRY needs one or two controls and a target")
        elif len(self.qubits) != ARITY[self.kind]:
            raise ValueError(f"{self.kind} acts on {ARITY[self.kind]} qubits")
        if self.kind in PARAM_KINDS:
            if (self.slot is None) == (self.theta is None):
                raise ValueError(f"{self.kind} needs exactly one of slot / theta")
        elif self.slot is not None or self.theta is not None:
            raise ValueError(f"{self.kind} takes no angle")

    @property
    def is_param(self) -> bool:
        return self.slot is not None

    @property
    def n_qubits(self) -> int:
        return len(self.qubits)

    def angle(self, params: Sequence[float]) -> float:
        if self.slot is not None:
            return self.scale * float(params[self.slot])
        return float(self.theta) if self.theta is not None else 0.0

    def remap(self, mapping) -> "Gate":
        return replace(self, qubits=tuple(mapping[q] for q in self.qubits))

    def matrix(self, angle: float = 0.0) -> np.ndarray:
        """Local unitary (big-endian over ``self.qubits``)."""
        return gate_matrix(self.kind, angle, len(self.qubits))

    def to_line(self) -> str:
        s = f"{self.kind} {','.join(map(str, self.qubits))}"
        if self.slot is not None:
            s += f" slot={self.slot}"
            if self.scale != 1.0:
                s += f" scale={self.scale!r}"
        elif self.theta is not None:
            s += f" theta={self.theta!r}"
        return s

    @classmethod
    def from_line(cls, line: str) -> "Gate":
        parts = line.split()
        if len(parts) < 2:
            raise ValueError(f"malformed gate line {line!r}")
        kind = parts[0].upper()
        qubits = tuple(int(q) for q in parts[1].split(","))
        kw: dict = {}
        for tok in parts[2:]:
            key, _, val = tok.partition("=")
            if key == "slot":
                kw["slot"] = int(val)
            elif key == "theta":
                kw["theta"] = float(val)
            elif key == "scale":
                kw["scale"] = float(val)
            else:
                raise ValueError(f"unknown token {tok!r}")
        return cls(kind, qubits, **kw)


def _ry(t):
    c, s = np.cos(t / 2), np.sin(t / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _rz(t):
    return np.diag([np.exp(-0.5j * t), np.exp(0.5j * t)])


def _controlled(u: np.ndarray, n_ctrl: int) -> np.ndarray:
    d = u.shape[0]
    out = np.eye(d * 2**n_ctrl, dtype=complex)
    out[-d:, -d:] = u
    return out


_X = np.array([[0, 1], [1, 0]], dtype=complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def gate_matrix(kind: str, angle: float = 0.0, n_qubits: int | None = None) -> np.ndarray:
    if kind == "RY":
        return _ry(angle)
    if kind == "RZ":
        return _rz(angle)
    if kind == "H":
        return _H.copy()
    if kind == "X":
        return _X.copy()
    if kind == "CNOT":
        return _controlled(_X, 1)
    if kind == "CZ":
        return np.diag([1, 1, 1, -1]).astype(complex)
    if kind == "SWAP":
        return np.eye(4, dtype=complex)[[0, 2, 1, 3]]
    if kind == "TOFFOLI":
        return _controlled(_X, 2)
    if kind == "PTOFFOLI":
        u = _controlled(_X, 2)
        u[:, 0b101] *= -1  # −1 on |c1=1, c2=0, t=1⟩
        return u
    if kind == "CSWAP":
        return _controlled(np.eye(4, dtype=complex)[[0, 2, 1, 3]], 1)
    if kind == "CRY":
        return _controlled(_ry(angle), (n_qubits or 2) - 1)
    raise ValueError(f"no matrix for {kind}")


@dataclass
class Circuit:
    """Ordered gate list over ``n_qubits`` with dense parameter slots.

    ``postselect`` maps ancilla qubits to the bit they must be measured in.
    """

    n_qubits: int
    data: tuple[int, ...] = ()
    ancillas: tuple[int, ...] = ()
    gates: list[Gate] = field(default_factory=list)
    n_slots: int = 0
    postselect: dict[int, int] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        if not self.data and not self.ancillas:
            self.data = tuple(range(self.n_qubits))

    # -- construction helpers
    def new_slot(self) -> int:
        self.n_slots += 1
        return self.n_slots - 1

    def add(self, kind: str, *qubits: int, slot: int | None = None,
            theta: float | None = None, scale: float = 1.0) -> Gate:
        g = Gate(kind, tuple(qubits), slot=slot, theta=theta, scale=scale)
        self.append(g)
        return g

    def append(self, g: Gate) -> None:
        if any(q < 0 or q >= self.n_qubits for q in g.qubits):
            raise ValueError(f"qubit out of range in {g.to_line()}")
        if g.slot is not None and g.slot >= self.n_slots:
            raise ValueError(f"slot {g.slot} not allocated")
        self.gates.append(g)

    def extend(self, gates: Iterable[Gate]) -> None:
        for g in gates:
            self.append(g)

    def rot(self, kind: str, *qubits: int) -> int:
        """Append a parameterized gate on a fresh slot and return the slot."""
        s = self.new_slot()
        self.add(kind, *qubits, slot=s)
        return s

    def copy(self, gates: list[Gate] | None = None) -> "Circuit":
        return Circuit(self.n_qubits, self.data, self.ancillas,
                       list(self.gates if gates is None else gates),
                       self.n_slots, dict(self.postselect), self.name)

    # -- inspection
    def __len__(self) -> int:
        return len(self.gates)

    def count(self, arity: int | None = None, kinds: Iterable[str] | None = None) -> int:
        ks = set(kinds) if kinds is not None else None
        return sum(
            1 for g in self.gates
            if g.kind != "MEASURE"
            and (arity is None or g.n_qubits == arity)
            and (ks is None or g.kind in ks)
        )

    @property
    def n_1q(self) -> int:
        return self.count(1)

    @property
    def n_2q(self) -> int:
        return self.count(2)

    def check_slots(self) -> None:
        used = {g.slot for g in self.gates if g.slot is not None}
        if used != set(range(self.n_slots)):
            raise ValueError("parameter slots are not dense")

    def is_native(self) -> bool:
        return all(g.kind in NATIVE_KINDS for g in self.gates)

    # -- text form
    def to_text(self) -> str:
        head = [
            f"# qubits={self.n_qubits} slots={self.n_slots}",
            f"# data={','.join(map(str, self.data))}",
            f"# ancillas={','.join(map(str, self.ancillas))}",
            f"# postselect={','.join(f'{q}:{b}' for q, b in sorted(self.postselect.items()))}",
        ]
        if self.name:
            head.append(f"# name={self.name}")
        return "\n".join(head + [g.to_line() for g in self.gates]) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Circuit":
        meta: dict[str, str] = {}
        gates = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    k, _, v = tok.partition("=")
                    meta[k] = v
                continue
            gates.append(Gate.from_line(line))

        def ints(v: str) -> tuple[int, ...]:
            return tuple(int(x) for x in v.split(",") if x)

        n = int(meta.get("qubits", 1 + max((max(g.qubits) for g in gates), default=-1)))
        slots = int(meta.get("slots", 1 + max((g.slot for g in gates if g.slot is not None), default=-1)))
        post = {}
        for item in meta.get("postselect", "").split(","):
            if item:
                q, b = item.split(":")
                post[int(q)] = int(b)
        c = cls(n, ints(meta.get("data", "")), ints(meta.get("ancillas", "")), [], slots, post,
                meta.get("name", ""))
        c.extend(gates)
        return c


def embed_gate(u: np.ndarray, qubits: Sequence[int], n: int) -> np.ndarray:
    """Full 2^n matrix of a local gate (dense oracle; small n only)."""
    k = len(qubits)
    rest = [q for q in range(n) if q not in qubits]
    U = u.reshape((2,) * (2 * k))
    full = np.eye(2 ** (n - k), dtype=complex).reshape((2,) * (2 * (n - k)))
    T = np.multiply.outer(U, full)  # axes: out_q, in_q, out_rest, in_rest
    order_out = list(qubits) + rest
    # map tensor axes to (out_0..out_{n-1}, in_0..in_{n-1})
    perm = [0] * (2 * n)
    for pos, q in enumerate(order_out):
        src_out = pos if pos < k else 2 * k + (pos - k)
        src_in = pos + k if pos < k else 2 * k + (n - k) + (pos - k)
        perm[q] = src_out
        perm[n + q] = src_in
    return np.transpose(T, perm).reshape(2**n, 2**n)


def circuit_unitary(c: Circuit, params: Sequence[float] = ()) -> np.ndarray:
    """Dense unitary by explicit matrix products (reference oracle)."""
    U = np.eye(2**c.n_qubits, dtype=complex)
    for g in c.gates:
        if g.kind == "MEASURE":
            raise ValueError("measurement has no unitary")
        U = embed_gate(g.matrix(g.angle(params)), g.qubits, c.n_qubits) @ U
    return U
