"""Lowering to the native set {RZ, RY, X, CZ} and greedy SWAP routing."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .circuit import Circuit, Gate, NATIVE_KINDS

PI = np.pi


# ----------------------------------------------------------------- lowering

def _g(kind, *qs, **kw) -> Gate:
    return Gate(kind, tuple(qs), **kw)


def _h(q) -> list[Gate]:
    # H = RY(π/2) · RZ(π) up to a global phase
    return [_g("RZ", q, theta=PI), _g("RY", q, theta=PI / 2)]


def _cnot(c, t) -> list[Gate]:
    return [*_h(t), _g("CZ", c, t), *_h(t)]


def lower_cnot(c: int, t: int) -> list[Gate]:
    """CNOT as H·CZ·H on the target, with the Hadamards left unexpanded."""
    return [_g("H", t), _g("CZ", c, t), _g("H", t)]


def _toffoli(c1, c2, t) -> list[Gate]:
    T, Td = PI / 4, -PI / 4
    seq = [*_h(t), ("CX", c2, t), _g("RZ", t, theta=Td), ("CX", c1, t), _g("RZ", t, theta=T),
           ("CX", c2, t), _g("RZ", t, theta=Td), ("CX", c1, t), _g("RZ", c2, theta=T),
           _g("RZ", t, theta=T), *_h(t), ("CX", c1, c2), _g("RZ", c1, theta=T),
           _g("RZ", c2, theta=Td), ("CX", c1, c2)]
    return _expand(seq)


def _ptoffoli(c1, c2, t) -> list[Gate]:
    q = PI / 4
    seq = [_g("RY", t, theta=q), ("CX", c2, t), _g("RY", t, theta=q), ("CX", c1, t),
           _g("RY", t, theta=-q), ("CX", c2, t), _g("RY", t, theta=-q)]
    return _expand(seq)


def _expand(seq) -> list[Gate]:
    out: list[Gate] = []
    for item in seq:
        if isinstance(item, tuple):
            out.extend(_cnot(item[1], item[2]))
        else:
            out.append(item)
    return out


def _cry(g: Gate) -> list[Gate]:
    *ctrls, t = g.qubits

    def ry(frac):
        if g.slot is not None:
            return _g("RY", t, slot=g.slot, scale=g.scale * frac)
        return _g("RY", t, theta=g.theta * frac)

    if len(ctrls) == 1:
        (c,) = ctrls
        return [ry(0.5), *_cnot(c, t), ry(-0.5), *_cnot(c, t)]
    c1, c2 = ctrls
    return [ry(0.25), *_cnot(c2, t), ry(-0.25), *_cnot(c1, t),
            ry(0.25), *_cnot(c2, t), ry(-0.25), *_cnot(c1, t)]


def lower_gate(g: Gate) -> list[Gate]:
    k, q = g.kind, g.qubits
    if k in NATIVE_KINDS:
        return [g]
    if k == "H":
        return _h(q[0])
    if k == "CNOT":
        return _cnot(*q)
    if k == "SWAP":
        a, b = q
        return _cnot(a, b) + _cnot(b, a) + _cnot(a, b)
    if k == "TOFFOLI":
        return _toffoli(*q)
    if k == "PTOFFOLI":
        return _ptoffoli(*q)
    if k == "CSWAP":
        c, a, b = q
        return _cnot(b, a) + _toffoli(c, a, b) + _cnot(b, a)
    if k == "CRY":
        return _cry(g)
    raise ValueError(f"cannot lower {k}")


def decompose_to_native(c: Circuit) -> Circuit:
    out = c.copy(gates=[])
    for g in c.gates:
        out.gates.extend(lower_gate(g))
    return out


def _norm_angle(t: float) -> float:
    # single-qubit rotations by 2π are -I, a global phase
    t = (t + PI) % (2 * PI) - PI
    return 0.0 if abs(t) < 1e-12 or abs(abs(t) - 2 * PI) < 1e-12 else t


def optimize(c: Circuit) -> Circuit:
    """Peephole pass over a native circuit.

    Merges consecutive fixed-angle rotations of the same axis on a qubit,
    drops trivial rotations, cancels X·X and repeated CZ pairs, and lets RZ
    slide backwards through CZ (both diagonal).  Repeats to a fixed point.
    """
    gates = list(c.gates)
    while True:
        new = _peephole(gates)
        if len(new) == len(gates):
            gates = new
            break
        gates = new
    return c.copy(gates=gates)


def _peephole(gates: list[Gate]) -> list[Gate]:
    out: list[Gate | None] = []
    last: dict[int, int] = {}  # qubit -> index in out of the last gate touching it
    for g in gates:
        if g.kind in ("RY", "RZ") and g.theta is not None:
            th = _norm_angle(g.theta)
            if th == 0.0:
                continue
            g = Gate(g.kind, g.qubits, theta=th)
        q0 = g.qubits[0]
        if g.n_qubits == 1:
            j = last.get(q0)
            prev = out[j] if j is not None else None
            # slide a fixed RZ back through CZs to meet an earlier RZ
            if g.kind == "RZ" and g.theta is not None:
                k = j
                while k is not None and out[k] is not None and out[k].kind == "CZ":
                    k = _prev_on(out, k, q0)
                if k is not None and out[k] is not None and out[k].kind == "RZ" and out[k].theta is not None:
                    th = _norm_angle(out[k].theta + g.theta)
                    out[k] = Gate("RZ", (q0,), theta=th) if th else None
                    if out[k] is None:
                        _rebuild_last(out, last)
                    continue
            if prev is not None and prev.kind == g.kind:
                if g.kind == "X":
                    out[j] = None
                    _rebuild_last(out, last)
                    continue
                if g.kind in ("RY", "RZ") and prev.theta is not None and g.theta is not None:
                    th = _norm_angle(prev.theta + g.theta)
                    out[j] = Gate(g.kind, (q0,), theta=th) if th else None
                    if out[j] is None:
                        _rebuild_last(out, last)
                    continue
            out.append(g)
            last[q0] = len(out) - 1
            continue
        if g.kind == "CZ":
            a, b = g.qubits
            ja, jb = last.get(a), last.get(b)
            if ja is not None and ja == jb and out[ja].kind == "CZ" and set(out[ja].qubits) == {a, b}:
                out[ja] = None
                _rebuild_last(out, last)
                continue
        out.append(g)
        for q in g.qubits:
            last[q] = len(out) - 1
    return [g for g in out if g is not None]


def _prev_on(out, k, q):
    for i in range(k - 1, -1, -1):
        if out[i] is not None and q in out[i].qubits:
            return i
    return None


def _rebuild_last(out, last):
    last.clear()
    for i, g in enumerate(out):
        if g is not None:
            for q in g.qubits:
                last[q] = i


# ----------------------------------------------------------------- chip

@dataclass
class CouplingMap:
    n_qubits: int
    edges: list[tuple[int, int]]
    name: str = ""
    _dist: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.edges = sorted({tuple(sorted(map(int, e))) for e in self.edges})
        self.adj = {q: set() for q in range(self.n_qubits)}
        for a, b in self.edges:
            if a == b or not (0 <= a < self.n_qubits and 0 <= b < self.n_qubits):
                raise ValueError(f"bad edge {(a, b)}")
            self.adj[a].add(b)
            self.adj[b].add(a)
        if not self.is_connected():
            raise ValueError("coupling map is disconnected")

    def is_connected(self) -> bool:
        if self.n_qubits == 0:
            return True
        seen = {0}
        todo = [0]
        while todo:
            q = todo.pop()
            for r in self.adj[q]:
                if r not in seen:
                    seen.add(r)
                    todo.append(r)
        return len(seen) == self.n_qubits

    def adjacent(self, a: int, b: int) -> bool:
        return b in self.adj[a]

    @property
    def dist(self) -> np.ndarray:
        if self._dist is None:
            d = np.full((self.n_qubits, self.n_qubits), -1, dtype=int)
            for s in range(self.n_qubits):
                d[s, s] = 0
                dq = deque([s])
                while dq:
                    q = dq.popleft()
                    for r in self.adj[q]:
                        if d[s, r] < 0:
                            d[s, r] = d[s, q] + 1
                            dq.append(r)
            self._dist = d
        return self._dist

    def shortest_path(self, a: int, b: int) -> list[int]:
        """BFS path from a to b; neighbours are tried in increasing index."""
        prev = {a: None}
        dq = deque([a])
        while dq:
            q = dq.popleft()
            if q == b:
                break
            for r in sorted(self.adj[q]):
                if r not in prev:
                    prev[r] = q
                    dq.append(r)
        path = [b]
        while path[-1] != a:
            path.append(prev[path[-1]])
        return path[::-1]

    def to_json(self) -> str:
        return json.dumps({"name": self.name, "qubits": self.n_qubits,
                           "edges": [list(e) for e in self.edges]})

    @classmethod
    def from_json(cls, text: str) -> "CouplingMap":
        d = json.loads(text)
        return cls(int(d["qubits"]), [tuple(e) for e in d["edges"]], d.get("name", ""))

    @classmethod
    def load(cls, path: str | Path) -> "CouplingMap":
        if str(path) == "square17":
            return square17()
        p = Path(path)
        if not p.exists():
            raise FileNotFoundError(f"chip file {path} not found")
        return cls.from_json(p.read_text())


def square17() -> CouplingMap:
    """17 qubits on a rotated square lattice with 24 couplers.

    Nine qubits sit on a 3×3 grid of odd coordinates; eight connector
    qubits sit on even coordinates (four inside with four couplers each,
    four on the boundary with two).  Couplers join diagonal neighbours.
    """
    data = [(2 * i + 1, 2 * j + 1) for i in range(3) for j in range(3)]
    conn = [(2, 2), (2, 4), (4, 2), (4, 4), (0, 2), (2, 6), (6, 4), (4, 0)]
    pos = data + conn
    edges = []
    for i, (x1, y1) in enumerate(pos):
        for j in range(i + 1, len(pos)):
            x2, y2 = pos[j]
            if abs(x1 - x2) == 1 and abs(y1 - y2) == 1:
                edges.append((i, j))
    return CouplingMap(17, edges, "square17")


def linear_chip(n: int) -> CouplingMap:
    return CouplingMap(n, [(i, i + 1) for i in range(n - 1)], f"line{n}")


# ----------------------------------------------------------------- routing

@dataclass
class RoutedCircuit:
    circuit: Circuit  # over physical qubits
    initial_layout: dict[int, int]  # logical -> physical
    final_layout: dict[int, int]
    n_swaps: int

    def compact(self) -> tuple[Circuit, list[int]]:
        """Same circuit on only the physical qubits it touches.

        Returns the circuit and the list of physical qubits in new order.
        """
        used = sorted({q for g in self.circuit.gates for q in g.qubits}
                      | set(self.initial_layout.values()) | set(self.final_layout.values()))
        pos = {p: i for i, p in enumerate(used)}
        c = self.circuit
        out = Circuit(len(used), tuple(pos[q] for q in c.data), tuple(pos[q] for q in c.ancillas),
                      [g.remap(pos) for g in c.gates], c.n_slots,
                      {pos[q]: b for q, b in c.postselect.items()}, c.name)
        return out, used


def interaction_weights(c: Circuit) -> np.ndarray:
    w = np.zeros((c.n_qubits, c.n_qubits))
    for g in c.gates:
        qs = g.qubits
        for i in range(len(qs)):
            for j in range(i + 1, len(qs)):
                w[qs[i], qs[j]] += 1
                w[qs[j], qs[i]] += 1
    return w


def choose_layout(c: Circuit, chip: CouplingMap, first: int | None = None) -> dict[int, int]:
    """Greedy placement by interaction weight, then pairwise-exchange descent
    on Σ w_ij · dist(p_i, p_j).

    The busiest logical qubit goes to ``first`` (default: the lowest-index
    node of highest degree); every later qubit takes the free node closest
    to its already-placed partners.  Deterministic.
    """
    n = c.n_qubits
    if n > chip.n_qubits:
        raise ValueError("circuit has more qubits than the chip")
    w = interaction_weights(c)
    D = chip.dist
    order = sorted(range(n), key=lambda q: (-w[q].sum(), q))
    layout: dict[int, int] = {}
    free = set(range(chip.n_qubits))
    for q in order:
        placed = list(layout)
        if not placed:
            best = first if first is not None else min(free, key=lambda p: (-len(chip.adj[p]), p))
        else:
            best = min(free, key=lambda p: (sum(w[q, r] * D[p, layout[r]] for r in placed), p))
        layout[q] = best
        free.discard(best)

    def cost(lay):
        return sum(w[i, j] * D[lay[i], lay[j]] for i in range(n) for j in range(i + 1, n) if w[i, j])

    cur = cost(layout)
    improved = True
    while improved:
        improved = False
        for i in range(n):
            # exchange with another logical qubit or move to a free node
            options = [("swap", j) for j in range(n) if j != i] + [("move", p) for p in sorted(free)]
            for kind, o in options:
                trial = dict(layout)
                if kind == "swap":
                    trial[i], trial[o] = layout[o], layout[i]
                else:
                    trial[i] = o
                tc = cost(trial)
                if tc < cur - 1e-12:
                    if kind == "move":
                        free.add(layout[i])
                        free.discard(o)
                    layout, cur, improved = trial, tc, True
    return layout


def route(c: Circuit, chip: CouplingMap, initial_layout: dict[int, int] | None = None,
          lookahead: int = 20, decay: float = 0.8) -> RoutedCircuit:
    """Insert SWAPs so every 2-qubit gate acts on a coupler.

    For a distant pair the SWAPs run along the BFS shortest path between
    the two qubits; the split (how many steps each end walks towards the
    other) is picked by the summed, decayed distance of the next
    ``lookahead`` two-qubit gates, ties going to the first qubit walking.
    SWAPs are emitted already lowered.
    """
    if any(g.n_qubits > 2 for g in c.gates):
        raise ValueError("route expects a circuit lowered to 1- and 2-qubit gates")
    if c.n_qubits > chip.n_qubits:
        raise ValueError("layout infeasible: more logical than physical qubits")
    layout = dict(initial_layout) if initial_layout is not None else choose_layout(c, chip)
    if sorted(layout) != list(range(c.n_qubits)) or len(set(layout.values())) != len(layout):
        raise ValueError("initial layout must map every logical qubit to a distinct physical qubit")
    init = dict(layout)
    phys_of = dict(layout)
    log_at = {p: q for q, p in phys_of.items()}
    D = chip.dist
    two_q = [i for i, g in enumerate(c.gates) if g.n_qubits == 2]
    out: list[Gate] = []
    n_swaps = 0

    def do_swap(u, v):
        lu, lv = log_at.pop(u, None), log_at.pop(v, None)
        if lu is not None:
            phys_of[lu] = v
            log_at[v] = lu
        if lv is not None:
            phys_of[lv] = u
            log_at[u] = lv

    def future_cost(pos_of, upcoming):
        return sum(decay**k * D[pos_of[x], pos_of[y]] for k, (x, y) in enumerate(upcoming))

    k2 = 0
    for i, g in enumerate(c.gates):
        if g.n_qubits == 2:
            a, b = g.qubits
            pa, pb = phys_of[a], phys_of[b]
            if not chip.adjacent(pa, pb):
                path = chip.shortest_path(pa, pb)
                n_sw = len(path) - 2
                upcoming = [c.gates[j].qubits for j in two_q[k2 + 1:k2 + 1 + lookahead]]
                best = None
                for s_a in range(n_sw, -1, -1):
                    trial = dict(phys_of)
                    tl = {p: q for q, p in trial.items()}
                    swaps = [(path[t], path[t + 1]) for t in range(s_a)]
                    swaps += [(path[-1 - t], path[-2 - t]) for t in range(n_sw - s_a)]
                    for u, v in swaps:
                        lu, lv = tl.pop(u, None), tl.pop(v, None)
                        if lu is not None:
                            trial[lu] = v
                            tl[v] = lu
                        if lv is not None:
                            trial[lv] = u
                            tl[u] = lv
                    cost = future_cost(trial, upcoming)
                    if best is None or cost < best[0] - 1e-12:
                        best = (cost, swaps)
                for u, v in best[1]:
                    out.extend(lower_gate(Gate("SWAP", (u, v))))
                    n_swaps += 1
                    do_swap(u, v)
            k2 += 1
        out.append(g.remap(phys_of))
    rc = Circuit(chip.n_qubits, tuple(phys_of[q] for q in c.data),
                 tuple(phys_of[q] for q in c.ancillas), out, c.n_slots,
                 {phys_of[q]: b for q, b in c.postselect.items()}, c.name)
    return RoutedCircuit(rc, init, dict(phys_of), n_swaps)


LOOKAHEADS = (5, 10, 20, 40)
DECAYS = (0.5, 0.8, 0.95)


def transpile(c: Circuit, chip: CouplingMap, initial_layout: dict[int, int] | None = None,
              search: bool = True) -> RoutedCircuit:
    """Lower, route, and peephole-optimize a logical circuit.

    Without an explicit layout the router is tried from every start node of
    the greedy placement and over a small grid of lookahead settings; the
    result with the fewest SWAPs wins (ties keep the first found).
    """
    native = decompose_to_native(c)
    if initial_layout is not None or not search:
        routed = route(native, chip, initial_layout)
    else:
        routed = None
        seen = []
        for first in range(chip.n_qubits):
            lay = choose_layout(native, chip, first)
            if lay in seen:
                continue
            seen.append(lay)
            for la in LOOKAHEADS:
                for dc in DECAYS:
                    r = route(native, chip, lay, lookahead=la, decay=dc)
                    if routed is None or r.n_swaps < routed.n_swaps:
                        routed = r
    routed.circuit = optimize(routed.circuit)
    return routed


def check_on_edges(c: Circuit, chip: CouplingMap) -> bool:
    return all(chip.adjacent(*g.qubits) for g in c.gates if g.n_qubits == 2)


@dataclass
class GateStats:
    n_1q: int
    n_2q: int
    n_swaps: int
    depth: int


def depth(c: Circuit) -> int:
    level = [0] * c.n_qubits
    for g in c.gates:
        d = 1 + max(level[q] for q in g.qubits)
        for q in g.qubits:
            level[q] = d
    return max(level, default=0)


def stats(r: RoutedCircuit) -> GateStats:
    return GateStats(r.circuit.n_1q, r.circuit.n_2q, r.n_swaps, depth(r.circuit))


def layout_state_map(n_log: int, layout: dict[int, int], used: Sequence[int]) -> np.ndarray:
    """Index in the compacted physical space for every logical basis index."""
    pos = {p: i for i, p in enumerate(used)}
    m = len(used)
    idx = np.arange(1 << n_log)
    out = np.zeros(1 << n_log, dtype=int)
    for q in range(n_log):
        bit = (idx >> (n_log - 1 - q)) & 1
        out |= bit << (m - 1 - pos[layout[q]])
    return out
