"""Powell's conjugate-direction method with Brent line searches.

The optimizer is written as a generator: it yields the next point it wants
evaluated and receives the value through ``send``.  This lets
:func:`minimize_many` advance any number of independent runs in lockstep
and hand their requests to a vectorized objective in one batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Generator, Sequence

import numpy as np

GOLD = 1.618034
CGOLD = 0.3819660
GLIMIT = 110.0
TINY = 1e-21
ZEPS = 1e-11

Ask = Generator[np.ndarray, float, tuple]


@dataclass
class PowellConfig:
    ftol: float = 1e-8
    xtol: float = 1e-4
    max_evals: int = 20000
    max_iter: int = 1000


@dataclass
class PowellResult:
    x: np.ndarray
    fun: float
    n_evals: int
    converged: bool
    history: list[float] = field(default_factory=list)


def _bracket(ax: float, bx: float, fa: float, fb: float, max_steps: int = 60):
    """Downhill bracketing along a line (golden steps + parabolic jumps)."""
    if fb > fa:
        ax, bx, fa, fb = bx, ax, fb, fa
    cx = bx + GOLD * (bx - ax)
    fc = yield cx
    steps = 0
    while fb > fc and steps < max_steps:
        steps += 1
        r = (bx - ax) * (fb - fc)
        q = (bx - cx) * (fb - fa)
        denom = 2.0 * math.copysign(max(abs(q - r), TINY), q - r)
        u = bx - ((bx - cx) * q - (bx - ax) * r) / denom
        ulim = bx + GLIMIT * (cx - bx)
        if (bx - u) * (u - cx) > 0.0:
            fu = yield u
            if fu < fc:
                return bx, u, cx, fb, fu, fc
            if fu > fb:
                return ax, bx, u, fa, fb, fu
            u = cx + GOLD * (cx - bx)
            fu = yield u
        elif (cx - u) * (u - ulim) > 0.0:
            fu = yield u
            if fu < fc:
                bx, cx, u = cx, u, u + GOLD * (u - cx)
                fb, fc = fc, fu
                fu = yield u
        elif (u - ulim) * (ulim - cx) >= 0.0:
            u = ulim
            fu = yield u
        else:
            u = cx + GOLD * (cx - bx)
            fu = yield u
        ax, bx, cx = bx, cx, u
        fa, fb, fc = fb, fc, fu
    return ax, bx, cx, fa, fb, fc


def _brent(ax, bx, cx, fbx, tol, max_iter=500):
    """Brent's parabolic/golden minimization inside a bracket."""
    a, b = min(ax, cx), max(ax, cx)
    x = w = v = bx
    fx = fw = fv = fbx
    d = e = 0.0
    for _ in range(max_iter):
        xm = 0.5 * (a + b)
        tol1 = tol * abs(x) + ZEPS
        tol2 = 2.0 * tol1
        if abs(x - xm) <= tol2 - 0.5 * (b - a):
            break
        if abs(e) > tol1:
            r = (x - w) * (fx - fv)
            q = (x - v) * (fx - fw)
            p = (x - v) * q - (x - w) * r
            q = 2.0 * (q - r)
            if q > 0.0:
                p = -p
            q = abs(q)
            etemp, e = e, d
            if abs(p) >= abs(0.5 * q * etemp) or p <= q * (a - x) or p >= q * (b - x):
                e = (a - x) if x >= xm else (b - x)
                d = CGOLD * e
            else:
                d = p / q
                u = x + d
                if u - a < tol2 or b - u < tol2:
                    d = math.copysign(tol1, xm - x)
        else:
            e = (a - x) if x >= xm else (b - x)
            d = CGOLD * e
        u = x + d if abs(d) >= tol1 else x + math.copysign(tol1, d)
        fu = yield u
        if fu <= fx:
            if u >= x:
                a = x
            else:
                b = x
            v, w, x = w, x, u
            fv, fw, fx = fw, fx, fu
        else:
            if u < x:
                a = u
            else:
                b = u
            if fu <= fw or w == x:
                v, w = w, u
                fv, fw = fw, fu
            elif fu <= fv or v == x or v == w:
                v, fv = u, fu
    return x, fx


def _line(x: np.ndarray, d: np.ndarray, fx: float, tol: float):
    """Minimize along x + t d, starting from the known value at t = 0."""
    f1 = yield x + d
    ax, bx, cx, fa, fb, fc = yield from _map(_bracket(0.0, 1.0, fx, f1), x, d)
    # the bracket's middle point is the best value seen so far
    t, ft = yield from _map(_brent(ax, bx, cx, fb, tol), x, d)
    if ft > fx:  # never step uphill
        return x, fx, np.zeros_like(d)
    return x + t * d, ft, t * d


def _map(gen, x, d):
    """Adapt a scalar line generator to yield full points."""
    try:
        t = next(gen)
        while True:
            f = yield x + t * d
            t = gen.send(f)
    except StopIteration as stop:
        return stop.value


def powell_steps(x0: Sequence[float], cfg: PowellConfig = PowellConfig()) -> Ask:
    """Generator form of Powell's method; returns (x, f, converged)."""
    x = np.array(x0, dtype=float)
    n = len(x)
    fval = yield x.copy()
    if n == 0:
        return x, fval, True
    direc = np.eye(n)
    x1 = x.copy()
    tol = cfg.xtol * 100
    for _ in range(cfg.max_iter):
        fx = fval
        bigind, delta = 0, 0.0
        for i in range(n):
            fx2 = fval
            x, fval, step = yield from _line(x, direc[i], fval, tol)
            if fx2 - fval > delta:
                delta, bigind = fx2 - fval, i
        if 2.0 * (fx - fval) <= cfg.ftol * (abs(fx) + abs(fval)) + 1e-20:
            return x, fval, True
        direc1 = x - x1
        x1 = x.copy()
        x2 = x + direc1
        fx2 = yield x2
        if fx > fx2:
            t = 2.0 * (fx + fx2 - 2.0 * fval)
            temp = fx - fval - delta
            t *= temp * temp
            temp = fx - fx2
            t -= delta * temp * temp
            if t < 0.0:
                x, fval, step = yield from _line(x, direc1, fval, tol)
                if np.any(step):
                    direc[bigind] = direc[-1]
                    direc[-1] = step
    return x, fval, False


class _Run:
    def __init__(self, x0, cfg):
        self.gen = powell_steps(x0, cfg)
        self.cfg = cfg
        self.pending = next(self.gen)
        self.n_evals = 0
        self.best_x = np.array(x0, dtype=float)
        self.best_f = math.inf
        self.history: list[float] = []
        self.result: PowellResult | None = None

    def tell(self, f: float) -> None:
        f = float(f)
        self.n_evals += 1
        if not math.isfinite(f):
            f = 1e300
        if f < self.best_f:
            self.best_f, self.best_x = f, self.pending.copy()
        self.history.append(self.best_f)
        if self.n_evals >= self.cfg.max_evals:
            self.gen.close()
            self.result = PowellResult(self.best_x, self.best_f, self.n_evals, False, self.history)
            return
        try:
            self.pending = self.gen.send(f)
        except StopIteration as stop:
            x, fx, conv = stop.value
            # report the best point ever evaluated (identical in exact arithmetic)
            self.result = PowellResult(self.best_x, self.best_f, self.n_evals, conv, self.history)


def minimize_many(fbatch: Callable[..., np.ndarray], x0s: Sequence[Sequence[float]],
                  cfg: PowellConfig = PowellConfig(), indexed: bool = False) -> list[PowellResult]:
    """Run one Powell instance per start, evaluating all requests in batches.

    ``fbatch`` maps an (m, k) array of points to m values.  With
    ``indexed=True`` it also receives the run index of every row, so runs
    can carry different objectives.
    """
    runs = [_Run(x0, cfg) for x0 in x0s]
    active = list(range(len(runs)))
    while active:
        X = np.stack([runs[i].pending for i in active])
        F = fbatch(X, np.array(active)) if indexed else fbatch(X)
        F = np.asarray(F, dtype=float).reshape(-1)
        for i, f in zip(active, F):
            runs[i].tell(f)
        active = [i for i in active if runs[i].result is None]
    return [r.result for r in runs]


def powell_minimize(f: Callable[[np.ndarray], float], x0: Sequence[float],
                    cfg: PowellConfig = PowellConfig()) -> PowellResult:
    """Single-start convenience wrapper around :func:`minimize_many`."""
    return minimize_many(lambda X: np.array([f(x) for x in X]), [x0], cfg)[0]
