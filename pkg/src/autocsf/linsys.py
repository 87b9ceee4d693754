"""Sparse GF(2) systems with 3 or 4 variables per equation.

Solving runs in three stages:

1. hypergraph peeling removes every equation that owns a degree-1
   variable (linear time, back-substituted last);
2. lazy Gaussian elimination on the remaining 2-core turns most core
   variables into "solved" variables expressed over a small set of
   "active" ones;
3. dense Gauss-Jordan elimination over word-packed rows solves the active
   variables.

Free variables are zero-filled, so the output is a pure function of the
system.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numba as nb
import numpy as np


class UnsolvableError(Exception):
    """The system has an inconsistent dependent core; retry with a new seed."""


@dataclass(frozen=True)
class Gf2System:
    """``equations[e]`` lists the variables XORed in equation ``e``.

    Entries equal to ``-1`` are unused slots, which lets callers express
    equations whose duplicate variables cancelled.
    """

    num_vars: int
    equations: np.ndarray
    rhs: np.ndarray
    seed: int = 0

    def __post_init__(self):
        eqs = np.ascontiguousarray(self.equations, dtype=np.int64)
        if eqs.ndim != 2:
            eqs = eqs.reshape(-1, 3)
        rhs = np.ascontiguousarray(self.rhs, dtype=np.uint8).reshape(-1)
        if eqs.shape[0] != rhs.shape[0]:
            raise ValueError("equations and rhs disagree on the equation count")
        if eqs.size and (eqs.max() >= self.num_vars or eqs.min() < -1):
            raise ValueError("variable index out of range")
        if np.any(rhs > 1):
            raise ValueError("rhs entries must be bits")
        object.__setattr__(self, "equations", eqs)
        object.__setattr__(self, "rhs", rhs)

    @property
    def num_eqs(self) -> int:
        return self.equations.shape[0]


@dataclass(frozen=True)
class Gf2Solution:
    bits: np.ndarray
    peeled: int = 0
    core_equations: int = 0
    active_variables: int = 0


# -- kernels ---------------------------------------------------------------


@nb.njit(cache=True)
def _normalize(eqs):
    """Cancel repeated variables within each equation (x ^ x = 0)."""
    m, r = eqs.shape
    out = eqs.copy()
    for e in range(m):
        for t in range(r):
            v = out[e, t]
            if v < 0:
                continue
            for u in range(t + 1, r):
                if out[e, u] == v:
                    out[e, t] = -1
                    out[e, u] = -1
                    break
    return out


@nb.njit(cache=True)
def peel(eqs, num_vars):
    """Peel degree-1 variables.

    Returns ``(order_eq, order_var, removed)``: equation ``order_eq[i]`` was
    peeled through variable ``order_var[i]``.  Back-substitution must walk
    the order in reverse.
    """
    m, r = eqs.shape
    deg = np.zeros(num_vars, np.int64)
    acc = np.zeros(num_vars, np.int64)
    for e in range(m):
        for t in range(r):
            v = eqs[e, t]
            if v >= 0:
                deg[v] += 1
                acc[v] ^= e
    stack = np.empty(num_vars + 1, np.int64)
    top = 0
    for v in range(num_vars):
        if deg[v] == 1:
            stack[top] = v
            top += 1
    order_eq = np.empty(m, np.int64)
    order_var = np.empty(m, np.int64)
    removed = np.zeros(m, np.bool_)
    k = 0
    while top > 0:
        top -= 1
        v = stack[top]
        if deg[v] != 1:
            continue
        e = acc[v]
        order_eq[k] = e
        order_var[k] = v
        k += 1
        removed[e] = True
        for t in range(r):
            u = eqs[e, t]
            if u >= 0:
                deg[u] -= 1
                acc[u] ^= e
                if deg[u] == 1:
                    stack[top] = u
                    top += 1
    return order_eq[:k], order_var[:k], removed


@nb.njit(inline="always")
def _parity64(x):
    x ^= x >> np.uint64(32)
    x ^= x >> np.uint64(16)
    x ^= x >> np.uint64(8)
    x ^= x >> np.uint64(4)
    x ^= x >> np.uint64(2)
    x ^= x >> np.uint64(1)
    return np.uint8(x & np.uint64(1))


@nb.njit(cache=True)
def _dense_solve(rows, rhs, ncols):
    """Gauss-Jordan on word-packed rows; returns (ok, packed solution)."""
    nrows, words = rows.shape
    sol = np.zeros(words, np.uint64)
    row = 0
    pivot_row = np.full(ncols, -1, np.int64)
    for col in range(ncols):
        wi = col >> 6
        bit = np.uint64(1) << np.uint64(col & 63)
        p = -1
        for i in range(row, nrows):
            if rows[i, wi] & bit:
                p = i
                break
        if p < 0:
            continue
        if p != row:
            for w in range(wi, words):
                tmp = rows[p, w]
                rows[p, w] = rows[row, w]
                rows[row, w] = tmp
            tb = rhs[p]
            rhs[p] = rhs[row]
            rhs[row] = tb
        for i in range(nrows):
            if i != row and (rows[i, wi] & bit):
                for w in range(wi, words):
                    rows[i, w] ^= rows[row, w]
                rhs[i] ^= rhs[row]
        pivot_row[col] = row
        row += 1
        if row == nrows:
            break
    for i in range(row, nrows):
        if rhs[i]:
            return False, sol
    for col in range(ncols):
        pr = pivot_row[col]
        if pr >= 0 and rhs[pr]:
            sol[col >> 6] |= np.uint64(1) << np.uint64(col & 63)
    return True, sol


@nb.njit(cache=True)
def _lazy_gauss(eqs, rhs, num_vars, words, x):
    """Solve core equations into ``x``.

    Status: 0 solved, 1 inconsistent, 2 active-variable capacity exceeded
    (caller retries with more ``words``).  Returns ``(status, n_active)``.
    """
    mc, r = eqs.shape
    if mc == 0:
        return 0, 0
    deg = np.zeros(num_vars, np.int64)
    for e in range(mc):
        for t in range(r):
            v = eqs[e, t]
            if v >= 0:
                deg[v] += 1
    start = np.zeros(num_vars + 1, np.int64)
    for v in range(num_vars):
        start[v + 1] = start[v] + deg[v]
    fill = start[:-1].copy()
    adj = np.empty(start[num_vars], np.int64)
    idle = np.zeros(mc, np.int64)
    for e in range(mc):
        for t in range(r):
            v = eqs[e, t]
            if v >= 0:
                adj[fill[v]] = e
                fill[v] += 1
                idle[e] += 1

    state = np.zeros(num_vars, np.uint8)  # 0 idle, 1 active, 2 solved
    live = np.ones(mc, np.bool_)
    A = np.zeros((mc, words), np.uint64)
    b = rhs.copy()
    cap = words * 64
    active_var = np.empty(cap, np.int64)
    na = 0
    piv_eq = np.empty(mc, np.int64)
    piv_var = np.empty(mc, np.int64)
    npiv = 0
    dense = np.empty(mc, np.int64)
    nd = 0
    stack = np.empty(3 * mc + 1, np.int64)
    top = 0
    for e in range(mc):
        if idle[e] <= 1:
            stack[top] = e
            top += 1
    order = np.argsort(-deg, kind="mergesort")
    ptr = 0

    while True:
        if top > 0:
            top -= 1
            e = stack[top]
            if not live[e]:
                continue
            if idle[e] == 0:
                live[e] = False
                dense[nd] = e
                nd += 1
                continue
            if idle[e] > 1:
                continue
            xv = -1
            for t in range(r):
                v = eqs[e, t]
                if v >= 0 and state[v] == 0:
                    xv = v
            state[xv] = 2
            live[e] = False
            piv_eq[npiv] = e
            piv_var[npiv] = xv
            npiv += 1
            nw = (na + 63) >> 6
            for q in range(start[xv], start[xv + 1]):
                g = adj[q]
                if live[g]:
                    for w in range(nw):
                        A[g, w] ^= A[e, w]
                    b[g] ^= b[e]
                    idle[g] -= 1
                    if idle[g] <= 1:
                        stack[top] = g
                        top += 1
            continue
        while ptr < num_vars and (state[order[ptr]] != 0 or deg[order[ptr]] == 0):
            ptr += 1
        if ptr >= num_vars:
            break
        v = order[ptr]
        if na == cap:
            return 2, na
        state[v] = 1
        active_var[na] = v
        wi = na >> 6
        bit = np.uint64(1) << np.uint64(na & 63)
        na += 1
        for q in range(start[v], start[v + 1]):
            g = adj[q]
            if live[g]:
                A[g, wi] |= bit
                idle[g] -= 1
                if idle[g] <= 1:
                    stack[top] = g
                    top += 1

    nw = max((na + 63) >> 6, 1)
    rows = np.empty((nd, nw), np.uint64)
    rb = np.empty(nd, np.uint8)
    for i in range(nd):
        for w in range(nw):
            rows[i, w] = A[dense[i], w]
        rb[i] = b[dense[i]]
    ok, sol = _dense_solve(rows, rb, na)
    if not ok:
        return 1, na
    for col in range(na):
        x[active_var[col]] = np.uint8((sol[col >> 6] >> np.uint64(col & 63)) & np.uint64(1))
    for i in range(npiv):
        e = piv_eq[i]
        acc = np.uint64(0)
        for w in range(nw):
            acc ^= A[e, w] & sol[w]
        x[piv_var[i]] = b[e] ^ _parity64(acc)
    return 0, na


@nb.njit(cache=True)
def _back_substitute(eqs, rhs, order_eq, order_var, x):
    r = eqs.shape[1]
    for i in range(order_eq.shape[0] - 1, -1, -1):
        e = order_eq[i]
        v = order_var[i]
        val = rhs[e]
        for t in range(r):
            u = eqs[e, t]
            if u >= 0 and u != v:
                val ^= x[u]
        x[v] = val


@nb.njit(cache=True)
def _verify(eqs, rhs, x):
    m, r = eqs.shape
    for e in range(m):
        val = np.uint8(0)
        for t in range(r):
            u = eqs[e, t]
            if u >= 0:
                val ^= x[u]
        if val != rhs[e]:
            return False
    return True


def solve_arrays(eqs: np.ndarray, rhs: np.ndarray, num_vars: int):
    """Solve without the dataclass wrapper; raises :class:`UnsolvableError`.

    Returns ``(bits, n_peeled, n_core, n_active)``.
    """
    eqs = _normalize(np.ascontiguousarray(eqs, dtype=np.int64))
    rhs = np.ascontiguousarray(rhs, dtype=np.uint8)
    x = np.zeros(num_vars, np.uint8)
    order_eq, order_var, removed = peel(eqs, num_vars)
    core = np.flatnonzero(~removed)
    n_active = 0
    if core.size:
        core_eqs = eqs[core]
        core_rhs = rhs[core]
        words = max(1, core.size // 512 + 1)
        while True:
            status, n_active = _lazy_gauss(core_eqs, core_rhs, num_vars, words, x)
            if status == 2:
                words *= 2
                continue
            if status == 1:
                raise UnsolvableError("inconsistent core")
            break
    _back_substitute(eqs, rhs, order_eq, order_var, x)
    return x, int(order_eq.size), int(core.size), int(n_active)


def solve(sys: Gf2System) -> Gf2Solution:
    """Solve ``sys`` or raise :class:`UnsolvableError`."""
    bits, peeled, core, active = solve_arrays(sys.equations, sys.rhs, sys.num_vars)
    return Gf2Solution(bits=bits, peeled=peeled, core_equations=core, active_variables=active)


def verify(sys: Gf2System, sol: Gf2Solution) -> bool:
    """True iff every equation's XOR equals its right-hand side."""
    bits = np.ascontiguousarray(sol.bits, dtype=np.uint8)
    if bits.shape[0] != sys.num_vars:
        return False
    return bool(_verify(sys.equations, sys.rhs, bits))


def random_system(num_eqs: int, num_vars: int, seed: int, arity: int = 3) -> Gf2System:
    """Random system: each equation XORs ``arity`` uniform variables and a random bit."""
    rng = np.random.default_rng(seed)
    eqs = rng.integers(0, num_vars, size=(num_eqs, arity), dtype=np.int64)
    rhs = rng.integers(0, 2, size=num_eqs, dtype=np.uint8)
    return Gf2System(num_vars=num_vars, equations=eqs, rhs=rhs, seed=seed)


@dataclass(frozen=True)
class DeltaMode:
    """Variables-per-equation ratio paired with the hash count that realises it."""

    arity: int
    delta: Fraction

    @property
    def value(self) -> float:
        return float(self.delta)

    def num_vars(self, num_eqs: int) -> int:
        """``ceil(delta * num_eqs)``, computed exactly."""
        return -(-num_eqs * self.delta.numerator // self.delta.denominator)


DELTA3 = DeltaMode(3, Fraction(1089, 1000))
DELTA4 = DeltaMode(4, Fraction(1024, 1000))


def delta_mode(arity: int) -> DeltaMode:
    if arity == 3:
        return DELTA3
    if arity == 4:
        return DELTA4
    raise ValueError(f"unsupported hash count {arity}; use 3 or 4")
