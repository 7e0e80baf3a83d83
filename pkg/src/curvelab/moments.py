"""Exact even moments and Diophantine counting tables.

Orthogonality turns even moments of the truncated exponential sum into
integer counting problems:

    int |E_a|^(2s) = sum_l |r_s(l)|^2,

where r_s(l) is the s-fold representation table: the weighted number of
s-tuples from the support whose curve values sum to the vector l.  This
module builds those tables exactly, derives the constrained and
unconstrained pair-correlation tables c_t(l) / c'_t(l) used by the
foliation bounds for the eighth and tenth moments, and provides k-fold
divisor counts with two independent routes (sieve and factorization).

All integer arithmetic is exact.  numpy arrays carry int64 payloads and
every reduction is guarded: sums run through helpers that check, from
runtime maxima, that int64 cannot overflow, and fall back to Python
big-integer summation otherwise.  A mass identity (total table weight
equals (sum of weights)^s) is asserted after every build, so a silent
overflow anywhere upstream would fail loudly.

Construction strategy is chosen per build under a configurable memory
budget (8 GiB, clamped to 75% of physical memory): a dense integer box
accumulator when the bounding box of the table is affordable, otherwise
sorted sparse key/weight arrays merged chunkwise.  For univariate
curves and moments |E|^(4t) there is a third route via Parseval on the
autocorrelation of r_t, which reaches far larger N than materializing
r_(2t).
"""

from __future__ import annotations

import json
import math
import os
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .extension import CurveSystem, WeightedSequence
from .intpoly import IntPolynomial, quotient_psi3


def _physical_memory() -> int | None:
    try:
        return os.sysconf("SC_PHYS_PAGES") * os.sysconf("SC_PAGE_SIZE")
    except (ValueError, OSError, AttributeError):
        return None


_PHYS = _physical_memory()
DEFAULT_MEM_BUDGET = (
    8 * 2 ** 30 if _PHYS is None else min(8 * 2 ** 30, int(0.75 * _PHYS))
)  # bytes

_X = IntPolynomial.variable()
_CUBE = _X ** 3

_INT63 = 2 ** 62  # conservative ceiling for int64 intermediates


class MemoryBudgetError(Exception):
    """A table build would exceed the configured memory budget."""

    def __init__(self, message: str, fold: int, estimated_entries: int):
        super().__init__(message)
        self.fold = fold
        self.estimated_entries = estimated_entries


# -- exact reductions over numpy arrays --------------------------------


def exact_sum(arr: np.ndarray) -> int:
    """Exact sum of an integer array; widens to Python ints on demand."""
    total = 0
    flat = arr.reshape(-1)
    step = 1 << 24
    for i in range(0, flat.size, step):
        c = flat[i : i + step]
        m = int(np.abs(c).max(initial=0))
        if m == 0:
            continue
        if m * c.size < _INT63:
            total += int(c.sum(dtype=np.int64))
        else:  # not reachable at desk scale, kept for honesty
            total += sum(int(v) for v in c)
    return total


def exact_sq_sum(arr: np.ndarray) -> int:
    """Exact sum of squares of an integer array."""
    total = 0
    flat = arr.reshape(-1)
    step = 1 << 24
    for i in range(0, flat.size, step):
        c = flat[i : i + step]
        m = int(np.abs(c).max(initial=0))
        if m == 0:
            continue
        if m * m * c.size < _INT63:
            c64 = c.astype(np.int64, copy=False)
            total += int(np.dot(c64, c64))
        else:
            total += sum(int(v) * int(v) for v in c)
    return total


def exact_dot(a: np.ndarray, b: np.ndarray) -> int:
    """Exact dot product of two integer arrays."""
    if a.size == 0:
        return 0
    ma = int(np.abs(a).max(initial=0))
    mb = int(np.abs(b).max(initial=0))
    if ma * mb * a.size < _INT63:
        return int(np.dot(a.astype(np.int64, copy=False), b.astype(np.int64, copy=False)))
    return sum(int(x) * int(y) for x, y in zip(a, b))


def _group_sum(keys: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sort keys and sum weights of equal keys (stable, deterministic)."""
    if keys.size == 0:
        return keys, weights
    order = np.argsort(keys, kind="stable")
    k = keys[order]
    w = weights[order]
    starts = np.concatenate([[0], np.flatnonzero(np.diff(k)) + 1])
    return k[starts], np.add.reduceat(w, starts)


# -- representation tables ----------------------------------------------


@dataclass(frozen=True)
class _Packing:
    """Row-major linear packing of integer vectors into int64 keys.

    Widths are sized for the largest fold, so packed(l + v) =
    packed(l) + packed(v) never wraps for any fold actually built.
    """

    widths: tuple[int, ...]
    strides: tuple[int, ...]
    base_lo: tuple[int, ...]
    base_hi: tuple[int, ...]

    @classmethod
    def plan(cls, lo: Sequence[int], hi: Sequence[int], s: int) -> "_Packing":
        widths = tuple(s * (h - l) + 1 for l, h in zip(lo, hi))
        strides = [1] * len(widths)
        for i in range(len(widths) - 2, -1, -1):
            strides[i] = strides[i + 1] * widths[i + 1]
        packing = cls(widths, tuple(strides), tuple(lo), tuple(hi))
        worst = sum(
            s * max(abs(l), abs(h)) * st
            for l, h, st in zip(lo, hi, strides)
        )
        if worst >= _INT63:
            raise ValueError("curve values exceed the 63-bit key packing range")
        return packing

    def pack(self, vec: Sequence[int]) -> int:
        return sum(int(v) * st for v, st in zip(vec, self.strides))

    def unpack(self, keys: np.ndarray, fold: int) -> np.ndarray:
        """Key array back to an (n, d) vector array for a given fold."""
        d = len(self.widths)
        out = np.empty((keys.size, d), dtype=np.int64)
        rem = keys.astype(np.int64, copy=True)
        for i in range(d - 1, 0, -1):
            w = self.widths[i]
            w0 = fold * self.base_lo[i]
            coord = w0 + ((rem - w0) % w)
            out[:, i] = coord
            rem = (rem - coord) // w
        out[:, 0] = rem
        return out


@dataclass
class RepTable:
    """Sparse s-fold representation table over a d-dimensional curve.

    ``keys`` are packed l-vectors in ascending order; ``weights`` is an
    int64 array for integer weight sequences and complex128 otherwise.
    """

    dimension: int
    fold: int
    keys: np.ndarray
    weights: np.ndarray
    packing: _Packing
    curve: str = ""

    @property
    def support_size(self) -> int:
        return int(self.keys.size)

    def is_integer(self) -> bool:
        return self.weights.dtype.kind in "iu"

    def vectors(self) -> np.ndarray:
        return self.packing.unpack(self.keys, self.fold)

    def items(self) -> Iterator[tuple[tuple[int, ...], int | complex]]:
        vecs = self.vectors()
        for i in range(self.keys.size):
            w = self.weights[i]
            yield tuple(int(v) for v in vecs[i]), (int(w) if self.is_integer() else complex(w))

    def entry(self, l: int | Sequence[int]) -> int | complex:
        vec = (l,) if isinstance(l, int) else tuple(l)
        if len(vec) != self.dimension:
            raise ValueError(f"expected {self.dimension} coordinates")
        key = self.packing.pack(vec)
        i = int(np.searchsorted(self.keys, key))
        if i < self.keys.size and int(self.keys[i]) == key:
            w = self.weights[i]
            return int(w) if self.is_integer() else complex(w)
        return 0

    def mass(self) -> int | complex:
        if self.is_integer():
            return exact_sum(self.weights)
        return complex(self.weights.sum())

    def max_weight(self) -> int | float:
        if self.keys.size == 0:
            return 0
        if self.is_integer():
            return int(self.weights.max())
        return float(np.abs(self.weights).max())

    # -- export ----------------------------------------------------------

    def to_csv(self, path: str, limit: int = 1_000_000) -> None:
        if self.keys.size > limit:
            raise ValueError("CSV export is intended for small tables")
        vecs = self.vectors()
        with open(path, "w") as fh:
            cols = ",".join(f"l{i + 1}" for i in range(self.dimension))
            fh.write(f"{cols},weight\n")
            for i in range(self.keys.size):
                lead = ",".join(str(int(v)) for v in vecs[i])
                if self.is_integer():
                    fh.write(f"{lead},{int(self.weights[i])}\n")
                else:
                    w = complex(self.weights[i])
                    fh.write(f"{lead},{w.real!r}{w.imag:+}j\n")

    def to_binary(self, path: str) -> None:
        """Little-endian: d, s, weight-kind byte, entry count, then
        (l-vector int64 x d, weight) records in key order."""
        kind = 0 if self.is_integer() else 1
        vecs = self.vectors()
        with open(path, "wb") as fh:
            fh.write(struct.pack("<BBBQ", self.dimension, self.fold, kind, self.keys.size))
            if kind == 0:
                rec = np.empty((self.keys.size, self.dimension + 1), dtype="<i8")
                rec[:, : self.dimension] = vecs
                rec[:, self.dimension] = self.weights
                rec.tofile(fh)
            else:
                vecs.astype("<i8").tofile(fh)
                self.weights.astype("<c16").tofile(fh)

    @classmethod
    def from_binary(cls, path: str) -> "RepTable":
        with open(path, "rb") as fh:
            d, s, kind, count = struct.unpack("<BBBQ", fh.read(11))
            if kind == 0:
                rec = np.fromfile(fh, dtype="<i8", count=count * (d + 1)).reshape(count, d + 1)
                vecs, weights = rec[:, :d], rec[:, d].copy()
            else:
                vecs = np.fromfile(fh, dtype="<i8", count=count * d).reshape(count, d)
                weights = np.fromfile(fh, dtype="<c16", count=count)
        lo = [int(vecs[:, i].min(initial=0)) for i in range(d)]
        hi = [int(vecs[:, i].max(initial=0)) for i in range(d)]
        # widths merely need to cover this fold's box for packing to work
        base_lo = [min(l // max(s, 1), 0) for l in lo]
        base_hi = [max(-(-h // max(s, 1)), 0) for h in hi]
        packing = _Packing.plan(base_lo, base_hi, s)
        keys = vecs @ np.array(packing.strides, dtype=np.int64)
        order = np.argsort(keys, kind="stable")
        return cls(d, s, keys[order], weights[order], packing)


def _base_points(seq: WeightedSequence, curve: CurveSystem):
    """Aggregate support points with equal curve values.

    Returns (vectors, weights, integer_flag); weights are Python ints
    when every sequence weight is an integer, else complex.
    """
    agg: dict[tuple[int, ...], complex | int] = {}
    integer = True
    for n, w in seq.weights.items():
        if isinstance(w, Fraction):
            if w.denominator == 1:
                w = int(w)
        if not isinstance(w, (int, np.integer)):
            integer = False
        vec = curve.evaluate(n)
        agg[vec] = agg.get(vec, 0) + (int(w) if isinstance(w, (int, np.integer)) else complex(w))
    vectors = sorted(v for v, w in agg.items() if w != 0)
    weights = [agg[v] for v in vectors]
    return vectors, weights, integer


@dataclass
class _Chain:
    """Outcome of an s-fold convolution chain build."""

    packing: _Packing
    fold: int
    dimension: int
    integer: bool
    dense: np.ndarray | None = None  # d-dim box array, index = l - fold*base_lo
    keys: np.ndarray | None = None
    weights: np.ndarray | None = None

    def to_sparse(self, mem_budget: int) -> tuple[np.ndarray, np.ndarray]:
        if self.dense is None:
            return self.keys, self.weights
        flat = self.dense.reshape(-1)
        count = int(np.count_nonzero(flat))
        need = count * (8 + (8 if self.integer else 16))
        if need > mem_budget:
            raise MemoryBudgetError(
                f"extracting fold {self.fold} needs {count} entries (~{need >> 20} MiB), over budget",
                self.fold,
                count,
            )
        idx = np.flatnonzero(flat)
        offset = self.packing.pack([self.fold * l for l in self.packing.base_lo])
        keys = idx + offset
        return keys, flat[idx]


def _box_cells(packing: _Packing, fold: int) -> int:
    cells = 1
    for lo, hi in zip(packing.base_lo, packing.base_hi):
        cells *= fold * (hi - lo) + 1
    return cells


def _build_chain(
    seq: WeightedSequence,
    curve: CurveSystem,
    s: int,
    mem_budget: int,
    force: str | None = None,
) -> _Chain:
    """Iterated convolution of the base point multiset, fold 1 .. s."""
    if s < 1:
        raise ValueError("fold must be >= 1")
    vectors, weights, integer = _base_points(seq, curve)
    d = curve.dimension()
    if not vectors:
        packing = _Packing.plan([0] * d, [0] * d, s)
        empty_w = np.zeros(0, dtype=np.int64 if integer else np.complex128)
        return _Chain(packing, s, d, integer, keys=np.zeros(0, np.int64), weights=empty_w)
    lo = [min(v[i] for v in vectors) for i in range(d)]
    hi = [max(v[i] for v in vectors) for i in range(d)]
    packing = _Packing.plan(lo, hi, s)
    if integer:
        # every intermediate table value and chunk product is bounded by
        # (sum |w|)^s, so this single check keeps the whole chain in int64
        total = sum(abs(w) for w in weights)
        if total ** s >= _INT63:
            raise MemoryBudgetError(
                f"weight mass {total}^{s} exceeds the exact int64 range", s, 0
            )
    dtype = np.int64 if integer else np.complex128
    itemsize = np.dtype(dtype).itemsize

    base_keys = np.array([packing.pack(v) for v in vectors], dtype=np.int64)
    base_w = np.array(weights, dtype=dtype)
    nbase = base_keys.size

    # strategy: dense box accumulation when the final box (plus the fold
    # below it) is affordable and not badly oversized vs. the sparse
    # estimate; otherwise sparse sorted arrays.
    est = nbase
    for f in range(2, s + 1):
        est = min(est * nbase, _box_cells(packing, f))
    final_cells = _box_cells(packing, s)
    prev_cells = _box_cells(packing, s - 1) if s > 1 else nbase
    dense_ok = (final_cells + prev_cells) * itemsize <= 0.8 * mem_budget
    prefer_dense = dense_ok and (final_cells <= 32 * max(est, 1) or final_cells <= 1 << 22)
    strategy = force or ("dense" if prefer_dense else "sparse")

    if strategy == "dense":
        return _dense_chain(packing, base_w, vectors, s, d, integer)
    # sparse
    need = est * (16 if integer else 24) * 3
    if need > mem_budget:
        raise MemoryBudgetError(
            f"fold {s} estimated at {est} entries (~{need >> 20} MiB working set), over budget",
            s,
            est,
        )
    keys, w = base_keys, base_w
    keys, w = _group_sum(keys, w)
    for f in range(2, s + 1):
        keys, w = _sparse_step(keys, w, base_keys, base_w)
    return _Chain(packing, s, d, integer, keys=keys, weights=w)


def _dense_chain(packing, base_w, vectors, s, d, integer):
    dtype = np.int64 if integer else np.complex128
    widths1 = tuple(1 * (h - l) + 1 for l, h in zip(packing.base_lo, packing.base_hi))
    cur = np.zeros(widths1, dtype=dtype)
    deltas = [tuple(v[i] - packing.base_lo[i] for i in range(d)) for v in vectors]
    for delta, w in zip(deltas, base_w.tolist()):
        cur[tuple(delta)] += w
    for f in range(2, s + 1):
        shape = tuple(f * (h - l) + 1 for l, h in zip(packing.base_lo, packing.base_hi))
        nxt = np.zeros(shape, dtype=dtype)
        prev_shape = cur.shape
        for delta, w in zip(deltas, base_w.tolist()):
            sl = tuple(slice(dd, dd + ps) for dd, ps in zip(delta, prev_shape))
            if w == 1:
                nxt[sl] += cur
            else:
                nxt[sl] += w * cur
        cur = nxt
    return _Chain(packing, s, d, integer, dense=cur)


def _sparse_step(keys, w, base_keys, base_w, max_chunk_elems: int = 1 << 24):
    """One convolution fold on sorted sparse arrays, chunked and merged."""
    nbase = base_keys.size
    rows = max(1, max_chunk_elems // max(nbase, 1))
    acc_k = np.zeros(0, dtype=np.int64)
    acc_w = np.zeros(0, dtype=w.dtype)
    indicator_base = w.dtype.kind in "iu" and bool((base_w == 1).all())
    for i in range(0, keys.size, rows):
        kc = keys[i : i + rows]
        wc = w[i : i + rows]
        newk = (kc[:, None] + base_keys[None, :]).reshape(-1)
        if indicator_base:
            neww = np.repeat(wc, nbase)
        else:
            neww = (wc[:, None] * base_w[None, :]).reshape(-1)
        uk, uw = _group_sum(newk, neww)
        if acc_k.size:
            acc_k, acc_w = _merge_tables(acc_k, acc_w, uk, uw)
        else:
            acc_k, acc_w = uk, uw
    return acc_k, acc_w


def _merge_tables(k1, w1, k2, w2):
    """Merge two sorted key/weight tables, summing shared keys."""
    k = np.concatenate([k1, k2])
    w = np.concatenate([w1, w2])
    return _group_sum(k, w)


def rep_table(
    seq: WeightedSequence,
    curve: CurveSystem,
    s: int,
    *,
    mem_budget: int = DEFAULT_MEM_BUDGET,
) -> RepTable:
    """Build the s-fold representation table of seq on curve, exactly.

    Raises MemoryBudgetError (naming the fold and the estimated entry
    count) instead of exhausting memory.
    """
    chain = _build_chain(seq, curve, s, mem_budget)
    keys, weights = chain.to_sparse(mem_budget)
    table = RepTable(chain.dimension, s, keys, weights, chain.packing, curve.descriptor())
    if chain.integer:
        expected = _int_or_none(seq.sum_weights())
        if expected is not None and table.keys.size:
            got = table.mass()
            if got != expected ** s:
                raise AssertionError(
                    f"mass invariant failed: {got} != {expected}^{s}"
                )
    return table


def _int_or_none(x):
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, Fraction) and x.denominator == 1:
        return int(x)
    return None


# -- even moments --------------------------------------------------------


def even_moment(
    seq: WeightedSequence,
    curve: CurveSystem,
    s: int,
    *,
    mem_budget: int = DEFAULT_MEM_BUDGET,
) -> int | float:
    """Exact 2s-th moment of |E_a|: sum over l of |r_s(l)|^2.

    Integer (exact) for integer weights, float for general complex
    weights.  For univariate curves with even s the moment is computed
    from the autocorrelation of the half-fold table when that is the
    cheaper exact route.
    """
    if s < 1:
        raise ValueError("s must be >= 1")
    if seq.is_empty():
        return 0
    d = curve.dimension()
    vectors, weights, integer = _base_points(seq, curve)
    if d == 1 and s % 2 == 0 and s >= 4 and integer:
        value = _even_moment_autocorr(seq, curve, s, mem_budget)
        if value is not None:
            return value
    chain = _build_chain(seq, curve, s, mem_budget)
    if chain.dense is not None:
        if chain.integer:
            return exact_sq_sum(chain.dense)
        flat = chain.dense.reshape(-1)
        return float(np.real(np.vdot(flat, flat)))
    if chain.integer:
        return exact_sq_sum(chain.weights)
    return float(np.real(np.vdot(chain.weights, chain.weights)))


_AUTOCORR_PAIR_CAP = 3 * 10 ** 7  # pair count handled by the numpy route


def _pair_product_sq_sum(keys: np.ndarray, w: np.ndarray,
                         max_chunk: int = 1 << 23) -> int:
    """sum over m > 0 of d(m)^2 by explicit pair grouping.

    d(m) = sum of w[i] * w[j] over pairs with keys[j] - keys[i] = m;
    keys must be strictly increasing, so diff > 0 selects i < j.
    """
    n = keys.size
    rows = max(1, max_chunk // max(n, 1))
    acc_k = np.zeros(0, dtype=np.int64)
    acc_w = np.zeros(0, dtype=np.int64)
    for i0 in range(0, n, rows):
        kc = keys[i0:i0 + rows]
        wc = w[i0:i0 + rows]
        diffs = keys[None, :] - kc[:, None]
        prods = wc[:, None] * w[None, :]
        mask = diffs > 0
        uk, uw = _group_sum(diffs[mask], prods[mask])
        if acc_k.size:
            acc_k, acc_w = _merge_tables(acc_k, acc_w, uk, uw)
        else:
            acc_k, acc_w = uk, uw
    return exact_sq_sum(acc_w)


def _even_moment_autocorr(seq, curve, s, mem_budget) -> int | None:
    """int |E|^(2s) = sum_m d(m)^2 with d the autocorrelation of r_(s/2).

    Returns None when the weights are too heavy for guarded int64
    autocorrelation; the caller then falls back to the direct chain.
    Small key sets take an explicit numpy pair-grouping route, large
    ones the streaming compiled kernel; both are exact.
    """
    t = s // 2
    chain = _build_chain(seq, curve, t, mem_budget, force="sparse")
    keys, w = chain.keys, chain.weights
    if keys.size == 0:
        return 0
    w = w.astype(np.int64, copy=False)
    sq_t = exact_sq_sum(w)
    abs_mass = exact_sum(np.abs(w))
    if sq_t >= _INT63 or abs_mass * abs_mass >= _INT63:
        return None  # partial d(m) could leave int64
    n = int(keys.size)
    mass = exact_sum(w)
    if n * n <= _AUTOCORR_PAIR_CAP:
        pos_sq = _pair_product_sq_sum(keys, w)
    else:
        from ._kernels import autocorr_sq_sum

        pos_sq_i, pair_sum, flag = autocorr_sq_sum(keys, w, 1 << 22)
        if flag:
            raise MemoryBudgetError(
                "autocorrelation square sum exceeds the exact int64 range",
                s, n)
        if 2 * int(pair_sum) != mass * mass - sq_t:
            raise AssertionError("autocorrelation pair-mass invariant failed")
        pos_sq = int(pos_sq_i)
    return 2 * pos_sq + sq_t ** 2


# -- pair correlation tables ---------------------------------------------


@dataclass
class CTable:
    """c_t(l) (constrained) or c'_t(l) (unconstrained) counting table.

    Constrained counts 2t-tuples (x, y) from the support with
    sum phi(x_i) - sum phi(y_i) = l and sum x_i = sum y_i; the
    unconstrained flavor drops the linear condition.
    """

    t: int
    flavor: str
    phi: str
    keys: np.ndarray  # sorted l values, int64
    counts: np.ndarray  # int64

    def get(self, l: int) -> int:
        i = int(np.searchsorted(self.keys, l))
        if i < self.keys.size and int(self.keys[i]) == l:
            return int(self.counts[i])
        return 0

    def zero(self) -> int:
        return self.get(0)

    def total(self) -> int:
        return exact_sum(self.counts)

    def max_nonzero(self) -> int:
        """Largest count over l != 0 (0 if the table is {0}-supported)."""
        mask = self.keys != 0
        if not mask.any():
            return 0
        return int(self.counts[mask].max())

    def support(self) -> np.ndarray:
        return self.keys.copy()

    def items(self) -> Iterator[tuple[int, int]]:
        for i in range(self.keys.size):
            yield int(self.keys[i]), int(self.counts[i])

    def to_csv(self, path: str, limit: int = 1_000_000) -> None:
        if self.keys.size > limit:
            raise ValueError("CSV export is intended for small tables")
        with open(path, "w") as fh:
            fh.write("l,count\n")
            for l, c in self.items():
                fh.write(f"{l},{c}\n")

    def to_binary(self, path: str) -> None:
        with open(path, "wb") as fh:
            fh.write(struct.pack("<BBBQ", 1, self.t, 0, self.keys.size))
            rec = np.empty((self.keys.size, 2), dtype="<i8")
            rec[:, 0] = self.keys
            rec[:, 1] = self.counts
            rec.tofile(fh)


def _pairs_into_table(values: np.ndarray, counts: np.ndarray, max_chunk: int = 1 << 24):
    """All-pairs difference table of a weighted value list."""
    n = values.size
    acc_k = np.zeros(0, dtype=np.int64)
    acc_w = np.zeros(0, dtype=np.int64)
    if n == 0:
        return acc_k, acc_w
    rows = max(1, max_chunk // n)
    for i in range(0, n, rows):
        vc = values[i : i + rows]
        cc = counts[i : i + rows]
        diff = (vc[:, None] - values[None, :]).reshape(-1)
        wt = (cc[:, None] * counts[None, :]).reshape(-1)
        uk, uw = _group_sum(diff, wt)
        acc_k, acc_w = _merge_tables(acc_k, acc_w, uk, uw) if acc_k.size else (uk, uw)
    return acc_k, acc_w


def c_table(
    seq: WeightedSequence,
    phi: IntPolynomial,
    t: int,
    flavor: str = "constrained",
    *,
    mem_budget: int = DEFAULT_MEM_BUDGET,
) -> CTable:
    """Exact c_t / c'_t table for an indicator sequence.

    The constrained flavor pairs x-side and y-side entries of the
    2-dimensional table of (phi(n), n) grouped by equal linear sums; the
    unconstrained flavor autocorrelates the 1-dimensional table of
    phi(n).
    """
    if not seq.is_indicator():
        raise ValueError("c tables are defined for indicator sequences")
    if t < 1:
        raise ValueError("t must be >= 1")
    if flavor not in ("constrained", "unconstrained"):
        raise ValueError("flavor must be constrained or unconstrained")
    if seq.is_empty():
        return CTable(t, flavor, str(phi), np.zeros(0, np.int64), np.zeros(0, np.int64))

    if flavor == "unconstrained":
        chain = _build_chain(seq, CurveSystem.univariate(phi), t, mem_budget, force="sparse")
        keys, counts = _pairs_into_table(chain.keys, chain.weights)
    else:
        curve = CurveSystem.with_linear(phi)
        chain = _build_chain(seq, curve, t, mem_budget, force="sparse")
        vecs = chain.packing.unpack(chain.keys, t)
        u, v = vecs[:, 0], vecs[:, 1]
        order = np.lexsort((u, v))
        u, v, w = u[order], v[order], chain.weights[order]
        starts = np.concatenate([[0], np.flatnonzero(np.diff(v)) + 1, [v.size]])
        acc_k = np.zeros(0, dtype=np.int64)
        acc_w = np.zeros(0, dtype=np.int64)
        for gi in range(starts.size - 1):
            a, b = int(starts[gi]), int(starts[gi + 1])
            uk, uw = _pairs_into_table(u[a:b], w[a:b])
            acc_k, acc_w = _merge_tables(acc_k, acc_w, uk, uw) if acc_k.size else (uk, uw)
        keys, counts = acc_k, acc_w

    table = CTable(t, flavor, str(phi), keys, counts)
    _check_ctable_symmetry(table)
    return table


def _check_ctable_symmetry(table: CTable) -> None:
    # c_t(-l) = c_t(l): swapping the x and y blocks negates l
    k, c = table.keys, table.counts
    rev_idx = np.searchsorted(k, -k[::-1])
    ok = (
        rev_idx.size == k.size
        and bool((rev_idx < k.size).all())
        and bool((k[rev_idx] == -k[::-1]).all())
        and bool((c[rev_idx] == c[::-1]).all())
    )
    if not ok:
        raise AssertionError("c-table symmetry c(-l) = c(l) failed")


# -- foliation bounds ------------------------------------------------------


@dataclass(frozen=True)
class TenthMomentBound:
    """(8N+1) * sum_l c_2(l) c_3(l) with its l = 0 / l != 0 split."""

    N: int
    factor: int
    c2_zero: int
    c3_zero: int
    zero_term: int
    nonzero_term: int
    cross_sum: int
    bound: int


def _cross_sum(t1: CTable, t2: CTable) -> int:
    common, i1, i2 = np.intersect1d(t1.keys, t2.keys, assume_unique=True, return_indices=True)
    return exact_dot(t1.counts[i1], t2.counts[i2])


def tenth_moment_bound(
    seq: WeightedSequence,
    *,
    mem_budget: int = DEFAULT_MEM_BUDGET,
) -> TenthMomentBound:
    """Foliation bound for the tenth moment on the curve (n^3, n)."""
    if not seq.is_indicator():
        raise ValueError("the tenth moment bound applies to indicator sequences")
    c2 = c_table(seq, _CUBE, 2, "constrained", mem_budget=mem_budget)
    c3 = c_table(seq, _CUBE, 3, "constrained", mem_budget=mem_budget)
    cross = _cross_sum(c2, c3)
    zero = c2.zero() * c3.zero()
    factor = 8 * seq.N + 1
    return TenthMomentBound(
        N=seq.N,
        factor=factor,
        c2_zero=c2.zero(),
        c3_zero=c3.zero(),
        zero_term=zero,
        nonzero_term=cross - zero,
        cross_sum=cross,
        bound=factor * cross,
    )


@dataclass(frozen=True)
class EighthMomentBound:
    """(8N+1) * sum_l c_2(l) c'_2(l) and its coarser two-term relaxation."""

    N: int
    factor: int
    c2_zero: int
    c2u_zero: int
    max_c2_nonzero: int
    cross_sum: int
    full_bound: int
    refined_bound: int


def eighth_moment_bound(
    seq: WeightedSequence,
    phi: IntPolynomial,
    *,
    mem_budget: int = DEFAULT_MEM_BUDGET,
) -> EighthMomentBound:
    """Foliation bound for the eighth moment on the curve (phi(n), n).

    full_bound = (8N+1) sum_l c_2(l) c'_2(l);
    refined_bound = (8N+1) (c_2(0) c'_2(0) + A^4 max_{l != 0} c_2(l)),
    which dominates the full bound's l != 0 part since sum_l c'_2 = A^4.
    """
    if not seq.is_indicator():
        raise ValueError("the eighth moment bound applies to indicator sequences")
    deg = phi.degree()
    if deg is None or deg < 3:
        raise ValueError("phi must have degree >= 3")
    c2 = c_table(seq, phi, 2, "constrained", mem_budget=mem_budget)
    c2u = c_table(seq, phi, 2, "unconstrained", mem_budget=mem_budget)
    cross = _cross_sum(c2, c2u)
    a4 = seq.cardinality() ** 4
    factor = 8 * seq.N + 1
    return EighthMomentBound(
        N=seq.N,
        factor=factor,
        c2_zero=c2.zero(),
        c2u_zero=c2u.zero(),
        max_c2_nonzero=c2.max_nonzero(),
        cross_sum=cross,
        full_bound=factor * cross,
        refined_bound=factor * (c2.zero() * c2u.zero() + a4 * c2.max_nonzero()),
    )


# -- divisor counts ---------------------------------------------------------


def divisor(n: int, k: int = 2) -> int:
    """tau_k(n): ordered factorizations of n into k positive factors.

    Direct route: trial-division factorization, then the binomial
    formula tau_k(p^e) = C(e + k - 1, k - 1) per prime power.
    """
    if n < 1:
        raise ValueError("divisor counts are defined for n >= 1")
    if k < 1:
        raise ValueError("k must be >= 1")
    if k == 1 or n == 1:
        return 1
    out = 1
    m = n
    p = 2
    while p * p <= m:
        if m % p == 0:
            e = 0
            while m % p == 0:
                m //= p
                e += 1
            out *= math.comb(e + k - 1, k - 1)
        p += 1 if p == 2 else 2
    if m > 1:
        out *= k
    return out


def divisor_sieve(bound: int, k: int = 2) -> np.ndarray:
    """tau_k(n) for all 1 <= n <= bound by iterated divisor-sum sieve.

    Independent of ``divisor``: no factorization involved.  Index i
    holds tau_k(i + 1).
    """
    if bound < 1:
        raise ValueError("bound must be >= 1")
    if k < 1:
        raise ValueError("k must be >= 1")
    cur = np.ones(bound, dtype=np.int64)
    for _ in range(k - 1):
        nxt = np.zeros(bound, dtype=np.int64)
        for d in range(1, bound + 1):
            nxt[d - 1 :: d] += cur[: (bound - d) // d + 1]
        cur = nxt
    return cur


def max_divisor(bound: int, k: int = 2) -> int:
    """max of tau_k(n) over 1 <= n <= bound (sieve route)."""
    return int(divisor_sieve(bound, k).max())


def signed_divisor_triples(m: int) -> Iterator[tuple[int, int, int]]:
    """All ordered integer triples (d1, d2, d3) with d1*d2*d3 = m != 0.

    Exactly 4 * tau_3(|m|) triples: signs of d1 and d2 are free, d3's is
    forced.
    """
    if m == 0:
        raise ValueError("m must be nonzero")
    am = abs(m)
    divs = [d for d in range(1, am + 1) if am % d == 0]
    for a in divs:
        rest = am // a
        for b in divs:
            if rest % b:
                continue
            c = rest // b
            for sa in (1, -1):
                for sb in (1, -1):
                    sc = 1 if (sa * sb > 0) == (m > 0) else -1
                    yield sa * a, sb * b, sc * c


# -- divisor certificate for c_2(l), l != 0 -------------------------------


@dataclass(frozen=True)
class C2DivisorCertificate:
    """Exact c_2(l) against the divisor-triple ceiling, two routes.

    ``count`` enumerates solutions directly; ``count_via_triples``
    reconstructs them from factorizations of l through the trivariate
    difference quotient.  The two must agree; the ceiling is
    8 tau_3(|l| / 3) for phi = n^3 (0 unless 3 | l) and 8 tau_3(|l|)
    in general.
    """

    l: int
    count: int
    count_via_triples: int
    ceiling: int
    ceiling_kind: str
    triples_examined: int
    counts_agree: bool
    within_ceiling: bool


def c2_nonzero_divisor_check(
    seq: WeightedSequence,
    phi: IntPolynomial,
    l: int,
) -> C2DivisorCertificate:
    """Certify c_2(l), l != 0, for the curve (phi(n), n)."""
    if l == 0:
        raise ValueError("this certificate is for l != 0")
    if not seq.is_indicator():
        raise ValueError("c_2 certificates apply to indicator sequences")
    deg = phi.degree()
    if deg is None or deg < 3:
        raise ValueError("phi must have degree >= 3")
    points = seq.support()
    if len(points) ** 3 > 2 * 10 ** 7:
        raise ValueError("set too large for the cubic enumeration route")
    member = set(points)
    values = {n: phi.evaluate([n]) for n in points}

    count = 0
    for x1 in points:
        for x2 in points:
            base = values[x1] + values[x2]
            lin = x1 + x2
            for y1 in points:
                y2 = lin - y1
                if y2 in member and base - values[y1] - values[y2] == l:
                    count += 1

    psi = quotient_psi3(phi)
    count_triples = 0
    examined = 0
    for d1, d2, d3 in signed_divisor_triples(l):
        examined += 1
        for y1 in points:
            x1 = y1 + d1
            x2 = y1 + d2
            if x1 in member and x2 in member and (x1 + x2 - y1) in member:
                if psi.evaluate([x1, y1, x2]) == d3:
                    count_triples += 1

    if phi == _CUBE:
        kind = "cubic"
        ceiling = 0 if l % 3 else 8 * divisor(abs(l) // 3, 3)
    else:
        kind = "general"
        ceiling = 8 * divisor(abs(l), 3)
    return C2DivisorCertificate(
        l=l,
        count=count,
        count_via_triples=count_triples,
        ceiling=ceiling,
        ceiling_kind=kind,
        triples_examined=examined,
        counts_agree=count == count_triples,
        within_ceiling=count <= ceiling,
    )


# -- reporting ---------------------------------------------------------------


def conjectured_moment_scale(seq: WeightedSequence, curve: CurveSystem, s: int) -> int:
    """A^s * max(1, N^(s - K)) with K the total curve degree.

    This is the conjectured size of the 2s-th moment for indicator
    sequences: the endpoint interpolation of
    ||E_a||_p <~ (1 + N^(1/2 - K/p)) ||a||_2 at p = 2s.
    """
    a = seq.cardinality()
    k_total = curve.total_degree()
    return a ** s * max(1, seq.N ** max(0, s - k_total))


@dataclass
class MomentReport:
    """One computed moment with its conjectured scale and provenance."""

    curve: str
    set_descriptor: str
    N: int
    cardinality: int
    s: int
    moment: int | float
    bound: int | float
    ratio: float
    method: str = "exact"
    stderr: float | None = None
    wall_time_s: float = 0.0

    @property
    def p(self) -> int:
        return 2 * self.s

    def to_json_obj(self) -> dict:
        obj = {
            "curve": self.curve,
            "set": self.set_descriptor,
            "N": self.N,
            "A": self.cardinality,
            "s": self.s,
            "p": self.p,
            "moment": self.moment,
            "bound": self.bound,
            "ratio": self.ratio,
            "method": self.method,
            "wall_time_s": self.wall_time_s,
        }
        if self.stderr is not None:
            obj["stderr"] = self.stderr
        return obj

    def to_json_line(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True)


def append_jsonl(path: str, obj: dict | MomentReport) -> None:
    """Append one JSON line; every run with equal inputs writes equal bytes
    apart from the wall_time_s field."""
    if isinstance(obj, MomentReport):
        line = obj.to_json_line()
    else:
        line = json.dumps(obj, sort_keys=True)
    with open(path, "a") as fh:
        fh.write(line + "\n")
