"""Exact counting: representation tables, moments, c-tables, divisors."""

import itertools
import json
import math
import struct

import numpy as np
import pytest

import curvelab.moments as moments
from curvelab.extension import CurveSystem, WeightedSequence, make_set
from curvelab.intpoly import parse_polynomial
from curvelab.moments import (
    CTable,
    MemoryBudgetError,
    MomentReport,
    RepTable,
    append_jsonl,
    c2_nonzero_divisor_check,
    c_table,
    conjectured_moment_scale,
    divisor,
    divisor_sieve,
    eighth_moment_bound,
    even_moment,
    exact_dot,
    exact_sq_sum,
    exact_sum,
    max_divisor,
    rep_table,
    signed_divisor_triples,
    tenth_moment_bound,
)

CUBIC = CurveSystem.cubic_linear()
CUBE = parse_polynomial("x^3")
PAIR_SET = WeightedSequence.indicator([1, 2], 2)


# -- independent brute-force oracle ------------------------------------------


def brute_even_moment(seq: WeightedSequence, curve: CurveSystem, s: int):
    """Pure-Python A^(2s) enumeration; shares nothing with the library path."""
    pts = list(seq.weights)
    vals = {n: curve.evaluate(n) for n in pts}
    d = curve.dimension()

    def side():
        out = []
        for tup in itertools.product(pts, repeat=s):
            v = tuple(sum(vals[n][i] for n in tup) for i in range(d))
            w = 1
            for n in tup:
                w = w * seq.weights[n]
            out.append((v, w))
        return out

    xs = side()
    total = 0
    for vx, wx in xs:
        for vy, wy in xs:
            if vx == vy:
                total += wx * (wy.conjugate() if isinstance(wy, complex) else wy)
    return total


def brute_c_table_entry(seq, phi, t, l, constrained=True):
    pts = list(seq.weights)
    count = 0
    for xs in itertools.product(pts, repeat=t):
        for ys in itertools.product(pts, repeat=t):
            if constrained and sum(xs) != sum(ys):
                continue
            dv = sum(phi.evaluate([x]) for x in xs) - sum(phi.evaluate([y]) for y in ys)
            if dv == l:
                count += 1
    return count


# -- representation tables -----------------------------------------------------


def test_rep_table_frozen_pair_set():
    table = rep_table(PAIR_SET, CUBIC, 2)
    assert dict(table.items()) == {(2, 2): 1, (9, 3): 2, (16, 4): 1}
    assert table.support_size == 3
    assert table.fold == 2 and table.dimension == 2
    assert table.mass() == 4  # (sum of weights)^2
    assert table.max_weight() == 2
    assert table.entry((9, 3)) == 2
    assert table.entry((9, 4)) == 0
    with pytest.raises(ValueError):
        table.entry((1, 2, 3))


def test_rep_table_mass_invariant_weighted():
    seq = WeightedSequence(4, {1: 3, -2: -1, 4: 2})
    for s in (1, 2, 3):
        assert rep_table(seq, CUBIC, s).mass() == 4 ** s


def test_rep_table_univariate_merges_equal_values():
    # phi = x^2 identifies n and -n: r_1 aggregates the weights
    seq = WeightedSequence(3, {-2: 1, 2: 1, 1: 1})
    table = rep_table(seq, CurveSystem.univariate(parse_polynomial("x^2")), 1)
    assert dict(table.items()) == {(1,): 1, (4,): 2}


def test_rep_table_rejects_bad_fold():
    with pytest.raises(ValueError):
        rep_table(PAIR_SET, CUBIC, 0)


def test_dense_and_sparse_chains_agree():
    seq = make_set("random", 9, density=0.6, seed=2)
    for s in (2, 3):
        dense = moments._build_chain(seq, CUBIC, s, moments.DEFAULT_MEM_BUDGET, force="dense")
        sparse = moments._build_chain(seq, CUBIC, s, moments.DEFAULT_MEM_BUDGET, force="sparse")
        dk, dw = dense.to_sparse(moments.DEFAULT_MEM_BUDGET)
        sk, sw = sparse.to_sparse(moments.DEFAULT_MEM_BUDGET)
        assert np.array_equal(dk, sk)
        assert np.array_equal(dw, sw)


# -- even moments ----------------------------------------------------------------


def test_even_moment_frozen_pair_set():
    assert even_moment(PAIR_SET, CUBIC, 2) == 6
    assert isinstance(even_moment(PAIR_SET, CUBIC, 2), int)


def test_even_moment_trivial_cases():
    assert even_moment(WeightedSequence(3, {}), CUBIC, 3) == 0
    # s=1 on an injective curve: one representation per point
    assert even_moment(WeightedSequence.full(2), CUBIC, 1) == 5
    with pytest.raises(ValueError):
        even_moment(PAIR_SET, CUBIC, 0)


@pytest.mark.parametrize("curve_text,s", [
    ("x^3, x", 2),
    ("x^3, x", 3),
    ("x^2, x", 2),
    ("x, x^2, x^3", 2),
    ("x^3", 2),
    ("x^4, x", 2),
])
def test_even_moment_indicator_matches_brute_force(curve_text, s):
    curve = CurveSystem.from_string(curve_text)
    for seed in (1, 2, 3):
        seq = make_set("random", 5, density=0.6, seed=seed)
        if seq.is_empty():
            continue
        assert even_moment(seq, curve, s) == brute_even_moment(seq, curve, s)


def test_even_moment_integer_weights_match_brute_force():
    seq = WeightedSequence(4, {-3: 2, -1: -1, 0: 4, 2: 1, 4: -3})
    for s in (1, 2, 3):
        got = even_moment(seq, CUBIC, s)
        assert got == brute_even_moment(seq, CUBIC, s)
        assert isinstance(got, int)


def test_even_moment_complex_weights_match_brute_force():
    seq = WeightedSequence(3, {-2: complex(1, 1), 0: 0.5, 3: complex(-0.25, 2)})
    for s in (1, 2):
        got = even_moment(seq, CUBIC, s)
        want = brute_even_moment(seq, CUBIC, s)
        assert isinstance(got, float)
        assert got == pytest.approx(abs(want), rel=1e-12)


def test_even_moment_is_nonnegative_sum_of_squares():
    seq = WeightedSequence(3, {1: -5, 2: 3, -3: -1})
    assert even_moment(seq, CUBIC, 2) >= 0


# -- autocorrelation routes for univariate even folds -----------------------------


def test_autocorr_routes_and_direct_chain_agree(monkeypatch):
    curve = CurveSystem.univariate(CUBE)
    seq = WeightedSequence.full(30)
    budget = moments.DEFAULT_MEM_BUDGET
    via_pairs = even_moment(seq, curve, 4)  # key count is under the numpy cap

    monkeypatch.setattr(moments, "_AUTOCORR_PAIR_CAP", -1)
    via_kernel = even_moment(seq, curve, 4)  # same sums through the compiled kernel

    chain = moments._build_chain(seq, curve, 4, budget)
    k, w = chain.to_sparse(budget)
    direct = exact_sq_sum(w) if chain.dense is None else exact_sq_sum(chain.dense)
    assert via_pairs == via_kernel == direct


def test_autocorr_heavy_weights_fall_back_exactly():
    # weights big enough that the autocorrelation guard (sum w^2 near 2^63)
    # rejects, small enough that the direct chain still fits int64
    curve = CurveSystem.univariate(CUBE)
    seq = WeightedSequence(3, {1: 2 ** 14, 2: 2 ** 14, 3: 1})
    got = even_moment(seq, curve, 4)
    assert got == brute_even_moment(seq, curve, 4)


def test_heavy_mass_refusal():
    seq = WeightedSequence(2, {1: 2 ** 40, 2: -(2 ** 40)})
    with pytest.raises(MemoryBudgetError):
        even_moment(seq, CUBIC, 2)


def test_pair_product_sq_sum_chunking():
    keys = np.arange(50, dtype=np.int64) ** 2
    w = (np.arange(50, dtype=np.int64) % 7) - 3
    whole = moments._pair_product_sq_sum(keys, w)
    chunked = moments._pair_product_sq_sum(keys, w, max_chunk=64)
    assert whole == chunked


# -- c tables ------------------------------------------------------------------


def test_c_table_frozen_pair_set():
    c2 = c_table(PAIR_SET, CUBE, 2, "constrained")
    assert c2.zero() == 6
    # equal linear sums force equal cubic sums on {1,2}: support is {0}
    # and the total is sum over m of (#pairs with x1+x2 = m)^2 = 1+4+1
    assert dict(c2.items()) == {0: 6}
    u2 = c_table(PAIR_SET, CUBE, 2, "unconstrained")
    assert dict(u2.items()) == {-14: 1, -7: 4, 0: 6, 7: 4, 14: 1}
    assert u2.total() == 2 ** 4
    assert u2.max_nonzero() == 4
    assert u2.get(3) == 0


def test_c_table_matches_brute_force():
    seq = make_set("random", 4, density=0.7, seed=6)
    for flavor, constrained in (("constrained", True), ("unconstrained", False)):
        table = c_table(seq, CUBE, 2, flavor)
        support = list(table.support())
        probe = set(support[:3] + support[-3:] + [0, 1])
        for l in probe:
            assert table.get(l) == brute_c_table_entry(seq, CUBE, 2, l, constrained)


def test_c_table_t3_zero_matches_brute_force():
    seq = WeightedSequence.indicator([-2, 0, 1, 3], 3)
    c3 = c_table(seq, CUBE, 3, "constrained")
    assert c3.zero() == brute_c_table_entry(seq, CUBE, 3, 0, True)


def test_c_table_symmetric():
    seq = make_set("random", 8, density=0.5, seed=9)
    for flavor in ("constrained", "unconstrained"):
        t = c_table(seq, CUBE, 2, flavor)
        for l, cnt in itertools.islice(t.items(), 20):
            assert t.get(-l) == cnt


def test_c_table_validation():
    with pytest.raises(ValueError):
        c_table(WeightedSequence(2, {1: 2}), CUBE, 2)
    with pytest.raises(ValueError):
        c_table(PAIR_SET, CUBE, 0)
    with pytest.raises(ValueError):
        c_table(PAIR_SET, CUBE, 2, "sideways")


def test_c_table_empty_set():
    t = c_table(WeightedSequence(3, {}), CUBE, 2)
    assert t.total() == 0 and t.zero() == 0


# -- foliation bounds --------------------------------------------------------------


def test_tenth_moment_bound_structure_and_domination():
    for seed in (1, 5, 9):
        seq = make_set("random", 10, density=0.5, seed=seed)
        if seq.cardinality() < 2:
            continue
        b = tenth_moment_bound(seq)
        assert b.factor == 8 * seq.N + 1
        assert b.zero_term == b.c2_zero * b.c3_zero
        assert b.zero_term + b.nonzero_term == b.cross_sum
        assert b.bound == b.factor * b.cross_sum
        assert even_moment(seq, CUBIC, 5) <= b.bound


def test_tenth_moment_bound_rejects_weighted():
    with pytest.raises(ValueError):
        tenth_moment_bound(WeightedSequence(2, {1: 2}))


def test_eighth_moment_bound_structure_and_domination():
    seq = make_set("random", 8, density=0.6, seed=4)
    b = eighth_moment_bound(seq, CUBE)
    assert b.factor == 8 * seq.N + 1
    assert b.full_bound == b.factor * b.cross_sum
    assert b.full_bound <= b.refined_bound
    moment = even_moment(seq, CurveSystem.univariate(CUBE), 4)
    assert moment <= b.full_bound


def test_eighth_moment_bound_validation():
    with pytest.raises(ValueError):
        eighth_moment_bound(PAIR_SET, parse_polynomial("x^2"))
    with pytest.raises(ValueError):
        eighth_moment_bound(WeightedSequence(2, {1: 3}), CUBE)


# -- divisor counts -----------------------------------------------------------------


def test_divisor_frozen_values():
    assert divisor(12) == 6
    assert divisor(8, 3) == 10
    assert divisor(1, 2) == 1 and divisor(1, 3) == 1 and divisor(1, 7) == 1
    assert divisor(97) == 2  # prime
    assert divisor(97, 3) == 3
    assert divisor(2 ** 10) == 11


def test_divisor_validation():
    with pytest.raises(ValueError):
        divisor(0)
    with pytest.raises(ValueError):
        divisor(5, 0)
    with pytest.raises(ValueError):
        divisor_sieve(0)


def test_divisor_sieve_matches_direct_small():
    for k in (1, 2, 3, 4):
        sieve = divisor_sieve(500, k)
        for n in range(1, 501):
            assert int(sieve[n - 1]) == divisor(n, k), (n, k)


def test_max_divisor():
    assert max_divisor(10, 2) == 4  # tau(6) = tau(8) = tau(10) = 4
    assert max_divisor(1, 3) == 1


def test_signed_divisor_triples_exact_family():
    for m in (8, -8, 1, -1, 12, 30, -45):
        triples = list(signed_divisor_triples(m))
        assert len(triples) == 4 * divisor(abs(m), 3)
        assert len(set(triples)) == len(triples)
        for d1, d2, d3 in triples:
            assert d1 * d2 * d3 == m
    with pytest.raises(ValueError):
        next(signed_divisor_triples(0))


# -- the c_2(l) divisor certificate ----------------------------------------------


def test_c2_certificate_routes_agree_cubic():
    seq = make_set("random", 6, density=0.7, seed=8)
    c2 = c_table(seq, CUBE, 2, "constrained")
    nonzero = [int(l) for l in c2.support() if l != 0][:6]
    assert nonzero, "need at least one nonzero l"
    for l in nonzero:
        cert = c2_nonzero_divisor_check(seq, CUBE, l)
        assert cert.counts_agree
        assert cert.count == c2.get(l)
        assert cert.within_ceiling
        assert cert.ceiling_kind == "cubic"


def test_c2_certificate_general_degree():
    phi = parse_polynomial("x^4 + x")
    seq = WeightedSequence.indicator([-2, -1, 1, 2, 3], 3)
    c2 = c_table(seq, phi, 2, "constrained")
    for l in [int(v) for v in c2.support() if v != 0][:4]:
        cert = c2_nonzero_divisor_check(seq, phi, l)
        assert cert.counts_agree and cert.within_ceiling
        assert cert.ceiling == 8 * divisor(abs(l), 3)


def test_c2_certificate_validation():
    with pytest.raises(ValueError):
        c2_nonzero_divisor_check(PAIR_SET, CUBE, 0)
    with pytest.raises(ValueError):
        c2_nonzero_divisor_check(PAIR_SET, parse_polynomial("x^2"), 1)


# -- exact reducers ------------------------------------------------------------------


def test_exact_reducers_handle_int64_overflow():
    arr = np.full(8, 2 ** 31, dtype=np.int64)
    assert exact_sq_sum(arr) == 8 * 2 ** 62  # > int64 max, exact Python int
    big = np.full(4, 2 ** 62, dtype=np.int64)
    assert exact_sum(big) == 4 * 2 ** 62
    assert exact_dot(big, np.ones(4, dtype=np.int64) * 2) == 8 * 2 ** 62


def test_exact_reducers_small():
    arr = np.array([3, -4, 5], dtype=np.int64)
    assert exact_sum(arr) == 4
    assert exact_sq_sum(arr) == 50
    assert exact_dot(arr, arr) == 50
    assert exact_sum(np.zeros(0, dtype=np.int64)) == 0


# -- memory budget refusals ------------------------------------------------------------


def test_rep_table_budget_refusal_names_fold():
    seq = WeightedSequence.full(24)
    with pytest.raises(MemoryBudgetError) as exc:
        rep_table(seq, CUBIC, 5, mem_budget=1 << 16)
    assert exc.value.fold >= 1
    assert exc.value.estimated_entries > 0


def test_even_moment_budget_refusal():
    with pytest.raises(MemoryBudgetError):
        even_moment(WeightedSequence.full(64), CUBIC, 5, mem_budget=1 << 16)


# -- export and reporting ----------------------------------------------------------------


def test_rep_table_binary_round_trip(tmp_path):
    table = rep_table(make_set("random", 7, density=0.6, seed=3), CUBIC, 3)
    path = tmp_path / "r3.bin"
    table.to_binary(str(path))
    back = RepTable.from_binary(str(path))
    assert back.dimension == table.dimension and back.fold == table.fold
    assert dict(back.items()) == dict(table.items())


def test_rep_table_binary_round_trip_complex(tmp_path):
    seq = WeightedSequence(3, {0: complex(1, 2), 2: 0.5})
    table = rep_table(seq, CUBIC, 2)
    path = tmp_path / "c.bin"
    table.to_binary(str(path))
    back = RepTable.from_binary(str(path))
    assert dict(back.items()) == dict(table.items())


def test_rep_table_csv(tmp_path):
    path = tmp_path / "r2.csv"
    rep_table(PAIR_SET, CUBIC, 2).to_csv(str(path))
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "l1,l2,weight"
    assert lines[1:] == ["2,2,1", "9,3,2", "16,4,1"]


def test_c_table_csv_and_binary(tmp_path):
    table = c_table(PAIR_SET, CUBE, 2, "unconstrained")
    csv_path = tmp_path / "c.csv"
    table.to_csv(str(csv_path))
    rows = [line.split(",") for line in csv_path.read_text().strip().splitlines()[1:]]
    assert {int(l): int(c) for l, c in rows} == dict(table.items())

    bin_path = tmp_path / "c.bin"
    table.to_binary(str(bin_path))
    with open(bin_path, "rb") as fh:
        d, t, kind, count = struct.unpack("<BBBQ", fh.read(11))
        rec = np.fromfile(fh, dtype="<i8").reshape(count, 2)
    assert (d, t, kind) == (1, 2, 0)
    assert {int(l): int(c) for l, c in rec} == dict(table.items())


def test_conjectured_moment_scale():
    full8 = WeightedSequence.full(8)
    a = full8.cardinality()
    assert conjectured_moment_scale(full8, CUBIC, 3) == a ** 3  # s <= K: no N factor
    assert conjectured_moment_scale(full8, CUBIC, 5) == a ** 5 * 8  # s - K = 1
    uni = CurveSystem.univariate(CUBE)
    assert conjectured_moment_scale(full8, uni, 4) == a ** 4 * 8  # K = 3


def test_moment_report_json(tmp_path):
    report = MomentReport(
        curve="x^3, x", set_descriptor="full:A=5:abc", N=2, cardinality=5,
        s=2, moment=6, bound=10, ratio=0.6,
    )
    obj = report.to_json_obj()
    assert obj["p"] == 4 and obj["moment"] == 6 and "stderr" not in obj
    path = tmp_path / "out.jsonl"
    append_jsonl(str(path), report)
    append_jsonl(str(path), {"extra": 1})
    lines = path.read_text().strip().splitlines()
    assert len(lines) == 2
    assert json.loads(lines[0])["moment"] == 6
    assert json.loads(lines[1]) == {"extra": 1}
