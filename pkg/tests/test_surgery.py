"""Winding profiles, crossroads/bridges, arc exchange, and the induction."""

import math

import numpy as np
import pytest

from systole_lab import (GreatCircle, PolyLoop, SquareRootCover, build_surface,
                         classify_intersections, constant_factor, ensure_generic,
                         exchange_arcs, figure_eight_geodesic, find_odd_loop,
                         find_odd_loop_ex, lift_closes, polyloop_length,
                         remove_bad_subloop, surgery, winding_profile)
from systole_lab.errors import LoopError, SurgeryError
from systole_lab.instances import comb_loop, default_points, lemma_instance, random_instance

ONE = constant_factor(1.0)


def circle_loop(center, radius, n=40, phase=0.13):
    t = np.linspace(0, 2 * math.pi, n, endpoint=False) + phase
    return PolyLoop(center + radius * np.exp(1j * t))


# ---------------------------------------------------------------------------
# winding profiles

def test_winding_unit_circle():
    loop = circle_loop(0.0, 1.0)
    prof = winding_profile(loop, [0.0])
    assert prof.mapping == {0: 1}
    assert prof.odd_set == frozenset({0})


def test_winding_outside():
    loop = circle_loop(0.0, 1.0)
    prof = winding_profile(loop, [3.0])
    assert prof.mapping == {0: 0}
    assert prof.odd_set == frozenset()


def test_winding_football_hoop():
    g = figure_eight_geodesic(GreatCircle([0.3, 0.45, 0.8]))
    hoop = PolyLoop(g.hoop_inner[:-1])
    prof = winding_profile(hoop, [0.0])
    assert prof.mapping[0] == 1


def test_winding_point_too_close():
    loop = circle_loop(0.0, 1.0)
    near_vertex = complex(loop.vertices[3]) + 1e-9
    with pytest.raises(LoopError):
        winding_profile(loop, [near_vertex])


# ---------------------------------------------------------------------------
# classification

def test_classify_disjoint():
    b = circle_loop(0.0, 0.5)
    c = circle_loop(4.0, 0.5)
    assert classify_intersections(b, c, [0.0]) == []


def brute_force_kinds(b, c, S):
    """Trace both lifts with tiny uniform steps on the two-sheeted model."""
    import cmath

    cover = SquareRootCover.from_points(S)
    from systole_lab.surgery import loop_intersections

    tb, tc, pts = loop_intersections(b, c)

    def branch_at(loop, t):
        path = [complex(loop.vertices[0])]
        path += [complex(loop.vertices[k % loop.n])
                 for k in range(1, math.floor(t) + 1)]
        path.append(loop.point_at(t))
        w = cover.principal_branch(path[0])
        for a, bb in zip(path, path[1:]):
            for s in np.linspace(0, 1, 1500, endpoint=False)[1:].tolist() + [1.0]:
                wp = cmath.sqrt(cover.value(a + s * (bb - a)))
                w = wp if abs(wp - w) <= abs(wp + w) else -wp
        return w

    kinds = []
    for i in range(len(tb)):
        wb = branch_at(b, float(tb[i]))
        wc = branch_at(c, float(tc[i]))
        kinds.append("crossroad" if (wb * wc.conjugate()).real > 0 else "bridge")
    return pts, kinds


def test_classify_mixed_pair_around_one_point():
    # two circles around the same labeled point crossing twice, basepoints
    # placed so the fixed lifts meet at one crossing and miss at the other
    S = [0.0]
    b = circle_loop(-0.25, 1.0, n=48)
    c = circle_loop(0.25, 1.05, n=52, phase=3.14)
    recs = classify_intersections(b, c, S)
    assert len(recs) == 2
    assert {r.kind for r in recs} == {"crossroad", "bridge"}
    # agree with brute-force lift tracing on the two-sheeted local model
    pts, kinds = brute_force_kinds(b, c, S)
    for rec in recs:
        i = int(np.argmin(np.abs(pts - rec.location)))
        assert rec.kind == kinds[i]


def test_classify_all_crossroads_when_lens_empty():
    # crossings twice, no labeled point inside either loop: both lifts stay
    # on one sheet, so every crossing is a crossroad
    S = [5.0 + 5.0j]
    b = circle_loop(-0.25, 1.0, n=48)
    c = circle_loop(0.25, 1.05, n=52, phase=0.07)
    recs = classify_intersections(b, c, S)
    assert len(recs) == 2
    assert {r.kind for r in recs} == {"crossroad"}
    _, kinds = brute_force_kinds(b, c, S)
    assert set(kinds) == {"crossroad"}


# ---------------------------------------------------------------------------
# exchange

def test_exchange_conserves_length_lens():
    b = circle_loop(-0.25, 1.0, n=48)
    c = circle_loop(0.25, 1.05, n=52, phase=0.07)
    recs = classify_intersections(b, c, [0.0])
    out1, out2 = exchange_arcs(b, c, recs[0], recs[1], f=ONE)
    total_in = polyloop_length(ONE, b) + polyloop_length(ONE, c)
    total_out = out1.metric_length + out2.metric_length
    assert total_out == pytest.approx(total_in, abs=1e-9)
    assert abs(out1.basepoint - b.basepoint) < 1e-12
    assert abs(out2.basepoint - c.basepoint) < 1e-12


def test_double_exchange_restores_originals():
    # exchanging back the same two arcs undoes the surgery: the degenerate
    # choice where the exchanged arcs equal the original arcs
    from systole_lab.surgery import IntersectionRecord

    b = circle_loop(-0.25, 1.0, n=48)
    c = circle_loop(0.25, 1.05, n=52, phase=0.07)
    recs = classify_intersections(b, c, [0.0])
    out1, out2 = exchange_arcs(b, c, recs[0], recs[1], f=ONE)
    # the junctions are vertices of the new loops; re-exchange there
    pair = []
    for rec in recs:
        t1 = int(np.argmin(np.abs(out1.vertices - rec.location)))
        t2 = int(np.argmin(np.abs(out2.vertices - rec.location)))
        pair.append(IntersectionRecord(rec.location, float(t1), float(t2)))
    back1, back2 = exchange_arcs(out1, out2, pair[0], pair[1], f=ONE)
    assert back1.metric_length + back2.metric_length == pytest.approx(
        polyloop_length(ONE, b) + polyloop_length(ONE, c), abs=1e-9)
    lens = sorted((back1.metric_length, back2.metric_length))
    orig = sorted((polyloop_length(ONE, b), polyloop_length(ONE, c)))
    assert lens[0] == pytest.approx(orig[0], abs=1e-9)
    assert lens[1] == pytest.approx(orig[1], abs=1e-9)
    p1 = winding_profile(back1, [0.0]).mapping[0]
    p2 = winding_profile(back2, [0.0]).mapping[0]
    assert sorted((abs(p1), abs(p2))) == [1, 1]


def test_exchange_same_point_rejected():
    b = circle_loop(-0.25, 1.0, n=48)
    c = circle_loop(0.25, 1.05, n=52, phase=0.07)
    recs = classify_intersections(b, c, [0.0])
    with pytest.raises(SurgeryError):
        exchange_arcs(b, c, recs[0], recs[0], f=ONE)


def test_exchange_conservation_randomized():
    rng = np.random.default_rng(99)
    done = 0
    while done < 100:
        b = circle_loop(complex(rng.normal(), rng.normal()) * 0.3,
                        0.8 + 0.4 * rng.random(), n=int(rng.integers(24, 48)),
                        phase=rng.random())
        c = circle_loop(complex(rng.normal(), rng.normal()) * 0.3,
                        0.8 + 0.4 * rng.random(), n=int(rng.integers(24, 48)),
                        phase=rng.random())
        try:
            recs = classify_intersections(b, c, [])
        except SurgeryError:
            continue
        except Exception:
            continue
        if len(recs) < 2:
            continue
        out1, out2 = exchange_arcs(b, c, recs[0], recs[1], f=ONE)
        total_in = polyloop_length(ONE, b) + polyloop_length(ONE, c)
        assert out1.metric_length + out2.metric_length == pytest.approx(
            total_in, abs=1e-9)
        done += 1


# ---------------------------------------------------------------------------
# subloop removal

def bowtie_loop(far_center, s_inside):
    """Figure-eight polyline: a left lobe with the basepoint, and a right
    lobe around ``s_inside``; the crossing sits between them."""
    left = [-1.0 - 0.5j, -0.2 - 0.02j, -1.0 + 0.5j, -1.6 + 0.0j]
    right = [0.6 + 0.52j + s_inside, 1.2 + 0.0j + s_inside, 0.6 - 0.5j + s_inside]
    pts = [left[0], left[1]] + [p - 0.6 for p in right] + [left[1] + 0.004j] \
        + left[2:]
    return PolyLoop(np.asarray(pts) + far_center)


def test_remove_bad_subloop_noop_on_simple():
    loop = circle_loop(0.0, 1.0)
    out = remove_bad_subloop(loop, [0.0], f=ONE)
    assert np.allclose(out.vertices, loop.rebased().vertices)


def test_remove_bad_subloop_excises_odd_lobe():
    s = 0.45 + 0.0j
    loop = bowtie_loop(0.0, s)
    cover = SquareRootCover.from_points([s])
    before = polyloop_length(ONE, loop)
    out = remove_bad_subloop(loop, cover, f=ONE)
    assert out.metric_length < before
    prof = winding_profile(out, [s])
    assert prof.mapping[0] == 0  # the lobe around s is gone
    again = remove_bad_subloop(out, cover, f=ONE)
    assert np.allclose(again.vertices, out.vertices)


# ---------------------------------------------------------------------------
# surgery

def test_surgery_direct_return_when_c_odd():
    S = default_points(3, seed=2)
    b = comb_loop(S, [0, 1], basepoint_x=S[0].real - 0.9, tooth_top=1.6)
    c = comb_loop(S, [2], basepoint_x=S[2].real + 0.7, spine_y=0.25,
                  tooth_top=1.75, tooth_halfwidth=0.11)
    b = b.with_length(ONE)
    c = c.with_length(ONE)
    L = max(b.metric_length, c.metric_length) + 1.0
    h = surgery(b, c, S, L, f=ONE)
    assert np.allclose(h.vertices, c.rebased().vertices)


def test_surgery_canonical_three_point():
    S, b, c = lemma_instance()
    b = b.with_length(ONE)
    c = c.with_length(ONE)
    L = max(b.metric_length, c.metric_length) * (1 + 1e-4)
    pb = winding_profile(b, S)
    pc = winding_profile(c, S)
    assert len(pb.odd_set) % 2 == 0 and len(pc.odd_set) % 2 == 0
    assert len(pc.odd_set - pb.odd_set) % 2 == 1
    h = surgery(b, c, S, L, f=ONE)
    ph = winding_profile(h, S)
    assert len(ph.odd_set) % 2 == 1
    assert h.metric_length <= L + 1e-9
    assert abs(h.basepoint - b.basepoint) < 1e-9 or \
        abs(h.basepoint - c.basepoint) < 1e-9


def test_surgery_exhaustive_mixed_pairs_three_point():
    # every mixed pair produces two odd loops of conserved combined length
    S, b, c = lemma_instance()
    b = b.with_length(ONE)
    c = c.with_length(ONE)
    recs = classify_intersections(b, c, S)
    crossroads = [r for r in recs if r.kind == "crossroad"]
    bridges = [r for r in recs if r.kind == "bridge"]
    assert crossroads and bridges
    total_in = b.metric_length + c.metric_length
    for p in crossroads:
        for q in bridges:
            out1, out2 = exchange_arcs(b, c, p, q, f=ONE)
            assert out1.metric_length + out2.metric_length == pytest.approx(
                total_in, abs=1e-9)
            assert len(winding_profile(out1, S).odd_set) % 2 == 1
            assert len(winding_profile(out2, S).odd_set) % 2 == 1


def test_surgery_randomized_postcondition():
    rng = np.random.default_rng(2024)
    done = 0
    while done < 50:
        S = default_points(int(rng.integers(1, 4)) * 2 + 1, seed=int(rng.integers(1e6)))
        k = len(S)
        ids = list(range(k))
        wb = set(int(i) for i in rng.choice(ids, size=2, replace=False)) \
            if k >= 2 else set()
        extra = [i for i in ids if i not in wb]
        wc_new = {extra[0]} if extra else set()
        wc = wc_new | ({list(wb)[0]} if wb and rng.random() < 0.5 else set())
        if len(wc - wb) % 2 == 0:
            continue
        b = comb_loop(S, wb, basepoint_x=min(s.real for s in S) - 1.0,
                      spine_y=0.15 + 0.05 * rng.random(), tooth_top=1.5,
                      tooth_halfwidth=0.13)
        c = comb_loop(S, wc, basepoint_x=max(s.real for s in S) + 0.8,
                      spine_y=0.24 + 0.05 * rng.random(), tooth_top=1.67,
                      tooth_halfwidth=0.1, return_y=0.06)
        b = b.with_length(ONE)
        c = c.with_length(ONE)
        L = max(b.metric_length, c.metric_length) * (1 + 1e-4)
        h = surgery(b, c, S, L, f=ONE)
        prof = winding_profile(h, S)
        assert len(prof.odd_set) % 2 == 1
        assert h.metric_length <= L + 1e-9
        done += 1


# ---------------------------------------------------------------------------
# find_odd_loop

def test_find_odd_loop_base_case():
    S = default_points(1, seed=3)
    loop = comb_loop(S, [0], basepoint_x=S[0].real - 0.8).with_length(ONE)
    out = find_odd_loop([loop], S, loop.metric_length + 1.0, S, f=ONE)
    assert len(winding_profile(out, S).odd_set) % 2 == 1


def test_find_odd_loop_three_point():
    S, b, c = lemma_instance()
    b = b.with_length(ONE)
    c = c.with_length(ONE)
    L = max(b.metric_length, c.metric_length) * (1 + 1e-4)
    out, stats = find_odd_loop_ex([b, c], S, L, S, f=ONE)
    assert len(winding_profile(out, S).odd_set) % 2 == 1
    assert stats["surgeries"] <= 1
    assert out.metric_length <= L + 1e-9


def test_find_odd_loop_randomized_five_point():
    for seed in (5, 6, 7):
        S, loops = random_instance(5, seed=seed)
        loops = [lp.with_length(ONE) for lp in loops]
        L = max(lp.metric_length for lp in loops) * (1 + 1e-4)
        out, stats = find_odd_loop_ex(loops, S, L, S, f=ONE, seed=seed)
        prof = winding_profile(out, S)
        assert len(prof.odd_set) % 2 == 1
        assert out.metric_length <= L + 1e-9
        assert stats["surgeries"] <= 2


def test_find_odd_loop_even_set_rejected():
    S, loops = random_instance(4, seed=9)
    loops = [lp.with_length(ONE) for lp in loops]
    with pytest.raises(SurgeryError) as err:
        find_odd_loop(loops, S, 1e9, S, f=ONE)
    assert err.value.code == "even-S"


def test_find_odd_loop_coverage_violated():
    S = default_points(3, seed=4)
    loop = comb_loop(S, [0], basepoint_x=S[0].real - 0.8).with_length(ONE)
    with pytest.raises(SurgeryError) as err:
        find_odd_loop([loop], S, loop.metric_length + 1.0, S, f=ONE)
    assert err.value.code == "coverage-violated"


def test_lift_coherence_on_surface():
    # run the induction over the upper ramification points of z^6+1 and
    # cross-check the output's parity against analytic continuation
    X = build_surface([1, 0, 0, 0, 0, 0, 1])
    S = X.upper_ramification_points()
    rng = np.random.default_rng(31)
    S_sorted = sorted(S, key=lambda z: z.real)
    loops = []
    for j in range(3):
        subset = {j} | ({(j + 1) % 3} if j == 1 else set())
        loops.append(comb_loop(S_sorted, subset,
                               basepoint_x=-1.6 + 1.2 * j,
                               spine_y=0.12 + 0.05 * j,
                               tooth_top=1.3 + 0.17 * j,
                               tooth_halfwidth=0.1 + 0.03 * j, tag=j))
    loops = [lp.with_length(ONE) for lp in loops]
    L = max(lp.metric_length for lp in loops) * (1 + 1e-4)
    out = find_odd_loop(loops, S_sorted, L, X, f=ONE)
    assert len(winding_profile(out, S_sorted).odd_set) % 2 == 1
    assert lift_closes(X, out.vertices) is False


def test_ensure_generic_moves_little():
    S, loops = random_instance(3, seed=44)
    fixed = ensure_generic(loops, S, seed=1)
    for before, after in zip(loops, fixed):
        assert np.max(np.abs(before.vertices - after.vertices)) <= 2e-7
