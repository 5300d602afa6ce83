"""Winding-parity surgery on loops in a hemisphere chart.

Loops are closed chart polylines based at a marked vertex; the disk domain
is the closed upper half-plane with the real axis as boundary.  Around a
labeled point set S each loop has a winding profile, and surgery combines
two loops whose odd-winding sets differ by an odd count into one loop with
odd profile, never increasing the length bound.  Intersections of fixed
lifts to a double cover ramified at S split into crossroads (lifts meet)
and bridges (lifts pass on different sheets); exchanging arcs between a
mixed pair is the elementary move.

Loop parameters t live in [0, n): t = k + s is the point at fraction s of
segment k, counted from the basepoint.  All operations normalize loops so
the basepoint is vertex 0 and report parameters in that normalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import LoopError, NonTransverseError, SurgeryError
from .metrics import ConformalFactor, chart_segment_length, constant_factor
from .surfaces import (HyperellipticSurface, SquareRootCover, continue_branch,
                       winding_numbers)

ANGLE_TOL = 1e-4          # minimal transversal crossing angle, radians
POINT_CLEARANCE = 1e-6    # loops keep this far from labeled points
PERTURB_SCALE = 1e-7      # genericity jitter bound, chart units
PERTURB_LENGTH_SLACK = 1e-5


def _as_cover(X) -> SquareRootCover:
    if isinstance(X, HyperellipticSurface):
        return X.cover
    if isinstance(X, SquareRootCover):
        return X
    return SquareRootCover.from_points(X)


@dataclass(frozen=True)
class PolyLoop:
    """Closed chart polyline; segment k joins vertex k to vertex k+1 mod n."""

    vertices: np.ndarray
    basepoint_index: int = 0
    arc_tags: np.ndarray | None = None
    metric_length: float | None = None

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=complex)
        if len(v) < 3:
            raise LoopError("a loop needs at least 3 vertices", code="degenerate-loop")
        object.__setattr__(self, "vertices", v)
        if self.arc_tags is not None:
            tags = np.asarray(self.arc_tags, dtype=int)
            if len(tags) != len(v):
                raise LoopError("need one tag per segment", code="bad-tags")
            object.__setattr__(self, "arc_tags", tags)

    @property
    def n(self) -> int:
        return len(self.vertices)

    @property
    def basepoint(self) -> complex:
        return complex(self.vertices[self.basepoint_index])

    def rebased(self) -> "PolyLoop":
        """Copy with the basepoint rolled to vertex 0."""
        if self.basepoint_index == 0:
            return self
        k = self.basepoint_index
        tags = None if self.arc_tags is None else np.roll(self.arc_tags, -k)
        return PolyLoop(np.roll(self.vertices, -k), 0, tags, self.metric_length)

    def point_at(self, t: float) -> complex:
        n = self.n
        t = t % n
        k = int(t)
        s = t - k
        a = self.vertices[k]
        b = self.vertices[(k + 1) % n]
        return complex(a + s * (b - a))

    def segment_lengths_euclid(self) -> np.ndarray:
        return np.abs(np.roll(self.vertices, -1) - self.vertices)

    def with_length(self, f: ConformalFactor) -> "PolyLoop":
        return replace(self, metric_length=polyloop_length(f, self))

    def tags_used(self):
        if self.arc_tags is None:
            return set()
        return set(int(t) for t in self.arc_tags)


def polyloop_length(f: ConformalFactor, loop: PolyLoop) -> float:
    v = loop.vertices
    nxt = np.roll(v, -1)
    return math.fsum(chart_segment_length(f, a, b) for a, b in zip(v, nxt))


def _segment_prefix(f: ConformalFactor, loop: PolyLoop) -> np.ndarray:
    """Cumulative metric length up to each vertex (length n+1)."""
    v = loop.vertices
    nxt = np.roll(v, -1)
    seg = [chart_segment_length(f, a, b) for a, b in zip(v, nxt)]
    out = np.zeros(len(seg) + 1)
    out[1:] = np.cumsum(seg)
    return out


def _arc_metric_length(f, loop, prefix, t0: float, t1: float) -> float:
    """Metric length of the forward arc from t0 to t1 (t1 may exceed n)."""
    n = loop.n

    def upto(t):
        k = int(t % n)
        s = (t % n) - k
        base = prefix[k]
        if s > 0:
            base += chart_segment_length(f, loop.vertices[k], loop.point_at(t))
        return base + prefix[n] * (t // n)

    return upto(t1) - upto(t0)


@dataclass(frozen=True)
class WindingProfile:
    mapping: dict
    odd_set: frozenset

    @property
    def odd_count(self) -> int:
        return len(self.odd_set)


def winding_profile(loop: PolyLoop, S) -> WindingProfile:
    """Integer winding numbers of the loop around each labeled point."""
    pts = np.asarray([complex(s) for s in S], dtype=complex)
    if len(pts):
        gap = np.min(np.abs(loop.vertices[:, None] - pts[None, :]))
        if gap < POINT_CLEARANCE:
            raise LoopError("a vertex sits within 1e-6 of a labeled point")
    winds = winding_numbers(loop.vertices, pts) if len(pts) else np.zeros(0, int)
    mapping = {i: int(w) for i, w in enumerate(winds)}
    odd = frozenset(i for i, w in mapping.items() if w % 2 != 0)
    return WindingProfile(mapping, odd)


# ---------------------------------------------------------------------------
# intersections

def _cross(u: np.ndarray, w: np.ndarray) -> np.ndarray:
    return u.real * w.imag - u.imag * w.real


def _raw_intersections(va: np.ndarray, vb: np.ndarray, same: bool):
    """Transverse crossings between two closed polylines.

    Returns (t_a, t_b, points).  Raises ``NonTransverseError`` on grazing or
    near-parallel overlapping configurations, which callers remove by the
    genericity perturbation.
    """
    A0 = va
    A1 = np.roll(va, -1)
    B0 = vb
    B1 = np.roll(vb, -1)
    r = (A1 - A0)[:, None]
    s = (B1 - B0)[None, :]
    delta = B0[None, :] - A0[:, None]
    denom = _cross(r, s)
    scale = np.abs(r) * np.abs(s)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = _cross(delta, s) / denom
        u = _cross(delta, r) / denom
    inside = (t > -1e-12) & (t < 1 - 1e-12) & (u > -1e-12) & (u < 1 - 1e-12)
    if same:
        n = len(va)
        ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        adjacent = (ii == jj) | ((ii + 1) % n == jj) | ((jj + 1) % n == ii)
        inside &= ~adjacent
        inside &= ii < jj
    transverse = np.abs(denom) >= ANGLE_TOL * 0.5 * scale
    grazing = inside & ~transverse
    if np.any(grazing):
        raise NonTransverseError("crossing angle below tolerance; perturb the loops")
    hits = inside & transverse
    # a crossing essentially at a vertex is also a genericity failure
    near_vertex = hits & ((t < 1e-9) | (t > 1 - 1e-9) | (u < 1e-9) | (u > 1 - 1e-9))
    if np.any(near_vertex):
        raise NonTransverseError("crossing too close to a vertex; perturb the loops")
    ia, ib = np.nonzero(hits)
    ta = ia + t[ia, ib]
    tb = ib + u[ia, ib]
    pts = A0[ia] + t[ia, ib] * (A1 - A0)[ia]
    order = np.argsort(ta, kind="stable")
    return ta[order], tb[order], pts[order]


def loop_intersections(b: PolyLoop, c: PolyLoop):
    return _raw_intersections(b.vertices, c.vertices, same=False)


def self_intersections(loop: PolyLoop):
    return _raw_intersections(loop.vertices, loop.vertices, same=True)


@dataclass(frozen=True)
class IntersectionRecord:
    location: complex
    t_b: float
    t_c: float
    kind: str | None = None    # "crossroad" | "bridge"


def _branches_at_params(cover: SquareRootCover, loop: PolyLoop,
                        params: np.ndarray) -> np.ndarray:
    """Branch of the cover's square root continued from the basepoint
    (principal branch) to each parameter along the loop."""
    order = np.argsort(params, kind="stable")
    out = np.empty(len(params), dtype=complex)
    v = loop.vertices
    n = loop.n
    w = cover.principal_branch(complex(v[0]))
    pos_z = complex(v[0])
    pos_t = 0.0
    for idx in order:
        t = float(params[idx])
        # crossing params are never integers in a generic configuration
        for k in range(math.floor(pos_t) + 1, math.floor(t) + 1):
            z_next = complex(v[k % n])
            w = continue_branch(cover, [pos_z, z_next], w, closed=False)
            pos_z = z_next
        z_t = loop.point_at(t)
        w = continue_branch(cover, [pos_z, z_t], w, closed=False)
        pos_z = z_t
        pos_t = t
        out[idx] = w
    return out


def classify_intersections(b: PolyLoop, c: PolyLoop, X) -> list[IntersectionRecord]:
    """Classify every b/c crossing as a crossroad or a bridge.

    Lifts are fixed by continuing the principal branch from each loop's
    basepoint; choosing the other lift of one loop flips every kind.
    """
    cover = _as_cover(X)
    b = b.rebased()
    c = c.rebased()
    tb, tc, pts = loop_intersections(b, c)
    if len(tb) == 0:
        return []
    wb = _branches_at_params(cover, b, tb)
    wc = _branches_at_params(cover, c, tc)
    same = (wb * np.conj(wc)).real > 0
    return [IntersectionRecord(complex(p), float(a), float(g),
                               "crossroad" if s else "bridge")
            for p, a, g, s in zip(pts, tb, tc, same)]


# ---------------------------------------------------------------------------
# arc bookkeeping

def _arc_points(loop: PolyLoop, t0: float, t1: float):
    """Points and per-piece tags of the forward arc from t0 to t1 (> t0)."""
    n = loop.n
    pts = [loop.point_at(t0)]
    tags = []
    tag_of = (lambda k: int(loop.arc_tags[k % n])) if loop.arc_tags is not None \
        else (lambda k: -1)
    j = math.floor(t0) + 1
    while j < t1 - 1e-12:
        pts.append(complex(loop.vertices[j % n]))
        tags.append(tag_of(j - 1))
        j += 1
    pts.append(loop.point_at(t1))
    tags.append(tag_of(math.floor(t1 - 1e-12)))
    return pts, tags


def _assemble_loop(chunks, basepoint: complex) -> PolyLoop:
    """Concatenate arcs (point lists with per-piece tags) into a closed loop."""
    pts: list[complex] = []
    tags: list[int] = []
    for chunk_pts, chunk_tags in chunks:
        if pts and abs(pts[-1] - chunk_pts[0]) < 1e-12:
            chunk_pts = chunk_pts[1:]
        else:
            if pts:
                raise SurgeryError("arc junction mismatch", code="junction-mismatch")
            pts.append(chunk_pts[0])
            chunk_pts = chunk_pts[1:]
        pts.extend(chunk_pts)
        tags.extend(chunk_tags)
    if abs(pts[-1] - pts[0]) < 1e-12:
        pts.pop()
    else:
        raise SurgeryError("assembled loop is not closed", code="junction-mismatch")
    # drop zero-length pieces created by junction points
    clean_pts = [pts[0]]
    clean_tags = []
    for p, tg in zip(pts[1:] + [pts[0]], tags):
        if abs(p - clean_pts[-1]) < 1e-13:
            continue
        clean_pts.append(p)
        clean_tags.append(tg)
    if abs(clean_pts[-1] - clean_pts[0]) < 1e-13:
        clean_pts.pop()
    else:
        clean_tags.append(tags[-1])
    base = int(np.argmin(np.abs(np.asarray(clean_pts) - basepoint)))
    loop = PolyLoop(np.asarray(clean_pts), base, np.asarray(clean_tags))
    return loop.rebased()


def _oriented(points, tags, start: complex):
    if abs(points[0] - start) <= abs(points[-1] - start):
        return points, tags
    return points[::-1], tags[::-1]


def exchange_arcs(b: PolyLoop, c: PolyLoop, p: IntersectionRecord,
                  q: IntersectionRecord, f: ConformalFactor | None = None):
    """Swap the arcs of b and c between two crossings.

    The arcs exchanged are the ones not containing the basepoints.  The two
    output loops keep the basepoints of b and c and their combined metric
    length equals the combined input length.
    """
    if abs(p.t_b - q.t_b) < 1e-12 or abs(p.t_c - q.t_c) < 1e-12:
        raise SurgeryError("need two distinct intersection points", code="same-point")
    b = b.rebased()
    c = c.rebased()
    tb0, tb1 = sorted((p.t_b, q.t_b))
    tc0, tc1 = sorted((p.t_c, q.t_c))
    b_head, b_head_tags = _arc_points(b, 0.0, tb0)
    b_tail, b_tail_tags = _arc_points(b, tb1, float(b.n))
    b_mid, b_mid_tags = _arc_points(b, tb0, tb1)
    c_head, c_head_tags = _arc_points(c, 0.0, tc0)
    c_tail, c_tail_tags = _arc_points(c, tc1, float(c.n))
    c_mid, c_mid_tags = _arc_points(c, tc0, tc1)

    cm_pts, cm_tags = _oriented(c_mid, c_mid_tags, b_head[-1])
    out1 = _assemble_loop([(b_head, b_head_tags), (cm_pts, cm_tags),
                           (b_tail, b_tail_tags)], b.basepoint)
    bm_pts, bm_tags = _oriented(b_mid, b_mid_tags, c_head[-1])
    out2 = _assemble_loop([(c_head, c_head_tags), (bm_pts, bm_tags),
                           (c_tail, c_tail_tags)], c.basepoint)
    if f is not None:
        out1 = out1.with_length(f)
        out2 = out2.with_length(f)
    return out1, out2


def remove_bad_subloop(loop: PolyLoop, X, f: ConformalFactor | None = None) -> PolyLoop:
    """Excise basepoint-free subloops whose lifts do not close, repeatedly.

    Each excision shortens the loop and flips its lift-closure parity.
    """
    cover = _as_cover(X)
    loop = loop.rebased()
    for _ in range(loop.n * 2 + 8):
        cut = _first_bad_subloop(cover, loop)
        if cut is None:
            out = loop
            break
        t1, t2, x = cut
        head, head_tags = _arc_points(loop, 0.0, t1)
        tail, tail_tags = _arc_points(loop, t2, float(loop.n))
        loop = _assemble_loop([(head, head_tags), (tail, tail_tags)],
                              loop.basepoint)
    else:
        raise SurgeryError("subloop cleanup did not terminate", code="cleanup-failed")
    if f is not None:
        out = out.with_length(f)
    return out


def _first_bad_subloop(cover: SquareRootCover, loop: PolyLoop):
    t1s, t2s, pts = self_intersections(loop)
    for t1, t2, x in zip(t1s, t2s, pts):
        sub, _ = _arc_points(loop, float(t1), float(t2))
        sub = sub[:-1]
        if len(sub) < 3:
            continue
        winds = winding_numbers(np.asarray(sub), np.asarray(cover.roots))
        if int(np.sum(winds % 2 != 0)) % 2 != 0:
            return float(t1), float(t2), complex(x)
    return None


# ---------------------------------------------------------------------------
# the surgery lemma and the induction

def _parity(loop: PolyLoop, S) -> WindingProfile:
    return winding_profile(loop, S)


def surgery(b: PolyLoop, c: PolyLoop, S, L: float, X=None,
            f: ConformalFactor | None = None) -> PolyLoop:
    """Produce a loop of length <= L with odd winding set, given
    |odd(c) \\ odd(b)| odd and both inputs of length <= L.

    Lift classification always runs on the double cover of the disk
    ramified exactly at S, the cover the parity argument lives on; ``X`` is
    kept for callers that track a larger ambient cover and only enters the
    cross-checks they perform afterwards.
    """
    f = f or constant_factor(1.0)
    cover = SquareRootCover.from_points([complex(s) for s in S])
    b = b.rebased().with_length(f)
    c = c.rebased().with_length(f)
    pb = _parity(b, S)
    pc = _parity(c, S)
    if len(pc.odd_set - pb.odd_set) % 2 == 0:
        raise SurgeryError("|odd(c) \\ odd(b)| must be odd", code="bad-parity")
    if b.metric_length > L + 1e-9 or c.metric_length > L + 1e-9:
        raise SurgeryError("input loops exceed the length bound", code="length-bound")
    if pb.odd_count % 2 == 1:
        return b
    if pc.odd_count % 2 == 1:
        return c

    # both lifts close; excising a non-closing subloop already yields an
    # odd loop not longer than its parent
    for loop in (b, c):
        cleaned = remove_bad_subloop(loop, cover, f)
        if _parity(cleaned, S).odd_count % 2 == 1:
            return cleaned
        if loop is b:
            b = cleaned
        else:
            c = cleaned

    records = classify_intersections(b, c, cover)
    crossroads = [r for r in records if r.kind == "crossroad"]
    bridges = [r for r in records if r.kind == "bridge"]
    if not crossroads or not bridges:
        raise SurgeryError(
            "no mixed crossroad/bridge pair found; classification inconsistent",
            code="no-mixed-pair")

    prefix_b = _segment_prefix(f, b)
    prefix_c = _segment_prefix(f, c)

    def output_lengths(p, q):
        tb0, tb1 = sorted((p.t_b, q.t_b))
        tc0, tc1 = sorted((p.t_c, q.t_c))
        mid_b = _arc_metric_length(f, b, prefix_b, tb0, tb1)
        mid_c = _arc_metric_length(f, c, prefix_c, tc0, tc1)
        len1 = b.metric_length - mid_b + mid_c
        len2 = c.metric_length - mid_c + mid_b
        return len1, len2

    best = None
    for p in crossroads:
        for q in bridges:
            l1, l2 = output_lengths(p, q)
            key = (max(l1, l2), min(l1, l2), p.t_b, q.t_b)
            if best is None or key < best[0]:
                best = (key, p, q)
    _, p, q = best
    out1, out2 = exchange_arcs(b, c, p, q, f)
    candidates = sorted((out1, out2), key=lambda lp: lp.metric_length)
    for cand in candidates:
        if _parity(cand, S).odd_count % 2 == 1 and cand.metric_length <= L + 1e-9:
            return cand
    raise SurgeryError("exchanged loops fail the parity postcondition",
                       code="no-mixed-pair")


def find_odd_loop(loops, S, L: float, X, f: ConformalFactor | None = None,
                  seed: int = 0) -> PolyLoop:
    """Induction of the surgery lemma over an odd labeled set.

    Every point of S must lie inside at least one input loop; the result is
    based at one of the input basepoints, has odd winding set, length <= L,
    and uses at most (|S|-1)/2 surgeries.
    """
    loop, _ = find_odd_loop_ex(loops, S, L, X, f=f, seed=seed)
    return loop


def find_odd_loop_ex(loops, S, L: float, X, f: ConformalFactor | None = None,
                     seed: int = 0):
    f = f or constant_factor(1.0)
    S = [complex(s) for s in S]
    if len(S) % 2 == 0:
        raise SurgeryError("the labeled set must have odd size", code="even-S")
    loops = [lp.rebased().with_length(f) for lp in loops]
    for lp in loops:
        if lp.metric_length > L + 1e-9:
            raise SurgeryError("input loop exceeds the length bound",
                               code="length-bound")
    bases = [lp.basepoint for lp in loops]
    for i in range(len(bases)):
        for j in range(i + 1, len(bases)):
            if abs(bases[i] - bases[j]) < 1e-9:
                raise SurgeryError("basepoints must be distinct", code="basepoints")
    profiles = [winding_profile(lp, S) for lp in loops]
    covered = set()
    for pr in profiles:
        covered |= {i for i, w in pr.mapping.items() if w != 0}
    if covered != set(range(len(S))):
        raise SurgeryError("some labeled point is inside no loop",
                           code="coverage-violated")

    stats = {"surgeries": 0}

    def recurse(active_loops, ids):
        if not active_loops:
            raise SurgeryError("ran out of loops during the induction",
                               code="coverage-violated")
        bloop = active_loops[0]
        profile = winding_profile(bloop, S)
        odd_here = profile.odd_set & ids
        if len(odd_here) % 2 == 1:
            return bloop
        if not odd_here:
            return recurse(active_loops[1:], ids)
        reduced = ids - odd_here
        cloop = recurse(active_loops[1:], reduced)
        stats["surgeries"] += 1
        # the surgery lemma runs on the cover ramified at the current subset
        return surgery(bloop, cloop, [S[i] for i in sorted(ids)], L, X, f)

    out = recurse(loops, frozenset(range(len(S))))
    out = out.with_length(f)
    final = winding_profile(out, S)
    if final.odd_count % 2 != 1:
        raise SurgeryError("induction produced an even loop", code="bad-parity")
    stats["odd_set"] = final.odd_set
    return out, stats


# ---------------------------------------------------------------------------
# genericity

def ensure_generic(loops, S, seed: int = 0, rounds: int = 12):
    """Jitter vertices by at most 1e-7 chart units until all crossings are
    transverse, away from vertices and basepoints, and no vertex crowds a
    labeled point.  Near-real vertices only move along the real axis."""
    rng = np.random.default_rng(seed)
    S = np.asarray([complex(s) for s in S], dtype=complex)
    loops = [lp.rebased() for lp in loops]
    for round_i in range(rounds):
        bad = _genericity_problems(loops, S)
        if not bad:
            return loops
        new_loops = []
        for k, lp in enumerate(loops):
            v = lp.vertices.copy()
            idx = bad.get(k, set())
            for i in idx:
                step = PERTURB_SCALE * 0.5
                jitter = step * (rng.random() * 2 - 1) \
                    + 1j * step * (rng.random() * 2 - 1)
                if abs(v[i].imag) < 2 * PERTURB_SCALE:
                    jitter = complex(jitter.real, 0.0)
                v[i] = v[i] + jitter
            new_loops.append(PolyLoop(v, 0, lp.arc_tags, None))
        loops = new_loops
    raise NonTransverseError("could not reach a generic configuration")


def _genericity_problems(loops, S):
    bad: dict = {}

    def mark(which, idx):
        bad.setdefault(which, set()).add(int(idx) % loops[which].n)

    for k, lp in enumerate(loops):
        if len(S):
            d = np.abs(lp.vertices[:, None] - S[None, :])
            for i in np.nonzero(np.min(d, axis=1) < POINT_CLEARANCE)[0]:
                mark(k, i)
        try:
            t1, t2, _ = self_intersections(lp)
            _check_crossing_spacing(lp, lp, t1, t2, k, k, mark)
        except NonTransverseError:
            for i in range(lp.n):
                mark(k, i)
    for a in range(len(loops)):
        for b in range(a + 1, len(loops)):
            try:
                ta, tb, _ = loop_intersections(loops[a], loops[b])
                _check_crossing_spacing(loops[a], loops[b], ta, tb, a, b, mark)
            except NonTransverseError:
                for i in range(loops[a].n):
                    mark(a, i)
    return bad


def _check_crossing_spacing(la, lb, ta, tb, ka, kb, mark):
    # crossings that nearly coincide (triple points) or sit at a basepoint
    for t_arr, loop, k in ((ta, la, ka), (tb, lb, kb)):
        for t in t_arr:
            if t % loop.n < 1e-7 or loop.n - (t % loop.n) < 1e-7:
                mark(k, int(t))
    if len(ta) >= 2:
        pts = np.asarray([la.point_at(t) for t in ta])
        d = np.abs(pts[:, None] - pts[None, :]) + np.eye(len(pts))
        close = np.nonzero(np.min(d, axis=1) < 1e-7)[0]
        for i in close:
            mark(ka, int(ta[i]))
            mark(kb, int(tb[i]))
