"""End-to-end certifier for the relative short-loop bound.

Pipeline: symmetrize the quotient metric under conjugation, then for each
ramification point in the upper half-plane normalize the configuration to
the football picture and extract an optimally short hoop with unit winding
there, and finally combine the hoops by winding-parity surgery into a loop,
based on the real axis, whose lift to w^2 = -P(z) does not close.  Its
endpoints upstairs are the two preimages of the basepoint, exchanged by the
free antiholomorphic involution, so the loop length bounds dist(p, tau(p)).

All estimates are one-sided: lengths of explicit curves from above, areas
by quadrature with a reported error bound, Monte Carlo minima with slack
delta = 3 standard errors.  The certificate asserts
ratio = length^2 / area <= (pi/4) (1 + delta) before it is returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .averaging import (arc_length_precise, find_short_great_circle,
                        find_short_south_hoop)
from .errors import NotAntipodalError, SurgeryError
from .football import af_factor_values, football_factor
from .metrics import (ConformalFactor, Curve, Singularity, SphereInvolution,
                      average_metric, is_invariant_under, metric_area_report,
                      mobius_pushforward_factor)
from .sphere import MobiusMap, project_array, unproject
from .surfaces import (HyperellipticSurface, SheetState, continue_sqrt,
                       lift_closes)
from .surgery import (PolyLoop, ensure_generic, find_odd_loop_ex,
                      polyloop_length, winding_profile)

PERTURBATION_SLACK = 1e-5   # genericity jitter allowance on lengths
SAMPLING_SLACK = 3e-5       # geodesic-to-polyline discretization allowance


@dataclass
class PuCertificate:
    """Short-path certificate: dist(p, tau(p))^2 / area <= (pi/4)(1+delta)."""

    p: complex
    path: Curve
    path_length: float
    area: float
    ratio: float
    slack: float
    slack_breakdown: dict
    component_curves: list          # (hoop tag, weierstrass point) pairs
    loop: PolyLoop
    odd_windings: tuple
    surgeries: int

    def to_json(self) -> dict:
        return {
            "p": [self.p.real, self.p.imag],
            "path": [[z.real, z.imag] for z in self.path.samples],
            "path_length": self.path_length,
            "area": self.area,
            "ratio": self.ratio,
            "ratio_bound": 0.25 * math.pi * (1.0 + self.slack),
            "slack": self.slack,
            "slack_breakdown": self.slack_breakdown,
            "component_curves": [[tag, [w.real, w.imag]]
                                 for tag, w in self.component_curves],
            "odd_windings": list(self.odd_windings),
            "surgeries": self.surgeries,
        }


@dataclass
class SystoleEstimate:
    value: float
    witness: Curve
    notes: dict = field(default_factory=dict)


def symmetrize(f: ConformalFactor, X: HyperellipticSurface) -> ConformalFactor:
    """Average the quotient factor under conjugation, the involution induced
    downstairs; area is unchanged and the result is conjugation-invariant."""
    return average_metric(f, SphereInvolution.conjugation())


def _normalizing_map(w: complex) -> MobiusMap:
    """Real axis to the unit circle, w to 0, conjugation to unit inversion."""
    return MobiusMap(1.0, -complex(w), 1.0, -complex(w).conjugate())


def _hoop_cover_factor(f_sym: ConformalFactor, m: MobiusMap) -> ConformalFactor:
    """Factor on the covering round sphere comparing the normalized metric
    with the football: f_cover(v) = (f_sym transported)(v^2) / af(v^2)."""
    f1 = mobius_pushforward_factor(f_sym, m, name="normalized")

    def evaluate(v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=complex)
        z = v * v
        with np.errstate(divide="ignore", invalid="ignore"):
            out = f1(z) / af_factor_values(z)
        return np.nan_to_num(out, nan=0.0, posinf=np.inf)

    sings = [Singularity(0.0, "zero"), Singularity(complex(math.inf), "zero")]
    for s in f1.singularities:
        root = np.sqrt(complex(s.location))
        sings.append(Singularity(complex(root), s.kind))
        sings.append(Singularity(-complex(root), s.kind))
    return ConformalFactor(evaluate, tuple(sings), name="hoop-cover")


@dataclass
class ShortLoopResult:
    loop: PolyLoop
    length: float
    bound: float
    slack: float
    weierstrass_point: complex


def short_loop_for_point(f: ConformalFactor, X: HyperellipticSurface,
                         w: complex, samples: int = 4000, seed: int = 1,
                         tag: int = 0, loop_vertices: int = 512) -> PolyLoop:
    """Optimally short loop in the closed upper half-plane with unit winding
    around the ramification point w, based on the real axis."""
    return _short_loop_ex(f, X, w, samples, seed, tag, loop_vertices).loop


def _short_loop_ex(f_sym: ConformalFactor, X: HyperellipticSurface, w: complex,
                   samples: int, seed: int, tag: int,
                   loop_vertices: int = 512, area_report: dict = None) -> ShortLoopResult:
    w = complex(w)
    uppers = X.upper_ramification_points()
    if not any(abs(w - r) < 1e-9 for r in uppers):
        raise ValueError("w must be a ramification point in the open upper half-plane")
    if not is_invariant_under(f_sym, SphereInvolution.conjugation(), tol=1e-6):
        raise ValueError("the factor must be conjugation-invariant; symmetrize first")

    m = _normalizing_map(w)
    fc = _hoop_cover_factor(f_sym, m)
    # keep clear of the other ramification points' preimages upstairs: the
    # squaring map shrinks chart distances near the cone points
    avoid = []
    for r in X.weierstrass_roots:
        if abs(r - w) < 1e-12:
            continue
        zeta = m(complex(r))
        for root in (np.sqrt(complex(zeta)), -np.sqrt(complex(zeta))):
            avoid.append(unproject(complex(root)))
    hoop = find_short_south_hoop(fc, samples, seed, extra_points=avoid)

    # cover arc -> unit-disk hoop -> upper half-plane loop
    t = hoop.t_start + np.linspace(0.0, math.pi, loop_vertices + 1)
    wpts = hoop.circle.chart(t)
    zeta = wpts * wpts
    z = m.inverse().apply_array(zeta)
    basepoint = complex(z[0].real, 0.0)   # endpoints map to the real axis
    verts = np.concatenate([[basepoint], z[1:-1]])
    verts = np.where(np.abs(verts.imag) < 1e-12, verts.real + 0j, verts)
    verts = np.real(verts) + 1j * np.maximum(verts.imag, 0.0)
    loop = PolyLoop(verts, 0, np.full(len(verts), tag, dtype=int))

    profile = winding_profile(loop, [w])
    if profile.mapping[0] == -1:
        loop = PolyLoop(np.concatenate([verts[:1], verts[1:][::-1]]), 0,
                        np.full(len(verts), tag, dtype=int))
        profile = winding_profile(loop, [w])
    if profile.mapping[0] != 1:
        raise SurgeryError("hoop does not wind once around its ramification point",
                           code="bad-parity")
    length = polyloop_length(f_sym, loop)
    loop = PolyLoop(loop.vertices, 0, loop.arc_tags, length)
    area_half = area_report or metric_area_report(f_sym, quadrature_level=6)
    a_upstairs = 2.0 * area_half["area"]
    slack = hoop.slack + PERTURBATION_SLACK + SAMPLING_SLACK \
        + area_half["error_bound"] / max(area_half["area"], 1e-300)
    bound = math.sqrt(0.25 * math.pi * a_upstairs) * (1.0 + slack)
    return ShortLoopResult(loop=loop, length=length, bound=bound, slack=slack,
                           weierstrass_point=w)


def verify_relative_pu(f: ConformalFactor, X: HyperellipticSurface,
                       samples: int = 4000, seed: int = 1,
                       quadrature_level: int = 6) -> PuCertificate:
    """Run the two-step pipeline and emit a certificate for the input metric."""
    area_report = metric_area_report(f, quadrature_level=quadrature_level)
    area_upstairs = 2.0 * area_report["area"]
    f_sym = symmetrize(f, X)

    uppers = sorted(X.upper_ramification_points(),
                    key=lambda r: (abs(r), math.atan2(r.imag, r.real)))
    if len(uppers) % 2 != 1:
        raise SurgeryError("expected an odd number of upper ramification points",
                           code="even-S")
    sym_report = metric_area_report(f_sym, quadrature_level=quadrature_level)
    results = []
    for i, w in enumerate(uppers):
        results.append(_short_loop_ex(f_sym, X, w, samples, seed + 7 * i, tag=i,
                                      area_report=sym_report))

    slack_len = max(r.slack for r in results)
    bound = math.sqrt(0.25 * math.pi * area_upstairs) * (1.0 + slack_len)
    loops = ensure_generic([r.loop for r in results], uppers, seed=seed)
    loops = [lp.with_length(f_sym) for lp in loops]
    for lp in loops:
        if lp.metric_length > bound:
            raise SurgeryError("hoop exceeds its certified bound",
                               code="length-bound")
    loop, stats = find_odd_loop_ex(loops, uppers, bound, X, f=f_sym, seed=seed)

    # descend to the input metric: the loop or its conjugate is short for f
    conj_loop = PolyLoop(np.conj(loop.vertices), loop.basepoint_index,
                         loop.arc_tags)
    len_f = polyloop_length(f, loop)
    len_conj = polyloop_length(f, conj_loop)
    if len_conj < len_f:
        final_loop, final_len = conj_loop, len_conj
    else:
        final_loop, final_len = loop, len_f

    if not math.isclose(final_loop.basepoint.imag, 0.0, abs_tol=1e-9):
        raise SurgeryError("certificate basepoint left the fixed circle",
                           code="basepoints")
    if lift_closes(X, np.where(np.abs(final_loop.vertices.imag) < 1e-300,
                               final_loop.vertices + 1e-12j, final_loop.vertices)):
        raise SurgeryError("certificate loop lifts to a closed loop",
                           code="bad-parity")
    start = SheetState(z=final_loop.basepoint + 1e-12j,
                       branch=X.cover.principal_branch(final_loop.basepoint + 1e-12j))
    shifted = np.where(np.abs(final_loop.vertices.imag) < 1e-300,
                       final_loop.vertices + 1e-12j, final_loop.vertices)
    end = continue_sqrt(X, shifted, start)
    if end.same_sheet(start):
        raise SurgeryError("analytic continuation closed up; parity mismatch",
                           code="bad-parity")

    slack_area = area_report["error_bound"] / max(area_report["area"], 1e-300)
    slack_total = (1.0 + slack_len) ** 2 * (1.0 + slack_area) - 1.0
    ratio = final_len**2 / area_upstairs
    if ratio > 0.25 * math.pi * (1.0 + slack_total):
        raise SurgeryError("certificate ratio exceeds the bound", code="ratio")

    tags = sorted(final_loop.tags_used())
    comps = [(t, uppers[t]) for t in tags if 0 <= t < len(uppers)]
    if len(comps) > X.genus + 1:
        raise SurgeryError("certificate uses too many special curves",
                           code="too-many-arcs")
    samples_curve = list(final_loop.vertices) + [final_loop.vertices[0]]
    profile = winding_profile(final_loop, uppers)
    return PuCertificate(
        p=final_loop.basepoint,
        path=Curve(tuple(samples_curve), closed=True),
        path_length=final_len,
        area=area_upstairs,
        ratio=ratio,
        slack=slack_total,
        slack_breakdown={
            "monte_carlo": max(r.slack - PERTURBATION_SLACK - SAMPLING_SLACK
                               for r in results),
            "perturbation": PERTURBATION_SLACK,
            "discretization": SAMPLING_SLACK,
            "quadrature": slack_area,
        },
        component_curves=comps,
        loop=final_loop,
        odd_windings=tuple(sorted(profile.odd_set)),
        surgeries=stats["surgeries"],
    )


def relative_systole(f: ConformalFactor, X: HyperellipticSurface,
                     samples: int = 4000, seed: int = 1) -> SystoleEstimate:
    """Upper bound for the least length of a loop whose lift does not close."""
    cert = verify_relative_pu(f, X, samples=samples, seed=seed)
    return SystoleEstimate(value=cert.path_length, witness=cert.path,
                           notes={"ratio": cert.ratio, "slack": cert.slack,
                                  "area": cert.area})


def verify_pu_rp2(f: ConformalFactor, samples: int = 20000, seed: int = 1,
                  quadrature_level: int = 6):
    """Classical round-quotient inequality on the projective plane.

    Half of the shortest sampled great circle projects to a noncontractible
    loop; for antipodally symmetric f both halves have equal length.
    """
    if not is_invariant_under(f, SphereInvolution.antipodal(), tol=1e-9):
        raise NotAntipodalError("factor is not antipodally invariant")
    res = find_short_great_circle(f, samples, seed,
                                  quadrature_level=quadrature_level)
    half1 = arc_length_precise(f, res.circle, 0.0, math.pi)
    half2 = arc_length_precise(f, res.circle, math.pi, 2.0 * math.pi)
    value = 0.5 * res.length
    t = np.linspace(0.0, math.pi, 257)
    witness = Curve(tuple(res.circle.chart(t)), closed=False)
    projective_area = 0.5 * res.area
    bound = 0.5 * math.pi * projective_area
    estimate = SystoleEstimate(value=value, witness=witness, notes={
        "half_lengths": (half1, half2),
        "circle_length": res.length,
        "projective_area": projective_area,
        "bound": bound,
        "slack": res.slack,
        "satisfied": value**2 <= bound * (1.0 + res.slack) + 1e-9,
    })
    return estimate
