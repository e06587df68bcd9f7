# Numerical integration of the geodesic field on the line-bundle total space
# over P^1, with chart switching, event detection, loop geometry and
# omega-limit classification.
#
# State per chart: (zeta, v) with dzeta/dt = X(zeta) v, dv/dt = -Y(zeta) v^2.
# A third component w accumulates int Y(zeta) v dt, so exp(w) v stays constant
# along exact trajectories (horizontal first integral); its drift is the main
# accuracy diagnostic.

from __future__ import annotations

import bisect
import cmath
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from .algebra import poly_eval
from .fields import CHART_INF, CHART_ZERO, ConnectionData, ProjPoint
from .germs import APPARENT

# Dormand-Prince 5(4) tableau
_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_DP_B4 = (
    5179 / 57600,
    0.0,
    7571 / 16695,
    393 / 640,
    -92097 / 339200,
    187 / 2100,
    1 / 40,
)

SWITCH_OUT = 1.5  # leave the chart beyond this |zeta|

EV_POLE = "pole_approach"
EV_ESCAPE = "escape"
EV_BLOWUP = "blow_up_time"
EV_SWITCH = "chart_switch"
EV_CROSSING = "self_intersection"
EV_RETURN = "closed_return"

OMEGA_POLE = "pole"
OMEGA_CLOSED = "closed"
OMEGA_ACC_CLOSED = "accumulates_closed"
OMEGA_CYCLE = "cycle_candidate"
OMEGA_INFINITE = "infinitely_self_intersecting"
OMEGA_UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class ChartState:
    chart: str
    zeta: complex
    v: complex
    t: float

    def point(self) -> ProjPoint:
        return ProjPoint.make(self.chart, self.zeta)

    def sphere(self) -> tuple[float, float, float]:
        return _sphere(self.chart, self.zeta)


def _sphere(chart: str, z: complex) -> tuple[float, float, float]:
    n = z.real * z.real + z.imag * z.imag
    d = 1.0 + n
    if chart == CHART_ZERO:
        return (2 * z.real / d, 2 * z.imag / d, (n - 1) / d)
    return (2 * z.real / d, -2 * z.imag / d, (1 - n) / d)


def chordal(a: tuple[float, float, float], b: tuple[float, float, float]) -> float:
    return 0.5 * math.sqrt(
        (a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 + (a[2] - b[2]) ** 2
    )


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    t_max: float = 50.0
    escape_radius: float = 1e6
    pole_radius: float = 1e-3
    max_steps: int = 400_000
    record_stride: float = 0.05
    record_stride_rel: float = 0.02  # step cap grows like this fraction of |t|
    zeta_escape_radius: float = 4.0  # single-chart models only
    return_radius: float = 2e-3  # chordal closed-return capture
    two_sided: bool = False
    classify: bool = True

    def __post_init__(self) -> None:
        for name in (
            "rel_tol",
            "abs_tol",
            "t_max",
            "escape_radius",
            "pole_radius",
            "record_stride",
            "zeta_escape_radius",
            "return_radius",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.rel_tol < 1e-13:
            raise ValueError("rel_tol below 1e-13 is not honored by the scheme")
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")


@dataclass(frozen=True)
class Event:
    kind: str
    t: float
    direction: Optional[ProjPoint] = None
    t1: Optional[float] = None
    t2: Optional[float] = None
    point: Optional[ProjPoint] = None
    external_angle: Optional[float] = None
    enclosed: tuple[int, ...] = ()
    residue_sum: Optional[complex] = None
    angle_residual: Optional[float] = None
    multiplier: Optional[complex] = None
    simple: Optional[bool] = None
    resolved: bool = True


@dataclass
class Trajectory:
    samples: list[ChartState]
    events: list[Event]
    invariant_drift: float
    drifts: list[float] = field(default_factory=list)  # running max per sample
    omega_class: str = OMEGA_UNDETERMINED
    omega_direction: Optional[ProjPoint] = None
    diagnostics: dict = field(default_factory=dict)

    def sample_times(self) -> list[float]:
        return [s.t for s in self.samples]

    def terminal(self) -> ChartState:
        return self.samples[-1]


# ---------------------------------------------------------------------------
# lifting C^2 initial data
# ---------------------------------------------------------------------------

def lift_nu_polar(w: tuple[complex, complex], nu: int) -> ChartState:
    """nu-polar lift: chart by the larger coordinate, fiber value w_j^nu."""
    w1, w2 = complex(w[0]), complex(w[1])
    if w1 == 0 and w2 == 0:
        raise ValueError("cannot lift the origin")
    if abs(w2) <= abs(w1):
        return ChartState(CHART_ZERO, w2 / w1, w1**nu, 0.0)
    return ChartState(CHART_INF, w1 / w2, w2**nu, 0.0)


def chart_transition(state: ChartState, nu: int) -> ChartState:
    """Exact transition zeta -> 1/zeta, v -> zeta^nu v."""
    new_chart = CHART_INF if state.chart == CHART_ZERO else CHART_ZERO
    return ChartState(new_chart, 1.0 / state.zeta, state.zeta**nu * state.v, state.t)


def unlift(state: ChartState, nu: int) -> tuple[complex, complex]:
    """One nu-polar preimage of the state (principal root of the fiber)."""
    root = state.v ** (1.0 / nu) if nu > 1 else state.v
    if state.chart == CHART_ZERO:
        return (root, state.zeta * root)
    return (state.zeta * root, root)


# ---------------------------------------------------------------------------
# right-hand side
# ---------------------------------------------------------------------------

def geodesic_rhs(state: ChartState, cd: ConnectionData) -> tuple[complex, complex]:
    x, y = cd.chart_polys(state.chart)
    xv = poly_eval(x, state.zeta)
    yv = poly_eval(y, state.zeta) if y else 0j
    return (xv * state.v, -yv * state.v * state.v)


def _rhs3(
    x: Sequence[complex], y: Sequence[complex], z: complex, v: complex
) -> tuple[complex, complex, complex]:
    xv = poly_eval(x, z)
    yv = poly_eval(y, z) if y else 0j
    yvv = yv * v
    return (xv * v, -yvv * v, yvv)


# ---------------------------------------------------------------------------
# the integrator
# ---------------------------------------------------------------------------

def integrate(cd: ConnectionData, init: ChartState, cfg: IntegratorConfig) -> Trajectory:
    """Adaptive embedded RK5(4) integration of the geodesic field.

    Stops at t_max, pole approach (chordal distance below pole_radius with
    decreasing speed, non-apparent directions only), escape (|v| beyond the
    escape radius, or |zeta| beyond the model window for single-chart data,
    or a detected finite-time blow-up), a closed return, or the step budget.
    """
    if init.v == 0:
        raise ValueError("initial state lies on the zero section")
    if cfg.two_sided:
        if init.t != 0.0:
            raise ValueError("maximal (two-sided) integration anchors at t = 0")
        fwd = integrate(cd, init, replace(cfg, two_sided=False, classify=False))
        back_raw = integrate(
            cd.negated(), init, replace(cfg, two_sided=False, classify=False)
        )
        samples = [replace(s, t=-s.t) for s in back_raw.samples[::-1]]
        drifts = back_raw.drifts[::-1]
        events = [
            replace(
                e,
                t=-e.t,
                t1=None if e.t2 is None else -e.t2,
                t2=None if e.t1 is None else -e.t1,
            )
            for e in back_raw.events[::-1]
        ]
        samples.extend(fwd.samples[1:])
        drifts.extend(fwd.drifts[1:])
        events.extend(fwd.events)
        traj = Trajectory(
            samples,
            events,
            max(fwd.invariant_drift, back_raw.invariant_drift),
            drifts,
            diagnostics={"forward_stop": fwd.diagnostics.get("stop"),
                         "backward_stop": back_raw.diagnostics.get("stop")},
        )
        if cfg.classify:
            _classify_into(traj, cd, cfg)
        return traj

    pole_pts = [
        (d.point.sphere(), d.point)
        for d in cd.directions
        if d.sing_class != APPARENT
    ]
    chart = init.chart
    if cd.single_chart and chart != CHART_ZERO:
        raise ValueError("model connections live in a single chart")
    z, v, t = init.zeta, init.v, init.t
    w = 0j
    v_ref = v
    drift = 0.0
    drifts = [0.0]
    samples = [ChartState(chart, z, v, t)]
    events: list[Event] = []
    stop = None

    h = min(cfg.record_stride, 1e-3)
    prev_speed = None
    recent_v: list[float] = [abs(v)]
    start_sphere = _sphere(chart, z)
    prev_sphere = start_sphere
    excursion = 0.0
    returned_arm = False
    return_pending: Optional[int] = None

    x, y = cd.chart_polys(chart)
    steps = 0
    while steps < cfg.max_steps:
        steps += 1
        if t + h > cfg.t_max:
            h = cfg.t_max - t
            if h <= 1e-15 * max(1.0, abs(t)):
                stop = "t_max"
                break
        # one embedded step
        k: list[tuple[complex, complex, complex]] = []
        ok = True
        for i in range(7):
            zi, vi, wi = z, v, w
            for j, aij in enumerate(_DP_A[i]):
                if aij:
                    zi += h * aij * k[j][0]
                    vi += h * aij * k[j][1]
                    wi += h * aij * k[j][2]
            ki = _rhs3(x, y, zi, vi)
            if not (
                math.isfinite(ki[0].real)
                and math.isfinite(ki[0].imag)
                and math.isfinite(ki[1].real)
                and math.isfinite(ki[1].imag)
            ):
                ok = False
                break
            k.append(ki)
        if ok:
            z5, v5, w5 = z, v, w
            z4, v4 = z, v
            for i in range(7):
                z5 += h * _DP_B5[i] * k[i][0]
                v5 += h * _DP_B5[i] * k[i][1]
                w5 += h * _DP_B5[i] * k[i][2]
                z4 += h * _DP_B4[i] * k[i][0]
                v4 += h * _DP_B4[i] * k[i][1]
            sc_z = cfg.abs_tol + cfg.rel_tol * max(abs(z), abs(z5))
            sc_v = cfg.abs_tol + cfg.rel_tol * max(abs(v), abs(v5))
            err = math.sqrt(
                0.5 * ((abs(z5 - z4) / sc_z) ** 2 + (abs(v5 - v4) / sc_v) ** 2)
            )
        else:
            err = math.inf
        if err > 1.0:
            # rejected: shrink and maybe flag a finite-time blow-up
            h *= max(0.2, 0.9 * err**-0.2) if math.isfinite(err) else 0.2
            if h < 1e-14 * max(1.0, abs(t)):
                grew = len(recent_v) >= 10 and recent_v[-1] > 2.0 * recent_v[0]
                kind = EV_BLOWUP if grew else None
                if kind:
                    events.append(Event(kind=kind, t=t))
                    stop = "blow_up"
                else:
                    stop = "step_underflow"
                break
            continue
        t += h
        z, v, w = z5, v5, w5
        h *= min(5.0, max(0.2, 0.9 * err**-0.2 if err > 0 else 5.0))
        h = min(h, max(cfg.record_stride, cfg.record_stride_rel * abs(t)))

        if v == 0:
            stop = "fiber_underflow"
            break
        recent_v.append(abs(v))
        if len(recent_v) > 10:
            recent_v.pop(0)
        # horizontal first integral: exp(w) v / v_ref == 1 per chart segment;
        # evaluated in log form so near-blow-up states cannot overflow
        dev = w + cmath.log(v / v_ref)
        dev = complex(dev.real, _wrap_angle(dev.imag))
        if abs(dev.real) < 30:
            drift = max(drift, abs(cmath.exp(dev) - 1.0))
        else:
            drift = math.inf
        drifts.append(drift)

        if not cd.single_chart and abs(z) > SWITCH_OUT:
            new_chart = CHART_INF if chart == CHART_ZERO else CHART_ZERO
            v = z**cd.nu * v
            z = 1.0 / z
            chart = new_chart
            x, y = cd.chart_polys(chart)
            w = 0j
            v_ref = v
            prev_speed = None
            events.append(Event(kind=EV_SWITCH, t=t))
        samples.append(ChartState(chart, z, v, t))

        here = _sphere(chart, z)
        # escape tests
        if abs(v) > cfg.escape_radius:
            events.append(Event(kind=EV_ESCAPE, t=t))
            stop = "escape"
            break
        if cd.single_chart and abs(z) > cfg.zeta_escape_radius:
            events.append(Event(kind=EV_ESCAPE, t=t))
            stop = "escape"
            break
        # pole approach: chordal proximity with decreasing speed
        speed = abs(poly_eval(x, z) * v)
        hit = None
        for sph, pt in pole_pts:
            if chordal(here, sph) < cfg.pole_radius:
                hit = pt
                break
        if hit is not None and (prev_speed is None or speed <= prev_speed * (1 + 1e-9)):
            events.append(Event(kind=EV_POLE, t=t, direction=hit))
            stop = "pole"
            break
        prev_speed = speed
        # closed-return watch; the capture radius follows the sample spacing,
        # and refinement waits until the approach is interior to the window
        ds = chordal(here, prev_sphere)
        prev_sphere = here
        capture = max(cfg.return_radius, 1.5 * ds)
        dist0 = chordal(here, start_sphere)
        excursion = max(excursion, dist0)
        if excursion > 8 * capture and dist0 > 4 * capture:
            returned_arm = True
        if returned_arm and dist0 < capture and len(samples) >= 3:
            returned_arm = False
            return_pending = 3
        if return_pending is not None:
            return_pending -= 1
            if return_pending <= 0:
                return_pending = None
                ev = _refine_return(samples, cd, cfg)
                if ev is not None:
                    events.append(ev)
                    stop = "closed_return"
                    break
    else:
        stop = "max_steps"

    if stop is None:
        stop = "t_max"
    traj = Trajectory(
        samples, events, drift, drifts, diagnostics={"stop": stop, "steps": steps}
    )
    if cfg.classify:
        _classify_into(traj, cd, cfg)
    return traj


def _hermite(
    s0: ChartState, s1: ChartState, cd: ConnectionData, t: float
) -> tuple[complex, complex]:
    """Cubic Hermite interpolation of (zeta, v) inside one chart segment."""
    h = s1.t - s0.t
    if h <= 0:
        return s0.zeta, s0.v
    u = (t - s0.t) / h
    d0 = geodesic_rhs(s0, cd)
    d1 = geodesic_rhs(s1, cd)
    h00 = (1 + 2 * u) * (1 - u) ** 2
    h10 = u * (1 - u) ** 2
    h01 = u * u * (3 - 2 * u)
    h11 = u * u * (u - 1)
    z = h00 * s0.zeta + h10 * h * d0[0] + h01 * s1.zeta + h11 * h * d1[0]
    v = h00 * s0.v + h10 * h * d0[1] + h01 * s1.v + h11 * h * d1[1]
    return z, v


def _segment_state(
    samples: Sequence[ChartState], idx: int, cd: ConnectionData, t: float
) -> ChartState:
    s0, s1 = samples[idx], samples[idx + 1]
    if s0.chart != s1.chart:
        return s0 if abs(t - s0.t) <= abs(t - s1.t) else s1
    z, v = _hermite(s0, s1, cd, t)
    return ChartState(s0.chart, z, v, t)


def _tangent_in_chart(state: ChartState, cd: ConnectionData, chart: str) -> complex:
    d = geodesic_rhs(state, cd)[0]
    if state.chart == chart:
        return d
    # dzeta' = d(1/zeta)/dt = -zeta'/zeta^2
    return -d / (state.zeta * state.zeta)


def _refine_return(
    samples: Sequence[ChartState], cd: ConnectionData, cfg: IntegratorConfig
) -> Optional[Event]:
    """Confirm a tangential return to the initial point and measure it."""
    first = samples[0]
    base = first.sphere()
    got = _closest_approach(samples, cd, base, max(0, len(samples) - 9), len(samples) - 1)
    if got is None:
        return None
    t_star, state, d_star = got
    if d_star > cfg.return_radius:
        return None
    chart = first.chart
    tan0 = _tangent_in_chart(first, cd, chart)
    tan1 = _tangent_in_chart(state, cd, chart)
    if tan0 == 0 or tan1 == 0:
        return None
    angle = _wrap_angle(cmath.phase(tan1 / tan0))
    if abs(angle) > 0.08:
        return None
    multiplier = tan1 / tan0
    return Event(
        kind=EV_RETURN,
        t=t_star,
        t1=first.t,
        t2=t_star,
        point=first.point(),
        multiplier=multiplier,
        external_angle=angle,
    )


def _wrap_angle(a: float) -> float:
    while a <= -math.pi:
        a += 2 * math.pi
    while a > math.pi:
        a -= 2 * math.pi
    return a


def _closest_approach(
    samples: Sequence[ChartState],
    cd: ConnectionData,
    base: tuple[float, float, float],
    lo: int,
    hi: int,
) -> Optional[tuple[float, ChartState, float]]:
    """Golden-section closest approach to a sphere point over segments."""
    best = None
    best_d = math.inf
    for idx in range(lo, min(hi, len(samples) - 1)):
        s0, s1 = samples[idx], samples[idx + 1]
        if s0.chart != s1.chart:
            continue
        for frac in range(21):
            t = s0.t + (s1.t - s0.t) * frac / 20
            z, _ = _hermite(s0, s1, cd, t)
            d = chordal(_sphere(s0.chart, z), base)
            if d < best_d:
                best_d = d
                best = (idx, t)
    if best is None:
        return None
    idx, t_star = best
    s0, s1 = samples[idx], samples[idx + 1]

    def dist(t: float) -> float:
        z, _ = _hermite(s0, s1, cd, t)
        return chordal(_sphere(s0.chart, z), base)

    span = (s1.t - s0.t) / 20
    a, b = max(s0.t, t_star - span), min(s1.t, t_star + span)
    gr = (math.sqrt(5) - 1) / 2
    c1 = b - gr * (b - a)
    c2 = a + gr * (b - a)
    f1, f2 = dist(c1), dist(c2)
    for _ in range(80):
        if b - a < 1e-14 * max(1.0, abs(b)):
            break
        if f1 < f2:
            b, c2, f2 = c2, c1, f1
            c1 = b - gr * (b - a)
            f1 = dist(c1)
        else:
            a, c1, f1 = c1, c2, f2
            c2 = a + gr * (b - a)
            f2 = dist(c2)
    t_star = 0.5 * (a + b)
    return t_star, _segment_state(samples, idx, cd, t_star), dist(t_star)


# ---------------------------------------------------------------------------
# self-intersection detection
# ---------------------------------------------------------------------------

def detect_self_intersections(
    traj: Trajectory, cd: ConnectionData, max_events: int = 4000, min_angle: float = 0.02
) -> list[Event]:
    """Transversal crossings of the projected curve on P^1.

    Polyline search over the sphere embedding with a uniform spatial grid,
    local planar (gnomonic) crossing solve, tangents from the exact field at
    interpolated states, enclosed poles by winding numbers in a rotated
    chart that keeps the loop away from infinity.

    Crossings with |external angle| below min_angle are discarded: chords of
    a tightening spiral cross even when the curve does not, and genuinely
    tangential returns are the closed-return detector's business.
    """
    samples = traj.samples
    if len(samples) < 3:
        return []
    pts = [s.sphere() for s in samples]
    nseg = len(samples) - 1
    lengths = [
        math.dist(pts[i], pts[i + 1]) for i in range(nseg)
    ]
    mids = [
        (
            0.5 * (pts[i][0] + pts[i + 1][0]),
            0.5 * (pts[i][1] + pts[i + 1][1]),
            0.5 * (pts[i][2] + pts[i + 1][2]),
        )
        for i in range(nseg)
    ]
    # two crossing segments start within 2*maxlen of each other; a cell of
    # that size keeps their grid indices within one of each other
    cell = max(max(lengths, default=0.0), 1e-6) * 2.02
    grid: dict[tuple[int, int, int], list[int]] = {}
    for i in range(nseg):
        cx = int(pts[i][0] / cell)
        cy = int(pts[i][1] / cell)
        cz = int(pts[i][2] / cell)
        for dx in (0, 1):
            for dy in (0, 1):
                for dz in (0, 1):
                    grid.setdefault((cx + dx, cy + dy, cz + dz), []).append(i)
    seen_pairs: set[tuple[int, int]] = set()
    raw: list[tuple[float, float, int, int]] = []
    for bucket in grid.values():
        for a_pos in range(len(bucket)):
            i = bucket[a_pos]
            mi = mids[i]
            hi_len = 0.5 * lengths[i]
            for b_pos in range(a_pos + 1, len(bucket)):
                j = bucket[b_pos]
                # crossing needs midpoints within the summed half-lengths
                mj = mids[j]
                reach = hi_len + 0.5 * lengths[j]
                dx = mi[0] - mj[0]
                dy = mi[1] - mj[1]
                dz = mi[2] - mj[2]
                if dx * dx + dy * dy + dz * dz > reach * reach:
                    continue
                lo, hi = (i, j) if i < j else (j, i)
                if hi - lo < 2 or (lo, hi) in seen_pairs:
                    continue
                seen_pairs.add((lo, hi))
                got = _segment_crossing(pts, samples, lo, hi)
                if got is not None:
                    raw.append((got[0], got[1], lo, hi))
    raw.sort()
    events: list[Event] = []
    spacing = [samples[k + 1].t - samples[k].t for k in range(nseg)]
    for t1, t2, i, j in raw[:max_events]:
        dup = False
        gap = 1.5 * max(spacing[i], spacing[j])
        for prev in events:
            if abs(prev.t1 - t1) < gap and abs(prev.t2 - t2) < gap:
                dup = True
                break
        if dup:
            continue
        ev = _crossing_event(traj, cd, i, j, t1, t2)
        if ev is not None and abs(ev.external_angle) >= min_angle:
            events.append(ev)
    _mark_simple(events)
    return events


def _gnomonic_cross(
    a0, a1, b0, b1, slack: float = 1e-9
) -> Optional[tuple[float, float]]:
    """Chord crossing parameters (s, u) in the tangent-plane projection."""
    mx = (a0[0] + a1[0] + b0[0] + b1[0]) / 4.0
    my = (a0[1] + a1[1] + b0[1] + b1[1]) / 4.0
    mz = (a0[2] + a1[2] + b0[2] + b1[2]) / 4.0
    norm = math.sqrt(mx * mx + my * my + mz * mz)
    if norm < 1e-9:
        return None
    u = (mx / norm, my / norm, mz / norm)
    pick = (1.0, 0.0, 0.0) if abs(u[0]) < 0.9 else (0.0, 1.0, 0.0)
    e1 = _cross(u, pick)
    n1 = math.sqrt(e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2])
    e1 = (e1[0] / n1, e1[1] / n1, e1[2] / n1)
    e2 = _cross(u, e1)

    def gnomonic(p):
        d = p[0] * u[0] + p[1] * u[1] + p[2] * u[2]
        if d <= 1e-6:
            return None
        return (
            (p[0] * e1[0] + p[1] * e1[1] + p[2] * e1[2]) / d,
            (p[0] * e2[0] + p[1] * e2[1] + p[2] * e2[2]) / d,
        )

    q = [gnomonic(p) for p in (a0, a1, b0, b1)]
    if any(x is None for x in q):
        return None
    (ax, ay), (bx, by), (cx, cy), (dx, dy) = q
    r1x, r1y = bx - ax, by - ay
    r2x, r2y = dx - cx, dy - cy
    det = r1x * r2y - r1y * r2x
    if abs(det) < 1e-14:
        return None
    sx, sy = cx - ax, cy - ay
    s = (sx * r2y - sy * r2x) / det
    w = (sx * r1y - sy * r1x) / det
    if not (-slack <= s <= 1 + slack and -slack <= w <= 1 + slack):
        return None
    return s, w


def _segment_crossing(
    pts: list[tuple[float, float, float]],
    samples: Sequence[ChartState],
    i: int,
    j: int,
) -> Optional[tuple[float, float]]:
    got = _gnomonic_cross(pts[i], pts[i + 1], pts[j], pts[j + 1])
    if got is None:
        return None
    s, w = got
    t1 = samples[i].t + s * (samples[i + 1].t - samples[i].t)
    t2 = samples[j].t + w * (samples[j + 1].t - samples[j].t)
    if t2 < t1:
        t1, t2 = t2, t1
    return t1, t2


def _segment_of(times: list[float], t: float) -> int:
    idx = bisect.bisect_right(times, t) - 1
    return max(0, min(idx, len(times) - 2))


def _state_at(
    samples: Sequence[ChartState], times: list[float], cd: ConnectionData, t: float
) -> ChartState:
    return _segment_state(samples, _segment_of(times, t), cd, t)


def _refine_crossing(
    samples: Sequence[ChartState],
    cd: ConnectionData,
    t1: float,
    t2: float,
) -> tuple[float, float]:
    """Sharpen a chord-level crossing on the interpolated curve.

    Each pass re-solves the crossing of short interpolated chords centered
    on the current parameters; the bracket shrinks geometrically, removing
    the O(h^2) sagitta error of the sample polyline.
    """
    times = [s.t for s in samples]
    k1 = _segment_of(times, t1)
    k2 = _segment_of(times, t2)
    span1 = samples[k1 + 1].t - samples[k1].t
    span2 = samples[k2 + 1].t - samples[k2].t
    for it in range(3):
        d1 = span1 / (2 * 4**it)
        d2 = span2 / (2 * 4**it)
        sa0 = _state_at(samples, times, cd, t1 - d1)
        sa1 = _state_at(samples, times, cd, t1 + d1)
        sb0 = _state_at(samples, times, cd, t2 - d2)
        sb1 = _state_at(samples, times, cd, t2 + d2)
        got = _gnomonic_cross(
            sa0.sphere(), sa1.sphere(), sb0.sphere(), sb1.sphere(), slack=0.6
        )
        if got is None:
            break
        s, w = got
        t1 = (t1 - d1) + s * 2 * d1
        t2 = (t2 - d2) + w * 2 * d2
    return t1, t2


def _cross(a, b):
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def _crossing_event(
    traj: Trajectory, cd: ConnectionData, i: int, j: int, t1: float, t2: float
) -> Optional[Event]:
    samples = traj.samples
    t1, t2 = _refine_crossing(samples, cd, t1, t2)
    if t2 < t1:
        t1, t2 = t2, t1
    s1 = _locate_state(samples, cd, t1)
    s2 = _locate_state(samples, cd, t2)
    chart = s1.chart
    tan1 = _tangent_in_chart(s1, cd, chart)
    tan2 = _tangent_in_chart(s2, cd, chart)
    if tan1 == 0 or tan2 == 0:
        return None
    angle = _wrap_angle(cmath.phase(tan1 / tan2))
    enclosed, res_sum, orient, resolved = _enclosed_poles(traj, cd, t1, t2)
    residual = None
    if res_sum is not None and resolved:
        # a negatively oriented loop satisfies the identity after reversal,
        # which flips the sign of the vertex angle
        eff = angle if orient >= 0 else -angle
        residual = abs(_wrap_angle(eff - 2 * math.pi * (1 + res_sum.real)))
    return Event(
        kind=EV_CROSSING,
        t=t2,
        t1=t1,
        t2=t2,
        point=s1.point(),
        external_angle=angle,
        enclosed=enclosed,
        residue_sum=res_sum,
        angle_residual=residual,
        resolved=resolved,
    )


def _locate_state(samples: Sequence[ChartState], cd: ConnectionData, t: float) -> ChartState:
    for idx in range(len(samples) - 1):
        if samples[idx].t <= t <= samples[idx + 1].t:
            return _segment_state(samples, idx, cd, t)
    return samples[-1]


def _loop_points(
    traj: Trajectory, t1: float, t2: float
) -> list[tuple[float, float, float]]:
    pts = [s.sphere() for s in traj.samples if t1 <= s.t <= t2]
    return pts


def _enclosed_poles(
    traj: Trajectory, cd: ConnectionData, t1: float, t2: float
) -> tuple[tuple[int, ...], Optional[complex], int, bool]:
    """Winding numbers of the loop around the induced-connection poles.

    Returns (enclosed indices, residue sum over them, loop orientation,
    resolved flag); orientation is +1 / -1 for a consistently wound simple
    loop and 0 when the windings are mixed or ill-conditioned.
    """
    loop = _loop_points(traj, t1, t2)
    if len(loop) < 3:
        return (), None, 0, False
    loop = loop + [loop[0]]
    poles = [(k, d) for k, d in enumerate(cd.directions) if abs(d.induced_residue) > 1e-12]
    far = _far_point(loop, [d.point.sphere() for _, d in poles])
    a = _sphere_to_plane(far)
    plane_loop = [_rotated_coord(p, a) for p in loop]
    if any(p is None for p in plane_loop):
        return (), None, 0, False
    windings: list[tuple[int, int]] = []
    for k, d in poles:
        q = _rotated_coord(d.point.sphere(), a)
        if q is None:
            return (), None, 0, False
        w, ok = _winding(plane_loop, q)
        if not ok:
            return (), None, 0, False
        if w != 0:
            windings.append((k, w))
    if not windings:
        return (), 0j, 0, True
    signs = {1 if w > 0 else -1 for _, w in windings}
    if len(signs) > 1 or any(abs(w) > 1 for _, w in windings):
        total = sum(cd.directions[k].induced_residue * w for k, w in windings)
        return tuple(k for k, _ in windings), total, 0, False
    orient = signs.pop()
    enclosed = tuple(k for k, _ in windings)
    res_sum = sum(cd.directions[k].induced_residue for k in enclosed)
    return enclosed, res_sum, orient, True


def _far_point(
    loop: list[tuple[float, float, float]], poles: list[tuple[float, float, float]]
) -> tuple[float, float, float]:
    golden = (1 + math.sqrt(5)) / 2
    cands = []
    n = 40
    for k in range(n):
        zc = 1 - 2 * (k + 0.5) / n
        r = math.sqrt(max(0.0, 1 - zc * zc))
        phi = 2 * math.pi * k / golden
        cands.append((r * math.cos(phi), r * math.sin(phi), zc))
    best = cands[0]
    best_d = -1.0
    avoid = loop + poles
    for c in cands:
        d = min(math.dist(c, p) for p in avoid)
        if d > best_d:
            best_d = d
            best = c
    return best


def _sphere_to_plane(p: tuple[float, float, float]) -> complex:
    # chart-0 coordinate of a sphere point (inf -> large finite stand-in)
    if abs(1 - p[2]) < 1e-12:
        return complex(1e12)
    return complex(p[0], p[1]) / (1 - p[2])


def _rotated_coord(
    p: tuple[float, float, float], a: complex
) -> Optional[complex]:
    # Moebius rotation sending a to infinity: z -> (conj(a) z + 1) / (a - z)
    z = _sphere_to_plane(p)
    den = a - z
    if abs(den) < 1e-12:
        return None
    return (a.conjugate() * z + 1) / den


def _winding(loop: list[complex], q: complex) -> tuple[int, bool]:
    total = 0.0
    min_d = math.inf
    for i in range(len(loop) - 1):
        d0 = loop[i] - q
        d1 = loop[i + 1] - q
        min_d = min(min_d, abs(d0))
        if d0 == 0 or d1 == 0:
            return 0, False
        total += _wrap_angle(cmath.phase(d1 / d0))
    w = total / (2 * math.pi)
    r = round(w)
    ok = abs(w - r) < 0.25 and min_d > 1e-9
    return int(r), ok


def _mark_simple(events: list[Event]) -> None:
    """A crossing is a simple loop when no other crossing nests inside it."""
    for idx, ev in enumerate(events):
        simple = True
        for other in events:
            if other is ev:
                continue
            if ev.t1 < other.t1 and other.t2 < ev.t2:
                simple = False
                break
        events[idx] = replace(ev, simple=simple)


# ---------------------------------------------------------------------------
# loop multiplier
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LoopMultiplier:
    measured: complex
    predicted: complex
    deviation: float
    enclosed: tuple[int, ...]


def loop_multiplier(
    traj: Trajectory, t1: float, t2: float, cd: ConnectionData, tol: float = 5e-2
) -> LoopMultiplier:
    """sigma'(t2)/sigma'(t1) for a loop, against exp(-2 pi i sum Res)."""
    s1 = _locate_state(traj.samples, cd, t1)
    s2 = _locate_state(traj.samples, cd, t2)
    if chordal(s1.sphere(), s2.sphere()) > tol:
        raise ValueError("loop endpoints do not coincide within tolerance")
    chart = s1.chart
    m_measured = _tangent_in_chart(s2, cd, chart) / _tangent_in_chart(s1, cd, chart)
    enclosed, res_sum, orient, _ = _enclosed_poles(traj, cd, t1, t2)
    if res_sum is None:
        predicted = complex("nan")
    else:
        sign = -1.0 if orient >= 0 else 1.0
        predicted = cmath.exp(sign * 2j * math.pi * res_sum)
    dev = abs(m_measured - predicted)
    return LoopMultiplier(m_measured, predicted, dev, enclosed)


# ---------------------------------------------------------------------------
# omega-limit classification
# ---------------------------------------------------------------------------

INTERSECTION_THRESHOLD = 25


def _classify_into(traj: Trajectory, cd: ConnectionData, cfg: IntegratorConfig) -> None:
    crossings = detect_self_intersections(traj, cd)
    traj.events.extend(crossings)
    traj.events.sort(key=lambda e: e.t)
    omega, direction, extra = classify_omega_limit(traj, cd, cfg, crossings)
    traj.omega_class = omega
    traj.omega_direction = direction
    traj.diagnostics.update(extra)


def classify_omega_limit(
    traj: Trajectory,
    cd: ConnectionData,
    cfg: Optional[IntegratorConfig] = None,
    crossings: Optional[list[Event]] = None,
) -> tuple[str, Optional[ProjPoint], dict]:
    """Forward-limit classification from termination events and geometry."""
    if cfg is None:
        cfg = IntegratorConfig()
    if crossings is None:
        crossings = [e for e in traj.events if e.kind == EV_CROSSING]
    extra: dict = {}
    pole_ev = next((e for e in traj.events if e.kind == EV_POLE), None)
    t_end = traj.samples[-1].t
    if pole_ev is not None and pole_ev.t >= t_end - 1e-12:
        return OMEGA_POLE, pole_ev.direction, extra
    ret = next((e for e in traj.events if e.kind == EV_RETURN and e.t > 0), None)
    if ret is not None:
        mult = ret.multiplier
        extra["return_multiplier"] = mult
        return OMEGA_CLOSED, None, extra
    n_cross = len(crossings)
    extra["self_intersections"] = n_cross
    if n_cross >= INTERSECTION_THRESHOLD:
        span = t_end - traj.samples[0].t
        late = [e for e in crossings if e.t2 is not None and e.t2 > t_end - 0.25 * span]
        if late:
            simple = [e for e in crossings if e.simple]
            windows = [
                e.residue_sum.real
                for e in simple
                if e.residue_sum is not None and e.resolved
            ]
            extra["simple_loop_residue_sums"] = windows
            return OMEGA_INFINITE, None, extra
    acc = _accumulation_test(traj, cd, cfg)
    if acc is not None:
        extra.update(acc)
        return OMEGA_ACC_CLOSED, None, extra
    shuttle = _cycle_heuristic(traj, cd, cfg)
    if shuttle:
        extra["shuttle_poles"] = shuttle
        return OMEGA_CYCLE, None, extra
    return OMEGA_UNDETERMINED, None, extra


def _accumulation_test(
    traj: Trajectory, cd: ConnectionData, cfg: IntegratorConfig
) -> Optional[dict]:
    """Detect late-time convergence to the support of a closed loop.

    Uses a section through a late reference point: consecutive near-returns
    cut the tail into loops; the classification asks the loops to converge
    in Hausdorff distance while the return offsets shrink.
    """
    samples = traj.samples
    if traj.diagnostics.get("stop") not in ("t_max", "max_steps"):
        return None
    if len(samples) < 60:
        return None
    # index-based reference: adaptive steps sample slow spirals log-uniformly
    ref_idx = len(samples) // 2
    if ref_idx >= len(samples) - 10:
        return None
    ref = samples[ref_idx].sphere()
    # sample-level local minima of the distance to the reference point
    hits: list[int] = []
    dists = [chordal(samples[i].sphere(), ref) for i in range(ref_idx, len(samples))]
    i = 5
    while i < len(dists) - 1:
        if dists[i] < dists[i - 1] and dists[i] <= dists[i + 1] and dists[i] < 0.1:
            hits.append(ref_idx + i)
            i += 5
        else:
            i += 1
    if len(hits) < 2:
        return None
    # refine each near-return on the interpolant
    refined: list[tuple[float, ChartState, float]] = []
    for h_idx in hits:
        got = _closest_approach(samples, cd, ref, max(ref_idx, h_idx - 3), h_idx + 3)
        if got is not None:
            refined.append(got)
    if len(refined) < 2:
        return None
    bounds_t = [samples[ref_idx].t] + [r[0] for r in refined]
    loops = []
    for a, b in zip(bounds_t, bounds_t[1:]):
        loops.append([s.sphere() for s in samples if a <= s.t <= b])
    loops = [lp for lp in loops if len(lp) >= 3]
    if len(loops) < 2:
        return None
    hd = [_hausdorff(loops[k + 1], loops[k]) for k in range(len(loops) - 1)]
    gaps = [r[2] for r in refined]
    converging = hd[-1] < 0.05 and (len(hd) == 1 or hd[-1] <= hd[0] + 1e-9)
    tightening = gaps[-1] < 0.05
    if not (converging and tightening):
        return None
    # Gauss-Bonnet residual between the last two refined section crossings
    (t_a, st_a, _), (t_b, st_b, _) = refined[-2], refined[-1]
    chart = st_a.chart
    tan0 = _tangent_in_chart(st_a, cd, chart)
    tan1 = _tangent_in_chart(st_b, cd, chart)
    residual = None
    if tan0 and tan1:
        angle = _wrap_angle(cmath.phase(tan1 / tan0))
        enclosed, res_sum, orient, resolved = _enclosed_poles(traj, cd, t_a, t_b)
        if res_sum is not None and resolved:
            eff = angle if orient >= 0 else -angle
            residual = abs(_wrap_angle(eff - 2 * math.pi * (1 + res_sum.real)))
    return {
        "late_loop_hausdorff": hd[-1],
        "late_loop_gap": gaps[-1],
        "late_loop_gb_residual": residual,
    }


def _hausdorff(a: list, b: list) -> float:
    worst = 0.0
    for p in a:
        best = min(chordal(p, q) for q in b)
        worst = max(worst, best)
    return worst


def _cycle_heuristic(
    traj: Trajectory, cd: ConnectionData, cfg: IntegratorConfig
) -> list[int]:
    """Alternating visits to several pole neighborhoods, forward tail only."""
    radius = max(5 * cfg.pole_radius, 0.05)
    visits: list[int] = []
    poles = [d.point.sphere() for d in cd.directions]
    for s in traj.samples:
        here = s.sphere()
        for k, sph in enumerate(poles):
            if chordal(here, sph) < radius:
                if not visits or visits[-1] != k:
                    visits.append(k)
                break
    distinct = sorted(set(visits))
    if len(distinct) >= 2 and len(visits) >= 4:
        return visits
    return []


# ---------------------------------------------------------------------------
# batch sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepItem:
    index: int
    trajectory: Optional[Trajectory]
    error: Optional[str]


def batch_sweep(
    cd: ConnectionData,
    inits: Sequence[ChartState],
    cfg: IntegratorConfig,
    workers: Optional[int] = None,
) -> list[SweepItem]:
    """Independent integrations; output order matches input order.

    Per-item failures are carried in-band.  Worker count defaults to the
    MEROCON_THREADS environment variable (1 when unset).
    """
    if workers is None:
        workers = int(os.environ.get("MEROCON_THREADS", "1") or "1")
    workers = max(1, workers)

    def run(pair: tuple[int, ChartState]) -> SweepItem:
        idx, init = pair
        try:
            return SweepItem(idx, integrate(cd, init, cfg), None)
        except Exception as exc:  # noqa: BLE001 - carried in-band by contract
            return SweepItem(idx, None, f"{type(exc).__name__}: {exc}")

    items = list(enumerate(inits))
    if workers == 1:
        return [run(p) for p in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, items))
