# Acceptance suite: every criterion at its stated tolerance, one printed
# pass/fail line per criterion (run with -s to see them).

import math
import random
import time

from merocon.algebra import TruncSeries
from merocon.atlas import (
    LABELS,
    AtlasLabel,
    classify_quadratic,
    closed_form_oracle,
    template_field,
)
from merocon.fields import (
    CHART_ZERO,
    HomogeneousField,
    SingularTimeError,
    connection_data,
    is_dicritical,
    model_connection,
)
from merocon.flow import (
    ChartState,
    IntegratorConfig,
    chart_transition,
    integrate,
    lift_nu_polar,
    loop_multiplier,
)
from merocon.germs import (
    FUCHSIAN,
    LocalGerm,
    classify,
    germ_residue,
    normal_form_residuals,
    normalize_formal,
    transform_germ,
)

THREE_THIRDS = HomogeneousField(1, (-1 / 3, 2 / 3, 0), (0, 2 / 3, -1 / 3))


def report(num: int, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {num:2d} {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, f"criterion {num}: {detail}"


def random_field(rng, nu):
    while True:
        q1 = tuple(complex(rng.gauss(0, 1), rng.gauss(0, 1)) for _ in range(nu + 2))
        q2 = tuple(complex(rng.gauss(0, 1), rng.gauss(0, 1)) for _ in range(nu + 2))
        q = HomogeneousField(nu, q1, q2)
        if not is_dicritical(q):
            return q


def test_01_residue_exactness():
    t0 = time.time()
    cd = connection_data(THREE_THIRDS)
    worst = max(abs(d.residue - 1 / 3) for d in cd.directions)
    spots = {(d.point.chart, round(abs(d.point.coord), 6)) for d in cd.directions}
    ok = (
        worst < 1e-10
        and spots == {(CHART_ZERO, 0.0), (CHART_ZERO, 1.0), ("inf", 0.0)}
        and time.time() - t0 < 0.1
    )
    report(1, ok, f"three residues 1/3 within {worst:.1e}; {time.time()-t0:.3f}s")


def test_02_global_residue_identities():
    t0 = time.time()
    rng = random.Random(7)
    worst_sum = worst_induced = 0.0
    orders_ok = True
    for _ in range(1000):
        nu = rng.choice([1, 2, 3])
        cd = connection_data(random_field(rng, nu))
        worst_sum = max(worst_sum, abs(sum(d.residue for d in cd.directions) - nu))
        worst_induced = max(
            worst_induced, abs(sum(d.induced_residue for d in cd.directions) + 2)
        )
        orders_ok = orders_ok and sum(d.order for d in cd.directions) == nu + 2
    elapsed = time.time() - t0
    ok = worst_sum < 1e-8 and worst_induced < 1e-8 and orders_ok and elapsed < 10
    report(
        2,
        ok,
        f"1000 fields: |sum Res - nu| <= {worst_sum:.1e}, "
        f"|sum Res_induced + 2| <= {worst_induced:.1e}, orders exact; {elapsed:.1f}s",
    )


def _compare_lifted(oracle_w, s, nu=1):
    lifted = lift_nu_polar(oracle_w, nu)
    if lifted.chart != s.chart:
        lifted = chart_transition(lifted, nu)
    return max(
        abs(lifted.zeta - s.zeta) / (1 + abs(s.zeta)),
        abs(lifted.v - s.v) / (1 + abs(s.v)),
    )


def test_03_oracle_equivalence():
    t0 = time.time()
    rng = random.Random(31)
    worst = 0.0
    cfg = IntegratorConfig(rel_tol=1e-10, abs_tol=1e-13, t_max=5.0, record_stride=0.05)
    for name, params in (
        ("C100", {}),
        ("C2001", {}),
        ("C3100", {}),
        ("C210", {"rho": 0.35 + 0.25j}),
    ):
        lab = AtlasLabel(name, **params)
        cd = connection_data(template_field(lab))
        done = 0
        while done < 50:
            w = (
                complex(rng.uniform(-1, 1), rng.uniform(-1, 1)),
                complex(rng.uniform(-1, 1), rng.uniform(-1, 1)),
            )
            if min(abs(w[0]), abs(w[1]), abs(w[0] - w[1])) < 0.15:
                continue
            try:
                path = [closed_form_oracle(lab, w, 5 * k / 60) for k in range(61)]
            except SingularTimeError:
                continue
            if any(
                max(abs(a), abs(b)) > 40 or min(abs(a), abs(b)) < 5e-3 for a, b in path
            ):
                continue
            done += 1
            traj = integrate(cd, lift_nu_polar(w, 1), cfg)
            for s in traj.samples:
                worst = max(worst, _compare_lifted(closed_form_oracle(lab, w, s.t), s))
    elapsed = time.time() - t0
    ok = worst <= 1e-6 and elapsed < 30
    report(3, ok, f"4 families x 50 starts, rel err <= {worst:.1e}; {elapsed:.1f}s")


def test_04_conservation():
    t0 = time.time()
    rng = random.Random(13)
    worst = 0.0
    done = 0
    while done < 100:
        mu = rng.randint(1, 3)
        rho = complex(rng.uniform(-1.5, 1.5), rng.uniform(-1, 1))
        if abs(rho) < 0.2:
            continue
        z0 = complex(rng.uniform(0.2, 1.0), rng.uniform(-0.6, 0.6))
        v0 = complex(rng.uniform(0.2, 1.0), rng.uniform(-0.6, 0.6))
        c = (rho - (mu - 1)) * z0 ** (mu - 1) * v0
        # reject draws whose closed form blows up inside the horizon
        if abs(c.imag) < 1e-3 * abs(c) and c.real < 0 and -1 / c.real < 12:
            continue
        done += 1
        cd = model_connection(mu, rho)
        cfg = IntegratorConfig(
            rel_tol=1e-10, abs_tol=1e-13, t_max=10.0, record_stride=0.05,
            escape_radius=1e12, zeta_escape_radius=1e12, classify=False,
        )
        traj = integrate(cd, ChartState(CHART_ZERO, z0, v0, 0.0), cfg)
        worst = max(worst, traj.invariant_drift)
    elapsed = time.time() - t0
    ok = worst <= 1e-8 and elapsed < 30
    report(4, ok, f"100 models, max first-integral drift {worst:.1e}; {elapsed:.1f}s")


def test_05_figure_one():
    t0 = time.time()
    cd = model_connection(1, 0.1)
    cfg = IntegratorConfig(
        rel_tol=1e-10, abs_tol=1e-13, t_max=60.0, record_stride=0.02,
        two_sided=True, zeta_escape_radius=4.0,
    )
    traj = integrate(cd, ChartState(CHART_ZERO, 1.0, 1.0 + 1.0j, 0.0), cfg)
    cross = [e for e in traj.events if e.kind == "self_intersection"]
    esc = [e for e in traj.events if e.kind in ("escape", "blow_up_time")]
    elapsed = time.time() - t0
    ok = (
        len(cross) == 2
        and bool(esc)
        and max(e.t for e in esc) > max(e.t2 for e in cross)
        and elapsed < 5
    )
    report(5, ok, f"{len(cross)} self-intersections before escape; {elapsed:.1f}s")


def test_06_figure_two():
    t0 = time.time()
    cd = model_connection(1, 1j)
    cfg = IntegratorConfig(
        rel_tol=1e-10, abs_tol=1e-14, t_max=1e11, record_stride=0.05,
        zeta_escape_radius=50.0, max_steps=500_000,
    )
    traj = integrate(cd, ChartState(CHART_ZERO, (1 + 1j) / 2, 1.0, 0.0), cfg)
    gb = traj.diagnostics.get("late_loop_gb_residual")
    elapsed = time.time() - t0
    ok = (
        traj.omega_class == "accumulates_closed"
        and gb is not None
        and gb <= 1e-2
        and elapsed < 10
    )
    report(6, ok, f"omega={traj.omega_class}, late-loop residual {gb:.1e}; {elapsed:.1f}s")


def test_07_figure_three():
    t0 = time.time()
    cd = connection_data(THREE_THIRDS)
    init = lift_nu_polar((1j, 1j - 1), 1)
    t_max = 120.0
    cfg = IntegratorConfig(
        rel_tol=1e-8, abs_tol=1e-11, t_max=t_max, record_stride=0.05,
        pole_radius=1e-9, max_steps=800_000,
    )
    traj = integrate(cd, init, cfg)
    cross = [e for e in traj.events if e.kind == "self_intersection"]
    late = [e for e in cross if e.t2 > 0.75 * t_max]
    simple = [e for e in cross if e.simple and e.resolved]
    windows_ok = bool(simple)
    for e in simple:
        r = e.residue_sum.real
        inside = (-1.5 + 1e-2 < r < -1 - 1e-2) or (-1 + 1e-2 < r < -0.5 - 1e-2)
        windows_ok = windows_ok and inside
        windows_ok = windows_ok and e.angle_residual is not None
        windows_ok = windows_ok and e.angle_residual <= 2 * math.pi * 1e-2
    elapsed = time.time() - t0
    ok = (
        traj.omega_class == "infinitely_self_intersecting"
        and len(cross) >= 25
        and late
        and windows_ok
        and elapsed < 30
    )
    report(
        7,
        ok,
        f"{len(cross)} crossings ({len(late)} late), {len(simple)} simple loops "
        f"in the residue windows; {elapsed:.1f}s",
    )


def test_08_loop_multiplier():
    t0 = time.time()
    gamma = 0.3
    q = HomogeneousField(1, (1j * gamma, 0, 0), (0, 1 + 1j * gamma, 0))
    cd = connection_data(q)
    cfg = IntegratorConfig(rel_tol=1e-11, abs_tol=1e-14, t_max=40.0, record_stride=0.02)
    traj = integrate(cd, ChartState(CHART_ZERO, 0.5, 1j, 0.0), cfg)
    ret = [e for e in traj.events if e.kind == "closed_return"]
    err = math.inf
    if ret:
        lm = loop_multiplier(traj, ret[0].t1, ret[0].t2, cd)
        err = abs(abs(lm.measured) - math.exp(-2 * math.pi * gamma))
    elapsed = time.time() - t0
    ok = err <= 1e-4 and elapsed < 5
    report(8, ok, f"multiplier modulus error {err:.1e} vs exp(-2 pi 0.3); {elapsed:.1f}s")


def _random_unit_tail(rng, lead=1.0 + 0j, n=4, scale=0.25):
    return [lead] + [
        scale * complex(rng.gauss(0, 1), rng.gauss(0, 1)) * 0.5**k for k in range(n)
    ]


def _random_change(rng, n=16):
    psi = TruncSeries.from_coeffs(
        [0j, 1.0 + 0j]
        + [0.1 * complex(rng.gauss(0, 1), rng.gauss(0, 1)) * 0.5**k for k in range(4)],
        n,
    )
    xi = TruncSeries.from_coeffs(
        [complex(rng.uniform(0.5, 2.0), rng.uniform(-0.5, 0.5))]
        + [0.1 * complex(rng.gauss(0, 1), rng.gauss(0, 1)) * 0.5**k for k in range(4)],
        n,
    )
    return psi, xi


def test_09_normal_form_round_trip():
    t0 = time.time()
    rng = random.Random(42)
    worst_res = 0.0
    worst_rho = 0.0
    worst_a = 0.0
    for k in range(200):
        mu_x = rng.randint(1, 3)
        mu_y = mu_x - 1
        resonant = k % 2 == 1
        if resonant:
            n_res = rng.choice([n for n in range(1, 4) if n != mu_y])
            rho = complex(mu_y - n_res)
            a = complex(rng.uniform(-1, 1), rng.uniform(-1, 1))
            y = [rho] + [0j] * (n_res - 1) + [rho * a]
        else:
            rho = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
            if abs(rho) < 0.2 or abs(rho.imag) < 1e-3:
                rho += 0.5 + 0.7j
            a = None
            y = [rho]
        g0 = LocalGerm(
            mu_x,
            TruncSeries.from_coeffs([1], 16),
            mu_y,
            TruncSeries.from_coeffs(y, 16),
        )
        psi, xi = _random_change(rng)
        gn, rep, _ = normalize_formal(transform_germ(g0, psi, xi), order=16)
        assert rep.sing_class == FUCHSIAN and rep.mu_x == mu_x
        worst_rho = max(worst_rho, abs(rep.rho - rho) / (1 + abs(rho)))
        worst_res = max(worst_res, normal_form_residuals(gn, rep))
        if resonant:
            worst_a = max(worst_a, abs(rep.resonant_index - a) / (1 + abs(a)))
    worst_irr = 0.0
    for _ in range(100):
        mu_y = rng.randint(0, 2)
        m = rng.randint(2, 3)
        g = LocalGerm(
            mu_y + m,
            TruncSeries.from_coeffs(_random_unit_tail(rng), 16),
            mu_y,
            TruncSeries.from_coeffs(
                _random_unit_tail(rng, lead=complex(rng.uniform(0.5, 2), rng.uniform(-1, 1))),
                16,
            ),
        )
        expected = germ_residue(g) / classify(g).rho
        _, rep, _ = normalize_formal(g, order=16)
        worst_irr = max(worst_irr, abs(rep.resonant_index - expected) / (1 + abs(expected)))
    elapsed = time.time() - t0
    ok = (
        worst_res <= 1e-9
        and worst_rho <= 1e-9
        and worst_a <= 1e-8
        and worst_irr <= 1e-8
        and elapsed < 30
    )
    report(
        9,
        ok,
        f"200 fuchsian round-trips (residual {worst_res:.1e}, rho {worst_rho:.1e}, "
        f"index {worst_a:.1e}); 100 irregular index checks ({worst_irr:.1e}); {elapsed:.1f}s",
    )


def _random_label(rng, name):
    def param(avoid=()):
        while True:
            z = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
            if abs(z) > 0.3 and all(abs(z - a) > 0.25 for a in avoid):
                return z

    if name in ("C210", "C211"):
        return AtlasLabel(name, rho=param())
    if name == "C3rho10":
        return AtlasLabel(name, rho=param(avoid=(1,)))
    if name == "C3rhotau1":
        while True:
            r, t = param(), param()
            if abs(r + t - 1) > 0.3:
                return AtlasLabel(name, rho=r, tau=t)
    return AtlasLabel(name)


def _random_gl2(rng, max_cond=1e3):
    import numpy as np

    while True:
        m = np.array(
            [[complex(rng.gauss(0, 1), rng.gauss(0, 1)) for _ in range(2)] for _ in range(2)]
        )
        s = np.linalg.svd(m, compute_uv=False)
        if s[0] / s[-1] < max_cond and s[-1] > 1e-3:
            return ((m[0, 0], m[0, 1]), (m[1, 0], m[1, 1]))


def test_10_atlas_round_trip():
    t0 = time.time()
    rng = random.Random(99)
    worst_res = 0.0
    worst_param = 0.0
    for name in LABELS:
        for _ in range(100):
            lab = _random_label(rng, name)
            q = template_field(lab).conjugate(_random_gl2(rng))
            rep = classify_quadratic(q)
            assert rep.label.name == name, (name, rep.label.name)
            worst_res = max(worst_res, rep.residual)
            if name in ("C210", "C211"):
                worst_param = max(worst_param, abs(rep.label.rho - lab.rho))
            elif name == "C3rho10":
                expect = min(
                    (lab.rho, 1 - lab.rho), key=lambda z: (round(z.real, 9), round(z.imag, 9))
                )
                worst_param = max(worst_param, abs(rep.label.rho - expect))
            elif name == "C3rhotau1":
                ordered = sorted(
                    (lab.rho, 1 - lab.rho - lab.tau, lab.tau),
                    key=lambda z: (round(z.real, 9), round(z.imag, 9)),
                )
                worst_param = max(
                    worst_param,
                    abs(rep.label.rho - ordered[0]),
                    abs(rep.label.tau - ordered[2]),
                )
    elapsed = time.time() - t0
    ok = worst_res <= 1e-8 and worst_param <= 1e-6 and elapsed < 60
    report(
        10,
        ok,
        f"11 labels x 100: residual <= {worst_res:.1e}, parameters <= {worst_param:.1e}; "
        f"{elapsed:.1f}s",
    )


def test_11_basin_of_attraction():
    t0 = time.time()
    rho = -1.0 + 0.3j
    q = HomogeneousField(1, (-rho, 0, 0), (0, 1 - rho, 0))
    cd = connection_data(q)
    rng = random.Random(2024)
    hits = 0
    trials = 0
    while trials < 100:
        z0 = complex(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5))
        w0 = complex(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5))
        if abs(z0) < 0.1 or abs(w0) < 0.1:
            continue
        trials += 1
        init = lift_nu_polar((z0, w0), 1)
        cfg = IntegratorConfig(
            rel_tol=1e-9, abs_tol=1e-12, t_max=1e8, record_stride=1.0,
            pole_radius=1e-5, max_steps=100_000,
        )
        traj = integrate(cd, init, cfg)
        good = (
            traj.omega_class == "pole"
            and traj.omega_direction is not None
            and traj.omega_direction.chart == CHART_ZERO
            and abs(traj.omega_direction.coord) < 1e-9
            and abs(traj.terminal().v) < 1e-3 * abs(init.v)
        )
        hits += good
    elapsed = time.time() - t0
    ok = hits >= 95 and elapsed < 60
    report(11, ok, f"{hits}/100 trajectories reach the attracting pole; {elapsed:.1f}s")


def test_12_periodic_family():
    t0 = time.time()
    cd = connection_data(HomogeneousField(1, (0, 0, 0), (0, 1, 0)))
    init = lift_nu_polar((0.8j, 0.5), 1)
    cfg = IntegratorConfig(rel_tol=1e-11, abs_tol=1e-14, t_max=20.0, record_stride=0.02)
    traj = integrate(cd, init, cfg)
    ret = [e for e in traj.events if e.kind == "closed_return"]
    err = abs(ret[0].multiplier - 1) if ret else math.inf
    elapsed = time.time() - t0
    ok = traj.omega_class == "closed" and err <= 1e-6 and elapsed < 5
    report(12, ok, f"closed return with multiplier error {err:.1e}; {elapsed:.1f}s")
