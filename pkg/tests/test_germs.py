import random

import pytest

from merocon.algebra import TruncSeries
from merocon.germs import (
    APPARENT,
    FUCHSIAN,
    IRREGULAR,
    REGIME_APPARENT,
    REGIME_ATTRACT,
    REGIME_CLOSED,
    REGIME_ESCAPE,
    REGIME_PERIODIC,
    REGIME_RESONANT,
    REGIME_UNDETERMINED,
    ResonanceOrderError,
    LocalGerm,
    VEL_CIRCLE,
    VEL_INF,
    VEL_ZERO,
    apparent_index,
    classify,
    germ_residue,
    normal_form_residuals,
    normalize_formal,
    predict_dynamics,
    transform_germ,
)

N = 16


def monomial_germ(mu_x, x_tail, mu_y, y_tail, n=N):
    hx = TruncSeries.from_coeffs(x_tail, n)
    hy = TruncSeries.from_coeffs(y_tail, n) if y_tail is not None else None
    return LocalGerm(mu_x, hx, mu_y if y_tail is not None else None, hy)


def from_polys(x, y, n=N):
    return LocalGerm.from_series(
        TruncSeries.from_coeffs(x, n),
        TruncSeries.from_coeffs(y, n) if y is not None else None,
    )


class TestClassify:
    def test_two_direction_irregular_germ(self):
        # X = -z^2, Y = -(1 + (1-rho) z) at the order-2 direction
        rho = 2.0 + 0j
        g = from_polys([0, 0, -1], [-1, -(1 - rho)])
        rep = classify(g)
        assert rep.sing_class == IRREGULAR
        assert rep.irregularity == 2
        assert abs(rep.rho - 1) < 1e-12
        assert abs(rep.resonant_index - (1 - rho)) < 1e-12

    def test_one_direction_irregular_germ(self):
        # X = z^3, Y = z(1 + z)
        g = from_polys([0, 0, 0, 1], [0, 1, 1])
        rep = classify(g)
        assert rep.sing_class == IRREGULAR
        assert rep.mu_x == 3
        assert rep.irregularity == 2
        assert abs(rep.resonant_index - 1) < 1e-12

    def test_fuchsian_normal_form_germ(self):
        rho = 0.7 - 0.2j
        g = from_polys([0, 1], [rho])
        rep = classify(g)
        assert rep.sing_class == FUCHSIAN
        assert not rep.resonant
        assert abs(rep.rho - rho) < 1e-12
        assert abs(rep.residue - rho) < 1e-12

    def test_apparent_germ(self):
        g = from_polys([0, 1], None)
        rep = classify(g)
        assert rep.sing_class == APPARENT
        assert rep.degenerate
        assert rep.residue == 0

    def test_resonance_detection(self):
        # mu_y = 0, rho = -2: resonance degree 2
        g = from_polys([0, 1], [-2])
        rep = classify(g)
        assert rep.resonant and rep.resonance_degree == 2

    def test_near_resonance_warning(self):
        g = from_polys([0, 1], [-2 + 1e-7])
        rep = classify(g)
        assert not rep.resonant and rep.near_resonance_warning

    def test_residue_matches_rho_in_fuchsian_case(self):
        g = from_polys([0, 0, 3, 1], [0, 2, 5])
        rep = classify(g)
        assert rep.sing_class == FUCHSIAN
        assert abs(rep.residue - rep.rho) < 1e-12


class TestNormalize:
    def test_normal_form_is_fixed_point(self):
        rho = 0.4 + 0.3j
        g = from_polys([0, 0, 1], [0, rho])
        gn, rep, (psi, xi) = normalize_formal(g, order=N)
        assert normal_form_residuals(gn, rep) < 1e-14
        assert max(abs(c) for c in psi.sub(TruncSeries.identity(psi.n)).c) < 1e-14
        assert max(abs(xi.c[0] - 1), max(abs(c) for c in xi.c[1:])) < 1e-14

    def test_quadratic_case_resonant_index(self):
        # X = z(1 - z)-type germ with rho = -1 resonates at degree 1 with index 1
        rho = -1.0 + 0j
        g = from_polys([0, 1], [rho, -1])
        gn, rep, _ = normalize_formal(g, order=N)
        assert rep.resonant and rep.resonance_degree == 1
        assert abs(rep.resonant_index - 1) < 1e-10

    def test_round_trip_random_fuchsian(self):
        rng = random.Random(42)
        for _ in range(40):
            mu_x = rng.randint(1, 3)
            rho = complex(rng.uniform(-2, 2), rng.uniform(-2, 2))
            if abs(rho) < 0.2:
                rho += 0.5
            g0 = monomial_germ(mu_x, [1], mu_x - 1, [rho])
            psi, xi = random_change(rng)
            g1 = transform_germ(g0, psi, xi)
            gn, rep, _ = normalize_formal(g1, order=N)
            assert rep.sing_class == FUCHSIAN
            assert rep.mu_x == mu_x
            assert abs(rep.rho - rho) < 1e-8 * (1 + abs(rho))
            assert normal_form_residuals(gn, rep) < 1e-9

    def test_round_trip_resonant_keeps_index(self):
        rng = random.Random(77)
        for _ in range(20):
            mu_x = rng.randint(1, 3)
            mu_y = mu_x - 1
            n_res = rng.choice([n for n in range(1, 4) if n != mu_y])
            rho = complex(mu_y - n_res)
            a = complex(rng.uniform(-1, 1), rng.uniform(-1, 1))
            y = [0j] * 0 + [rho] + [0j] * (n_res - 1) + [rho * a]
            g0 = monomial_germ(mu_x, [1], mu_y, y)
            psi, xi = random_change(rng)
            g1 = transform_germ(g0, psi, xi)
            gn, rep, _ = normalize_formal(g1, order=N)
            assert rep.resonant and rep.resonance_degree == n_res
            assert abs(rep.resonant_index - a) < 1e-8 * (1 + abs(a))

    def test_irregular_index_matches_residue_formula(self):
        rng = random.Random(5)
        for _ in range(25):
            mu_y = rng.randint(0, 2)
            m = rng.randint(2, 3)
            mu_x = mu_y + m
            tail_x = [1] + [0.3 * complex(rng.gauss(0, 1), rng.gauss(0, 1)) for _ in range(4)]
            tail_y = [complex(rng.uniform(0.5, 2), rng.uniform(-1, 1))] + [
                0.3 * complex(rng.gauss(0, 1), rng.gauss(0, 1)) for _ in range(4)
            ]
            g = monomial_germ(mu_x, tail_x, mu_y, tail_y)
            rep0 = classify(g)
            gn, rep, _ = normalize_formal(g, order=N)
            expected = germ_residue(g) / rep0.rho
            assert abs(rep.resonant_index - expected) < 1e-8 * (1 + abs(expected))

    def test_truncation_below_resonance_rejected(self):
        g = from_polys([0, 0, 0, 0, 0, 0, 1], [0, 0, 0, 0, 0, complex(-20)])
        with pytest.raises(ResonanceOrderError):
            normalize_formal(g, order=8)

    def test_apparent_rejected(self):
        g = from_polys([0, 1], None)
        with pytest.raises(ValueError):
            normalize_formal(g)


class TestCovariance:
    def test_classification_invariants_under_changes(self):
        rng = random.Random(303)
        for _ in range(30):
            kind = rng.choice(["fuchsian", "irregular"])
            mu_y = rng.randint(0, 2)
            m = 1 if kind == "fuchsian" else rng.randint(2, 3)
            mu_x = mu_y + m
            tails = lambda: [complex(rng.uniform(0.5, 1.5), rng.uniform(-0.5, 0.5))] + [
                0.2 * complex(rng.gauss(0, 1), rng.gauss(0, 1)) for _ in range(3)
            ]
            g = monomial_germ(mu_x, tails(), mu_y, tails())
            rep0 = classify(g)
            psi, xi = random_change(rng)
            rep1 = classify(transform_germ(g, psi, xi))
            assert rep1.sing_class == rep0.sing_class
            assert rep1.mu_x == rep0.mu_x
            assert rep1.mu_y == rep0.mu_y
            assert abs(rep1.rho - rep0.rho) < 1e-8 * (1 + abs(rep0.rho))
            assert abs(rep1.residue - rep0.residue) < 1e-8 * (1 + abs(rep0.residue))


class TestApparentIndex:
    def test_plain_square(self):
        g = from_polys([0, 0, 1], None)
        assert abs(apparent_index(g)) < 1e-14

    def test_reads_off_normal_form(self):
        a = 0.8 - 0.1j
        g = from_polys([0, 0, 1, a], None)
        assert abs(apparent_index(g) - a) < 1e-12

    def test_two_path_consistency(self):
        # X = z^2, Y = z^3: removing Y must not change the invariant
        g = from_polys([0, 0, 1], [0, 0, 0, 1])
        g_ref = from_polys([0, 0, 1], None)
        assert abs(apparent_index(g) - apparent_index(g_ref)) < 1e-10

    def test_order_one_has_no_invariant(self):
        assert apparent_index(from_polys([0, 1], None)) is None

    def test_non_apparent_rejected(self):
        with pytest.raises(ValueError):
            apparent_index(from_polys([0, 1], [1]))


class TestPredict:
    def case(self, mu_y, rho, resonant_index=None, sing_class=FUCHSIAN):
        from merocon.germs import SingularityReport

        resonant = resonant_index is not None
        return SingularityReport(
            sing_class=sing_class,
            degenerate=mu_y is not None and mu_y >= 1,
            mu_x=(mu_y or 0) + 1,
            mu_y=mu_y,
            rho=complex(rho),
            irregularity=None,
            residue=complex(rho),
            resonant=resonant,
            resonance_degree=1 if resonant else None,
            resonant_index=resonant_index,
            apparent_index=None,
        )

    def test_escape_for_small_positive_rho(self):
        pred = predict_dynamics(self.case(0, 0.1))
        assert pred.regime == REGIME_ESCAPE and pred.velocity_limit == VEL_INF

    def test_imaginary_rho_closed(self):
        assert predict_dynamics(self.case(0, 1j)).regime == REGIME_CLOSED

    def test_attract_velocity_split(self):
        assert predict_dynamics(self.case(1, -0.5)).velocity_limit == VEL_ZERO
        assert predict_dynamics(self.case(2, 1.0)).velocity_limit == VEL_INF
        assert predict_dynamics(self.case(2, 1 + 1j)).velocity_limit == VEL_CIRCLE

    def test_periodic_family(self):
        assert predict_dynamics(self.case(2, 2.0)).regime == REGIME_PERIODIC

    def test_apparent_mixed(self):
        rep = self.case(None, 0, sing_class=APPARENT)
        assert predict_dynamics(rep).regime == REGIME_APPARENT

    def test_resonant_with_index_unknown(self):
        assert predict_dynamics(self.case(1, 0.0, resonant_index=1.0)).regime == REGIME_RESONANT

    def test_resonant_with_zero_index_uses_table(self):
        assert predict_dynamics(self.case(1, 0.0, resonant_index=0.0)).regime == REGIME_ATTRACT

    def test_irregular_undetermined(self):
        rep = self.case(0, 1.0, sing_class=IRREGULAR)
        assert predict_dynamics(rep).regime == REGIME_UNDETERMINED

    def test_total_function(self):
        rep = self.case(0, 0.3)
        assert predict_dynamics(rep) == predict_dynamics(rep)


def random_change(rng, n=N):
    psi = TruncSeries.from_coeffs(
        [0j, 1 + 0j] + [0.1 * complex(rng.gauss(0, 1), rng.gauss(0, 1)) * 0.5 ** k for k in range(4)],
        n,
    )
    xi0 = complex(rng.uniform(0.5, 2.0), rng.uniform(-0.5, 0.5))
    xi = TruncSeries.from_coeffs(
        [xi0] + [0.1 * complex(rng.gauss(0, 1), rng.gauss(0, 1)) * 0.5 ** k for k in range(4)],
        n,
    )
    return psi, xi
