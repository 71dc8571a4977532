import numpy as np
import pytest
from scipy.integrate import quad

from rosenblatt_lab.kernels import (
    CellKernel,
    DomainError,
    QuadProfile,
    TimeGrid,
    build_cell_kernel,
    constants,
    covariance_R,
    kernel_K,
    kernel_dK,
)

# arbitrary-precision reference values (mpmath, 30 digits)
D_H_06 = 0.51031036307982877
D_H_07 = 0.62884998097041032
C_085 = 0.32889706360925761
C_08 = 0.3064229718472685
K_08_1_05 = 0.87873063134713977
R_21_06 = 1.148698354997035


class TestConstants:
    def test_h_prime_is_midpoint(self):
        assert constants(0.6).h_prime == pytest.approx(0.8, abs=0)
        # derived property, recomputed: must agree to machine precision
        p = constants(0.7341)
        assert p.h_prime == (p.h + 1.0) / 2.0

    def test_twelve_digit_constants(self):
        assert constants(0.6).d_h == pytest.approx(D_H_06, rel=1e-13)
        assert constants(0.7).d_h == pytest.approx(D_H_07, rel=1e-13)
        assert constants(0.7).c_h_prime == pytest.approx(C_085, rel=1e-13)
        assert constants(0.8).c_h == pytest.approx(C_08, rel=1e-13)

    def test_limit_toward_one(self):
        assert constants(1.0 - 1e-9).h_prime == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("h", [0.5, 1.0, 0.2, 1.3, -0.7])
    def test_domain(self, h):
        with pytest.raises(DomainError):
            constants(h)

    def test_positivity_and_trace_identity(self):
        for h in (0.55, 0.6, 2 / 3, 0.75, 0.9):
            p = constants(h)
            assert p.d_h > 0 and p.c_h_prime > 0 and p.a_h > 0
            # 2 (d(H) H'(2H'-1))^2 == H(2H-1), the normalisation anchor
            assert 2 * p.trace_amp ** 2 == pytest.approx(h * (2 * h - 1), rel=1e-12)


class TestTimeGrid:
    def test_nodes(self):
        g = TimeGrid(2.0, 8)
        nodes = g.nodes
        assert nodes[0] == 0.0 and nodes[-1] == 2.0
        assert np.allclose(np.diff(nodes), g.delta)

    def test_index_of(self):
        g = TimeGrid(1.0, 16)
        assert g.index_of(0.5) == 8
        with pytest.raises(DomainError):
            g.index_of(0.03)

    def test_validation(self):
        with pytest.raises(DomainError):
            TimeGrid(-1.0, 4)
        with pytest.raises(DomainError):
            TimeGrid(1.0, 0)


class TestKernelK:
    def test_empty_range(self):
        assert kernel_K(0.8, 0.5, 0.5) == 0.0

    def test_positive(self):
        for t, s in [(1.0, 0.01), (1.0, 0.99), (0.3, 0.2)]:
            assert kernel_K(0.7, t, s) > 0.0

    def test_against_adaptive_quadrature(self):
        # independent oracle: scipy adaptive quadrature of the defining integral
        assert kernel_K(0.8, 1.0, 0.5, rel_tol=1e-9) == pytest.approx(
            K_08_1_05, rel=1e-9)
        h, t, s = 0.63, 0.9, 0.17
        p = constants(h)
        val, _ = quad(lambda u: (u - s) ** (h - 1.5) * u ** (h - 0.5), s, t,
                      points=[s], limit=200)
        oracle = p.c_h * s ** (0.5 - h) * val
        assert kernel_K(p, t, s) == pytest.approx(oracle, rel=1e-8)

    def test_domain(self):
        with pytest.raises(DomainError):
            kernel_K(0.8, 1.0, -0.1)
        with pytest.raises(DomainError):
            kernel_K(0.8, 0.3, 0.5)


class TestKernelDK:
    def test_positive(self):
        p = constants(0.7)
        assert kernel_dK(p, 1.0, 0.3) > 0.0
        assert np.all(kernel_dK(p, np.array([0.5, 0.9]), 0.2) > 0.0)

    def test_singular_exponent(self):
        # log dK vs log eps regression recovers H' - 3/2 on [1e-8, 1e-4]
        p = constants(0.6)
        s = 0.5
        eps = np.logspace(-8, -4, 9)
        slope = np.polyfit(np.log(eps),
                           np.log(kernel_dK(p, s + eps, s)), 1)[0]
        assert slope == pytest.approx(p.h_prime - 1.5, abs=1e-3)

    def test_matches_finite_difference_of_K(self):
        p = constants(0.6)
        u, s, du = 1.0, 0.5, 1e-6
        fd = (kernel_K(p.h_prime, u + du, s) - kernel_K(p.h_prime, u - du, s)) / (2 * du)
        assert kernel_dK(p, u, s) == pytest.approx(fd, rel=1e-6)

    def test_domain(self):
        p = constants(0.7)
        with pytest.raises(DomainError):
            kernel_dK(p, 0.5, 0.5)
        with pytest.raises(DomainError):
            kernel_dK(p, 1.0, 0.0)


class TestCovariance:
    def test_unit_time(self):
        for h in (0.55, 0.7, 0.95):
            assert covariance_R(constants(h), 1.0, 1.0) == 1.0

    def test_zero(self):
        assert covariance_R(constants(0.7), 3.7, 0.0) == 0.0

    def test_frozen_value(self):
        assert covariance_R(constants(0.6), 2.0, 1.0) == pytest.approx(
            R_21_06, rel=1e-14)

    def test_symmetry_and_scaling(self):
        p = constants(0.77)
        rng = np.random.default_rng(1)
        for _ in range(20):
            t, s, c = rng.uniform(0.05, 2.0, 3)
            assert covariance_R(p, t, s) == pytest.approx(
                covariance_R(p, s, t), rel=1e-14)
            assert covariance_R(p, c * t, c * s) == pytest.approx(
                c ** (2 * p.h) * covariance_R(p, t, s), rel=1e-12)


@pytest.fixture(scope="module")
def table_256():
    return build_cell_kernel(constants(0.7), TimeGrid(1.0, 256), 256,
                             profile=QuadProfile.default(256))


class TestCellKernel:
    def test_zero_at_origin(self):
        ck = build_cell_kernel(constants(0.7), TimeGrid(1.0, 16), 0)
        assert np.all(ck.values == 0.0)

    def test_support_and_symmetry(self):
        ck = build_cell_kernel(constants(0.7), TimeGrid(1.0, 16), 9)
        v = ck.values
        assert np.array_equal(v, v.T)
        assert np.all(np.isfinite(v))
        assert np.all(v[9:, :] == 0.0) and np.all(v[:, 9:] == 0.0)
        assert np.all(v[:9, :9] > 0.0)

    def test_isometry_at_desk_scale(self, table_256):
        # the grid L2 mass of the averaged table reaches t^{2H} within 3%
        assert table_256.isometry_sum() == pytest.approx(1.0, abs=0.09)
        assert table_256.isometry_sum() < 1.0

    def test_isometry_convergence(self):
        p = constants(0.7)
        gaps = []
        for n in (64, 128, 256, 512):
            ck = build_cell_kernel(p, TimeGrid(1.0, n), n,
                                   profile=QuadProfile.default(n))
            gaps.append(1.0 - ck.isometry_sum())
        assert all(g > 0 for g in gaps)
        assert all(b < a for a, b in zip(gaps, gaps[1:]))

    def test_monotone_in_time(self):
        p = constants(0.65)
        g = TimeGrid(1.0, 32)
        a_small = build_cell_kernel(p, g, 16).values
        a_large = build_cell_kernel(p, g, 32).values
        assert np.all(a_large - a_small >= -1e-15)

    def test_entries_match_independent_average(self):
        # oracle: exact incomplete-Beta columns + adaptive quadrature in u
        import math
        from scipy import special as sp

        p = constants(0.7)
        n = 16
        g = TimeGrid(1.0, n)
        ck = build_cell_kernel(p, g, n)
        hp = p.h_prime
        pq = (1.5 - hp, hp - 0.5)
        bpq = math.exp(sp.betaln(*pq))

        def kappa(i, u):
            lo, hi = i * g.delta, min((i + 1) * g.delta, u)
            if u <= lo:
                return 0.0
            return (p.c_h_prime / g.delta) * u ** (hp - 0.5) * bpq * (
                sp.betainc(*pq, hi / u) - sp.betainc(*pq, lo / u))

        for i, j in [(3, 3), (3, 4), (2, 7), (0, 5)]:
            lo = min(i, j) * g.delta
            pts = [k * g.delta for k in range(n) if lo < k * g.delta < 1.0]
            val, _ = quad(lambda u: kappa(i, u) * kappa(j, u), lo, 1.0,
                          points=pts, limit=400)
            assert ck.values[i, j] == pytest.approx(p.d_h * val, rel=2e-5)

    def test_refinement_tolerance_passes(self):
        build_cell_kernel(constants(0.7), TimeGrid(1.0, 32), 32, rel_tol=1e-8)

    def test_calibration_diagnostics(self):
        # variance-exact factors square against the isometry sums; the
        # simulator plan keeps marginal variances exact with a bounded
        # Gaussian share
        from rosenblatt_lab.kernels import (calibration_factors,
                                            hybrid_calibration, isometry_sums)
        p = constants(0.7)
        g = TimeGrid(1.0, 64)
        sums = isometry_sums(p, g)
        gam = calibration_factors(p, g)
        t = g.nodes
        assert np.allclose((gam ** 2 * sums)[1:], t[1:] ** (2 * p.h), rtol=1e-12)
        plan = hybrid_calibration(p, g)
        total = plan.gamma_array() ** 2 * sums + plan.topup_variance(t, p.h)
        assert np.allclose(total[1:], t[1:] ** (2 * p.h), rtol=1e-12)
        assert 0.0 <= plan.topup_scale < 0.5

    def test_bad_index(self):
        with pytest.raises(DomainError):
            build_cell_kernel(constants(0.7), TimeGrid(1.0, 8), 9)

    def test_csv_export(self, tmp_path):
        ck = build_cell_kernel(constants(0.7), TimeGrid(1.0, 4), 4)
        out = tmp_path / "table.csv"
        ck.to_csv(out)
        lines = out.read_text().splitlines()
        assert lines[0] == "i,j,value"
        assert len(lines) == 1 + 16
