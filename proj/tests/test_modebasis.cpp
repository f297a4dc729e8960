#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <numbers>

#include "tmm/modebasis.hpp"

using namespace tmm;
using std::numbers::pi;

namespace {
const double kKappa = 2.0 * pi * 5e6;  // rad/s

TimeGrid grid_for(int m_max) { return default_grid_for_sech(kKappa, m_max); }
}  // namespace

TEST_CASE("raw sech normalization constant handles the m = 0 zeta trap") {
    // N_0 = kappa/4 requires eta(0) = 1/2 (equivalently zeta(0) = -1/2).
    CHECK(sech_raw_normalization(0, kKappa) == doctest::Approx(kKappa / 4.0).epsilon(1e-12));
    // N_1 = 3 kappa^3 / (4 pi^2), independent closed form.
    CHECK(sech_raw_normalization(1, kKappa) ==
          doctest::Approx(3.0 * std::pow(kKappa, 3) / (4.0 * pi * pi)).epsilon(1e-12));
}

TEST_CASE("raw sech modes have unit norm for m = 0..20") {
    TimeGrid g = grid_for(20);
    for (int m = 0; m <= 20; ++m) {
        SampledWaveform v = sech_raw(m, kKappa, g);  // ctor enforces norm to 1e-9
        CHECK(std::abs(v.energy() - 1.0) < 1e-9);
    }
    CHECK_THROWS_AS(sech_raw(21, kKappa, grid_for(20)), ConfigError);
    CHECK_THROWS_AS(sech_raw(-1, kKappa, grid_for(1)), ConfigError);
    CHECK_THROWS_AS(sech_raw(0, -1.0, grid_for(1)), ConfigError);
}

TEST_CASE("gram_schmidt produces a certified orthonormal family") {
    TimeGrid g = grid_for(7);
    ModeBasis basis = sech_basis(7, kKappa, g);
    REQUIRE(basis.size() == 8);
    CHECK(basis.orthonormal_certified);
    Eigen::MatrixXcd I = overlap_matrix(basis);
    for (int a = 0; a < 8; ++a)
        for (int b = 0; b < 8; ++b) {
            if (a == b)
                CHECK(std::abs(I(a, b) - Complex(1, 0)) < 1e-9);
            else
                CHECK(std::norm(I(a, b)) < 1e-10);
        }
}

TEST_CASE("gram_schmidt is idempotent on an orthonormal input") {
    TimeGrid g = grid_for(5);
    ModeBasis basis = sech_basis(5, kKappa, g);
    ModeBasis again = gram_schmidt(basis.modes, ModeFamily::sech_orthogonal, kKappa);
    for (int m = 0; m < basis.size(); ++m) {
        double worst = (again[m].samples - basis[m].samples).cwiseAbs().maxCoeff();
        // relative to the SI amplitude scale of the samples (~sqrt(kappa))
        CHECK(worst < 1e-12 * basis[m].samples.cwiseAbs().maxCoeff());
    }
}

TEST_CASE("analytic modes m <= 3 agree with the numeric path per sample") {
    TimeGrid g = grid_for(3);
    ModeBasis numeric = sech_basis(3, kKappa, g);
    for (int m = 0; m <= 3; ++m) {
        SampledWaveform ana = sech_mode_analytic(m, kKappa, g);
        // compare up to global sign (the convention fixes it identically,
        // but do not rely on that here)
        double d_plus = (ana.samples - numeric[m].samples).cwiseAbs().maxCoeff();
        double d_minus = (ana.samples + numeric[m].samples).cwiseAbs().maxCoeff();
        double scale = numeric[m].samples.cwiseAbs().maxCoeff();
        CHECK(std::min(d_plus, d_minus) < 1e-6 * scale);
    }
    CHECK_THROWS_AS(sech_mode_analytic(4, kKappa, g), ConfigError);
}

TEST_CASE("mode 2 analytic polynomial has the exact-moment constant term") {
    // p_2 ~ t^2 - pi^2/(3 kappa^2): check the zero crossings at
    // t = +- pi/(sqrt(3) kappa).
    TimeGrid g = grid_for(2);
    SampledWaveform m2 = sech_mode_analytic(2, kKappa, g);
    double t_zero = pi / (std::sqrt(3.0) * kKappa);
    double v0 = m2.at(t_zero).real(), v1 = m2.at(0.0).real();
    CHECK(std::abs(v0) < 1e-4 * std::abs(v1));
}

TEST_CASE("mode m has m sign changes") {
    TimeGrid g = grid_for(5);
    ModeBasis basis = sech_basis(5, kKappa, g);
    for (int m = 0; m <= 5; ++m) {
        const VectorXcd& x = basis[m].samples;
        double mx = x.cwiseAbs().maxCoeff();
        int crossings = 0;
        double last = 0.0;
        for (int i = 0; i < x.size(); ++i) {
            double v = x[i].real();
            if (std::abs(v) < 1e-3 * mx) continue;  // skip the noisy tails
            if (last != 0.0 && v * last < 0.0) ++crossings;
            last = v;
        }
        CHECK(crossings == m);
    }
}

TEST_CASE("sign convention: leading tail region is positive-real") {
    TimeGrid g = grid_for(3);
    ModeBasis basis = sech_basis(3, kKappa, g);
    for (int m = 0; m <= 3; ++m) {
        const VectorXcd& x = basis[m].samples;
        double mx = x.cwiseAbs().maxCoeff();
        for (int i = 0; i < x.size(); ++i)
            if (std::abs(x[i]) > 1e-3 * mx) {
                CHECK(x[i].real() > 0.0);
                CHECK(std::abs(x[i].imag()) < 1e-12 * mx);
                break;
            }
    }
}

TEST_CASE("overlap matrix is stable under grid refinement") {
    TimeGrid g = grid_for(7);
    TimeGrid fine(g.t_start, g.dt / 2.0, 2 * g.n_points - 1);
    Eigen::MatrixXcd c = overlap_matrix(sech_basis(7, kKappa, g));
    Eigen::MatrixXcd f = overlap_matrix(sech_basis(7, kKappa, fine));
    CHECK((c - f).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("gram_schmidt rejects rank-deficient and ill-conditioned input") {
    TimeGrid g = grid_for(1);
    SampledWaveform v0 = sech_raw(0, kKappa, g);
    CHECK_THROWS_AS(gram_schmidt({v0, v0}, ModeFamily::measured), NumericalError);
}

TEST_CASE("dilation covariance: duration scales as 1/kappa, bandwidth as kappa") {
    TimeGrid g1 = grid_for(2);
    TimeGrid g2 = default_grid_for_sech(2.0 * kKappa, 2);
    ModeBasis b1 = sech_basis(2, kKappa, g1);
    ModeBasis b2 = sech_basis(2, 2.0 * kKappa, g2);
    for (int m = 0; m <= 2; ++m) {
        auto [lo1, hi1] = energy_window(b1[m], 0.99);
        auto [lo2, hi2] = energy_window(b2[m], 0.99);
        CHECK((hi2 - lo2) == doctest::Approx(0.5 * (hi1 - lo1)).epsilon(1e-3));
        auto [fl1, fh1] = energy_bandwidth(fourier_transform(b1[m]), 0.99);
        auto [fl2, fh2] = energy_bandwidth(fourier_transform(b2[m]), 0.99);
        CHECK((fh2 - fl2) == doctest::Approx(2.0 * (fh1 - fl1)).epsilon(1e-3));
    }
}

TEST_CASE("spectra: even modes real, odd modes imaginary; Parseval holds") {
    TimeGrid g = grid_for(3);
    ModeBasis basis = sech_basis(3, kKappa, g);
    for (int m = 0; m <= 3; ++m) {
        Spectrum s = fourier_transform(basis[m]);
        CHECK(std::abs(s.energy() - 1.0) < 1e-6);
        double re = s.amplitude.real().cwiseAbs().maxCoeff();
        double im = s.amplitude.imag().cwiseAbs().maxCoeff();
        if (m % 2 == 0)
            CHECK(im < 1e-6 * re);
        else
            CHECK(re < 1e-6 * im);
    }
}

TEST_CASE("mode-0 spectrum matches the closed form sech profile") {
    // xhat(f) = sqrt(N0) (2 pi / kappa) sech(pi^2 2 f / kappa)
    TimeGrid g = grid_for(0);
    ModeBasis basis = sech_basis(0, kKappa, g);
    Spectrum s = fourier_transform(basis[0]);
    double amp = std::sqrt(kKappa / 4.0) * 2.0 * pi / kKappa;
    for (double f : {0.0, 1e6, 3e6, 5e6}) {
        int i = static_cast<int>(std::lround((f - s.f_start) / s.df));
        double expect = amp / std::cosh(pi * 2.0 * pi * s.f(i) / kKappa);
        CHECK(std::abs(std::abs(s.amplitude[i]) - expect) < 1e-3 * amp);
    }
}

TEST_CASE("hermite-gaussian family is orthonormal and matches closed forms") {
    double sigma = 100e-9;
    TimeGrid g(-1.2e-6, 1e-9, 2401);
    ModeBasis hg = hermite_gaussian_basis(3, sigma, 0.0, g);
    CHECK(hg.orthonormal_certified);
    // psi_0(0) = (pi^(1/4) sqrt(sigma))^-1
    double expect0 = 1.0 / (std::pow(pi, 0.25) * std::sqrt(sigma));
    CHECK(std::abs(hg[0].at(0.0).real() - expect0) < 1e-9 * expect0);
    // psi_1 vanishes at its center
    CHECK(std::abs(hg[1].at(0.0)) < 1e-12 * hg[1].samples.cwiseAbs().maxCoeff());
}

TEST_CASE("time-bin basis: certified spacing passes, tight spacing rejected") {
    // Closed form |I(s)| = x/sinh(x), x = kappa s / 2 (verified independently
    // by 30-digit quadrature): s = 16/kappa -> |I|^2 = 2.8809e-5 <= 1e-4,
    // s = 10/kappa -> 4.54e-3, violating the bin certification.
    TimeGrid g(-3.0e-6, 1e-9, 6001);
    ModeBasis bins = bin_basis(ModeFamily::time_bin, 3, kKappa, 16.0 / kKappa, g);
    double leak = std::norm(overlap(bins[0], bins[1]));
    CHECK(leak == doctest::Approx(2.8809e-5).epsilon(1e-3));
    CHECK_THROWS_AS(bin_basis(ModeFamily::time_bin, 3, kKappa, 10.0 / kKappa, g), ConfigError);
}

TEST_CASE("frequency-bin basis: zero spacing is degenerate and rejected") {
    TimeGrid g(-2.0e-6, 1e-9, 4001);
    CHECK_THROWS_AS(bin_basis(ModeFamily::frequency_bin, 2, kKappa, 0.0, g), ConfigError);
    ModeBasis ok = bin_basis(ModeFamily::frequency_bin, 2, kKappa, 15e6, g);
    CHECK(std::norm(overlap(ok[0], ok[1])) <= 1e-4);
}

TEST_CASE("mode_function construction rejects a grid that clips the energy") {
    TimeGrid narrow(-100e-9, 0.5e-9, 401);
    CHECK_THROWS_AS(sech_raw(0, kKappa, narrow), ConfigError);
}

TEST_CASE("basis file round trip preserves the overlap matrix") {
    TimeGrid g = grid_for(3);
    ModeBasis basis = sech_basis(3, kKappa, g);
    std::string path = "basis_roundtrip.txt";
    save_basis(basis, path);
    ModeBasis back = load_basis(path);
    std::remove(path.c_str());
    REQUIRE(back.size() == basis.size());
    CHECK(back.family == basis.family);
    Eigen::MatrixXcd a = overlap_matrix(basis), b = overlap_matrix(back);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-9);
}
