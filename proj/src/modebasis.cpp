#include "tmm/modebasis.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

namespace tmm {

using std::numbers::pi;

std::string to_string(ModeFamily f) {
    switch (f) {
        case ModeFamily::sech_raw: return "sech_raw";
        case ModeFamily::sech_orthogonal: return "sech_orthogonal";
        case ModeFamily::hermite_gaussian: return "hermite_gaussian";
        case ModeFamily::time_bin: return "time_bin";
        case ModeFamily::frequency_bin: return "frequency_bin";
        case ModeFamily::measured: return "measured";
    }
    return "measured";
}

ModeFamily mode_family_from_string(const std::string& s) {
    for (auto f : {ModeFamily::sech_raw, ModeFamily::sech_orthogonal, ModeFamily::hermite_gaussian,
                   ModeFamily::time_bin, ModeFamily::frequency_bin, ModeFamily::measured})
        if (to_string(f) == s) return f;
    throw ConfigError("unknown mode family: " + s);
}

const TimeGrid& ModeBasis::grid() const {
    if (modes.empty()) throw ConfigError("ModeBasis: empty basis has no grid");
    return modes.front().grid;
}

// ---- raw sech family ----

namespace {

// Dirichlet eta(2m) = (1 - 2^(1-2m)) zeta(2m). eta(0) = 1/2 is pinned by hand:
// naive zeta use at the non-positive even argument is the classic trap.
double dirichlet_eta_2m(int m) {
    if (m == 0) return 0.5;
    return (1.0 - std::pow(2.0, 1.0 - 2.0 * m)) * std::riemann_zeta(2.0 * m);
}

void check_sech_args(int m, double kappa_ph, int limit) {
    if (m < 0 || m > limit)
        throw ConfigError("sech mode index out of range [0, " + std::to_string(limit) + "]");
    if (!(kappa_ph > 0.0)) throw ConfigError("kappa_ph must be positive");
}

}  // namespace

double sech_raw_normalization(int m, double kappa_ph) {
    check_sech_args(m, kappa_ph, 20);
    // N_m = kappa^(2m+1) / (8 eta(2m) Gamma(2m+1)); evaluated in log space so
    // kappa^41 cannot overflow.
    double log_n = (2.0 * m + 1.0) * std::log(kappa_ph) - std::log(8.0 * dirichlet_eta_2m(m)) -
                   std::lgamma(2.0 * m + 1.0);
    return std::exp(log_n);
}

SampledWaveform sech_raw(int m, double kappa_ph, const TimeGrid& grid) {
    check_sech_args(m, kappa_ph, 20);
    // Evaluate as sqrt(pref) sech(u) u^m with u = kappa t / 2 to keep
    // magnitudes representable at large m: pref = N_m (2/kappa)^(2m).
    double log_pref = std::log(kappa_ph) + 2.0 * m * std::log(2.0) -
                      std::log(8.0 * dirichlet_eta_2m(m)) - std::lgamma(2.0 * m + 1.0);
    double amp = std::exp(0.5 * log_pref);
    VectorXcd x(grid.n_points);
    for (int i = 0; i < grid.n_points; ++i) {
        double u = 0.5 * kappa_ph * grid.t(i);
        x[i] = amp * std::pow(u, m) / std::cosh(u);
    }
    return {grid, std::move(x), WaveformKind::mode_function};
}

// ---- default grid helper ----

TimeGrid default_grid_for_sech(double kappa_ph, int max_mode, double containment) {
    check_sech_args(max_mode, kappa_ph, 20);
    // dt from kappa_ph * dt <= 2 pi / 400; window from the highest mode's
    // energy tails: find T with integral_{|t|>T} |v|^2 dt <= containment/2,
    // then pad 15% so the waveform-construction check has margin.
    double dt = 2.0 * pi / (400.0 * kappa_ph);
    double log_pref = std::log(kappa_ph) + 2.0 * max_mode * std::log(2.0) -
                      std::log(8.0 * dirichlet_eta_2m(max_mode)) - std::lgamma(2.0 * max_mode + 1.0);
    double pref = std::exp(log_pref);
    // march outward in steps of dt until the remaining tail is small; the
    // integrand pref * u^(2m) sech^2(u) is bounded by pref u^(2m) 4 e^(-2u)
    // whose tail integral from T is < 2 pref u^(2m) e^(-2u) (1 + m/u) for u > 2m
    double T = 2.0 * std::max(1.0, static_cast<double>(max_mode)) / kappa_ph;
    for (;;) {
        double u = 0.5 * kappa_ph * T;
        if (u > 2.0 * max_mode + 2.0) {
            double log_tail = std::log(pref) + 2.0 * max_mode * std::log(u) - 2.0 * u +
                              std::log(2.0 / kappa_ph) + std::log1p(max_mode / u);
            if (log_tail < std::log(0.5 * containment)) break;
        }
        T += dt * 16;
    }
    T *= 1.15;
    int half = static_cast<int>(std::ceil(T / dt));
    return TimeGrid(-half * dt, dt, 2 * half + 1);
}

// ---- Gram-Schmidt ----

namespace {

void apply_sign_convention(VectorXcd& x) {
    double mx = x.cwiseAbs().maxCoeff();
    for (int i = 0; i < x.size(); ++i) {
        if (std::abs(x[i]) > 1e-3 * mx) {
            // rotate the first significant sample onto the positive real axis
            Complex ph = x[i] / std::abs(x[i]);
            x /= ph;
            return;
        }
    }
}

void certify_orthonormal(const std::vector<SampledWaveform>& modes) {
    for (size_t a = 0; a < modes.size(); ++a)
        for (size_t b = a; b < modes.size(); ++b) {
            Complex I = overlap(modes[a], modes[b]);
            if (a == b) {
                if (std::abs(std::abs(I) - 1.0) > 1e-9)
                    throw NumericalError("orthonormality certificate: diagonal overlap off unity");
            } else if (std::norm(I) > 1e-10) {
                throw NumericalError("orthonormality certificate: off-diagonal |I|^2 > 1e-10");
            }
        }
}

}  // namespace

ModeBasis gram_schmidt(const std::vector<SampledWaveform>& raw, ModeFamily family,
                       double kappa_ph) {
    if (raw.empty()) throw ConfigError("gram_schmidt: no input waveforms");
    const TimeGrid& g = raw.front().grid;
    for (const auto& w : raw)
        if (!(w.grid == g)) throw ConfigError("gram_schmidt: inputs on different grids");

    // Gram-matrix conditioning gate.
    const int n = static_cast<int>(raw.size());
    Eigen::MatrixXcd gram(n, n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) gram(a, b) = overlap(raw[a], raw[b]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gram);
    double lmin = es.eigenvalues().minCoeff(), lmax = es.eigenvalues().maxCoeff();
    if (!(lmin > 0.0) || lmax / lmin > 1e12)
        throw NumericalError("gram_schmidt: Gram matrix condition number exceeds 1e12");

    ModeBasis basis;
    basis.family = family;
    basis.kappa_ph = kappa_ph;
    for (int m = 0; m < n; ++m) {
        VectorXcd u = raw[m].samples;
        double before = std::sqrt(trapz(g, VectorXd(u.cwiseAbs2())));
        for (int pass = 0; pass < 2; ++pass)
            for (int k = 0; k < m; ++k) {
                const VectorXcd& xk = basis.modes[k].samples;
                Complex proj = trapz(g, VectorXcd(xk.conjugate().cwiseProduct(u)));
                u -= proj * xk;
            }
        double nrm = std::sqrt(trapz(g, VectorXd(u.cwiseAbs2())));
        if (nrm < 1e-10 * before)
            throw NumericalError("gram_schmidt: rank loss at input " + std::to_string(m));
        u /= nrm;
        apply_sign_convention(u);
        basis.modes.emplace_back(g, std::move(u), WaveformKind::mode_function);
    }
    certify_orthonormal(basis.modes);
    basis.orthonormal_certified = true;
    return basis;
}

ModeBasis sech_basis(int m_max, double kappa_ph, const TimeGrid& grid) {
    std::vector<SampledWaveform> raw;
    for (int m = 0; m <= m_max; ++m) raw.push_back(sech_raw(m, kappa_ph, grid));
    return gram_schmidt(raw, ModeFamily::sech_orthogonal, kappa_ph);
}

// ---- analytic cross-check (exact moments, m <= 3) ----

SampledWaveform sech_mode_analytic(int m, double kappa_ph, const TimeGrid& grid) {
    check_sech_args(m, kappa_ph, 3);
    // Even moments S_2j = integral t^(2j) sech^2(kappa t/2) dt
    //            = 8 Gamma(2j+1) eta(2j) / kappa^(2j+1).
    auto S = [&](int twoj) {
        int j = twoj / 2;
        return 8.0 * std::tgamma(2.0 * j + 1.0) * dirichlet_eta_2m(j) /
               std::pow(kappa_ph, 2.0 * j + 1.0);
    };
    // Orthogonalized polynomials p_m(t) (derived once by moment Gram-Schmidt):
    // p_0 = 1, p_1 = t, p_2 = t^2 - S2/S0, p_3 = t^3 - (S4/S2) t, with
    // S2/S0 = pi^2/(3 kappa^2) and S4/S2 = 7 pi^2/(5 kappa^2).
    double c0 = 0.0, c1 = 0.0;  // lower-order coefficient per parity
    double norm2 = 0.0;
    switch (m) {
        case 0: norm2 = S(0); break;
        case 1: norm2 = S(2); break;
        case 2:
            c0 = -S(2) / S(0);
            norm2 = S(4) + 2.0 * c0 * S(2) + c0 * c0 * S(0);
            break;
        case 3:
            c1 = -S(4) / S(2);
            norm2 = S(6) + 2.0 * c1 * S(4) + c1 * c1 * S(2);
            break;
    }
    double amp = 1.0 / std::sqrt(norm2);
    VectorXcd x(grid.n_points);
    for (int i = 0; i < grid.n_points; ++i) {
        double t = grid.t(i);
        double p = 0.0;
        switch (m) {
            case 0: p = 1.0; break;
            case 1: p = t; break;
            case 2: p = t * t + c0; break;
            case 3: p = t * t * t + c1 * t; break;
        }
        x[i] = amp * p / std::cosh(0.5 * kappa_ph * t);
    }
    apply_sign_convention(x);
    return {grid, std::move(x), WaveformKind::mode_function};
}

// ---- Hermite-Gaussian family ----

ModeBasis hermite_gaussian_basis(int m_max, double sigma, double t0, const TimeGrid& grid) {
    if (m_max < 0 || m_max > 30) throw ConfigError("hermite_gaussian_basis: m_max out of range");
    if (!(sigma > 0.0)) throw ConfigError("hermite_gaussian_basis: sigma must be positive");
    ModeBasis basis;
    basis.family = ModeFamily::hermite_gaussian;
    for (int m = 0; m <= m_max; ++m) {
        double lognorm = 0.5 * (m * std::log(2.0) + std::lgamma(m + 1.0) +
                                0.5 * std::log(pi) + std::log(sigma));
        VectorXcd v(grid.n_points);
        for (int i = 0; i < grid.n_points; ++i) {
            double x = (grid.t(i) - t0) / sigma;
            double h0 = 1.0, h1 = 2.0 * x;
            double h = (m == 0) ? h0 : h1;
            for (int k = 2; k <= m; ++k) {
                double h2 = 2.0 * x * h1 - 2.0 * (k - 1) * h0;
                h0 = h1;
                h1 = h2;
                h = h2;
            }
            v[i] = h * std::exp(-0.5 * x * x - lognorm);
        }
        apply_sign_convention(v);
        basis.modes.emplace_back(grid, std::move(v), WaveformKind::mode_function);
    }
    certify_orthonormal(basis.modes);
    basis.orthonormal_certified = true;
    return basis;
}

// ---- bin families ----

ModeBasis bin_basis(ModeFamily family, int n_bins, double kappa_ph, double spacing,
                    const TimeGrid& grid) {
    if (family != ModeFamily::time_bin && family != ModeFamily::frequency_bin)
        throw ConfigError("bin_basis: family must be time_bin or frequency_bin");
    if (n_bins < 1) throw ConfigError("bin_basis: need at least one bin");
    if (!(kappa_ph > 0.0)) throw ConfigError("bin_basis: kappa_ph must be positive");
    if (n_bins > 1 && !(spacing > 0.0))
        throw ConfigError("bin_basis: spacing must be positive for more than one bin");

    double amp = std::sqrt(kappa_ph / 4.0);
    ModeBasis basis;
    basis.family = family;
    basis.kappa_ph = kappa_ph;
    for (int b = 0; b < n_bins; ++b) {
        double off = (b - 0.5 * (n_bins - 1)) * spacing;
        VectorXcd v(grid.n_points);
        for (int i = 0; i < grid.n_points; ++i) {
            double t = grid.t(i);
            if (family == ModeFamily::time_bin) {
                v[i] = amp / std::cosh(0.5 * kappa_ph * (t - off));
            } else {
                double ph = 2.0 * pi * off * t;  // off is a frequency shift in Hz
                v[i] = amp / std::cosh(0.5 * kappa_ph * t) * Complex(std::cos(ph), std::sin(ph));
            }
        }
        basis.modes.emplace_back(grid, std::move(v), WaveformKind::mode_function);
    }
    // Certification: nearest-neighbour leakage.
    if (n_bins > 1) {
        double leak = std::norm(overlap(basis.modes[0], basis.modes[1]));
        if (leak > 1e-4)
            throw ConfigError("bin_basis: spacing too small, nearest-neighbour |I|^2 = " +
                              std::to_string(leak) + " > 1e-4");
    }
    basis.orthonormal_certified = true;  // certified to the 1e-4 bin criterion
    return basis;
}

// ---- overlaps ----

Eigen::MatrixXcd overlap_matrix(const ModeBasis& a, const ModeBasis& b) {
    Eigen::MatrixXcd out(a.size(), b.size());
    for (int i = 0; i < a.size(); ++i)
        for (int j = 0; j < b.size(); ++j) out(i, j) = overlap(a[i], b[j]);
    return out;
}

Eigen::MatrixXcd overlap_matrix(const ModeBasis& basis) { return overlap_matrix(basis, basis); }

// ---- Fourier transform ----

Spectrum fourier_transform(const SampledWaveform& w, int pad_factor) {
    if (w.kind != WaveformKind::mode_function && w.kind != WaveformKind::field_record)
        throw ConfigError("fourier_transform: expects a mode_function or field_record");
    if (pad_factor < 1) throw ConfigError("fourier_transform: pad_factor must be >= 1");
    const int n = w.grid.n_points;
    int nfft = 1;
    while (nfft < n * pad_factor) nfft <<= 1;
    std::vector<Complex> in(nfft, Complex(0, 0)), out(nfft);
    for (int i = 0; i < n; ++i) in[i] = w.samples[i];
    Eigen::FFT<double> fft;
    fft.fwd(out, in);
    // fftshift to a centered frequency axis; continuous-FT normalization dt
    // and the t_start phase factor restore xhat(f) = integral x e^(-i2pi f t).
    Spectrum s;
    s.df = 1.0 / (nfft * w.grid.dt);
    s.f_start = -0.5 * nfft * s.df;
    s.amplitude.resize(nfft);
    for (int k = 0; k < nfft; ++k) {
        int src = (k + nfft / 2) % nfft;
        double f = s.f(k);
        double ph = -2.0 * pi * f * w.grid.t_start;
        s.amplitude[k] = out[src] * w.grid.dt * Complex(std::cos(ph), std::sin(ph));
    }
    return s;
}

// ---- basis file round trip ----

void save_basis(const ModeBasis& basis, const std::string& path) {
    if (basis.modes.empty()) throw ConfigError("save_basis: empty basis");
    std::ofstream f(path);
    if (!f) throw ConfigError("save_basis: cannot open " + path);
    nlohmann::json header = {
        {"family", to_string(basis.family)},
        {"kappa_ph_rad_s", basis.kappa_ph},
        {"t_start_s", basis.grid().t_start},
        {"dt_s", basis.grid().dt},
        {"n_points", basis.grid().n_points},
        {"n_modes", basis.size()},
        {"orthonormal_certified", basis.orthonormal_certified},
    };
    f << "# " << header.dump() << "\n";
    f << "# columns: t";
    for (int m = 0; m < basis.size(); ++m) f << " re" << m << " im" << m;
    f << "\n";
    f.precision(17);
    for (int i = 0; i < basis.grid().n_points; ++i) {
        f << basis.grid().t(i);
        for (int m = 0; m < basis.size(); ++m)
            f << ' ' << basis[m].samples[i].real() << ' ' << basis[m].samples[i].imag();
        f << "\n";
    }
    if (!f) throw ConfigError("save_basis: write failed for " + path);
}

ModeBasis load_basis(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("load_basis: cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line.rfind("# ", 0) != 0)
        throw ConfigError("load_basis: missing header line");
    nlohmann::json header = nlohmann::json::parse(line.substr(2));
    ModeFamily family = mode_family_from_string(header.at("family").get<std::string>());
    TimeGrid grid(header.at("t_start_s").get<double>(), header.at("dt_s").get<double>(),
                  header.at("n_points").get<int>());
    const int n_modes = header.at("n_modes").get<int>();
    std::vector<VectorXcd> cols(n_modes, VectorXcd(grid.n_points));
    int row = 0;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (row >= grid.n_points) throw ConfigError("load_basis: more rows than n_points");
        std::istringstream ss(line);
        double t, re, im;
        ss >> t;
        for (int m = 0; m < n_modes; ++m) {
            if (!(ss >> re >> im)) throw ConfigError("load_basis: short row");
            cols[m][row] = Complex(re, im);
        }
        ++row;
    }
    if (row != grid.n_points) throw ConfigError("load_basis: fewer rows than n_points");
    ModeBasis basis;
    basis.family = family;
    basis.kappa_ph = header.at("kappa_ph_rad_s").get<double>();
    for (auto& c : cols) basis.modes.emplace_back(grid, std::move(c), WaveformKind::mode_function);
    // Re-verify the certificate for families that claim it.
    bool claimed = header.value("orthonormal_certified", false);
    if (claimed && family != ModeFamily::measured && family != ModeFamily::time_bin &&
        family != ModeFamily::frequency_bin)
        certify_orthonormal(basis.modes);
    basis.orthonormal_certified = claimed;
    return basis;
}

}  // namespace tmm
