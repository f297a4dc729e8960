#include "tmm/tfplan.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace tmm {
namespace {

constexpr double pi = std::numbers::pi;

// Trapezoid weights on a uniform axis: half weight at the two ends.
template <typename Derived>
double trapz_uniform(const Eigen::DenseBase<Derived>& f, double h) {
    const auto n = f.size();
    if (n < 2) throw ConfigError("trapezoid rule needs at least two samples");
    return h * (f.sum() - 0.5 * (f(0) + f(n - 1)));
}

void check_options(const WignerOptions& o) {
    if (o.pad_factor < 1) throw ConfigError("wigner: pad_factor must be >= 1");
    if (o.max_rows < 16) throw ConfigError("wigner: max_rows must be >= 16");
    if (!(o.band_quantile > 0.0) || o.band_quantile > 0.1)
        throw ConfigError("wigner: band_quantile must lie in (0, 0.1]");
    if (o.band_margin < 1.0) throw ConfigError("wigner: band_margin must be >= 1");
}

}  // namespace

// ---- WignerGrid ----

double WignerGrid::dt() const {
    if (times.size() < 2) throw ConfigError("wigner grid has fewer than two time samples");
    return times[1] - times[0];
}

double WignerGrid::df() const {
    if (freqs.size() < 2) throw ConfigError("wigner grid has fewer than two frequency samples");
    return freqs[1] - freqs[0];
}

VectorXd WignerGrid::time_marginal() const {
    const double h = df();
    VectorXd out(values.rows());
    for (int i = 0; i < values.rows(); ++i) out[i] = trapz_uniform(values.row(i), h);
    return out;
}

VectorXd WignerGrid::frequency_marginal() const {
    const double h = dt();
    VectorXd out(values.cols());
    for (int j = 0; j < values.cols(); ++j) out[j] = trapz_uniform(values.col(j), h);
    return out;
}

double WignerGrid::integral() const { return trapz_uniform(time_marginal(), dt()); }

// ---- wigner ----

WignerGrid wigner(const SampledWaveform& mode, const WignerOptions& options) {
    check_options(options);
    if (std::abs(mode.energy() - 1.0) > 1e-6)
        throw ConfigError("wigner: input must be a unit-norm mode");

    const TimeGrid& g = mode.grid;
    const int n = g.n_points;
    const double dt = g.dt;

    // Spectral profile for the band crop and the aliasing gate. The lag
    // correlation is sampled at tau = 2k dt, so the frequency comb wraps at
    // 1/(4 dt); reject modes with visible mass near that edge.
    const Spectrum spec = fourier_transform(mode, 8);
    const double f_nyq = 1.0 / (4.0 * dt);
    double outside = 0.0;
    for (int k = 0; k < spec.n_points(); ++k)
        if (std::abs(spec.f(k)) > 0.95 * f_nyq) outside += std::norm(spec.amplitude[k]) * spec.df;
    if (outside > 1e-6)
        throw NumericalError(
            "wigner: spectral mass beyond the tau-sampling Nyquist 1/(4 dt); refine the grid");

    const auto band = energy_bandwidth(spec, 1.0 - options.band_quantile);
    const double half_band =
        options.band_margin * std::max(std::abs(band.first), std::abs(band.second));

    int m_fft = 1;
    while (m_fft < n * options.pad_factor) m_fft <<= 1;
    const double df = 1.0 / (2.0 * dt * m_fft);
    const int j_max =
        std::clamp(static_cast<int>(std::floor(half_band / df)), 8, m_fft / 2 - 1);

    const int stride = (n + options.max_rows - 1) / options.max_rows;
    const int offset = ((n - 1) / 2) % stride;  // keep the center sample on the row set
    const int n_rows = (n - offset + stride - 1) / stride;

    WignerGrid w;
    w.times.resize(n_rows);
    w.freqs.resize(2 * j_max + 1);
    for (int j = -j_max; j <= j_max; ++j) w.freqs[j + j_max] = j * df;
    w.values.resize(n_rows, 2 * j_max + 1);

    Eigen::FFT<double> fft;
    std::vector<Complex> in(m_fft), out(m_fft);
    double max_imag = 0.0, max_real = 0.0;
    for (int r = 0; r < n_rows; ++r) {
        const int i = offset + r * stride;
        w.times[r] = g.t(i);
        std::fill(in.begin(), in.end(), Complex(0, 0));
        const int k_max = std::min(i, n - 1 - i);
        in[0] = std::norm(mode.samples[i]);
        for (int k = 1; k <= k_max; ++k) {
            const Complex c = mode.samples[i + k] * std::conj(mode.samples[i - k]);
            in[k] = c;
            in[m_fft - k] = std::conj(c);
        }
        fft.fwd(out, in);
        for (int j = -j_max; j <= j_max; ++j) {
            const Complex v = out[(j + m_fft) % m_fft] * (2.0 * dt);
            w.values(r, j + j_max) = v.real();
            max_imag = std::max(max_imag, std::abs(v.imag()));
            max_real = std::max(max_real, std::abs(v.real()));
        }
    }
    // The input sequence is Hermitian by construction, so the transform is
    // real up to rounding; anything more signals a broken correlation fill.
    if (max_imag > 1e-9 * max_real)
        throw NumericalError("wigner: transform failed the realness check");
    return w;
}

// ---- wigner_overlap ----

double wigner_overlap(const WignerGrid& a, const WignerGrid& b) {
    if (a.times.size() != b.times.size())
        throw ConfigError("wigner_overlap: time axes differ in length");
    const double t_scale = std::max(a.times.cwiseAbs().maxCoeff(), 1e-30);
    if ((a.times - b.times).cwiseAbs().maxCoeff() > 1e-9 * t_scale)
        throw ConfigError("wigner_overlap: time axes disagree");
    const double df = a.df();
    if (std::abs(df - b.df()) > 1e-9 * df)
        throw ConfigError("wigner_overlap: frequency spacings disagree");

    // Both combs are symmetric about zero with shared spacing; trim to the
    // narrower band and integrate the product.
    const int ja = (static_cast<int>(a.freqs.size()) - 1) / 2;
    const int jb = (static_cast<int>(b.freqs.size()) - 1) / 2;
    const int j = std::min(ja, jb);
    const int cols = 2 * j + 1;
    VectorXd per_t(a.times.size());
    for (int r = 0; r < a.values.rows(); ++r) {
        const VectorXd prod = a.values.row(r).segment(ja - j, cols).cwiseProduct(
            b.values.row(r).segment(jb - j, cols));
        per_t[r] = trapz_uniform(prod, df);
    }
    return trapz_uniform(per_t, a.dt());
}

// ---- multiplexing capacity ----

std::string to_string(MultiplexScheme s) {
    switch (s) {
        case MultiplexScheme::temporal: return "temporal";
        case MultiplexScheme::time_bin: return "time_bin";
        case MultiplexScheme::frequency_bin: return "frequency_bin";
        case MultiplexScheme::time_frequency_product: return "time_frequency_product";
    }
    throw ConfigError("unknown multiplex scheme");
}

MultiplexScheme multiplex_scheme_from_string(const std::string& s) {
    if (s == "temporal") return MultiplexScheme::temporal;
    if (s == "time_bin") return MultiplexScheme::time_bin;
    if (s == "frequency_bin") return MultiplexScheme::frequency_bin;
    if (s == "time_frequency_product") return MultiplexScheme::time_frequency_product;
    throw ConfigError("unknown multiplex scheme: " + s);
}

void ResourceBudget::validate() const {
    if (!(t_window > 0.0) || !std::isfinite(t_window))
        throw ConfigError("resource budget: t_window must be positive");
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
        throw ConfigError("resource budget: bandwidth must be positive");
    if (!(kappa_min > 0.0) || !(kappa_max > 0.0) || !std::isfinite(kappa_min) ||
        !std::isfinite(kappa_max))
        throw ConfigError("resource budget: kappa bounds must be positive");
    if (!(kappa_min < kappa_max))
        throw ConfigError("resource budget: kappa_min must be below kappa_max");
}

namespace {

// x solving x/sinh(x) = 1e-2, i.e. the neighbour overlap certificate
// |I|^2 = 1e-4 for shifted sech mode-0 copies (time shift s: x = kappa s / 2;
// frequency shift sigma: x = 2 pi^2 sigma / kappa -- both reduce to the same
// transcendental because the mode-0 profile is its own squared envelope).
double bin_threshold_x() {
    static const double x_star = [] {
        double lo = 1.0, hi = 30.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (mid / std::sinh(mid) > 1e-2 ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    }();
    return x_star;
}

// Slack keeps the grid-quadrature overlap strictly inside the certificate.
constexpr double kBinSlack = 1.0005;

// Per-mode centered energy extents of the sech family, measured once on a
// reference grid; dilation makes width * kappa and bandwidth / kappa exact
// invariants, so one table serves every kappa in the scan.
class SechExtents {
  public:
    explicit SechExtents(double fraction) : fraction_(fraction) {}

    bool ensure(int m) {
        if (m > kMaxMode) return false;
        if (m < size()) return true;
        const int top = std::min(kMaxMode, std::max(m, 2 * size() + 1));
        const TimeGrid grid = default_grid_for_sech(kappa_ref_, top);
        const ModeBasis basis = sech_basis(top, kappa_ref_, grid);
        width_u_.clear();
        band_u_.clear();
        for (int k = 0; k <= top; ++k) {
            const auto tw = energy_window(basis[k], fraction_);
            const auto bw = energy_bandwidth(fourier_transform(basis[k], 4), fraction_);
            width_u_.push_back((tw.second - tw.first) * kappa_ref_);
            band_u_.push_back((bw.second - bw.first) / kappa_ref_);
        }
        return m < size();
    }

    int size() const { return static_cast<int>(width_u_.size()); }
    double width_at(int m, double kappa) const { return width_u_[m] / kappa; }
    double bandwidth_at(int m, double kappa) const { return band_u_[m] * kappa; }

    // Family-construction ceiling (sech_raw supports m <= 20); the temporal
    // count therefore saturates at 21 modes on very large budgets.
    static constexpr int kMaxMode = 20;

  private:
    double fraction_;
    double kappa_ref_ = 2.0 * pi * 5e6;
    std::vector<double> width_u_;
    std::vector<double> band_u_;
};

int count_at_kappa(MultiplexScheme scheme, const ResourceBudget& budget, double kappa,
                   SechExtents& extents) {
    const auto bins = [&](double span, double step) {
        return 1 + static_cast<int>(std::floor(span / step + 1e-9));
    };
    switch (scheme) {
        case MultiplexScheme::temporal: {
            int n = 0;
            while (extents.ensure(n) && extents.width_at(n, kappa) <= budget.t_window &&
                   extents.bandwidth_at(n, kappa) <= budget.bandwidth)
                ++n;
            return n;
        }
        case MultiplexScheme::time_bin: {
            extents.ensure(0);
            const double w0 = extents.width_at(0, kappa);
            const double b0 = extents.bandwidth_at(0, kappa);
            if (w0 > budget.t_window || b0 > budget.bandwidth) return 0;
            return bins(budget.t_window - w0, certified_time_spacing(kappa));
        }
        case MultiplexScheme::frequency_bin: {
            extents.ensure(0);
            const double w0 = extents.width_at(0, kappa);
            const double b0 = extents.bandwidth_at(0, kappa);
            if (w0 > budget.t_window || b0 > budget.bandwidth) return 0;
            return bins(budget.bandwidth - b0, certified_frequency_spacing(kappa));
        }
        case MultiplexScheme::time_frequency_product:
            return count_at_kappa(MultiplexScheme::time_bin, budget, kappa, extents) *
                   count_at_kappa(MultiplexScheme::frequency_bin, budget, kappa, extents);
    }
    throw ConfigError("unknown multiplex scheme");
}

ModeCountResult best_over_kappa(MultiplexScheme scheme, const ResourceBudget& budget,
                                int kappa_points, SechExtents& extents) {
    budget.validate();
    if (kappa_points < 2) throw ConfigError("mode_count: kappa scan needs at least two points");
    const double log_lo = std::log(budget.kappa_min);
    const double log_hi = std::log(budget.kappa_max);
    ModeCountResult best;
    for (int i = 0; i < kappa_points; ++i) {
        const double kappa =
            std::exp(log_lo + (log_hi - log_lo) * i / static_cast<double>(kappa_points - 1));
        const int n = count_at_kappa(scheme, budget, kappa, extents);
        if (n > best.n) best = {n, kappa};
    }
    return best;
}

}  // namespace

double certified_time_spacing(double kappa_ph) {
    if (!(kappa_ph > 0.0)) throw ConfigError("certified_time_spacing: kappa must be positive");
    return kBinSlack * 2.0 * bin_threshold_x() / kappa_ph;
}

double certified_frequency_spacing(double kappa_ph) {
    if (!(kappa_ph > 0.0)) throw ConfigError("certified_frequency_spacing: kappa must be positive");
    return kBinSlack * bin_threshold_x() * kappa_ph / (2.0 * pi * pi);
}

ModeCountResult mode_count(MultiplexScheme scheme, const ResourceBudget& budget, double fraction,
                           int kappa_points) {
    if (!(fraction > 0.0) || !(fraction < 1.0))
        throw ConfigError("mode_count: fraction must lie in (0, 1)");
    SechExtents extents(fraction);
    return best_over_kappa(scheme, budget, kappa_points, extents);
}

std::vector<CapacityCell> capacity_table(const std::vector<double>& t_windows,
                                         const std::vector<double>& bandwidths, double kappa_min,
                                         double kappa_max, double fraction, int kappa_points) {
    if (t_windows.empty() || bandwidths.empty())
        throw ConfigError("capacity_table: axis vectors must be non-empty");
    if (!(fraction > 0.0) || !(fraction < 1.0))
        throw ConfigError("capacity_table: fraction must lie in (0, 1)");
    SechExtents extents(fraction);
    std::vector<CapacityCell> cells;
    cells.reserve(t_windows.size() * bandwidths.size());
    for (double t : t_windows)
        for (double b : bandwidths) {
            ResourceBudget budget{t, b, kappa_min, kappa_max};
            CapacityCell cell;
            cell.t_window = t;
            cell.bandwidth = b;
            cell.n_temporal =
                best_over_kappa(MultiplexScheme::temporal, budget, kappa_points, extents).n;
            cell.n_time_bin =
                best_over_kappa(MultiplexScheme::time_bin, budget, kappa_points, extents).n;
            cell.n_frequency_bin =
                best_over_kappa(MultiplexScheme::frequency_bin, budget, kappa_points, extents).n;
            cells.push_back(cell);
        }
    return cells;
}

}  // namespace tmm
