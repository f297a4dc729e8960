#include "tmm/grid.hpp"

#include <algorithm>
#include <cmath>

namespace tmm {

TimeGrid::TimeGrid(double t_start_, double dt_, int n_points_)
    : t_start(t_start_), dt(dt_), n_points(n_points_) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("TimeGrid: dt must be positive");
    if (n_points < 2) throw ConfigError("TimeGrid: need at least two samples");
    if (!std::isfinite(t_start)) throw ConfigError("TimeGrid: t_start must be finite");
}

VectorXd TimeGrid::times() const {
    VectorXd out(n_points);
    for (int i = 0; i < n_points; ++i) out[i] = t(i);
    return out;
}

int TimeGrid::index_near(double time) const {
    int i = static_cast<int>(std::lround((time - t_start) / dt));
    return std::clamp(i, 0, n_points - 1);
}

double trapz(const TimeGrid& g, const VectorXd& f) {
    if (f.size() != g.n_points) throw ConfigError("trapz: sample count does not match grid");
    double s = f.sum() - 0.5 * (f[0] + f[f.size() - 1]);
    return s * g.dt;
}

Complex trapz(const TimeGrid& g, const VectorXcd& f) {
    if (f.size() != g.n_points) throw ConfigError("trapz: sample count does not match grid");
    Complex s = f.sum() - 0.5 * (f[0] + f[f.size() - 1]);
    return s * g.dt;
}

VectorXd cumtrapz(const TimeGrid& g, const VectorXd& f) {
    if (f.size() != g.n_points) throw ConfigError("cumtrapz: sample count does not match grid");
    VectorXd out(f.size());
    out[0] = 0.0;
    for (int i = 1; i < f.size(); ++i) out[i] = out[i - 1] + 0.5 * g.dt * (f[i - 1] + f[i]);
    return out;
}

// ---- SampledWaveform ----

namespace {

void validate_mode_function(const TimeGrid& g, const VectorXcd& x) {
    VectorXd a2 = x.cwiseAbs2();
    double total = trapz(g, a2);
    if (std::abs(total - 1.0) > 1e-8)
        throw ConfigError("mode_function: norm deviates from 1 by more than 1e-8");
    // Containment: the outermost 2.5% of the window per side must hold < 1e-6
    // of the energy, otherwise the grid is too narrow for this waveform.
    int edge = std::max(1, g.n_points / 40);
    double tail = 0.0;
    for (int i = 0; i < edge; ++i) tail += a2[i] + a2[g.n_points - 1 - i];
    if (tail * g.dt > 1e-6 * total)
        throw ConfigError("mode_function: grid does not contain 1 - 1e-6 of the energy");
}

void validate_rate(const VectorXcd& x) {
    for (int i = 0; i < x.size(); ++i) {
        if (x[i].imag() != 0.0) throw ConfigError("rate: samples must be real");
        if (x[i].real() < 0.0) throw ConfigError("rate: samples must be non-negative");
        if (!std::isfinite(x[i].real())) throw ConfigError("rate: samples must be finite");
    }
}

}  // namespace

SampledWaveform::SampledWaveform(TimeGrid grid_, VectorXcd samples_, WaveformKind kind_)
    : grid(grid_), samples(std::move(samples_)), kind(kind_) {
    if (samples.size() != grid.n_points)
        throw ConfigError("SampledWaveform: sample count does not match grid");
    if (kind == WaveformKind::mode_function) validate_mode_function(grid, samples);
    if (kind == WaveformKind::rate) validate_rate(samples);
}

double SampledWaveform::energy() const { return trapz(grid, VectorXd(samples.cwiseAbs2())); }

VectorXd SampledWaveform::abs2() const { return samples.cwiseAbs2(); }

Complex SampledWaveform::at(double time) const {
    double x = (time - grid.t_start) / grid.dt;
    if (x <= 0.0 || x >= grid.n_points - 1) {
        // exact endpoints still count
        if (x == 0.0) return samples[0];
        if (x == grid.n_points - 1) return samples[grid.n_points - 1];
        return {0.0, 0.0};
    }
    int i = static_cast<int>(x);
    double w = x - i;
    return samples[i] * (1.0 - w) + samples[i + 1] * w;
}

Complex overlap(const SampledWaveform& a, const SampledWaveform& b) {
    if (!(a.grid == b.grid)) throw ConfigError("overlap: waveforms live on different grids");
    VectorXcd prod = a.samples.conjugate().cwiseProduct(b.samples);
    return trapz(a.grid, prod);
}

double Spectrum::energy() const {
    double s = amplitude.cwiseAbs2().sum() -
               0.5 * (std::norm(amplitude[0]) + std::norm(amplitude[amplitude.size() - 1]));
    return s * df;
}

namespace {

// Inverse-interpolate the cumulative trapezoid of a density to the quantile q.
double quantile_of_density(double x0, double dx, const VectorXd& dens, double q) {
    const int n = static_cast<int>(dens.size());
    VectorXd cum(n);
    cum[0] = 0.0;
    for (int i = 1; i < n; ++i) cum[i] = cum[i - 1] + 0.5 * dx * (dens[i - 1] + dens[i]);
    double target = q * cum[n - 1];
    int i = 1;
    while (i < n - 1 && cum[i] < target) ++i;
    double c0 = cum[i - 1], c1 = cum[i];
    double w = (c1 > c0) ? (target - c0) / (c1 - c0) : 0.0;
    return x0 + dx * (i - 1 + w);
}

}  // namespace

std::pair<double, double> energy_window(const SampledWaveform& w, double fraction) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw ConfigError("energy_window: fraction must lie in (0, 1)");
    VectorXd dens = w.abs2();
    double qlo = 0.5 * (1.0 - fraction);
    return {quantile_of_density(w.grid.t_start, w.grid.dt, dens, qlo),
            quantile_of_density(w.grid.t_start, w.grid.dt, dens, 1.0 - qlo)};
}

std::pair<double, double> energy_bandwidth(const Spectrum& s, double fraction) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw ConfigError("energy_bandwidth: fraction must lie in (0, 1)");
    VectorXd dens = s.amplitude.cwiseAbs2();
    double qlo = 0.5 * (1.0 - fraction);
    return {quantile_of_density(s.f_start, s.df, dens, qlo),
            quantile_of_density(s.f_start, s.df, dens, 1.0 - qlo)};
}

}  // namespace tmm
