#pragma once

#include <Eigen/Dense>
#include <complex>

#include "tmm/errors.hpp"

namespace tmm {

using Complex = std::complex<double>;
using VectorXcd = Eigen::VectorXcd;
using VectorXd = Eigen::VectorXd;

// ---- uniform time grid ----
// Invariants: dt > 0, n_points >= 2 (checked on construction).
struct TimeGrid {
    double t_start = 0.0;  // s
    double dt = 0.0;       // s
    int n_points = 0;

    TimeGrid() = default;
    TimeGrid(double t_start_, double dt_, int n_points_);

    double t(int i) const { return t_start + dt * i; }
    double t_end() const { return t(n_points - 1); }
    double span() const { return dt * (n_points - 1); }
    VectorXd times() const;

    // Nearest sample index, clamped to the grid.
    int index_near(double time) const;

    bool operator==(const TimeGrid&) const = default;
};

// Symmetric grid [-T, T] around zero with an odd sample count so t = 0 is a
// sample; dt obeys kappa_ph*dt <= 2*pi/400 and T contains 1 - containment of
// the highest requested sech mode's energy.
TimeGrid default_grid_for_sech(double kappa_ph, int max_mode, double containment = 1e-9);

// ---- quadrature (trapezoidal throughout) ----
double trapz(const TimeGrid& g, const VectorXd& f);
Complex trapz(const TimeGrid& g, const VectorXcd& f);
// F[0] = 0, F[i] = integral from t_start to t_i.
VectorXd cumtrapz(const TimeGrid& g, const VectorXd& f);

// ---- sampled waveform ----
enum class WaveformKind { mode_function, drive_envelope, rate, field_record };

// Complex samples on a grid. mode_function construction checks unit norm
// within 1e-8 and grid containment (outermost 2.5% of the window on each side
// holds < 1e-6 of the energy); rate kinds must be real non-negative.
struct SampledWaveform {
    TimeGrid grid;
    VectorXcd samples;
    WaveformKind kind = WaveformKind::field_record;

    SampledWaveform() = default;
    SampledWaveform(TimeGrid grid_, VectorXcd samples_, WaveformKind kind_);

    double energy() const;             // integral of |x|^2 dt
    VectorXd abs2() const;             // |x_i|^2
    // Linear interpolation; zero outside the grid.
    Complex at(double time) const;
};

// <a, b> = integral conj(a) b dt; grids must match exactly.
Complex overlap(const SampledWaveform& a, const SampledWaveform& b);

// ---- spectrum ----
// Complex amplitude on a uniform ordinary-frequency axis, convention
// xhat(f) = integral x(t) exp(-i 2 pi f t) dt, so Parseval holds with df.
struct Spectrum {
    double f_start = 0.0;  // Hz
    double df = 0.0;       // Hz
    VectorXcd amplitude;

    double f(int i) const { return f_start + df * i; }
    int n_points() const { return static_cast<int>(amplitude.size()); }
    double energy() const;  // integral |xhat|^2 df
};

// Smallest centered-quantile interval of the density |x|^2 containing
// `fraction` of the total: [Q((1-fr)/2), Q(1-(1-fr)/2)] by inverse
// interpolation of the cumulative integral. Returns {lo, hi}.
std::pair<double, double> energy_window(const SampledWaveform& w, double fraction);
std::pair<double, double> energy_bandwidth(const Spectrum& s, double fraction);

}  // namespace tmm
