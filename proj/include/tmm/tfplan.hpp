#pragma once

#include <string>
#include <vector>

#include "tmm/grid.hpp"
#include "tmm/modebasis.hpp"

namespace tmm {

// ---- chronocyclic (time-frequency) Wigner distribution ----
// W(t, f) = integral dtau xi(t + tau/2) conj(xi(t - tau/2)) exp(-i 2 pi f tau)
// on a decimated copy of the mode's time grid and a uniform frequency comb
// centered on zero. A unit-norm mode gives integral W dt df = 1; the marginals
// recover |xi(t)|^2 and |xihat(f)|^2.
struct WignerGrid {
    VectorXd times;          // s, uniform spacing
    VectorXd freqs;          // Hz, uniform spacing, symmetric about zero
    Eigen::MatrixXd values;  // 1/(s Hz); rows follow times, columns freqs

    double dt() const;
    double df() const;
    double integral() const;              // trapezoid over both axes
    VectorXd time_marginal() const;       // integral over f, one entry per row
    VectorXd frequency_marginal() const;  // integral over t, one entry per column
};

struct WignerOptions {
    int pad_factor = 4;           // zero-padding of the lag correlation before the FFT
    int max_rows = 512;           // decimation target for the time axis
    double band_quantile = 1e-6;  // spectral mass allowed outside the kept band
    double band_margin = 2.0;     // kept half-band = margin x quantile half-band
};

// The lag correlation is sampled at tau = 2k dt (both samples on the grid), so
// the usable frequency band ends at 1/(4 dt); a mode with spectral mass beyond
// it is rejected rather than wrapped.
WignerGrid wigner(const SampledWaveform& mode, const WignerOptions& options = {});

// integral Wa Wb dt df over the shared frequency band; by the Moyal identity
// this equals |<xi_a, xi_b>|^2. Time axes must coincide and the frequency
// combs must share their spacing; the band is trimmed to the narrower grid
// (the trimmed columns carry only the band_quantile tail mass).
double wigner_overlap(const WignerGrid& a, const WignerGrid& b);

// ---- multiplexing capacity ----
enum class MultiplexScheme { temporal, time_bin, frequency_bin, time_frequency_product };

std::string to_string(MultiplexScheme s);
MultiplexScheme multiplex_scheme_from_string(const std::string& s);

// kappa_max defaults to the 2 pi x 8 MHz emitter decay-rate ceiling.
struct ResourceBudget {
    double t_window = 0.0;               // s
    double bandwidth = 0.0;              // Hz
    double kappa_min = 2.0 * 3.14159265358979323846 * 0.5e6;  // rad/s
    double kappa_max = 2.0 * 3.14159265358979323846 * 8.0e6;  // rad/s

    void validate() const;
};

struct ModeCountResult {
    int n = 0;
    double kappa_opt = 0.0;  // rad/s; 0 when n == 0
};

// Largest mode count of the scheme that fits the budget, maximized over a
// log-spaced kappa scan (smallest kappa attaining the maximum is reported).
// "Fits" means every mode's centered `fraction` energy window lies within
// t_window and its `fraction` bandwidth within bandwidth; the bin schemes
// place copies of mode 0 at the certified spacing, and the product scheme
// counts time bins x frequency bins on a shared kappa. The temporal count
// saturates at 21 modes (the family-construction ceiling).
ModeCountResult mode_count(MultiplexScheme scheme, const ResourceBudget& budget,
                           double fraction = 0.99, int kappa_points = 64);

// Tightest shift between neighbouring copies of sech mode 0 whose overlap
// satisfies the |I|^2 <= 1e-4 certificate enforced by bin_basis.
double certified_time_spacing(double kappa_ph);       // s
double certified_frequency_spacing(double kappa_ph);  // Hz

struct CapacityCell {
    double t_window = 0.0;   // s
    double bandwidth = 0.0;  // Hz
    int n_temporal = 0;
    int n_time_bin = 0;
    int n_frequency_bin = 0;
};

// Dense capacity map over the outer product of the axis vectors, row-major in
// (t_window, bandwidth) order, with the mode-extent table shared across cells.
std::vector<CapacityCell> capacity_table(const std::vector<double>& t_windows,
                                         const std::vector<double>& bandwidths,
                                         double kappa_min, double kappa_max,
                                         double fraction = 0.99, int kappa_points = 64);

}  // namespace tmm
