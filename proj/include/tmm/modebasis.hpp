#pragma once

#include <string>
#include <vector>

#include "tmm/grid.hpp"

namespace tmm {

// ---- mode families ----
enum class ModeFamily { sech_raw, sech_orthogonal, hermite_gaussian, time_bin, frequency_bin, measured };

std::string to_string(ModeFamily f);
ModeFamily mode_family_from_string(const std::string& s);

// Orthonormal (or raw) set of temporal mode functions on a shared grid.
// For constructed families the pairwise overlap certificate is enforced at
// build time: |<xi_m, xi_n>|^2 <= 1e-10 off-diagonal, |<xi_m, xi_m>| - 1|
// <= 1e-9. Imported `measured` bases carry the certificate as data.
struct ModeBasis {
    ModeFamily family = ModeFamily::measured;
    double kappa_ph = 0.0;  // rad/s scale parameter (0 if not applicable)
    std::vector<SampledWaveform> modes;
    bool orthonormal_certified = false;

    int size() const { return static_cast<int>(modes.size()); }
    const SampledWaveform& operator[](int m) const { return modes.at(m); }
    const TimeGrid& grid() const;
};

// Raw (non-orthogonal) sech-weighted monomials
//   v_m(t) = sqrt(N_m) sech(kappa t / 2) t^m,
//   N_m = kappa^(2m+1) / (8 eta(2m) Gamma(2m+1)), eta(0) = 1/2.
// Each v_m individually has unit norm. Supported for m <= 20.
SampledWaveform sech_raw(int m, double kappa_ph, const TimeGrid& grid);

// Closed-form normalization constant N_m of the raw family.
double sech_raw_normalization(int m, double kappa_ph);

// Numeric Gram-Schmidt with one re-orthogonalization pass. Preconditions:
// shared grid, Gram-matrix condition number < 1e12, no rank loss.
// Sign convention: the first sample region with |x| > 1e-3 max|x| is made
// positive-real. This is the authoritative constructor for sech modes.
ModeBasis gram_schmidt(const std::vector<SampledWaveform>& raw, ModeFamily family,
                       double kappa_ph = 0.0);

// Orthonormal sech family 0..m_max via gram_schmidt(sech_raw...).
ModeBasis sech_basis(int m_max, double kappa_ph, const TimeGrid& grid);

// Independent analytic route (exact sech^2 moments, no grid quadrature),
// available for m <= 3 as a cross-check of the numeric path:
//   xi_0 ~ sech, xi_1 ~ t sech, xi_2 ~ (t^2 - pi^2/(3 kappa^2)) sech,
//   xi_3 ~ (t^3 - (7 pi^2 / (5 kappa^2)) t) sech.
SampledWaveform sech_mode_analytic(int m, double kappa_ph, const TimeGrid& grid);

// Hermite-Gaussian modes psi_m(t) = H_m(x) exp(-x^2/2) / sqrt(2^m m! sqrt(pi) sigma),
// x = (t - t0)/sigma.
ModeBasis hermite_gaussian_basis(int m_max, double sigma, double t0, const TimeGrid& grid);

// n_bins copies of the mode-0 sech waveform, shifted in time (time_bin) or
// frequency (frequency_bin) by `spacing` (s or Hz), centered on the grid.
// Certification: nearest-neighbour |overlap|^2 <= 1e-4, else rejected.
ModeBasis bin_basis(ModeFamily family, int n_bins, double kappa_ph, double spacing,
                    const TimeGrid& grid);

// All pairwise overlaps I_mn = <xi_m, xi_n>.
Eigen::MatrixXcd overlap_matrix(const ModeBasis& basis);
Eigen::MatrixXcd overlap_matrix(const ModeBasis& a, const ModeBasis& b);

// Unitary-in-ordinary-frequency Fourier transform of a mode function,
// zero-padded 8x for a smooth spectral axis. pad_factor >= 1.
Spectrum fourier_transform(const SampledWaveform& w, int pad_factor = 8);

// ---- basis file round trip ----
// Columnar text: '#'-prefixed JSON header line carrying family/kappa/grid,
// then one row per sample: t, Re xi_0, Im xi_0, Re xi_1, ...
void save_basis(const ModeBasis& basis, const std::string& path);
ModeBasis load_basis(const std::string& path);

}  // namespace tmm
