#pragma once

#include "tmm/grid.hpp"

namespace tmm {

inline constexpr double kDefaultRateCap = 2.0 * 3.141592653589793 * 8e6;  // rad/s
inline constexpr double kEnergyFloor = 1e-6;  // regularization floor on energy integrals

// ---- drive-induced decay rate ----
// Gamma(t) = |xi(t)|^2 / (1 - cumulative energy), clipped at `cap`, set to
// zero once the remaining energy drops below the 1e-6 floor (truncation).
struct RateProfile {
    TimeGrid grid;
    VectorXd gamma;       // rad/s, >= 0
    double cap = kDefaultRateCap;
    int truncation_index = -1;  // first sample forced to zero, -1 if none

    SampledWaveform as_waveform() const;  // kind = rate
};

RateProfile decay_rate(const SampledWaveform& mode, double cap = kDefaultRateCap,
                       double floor = kEnergyFloor);

// ---- virtual-cavity couplings ----
enum class CouplingRole { source_release, receiver_absorb, sink_absorb };

// Complex coupling amplitude on the simulation grid. The defining identity is
// Gamma = 4 |g|^2 / kappa_f wherever no regularization is active.
struct CouplingEnvelope {
    TimeGrid grid;
    VectorXcd g;          // rad/s
    double kappa_f = 0.0; // rad/s
    double delta_t = 0.0; // s
    CouplingRole role = CouplingRole::source_release;

    SampledWaveform as_waveform() const;  // kind = drive_envelope
};

// Emission envelope g(t) = (sqrt(kf)/2) conj(xi(t)) / sqrt(remaining energy),
// shrinking denominator floored at 1e-6 and zeroed past the floor.
CouplingEnvelope source_coupling(const SampledWaveform& mode, double kappa_f,
                                 double floor = kEnergyFloor);

// Absorption envelope g(t) = (sqrt(kf)/2) xi(t - dt) / sqrt(energy
// accumulated from the grid start to t - dt), growing denominator floored at
// 1e-6; delta_t shifts the envelope later in time.
CouplingEnvelope receiver_coupling(const SampledWaveform& mode, double kappa_f,
                                   double delta_t = 0.0);

// Sink capture envelope: the source envelope indexed at (-t + delta_t).
CouplingEnvelope sink_coupling(const SampledWaveform& mode, double kappa_f, double delta_t);

// w'(t) = w(-t + delta_t) on the same grid (linear interpolation off-sample).
SampledWaveform time_reverse(const SampledWaveform& w, double delta_t = 0.0);

// ---- DAC model ----
// Mid-rise uniform quantizer with 2^bits levels per quadrature spanning
// [-full_scale, full_scale], zero-order hold at sample_rate.
struct DacModel {
    double sample_rate = 1e9;  // Sa/s
    int bits = 12;
    double full_scale = 1.0;   // same unit as the quantized waveform

    void validate() const;
};

// Resample-and-hold at the DAC clock, round each quadrature to the nearest
// mid-rise level (no zero level). The pattern spans only the waveform's
// support: the channel is off (exact zero) outside the first/last nonzero
// sample, and a quadrature with no signal anywhere stays off. Result lives on
// the input grid. Throws on clipping.
SampledWaveform quantize(const SampledWaveform& w, const DacModel& dac);

// Integer level indices per quadrature at the DAC clock over the pattern
// support (export format); code k encodes the level centre (k + 0.5) * step.
struct QuantizedLevels {
    double t_start = 0.0;
    double sample_period = 0.0;
    std::vector<int> re, im;
};
QuantizedLevels quantize_levels(const SampledWaveform& w, const DacModel& dac);

// Closed-form inversion of the emission relation: the waveform a source
// released under envelope g is xi(t) = (2/sqrt(kf)) conj(g) exp(-(2/kf)
// integral |g|^2). Used as the fast path for DAC studies.
SampledWaveform regenerate_from_coupling(const CouplingEnvelope& env);

// Family-wide DAC full scale: the peak |g| quadrature over sech modes
// 0..m_max, each synthesized as its own pattern on its own default grid
// (shared hardware range; higher modes peak lower and use less of it).
double drive_full_scale(double kappa_ph, double kappa_f, int m_max);

// 1 - |<xi_ref, xi_q>|^2 with both waveforms normalized, where xi_ref is
// regenerated from the sample-and-held envelope and xi_q from the
// sample-and-held + rounded one: only amplitude rounding differs. The mode's
// pattern lives on its own default grid, like a per-mode hardware pattern.
double quantization_infidelity(int m, double kappa_ph, double kappa_f, const DacModel& dac);

}  // namespace tmm
