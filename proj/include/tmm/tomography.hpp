#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "tmm/dynamics.hpp"

namespace tmm {

using Eigen::Matrix3cd;
using Eigen::Matrix3d;
using Eigen::Matrix4cd;

// ---- preparations and measurement settings ----

struct Preparation {
    std::string label;
    Complex cg, ce;
};

// Six mutually unbiased qubit states: the two poles plus four equator points.
const std::array<Preparation, 6>& preparation_set();

// Rotation by theta about an equatorial axis (axis_phase 0 = x, pi/2 = y)
// inside the g-e or e-f two-level subspace of the qutrit; the spectator
// level is untouched.
Matrix3cd rotation_ge(double theta, double axis_phase = 0.0);
Matrix3cd rotation_ef(double theta, double axis_phase = 0.0);

struct MeasurementSetting {
    std::string label;  // comma-separated pulses in the order they are played
    Matrix3cd unitary;  // later pulses multiply from the left
};

// Nine readout settings: populations, both quadratures of each neighbouring
// coherence, and level-shuffled repeats. Pulse order in the composite
// settings matters: playing the ef rotation before the ge flip drops the
// design-matrix rank from 9 to 7 and the set stops being informationally
// complete.
const std::array<MeasurementSetting, 9>& measurement_settings();

// ---- probability and count tables ----

// [preparation][setting][outcome g/e/f]
using ProbTable = std::array<std::array<std::array<double, 3>, 9>, 6>;
using CountTable = std::array<std::array<std::array<std::int64_t, 3>, 9>, 6>;

// Outcome probabilities of every setting applied to each given qutrit state.
ProbTable measurement_probabilities(const std::array<Matrix3cd, 6>& states);

// Left-stochastic readout confusion: column j is the outcome distribution
// when the true level is j. uniform_confusion splits `error` evenly between
// the two wrong outcomes.
Matrix3d uniform_confusion(double error);
ProbTable apply_confusion(const ProbTable& probs, const Matrix3d& confusion);

// Multinomial sampling, one derived RNG stream per (preparation, setting)
// cell so tables are reproducible regardless of evaluation order.
CountTable sample_counts(const ProbTable& probs, std::int64_t shots, std::uint64_t seed);

// ---- transfer simulation front-end ----

struct TransferOptions {
    // Receiver drive delay; the default is the measured optimum for the
    // default filter at kappa_ph/2pi = 5 MHz.
    double tau = 1.5e-9;
    // Deterministic qubit phase removed after the mapping pulse. NaN means
    // calibrate from a lossless mode-0 reference run first.
    double frame_phase = std::numeric_limits<double>::quiet_NaN();
    SimulationOptions sim;
};

// The phase the transfer chain imprints on the received qubit, measured on a
// dissipation-free copy of the device.
double transfer_frame_phase(double kappa_ph, const DeviceParams& params,
                            const TransferOptions& opts = {});

struct TransferRun {
    int mode = 0;
    double tau = 0.0;
    double frame_phase = 0.0;
    // Receiver qutrit after absorbing each preparation, with the f-to-e
    // mapping pulse applied and the calibrated frame removed.
    std::array<Matrix3cd, 6> outputs;
};

// Send every preparation through mode m with the matched receiver drive.
TransferRun simulate_transfer(int m, double kappa_ph, const DeviceParams& params,
                              const TransferOptions& opts = {});

struct TomographyCounts {
    TransferRun run;
    std::int64_t shots = 0;
    std::uint64_t seed = 0;
    ProbTable probabilities;  // analytic table the counts were drawn from
    CountTable counts;
};

// Full counts layer: simulate the transfer, apply the optional readout
// confusion, and sample `shots` single-shot outcomes per cell.
TomographyCounts simulate_tomography_counts(int m, double kappa_ph, const DeviceParams& params,
                                            std::int64_t shots, std::uint64_t seed,
                                            const TransferOptions& opts = {},
                                            const std::optional<Matrix3d>& confusion = {});

// ---- maximum-likelihood state reconstruction ----

struct MleOptions {
    int max_iterations = 100000;
    // Stationarity residual ||R rho R - rho||_F at which iteration stops.
    double grad_tol = 1e-10;
    // Weakest residual accepted when no likelihood-increasing step exists
    // within machine precision.
    double accept_tol = 1e-8;
};

// Maximum-likelihood qutrit state for one preparation. Weights are counts
// (or expected counts) per (setting, outcome); every setting must be
// represented. The double overload admits analytic probability tables.
DensityMatrix mle_state(const std::array<std::array<double, 3>, 9>& weights,
                        const MleOptions& opts = {});
DensityMatrix mle_state(const std::array<std::array<std::int64_t, 3>, 9>& counts,
                        const MleOptions& opts = {});

// ---- process matrices ----

struct ProcessMatrix {
    // In the operator basis {I, X, Ytilde = i sigma_y, Z}: Hermitian,
    // positive semidefinite, unit trace.
    Matrix4cd chi;
    // Trace of the raw qubit-block map before normalization (the weight the
    // channel keeps inside the qubit subspace).
    double trace_scale = 0.0;
    // Mean f-level population across the six outputs, excluded from chi.
    double leakage = 0.0;
};

// Least-squares map inversion over the six preparations followed by
// projection onto the completely-positive cone.
ProcessMatrix process_matrix(const std::array<Matrix3cd, 6>& outputs);

Matrix4cd identity_chi();
// Closed-form process matrix of amplitude damping with decay probability
// gamma, in the same {I, X, Ytilde, Z} basis.
Matrix4cd amplitude_damping_chi(double gamma);

// Tr[chi_exp chi_ideal], clipped to [0, 1].
double process_fidelity(const Matrix4cd& chi_exp, const Matrix4cd& chi_ideal);

// Loss inferred from output-flux records (samples integrate to photon
// number): one minus the sender/reference energy ratio. Negative values are
// returned as-is; they flag an overestimated reference.
double photon_loss_estimate(const SampledWaveform& sender_flux,
                            const SampledWaveform& reference_flux);

}  // namespace tmm
