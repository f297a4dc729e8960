#include "tmm/tomography.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <iostream>
#include <random>
#include <sstream>

#include <Eigen/Dense>

namespace tmm {

namespace {

constexpr double kPi = 3.14159265358979323846;
const Complex kI(0.0, 1.0);

Matrix3cd subspace_rotation(int a, int b, double theta, double axis_phase) {
    // exp(-i theta/2 (cos(phi) X_ab + sin(phi) Y_ab)) embedded in the qutrit
    Matrix3cd u = Matrix3cd::Identity();
    const double c = std::cos(0.5 * theta);
    const double s = std::sin(0.5 * theta);
    const Complex axis = std::exp(Complex(0.0, axis_phase));
    u(a, a) = c;
    u(b, b) = c;
    u(a, b) = -kI * s * std::conj(axis);
    u(b, a) = -kI * s * axis;
    return u;
}

// Projector-conjugates E_sk = U_s^dag |k><k| U_s, flattened to s*3+k.
const std::array<Matrix3cd, 27>& setting_effects() {
    static const std::array<Matrix3cd, 27> effects = [] {
        std::array<Matrix3cd, 27> e;
        const auto& settings = measurement_settings();
        for (int s = 0; s < 9; ++s)
            for (int k = 0; k < 3; ++k) {
                Matrix3cd pi = Matrix3cd::Zero();
                pi(k, k) = 1.0;
                e[s * 3 + k] = settings[s].unitary.adjoint() * pi * settings[s].unitary;
            }
        return e;
    }();
    return effects;
}

// Hermitian qutrit basis used by the linear-inversion warm start: the three
// level projectors, then (|i><j| + h.c.) and (-i|i><j| + h.c.) per pair.
const std::array<Matrix3cd, 9>& hermitian_basis() {
    static const std::array<Matrix3cd, 9> basis = [] {
        std::array<Matrix3cd, 9> b;
        int idx = 0;
        for (int i = 0; i < 3; ++i) {
            Matrix3cd m = Matrix3cd::Zero();
            m(i, i) = 1.0;
            b[idx++] = m;
        }
        for (int i = 0; i < 3; ++i)
            for (int j = i + 1; j < 3; ++j) {
                Matrix3cd m = Matrix3cd::Zero();
                m(i, j) = 1.0;
                m(j, i) = 1.0;
                b[idx++] = m;
                m(i, j) = -kI;
                m(j, i) = kI;
                b[idx++] = m;
            }
        return b;
    }();
    return basis;
}

double trace_prod(const Matrix3cd& a, const Matrix3cd& b) {
    return a.cwiseProduct(b.transpose()).sum().real();
}

std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Eigenvalue clip-and-redistribute: zero the most negative eigenvalues and
// spread the accumulated deficit uniformly over the rest, preserving trace.
template <typename Matrix>
Matrix clip_to_psd(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    Eigen::VectorXd lam = es.eigenvalues();  // ascending
    const int n = static_cast<int>(lam.size());
    double deficit = 0.0;
    for (int i = 0; i < n; ++i) {
        const int remaining = n - i;
        if (lam[i] + deficit / remaining < 0.0) {
            deficit += lam[i];
            lam[i] = 0.0;
        } else {
            for (int j = i; j < n; ++j) lam[j] += deficit / remaining;
            break;
        }
    }
    return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().adjoint();
}

double log_likelihood(const std::array<std::array<double, 3>, 9>& w, const Matrix3cd& rho) {
    const auto& effects = setting_effects();
    double ll = 0.0;
    for (int s = 0; s < 9; ++s)
        for (int k = 0; k < 3; ++k) {
            const double weight = w[s][k];
            if (weight <= 0.0) continue;
            const double p = trace_prod(effects[s * 3 + k], rho);
            if (p <= 0.0) return -std::numeric_limits<double>::infinity();
            ll += weight * std::log(p);
        }
    return ll;
}

Matrix3cd likelihood_operator(const std::array<std::array<double, 3>, 9>& w, double total,
                              const Matrix3cd& rho) {
    const auto& effects = setting_effects();
    Matrix3cd r = Matrix3cd::Zero();
    for (int s = 0; s < 9; ++s)
        for (int k = 0; k < 3; ++k) {
            const double weight = w[s][k];
            if (weight <= 0.0) continue;
            const double p = std::max(trace_prod(effects[s * 3 + k], rho), 1e-300);
            r += (weight / p) * effects[s * 3 + k];
        }
    return r / total;
}

// Least-squares inversion of the setting frequencies, projected to the
// physical cone. Exact for noiseless tables, a warm start otherwise.
Matrix3cd inversion_estimate(const std::array<std::array<double, 3>, 9>& w) {
    const auto& effects = setting_effects();
    const auto& basis = hermitian_basis();
    Eigen::MatrixXd design(27, 9);
    Eigen::VectorXd freq(27);
    for (int s = 0; s < 9; ++s) {
        const double total = w[s][0] + w[s][1] + w[s][2];
        for (int k = 0; k < 3; ++k) {
            freq[s * 3 + k] = w[s][k] / total;
            for (int b = 0; b < 9; ++b)
                design(s * 3 + k, b) = trace_prod(effects[s * 3 + k], basis[b]);
        }
    }
    const Eigen::VectorXd x =
        design.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(freq);
    Matrix3cd rho = Matrix3cd::Zero();
    for (int b = 0; b < 9; ++b) rho += x[b] * basis[b];
    rho = 0.5 * (rho + rho.adjoint());
    rho /= rho.trace().real();
    return clip_to_psd(rho);
}

Matrix3cd apply_frame(const Matrix3cd& rho, double frame_phase) {
    Matrix3cd u = Matrix3cd::Identity();
    u(1, 1) = std::exp(Complex(0.0, -frame_phase));
    return u * rho * u.adjoint();
}

// One emission + matched-absorption run; returns the receiver qutrit after
// the f-to-e mapping pulse, before any frame correction.
Matrix3cd transfer_output(int m, Complex cg, Complex ce, double kappa_ph,
                          const DeviceParams& params, double tau, SimulationOptions sim) {
    const StagedBasis st = staged_basis(m, kappa_ph, params.kappa_f, tau);
    const HilbertLayout layout = HilbertLayout::absorption(sim.n_fock);

    Drives drv{st.grid, {}, {}, {}};
    drv.source = source_coupling(st.basis[m], params.kappa_f);
    drv.receiver = receiver_coupling(st.basis[m], params.kappa_f, tau);

    sim.record_g1 = false;
    const SimulationRecord rec = evolve(source_qubit_state(layout, cg, ce), params, drv, sim);

    const Matrix3cd qutrit = rec.final_state.reduced(layout.transmon);
    const Matrix3cd map = rotation_ef(kPi);
    return map * qutrit * map.adjoint();
}

const std::array<Eigen::Matrix2cd, 4>& pauli_basis() {
    static const std::array<Eigen::Matrix2cd, 4> paulis = [] {
        std::array<Eigen::Matrix2cd, 4> p;
        p[0] = Eigen::Matrix2cd::Identity();
        p[1] << 0, 1, 1, 0;
        p[2] << 0, -kI, kI, 0;
        p[3] << 1, 0, 0, -1;
        return p;
    }();
    return paulis;
}

}  // namespace

// ---- preparations and settings ----

const std::array<Preparation, 6>& preparation_set() {
    static const std::array<Preparation, 6> preps = [] {
        const double r = 1.0 / std::sqrt(2.0);
        return std::array<Preparation, 6>{{{"g", 1.0, 0.0},
                                           {"e", 0.0, 1.0},
                                           {"g+e", r, r},
                                           {"g-e", r, -r},
                                           {"g+ie", r, Complex(0.0, r)},
                                           {"g-ie", r, Complex(0.0, -r)}}};
    }();
    return preps;
}

Matrix3cd rotation_ge(double theta, double axis_phase) {
    return subspace_rotation(0, 1, theta, axis_phase);
}

Matrix3cd rotation_ef(double theta, double axis_phase) {
    return subspace_rotation(1, 2, theta, axis_phase);
}

const std::array<MeasurementSetting, 9>& measurement_settings() {
    static const std::array<MeasurementSetting, 9> settings = [] {
        const Matrix3cd x90ge = rotation_ge(0.5 * kPi);
        const Matrix3cd y90ge = rotation_ge(0.5 * kPi, 0.5 * kPi);
        const Matrix3cd x180ge = rotation_ge(kPi);
        const Matrix3cd x90ef = rotation_ef(0.5 * kPi);
        const Matrix3cd y90ef = rotation_ef(0.5 * kPi, 0.5 * kPi);
        const Matrix3cd x180ef = rotation_ef(kPi);
        return std::array<MeasurementSetting, 9>{{{"id", Matrix3cd::Identity()},
                                                  {"x90_ge", x90ge},
                                                  {"y90_ge", y90ge},
                                                  {"x180_ge", x180ge},
                                                  {"x90_ef", x90ef},
                                                  {"y90_ef", y90ef},
                                                  {"x180_ge,x90_ef", x90ef * x180ge},
                                                  {"x180_ge,y90_ef", y90ef * x180ge},
                                                  {"x180_ge,x180_ef", x180ef * x180ge}}};
    }();
    return settings;
}

// ---- probability and count tables ----

ProbTable measurement_probabilities(const std::array<Matrix3cd, 6>& states) {
    const auto& effects = setting_effects();
    ProbTable probs{};
    for (int prep = 0; prep < 6; ++prep)
        for (int s = 0; s < 9; ++s)
            for (int k = 0; k < 3; ++k)
                probs[prep][s][k] = std::max(trace_prod(effects[s * 3 + k], states[prep]), 0.0);
    return probs;
}

Matrix3d uniform_confusion(double error) {
    if (!(error >= 0.0 && error < 1.0))
        throw ConfigError("readout error must lie in [0, 1)");
    Matrix3d c = Matrix3d::Constant(0.5 * error);
    c.diagonal().setConstant(1.0 - error);
    return c;
}

ProbTable apply_confusion(const ProbTable& probs, const Matrix3d& confusion) {
    for (int j = 0; j < 3; ++j) {
        const double col = confusion.col(j).sum();
        if (confusion.col(j).minCoeff() < 0.0 || std::abs(col - 1.0) > 1e-9)
            throw ConfigError("confusion matrix columns must be probability distributions");
    }
    ProbTable out{};
    for (int prep = 0; prep < 6; ++prep)
        for (int s = 0; s < 9; ++s)
            for (int k = 0; k < 3; ++k)
                for (int j = 0; j < 3; ++j)
                    out[prep][s][k] += confusion(k, j) * probs[prep][s][j];
    return out;
}

CountTable sample_counts(const ProbTable& probs, std::int64_t shots, std::uint64_t seed) {
    if (shots < 1) throw ConfigError("shots must be at least 1");
    CountTable counts{};
    for (int prep = 0; prep < 6; ++prep)
        for (int s = 0; s < 9; ++s) {
            double total = 0.0;
            for (double p : probs[prep][s]) {
                if (p < -1e-9) throw NumericalError("negative outcome probability");
                total += std::max(p, 0.0);
            }
            if (total <= 0.0) throw NumericalError("outcome probabilities sum to zero");

            std::uint64_t stream = seed;
            for (int skip = 0; skip <= prep * 9 + s; ++skip) splitmix64(stream);
            std::mt19937_64 rng(splitmix64(stream));

            const double p0 = std::max(probs[prep][s][0], 0.0) / total;
            const double p1 = p0 + std::max(probs[prep][s][1], 0.0) / total;
            for (std::int64_t shot = 0; shot < shots; ++shot) {
                const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
                const int k = u < p0 ? 0 : (u < p1 ? 1 : 2);
                ++counts[prep][s][k];
            }
        }
    return counts;
}

// ---- transfer simulation front-end ----

double transfer_frame_phase(double kappa_ph, const DeviceParams& params,
                            const TransferOptions& opts) {
    DeviceParams cal = params;
    cal.t1ge = cal.t1ef = cal.t2ge_star = std::numeric_limits<double>::infinity();
    cal.loss = 0.0;
    const double r = 1.0 / std::sqrt(2.0);
    const Matrix3cd out = transfer_output(0, r, r, kappa_ph, cal, opts.tau, opts.sim);
    const Complex c = out(1, 0);
    if (std::abs(c) < 1e-6)
        throw NumericalError("received coherence too small to define a frame phase");
    return std::arg(c);
}

TransferRun simulate_transfer(int m, double kappa_ph, const DeviceParams& params,
                              const TransferOptions& opts) {
    params.validate();
    if (m < 0) throw ConfigError("mode index must be non-negative");

    TransferRun run;
    run.mode = m;
    run.tau = opts.tau;
    run.frame_phase = std::isnan(opts.frame_phase) ? transfer_frame_phase(kappa_ph, params, opts)
                                                   : opts.frame_phase;

    const auto& preps = preparation_set();
    for (int i = 0; i < 6; ++i) {
        const Matrix3cd out = transfer_output(m, preps[i].cg, preps[i].ce, kappa_ph, params,
                                              opts.tau, opts.sim);
        run.outputs[i] = apply_frame(out, run.frame_phase);
    }
    return run;
}

TomographyCounts simulate_tomography_counts(int m, double kappa_ph, const DeviceParams& params,
                                            std::int64_t shots, std::uint64_t seed,
                                            const TransferOptions& opts,
                                            const std::optional<Matrix3d>& confusion) {
    if (shots < 1) throw ConfigError("shots must be at least 1");
    TomographyCounts out;
    out.run = simulate_transfer(m, kappa_ph, params, opts);
    out.shots = shots;
    out.seed = seed;
    out.probabilities = measurement_probabilities(out.run.outputs);
    if (confusion) out.probabilities = apply_confusion(out.probabilities, *confusion);
    out.counts = sample_counts(out.probabilities, shots, seed);
    return out;
}

// ---- maximum-likelihood state reconstruction ----

DensityMatrix mle_state(const std::array<std::array<double, 3>, 9>& weights,
                        const MleOptions& opts) {
    double total = 0.0;
    for (int s = 0; s < 9; ++s) {
        double row = 0.0;
        for (double w : weights[s]) {
            if (w < 0.0 || !std::isfinite(w)) throw ConfigError("weights must be non-negative");
            row += w;
        }
        if (row <= 0.0) throw ConfigError("every measurement setting needs weight");
        total += row;
    }

    Matrix3cd rho = inversion_estimate(weights);
    if (!std::isfinite(log_likelihood(weights, rho)))
        rho = (1.0 - 1e-6) * rho + (1e-6 / 3.0) * Matrix3cd::Identity();
    if (!std::isfinite(log_likelihood(weights, rho)))
        rho = Matrix3cd::Identity() / 3.0;

    // Diluted R-rho-R fixed point: full steps while the likelihood increases,
    // damped steps (I + eps R) otherwise.
    double ll = log_likelihood(weights, rho);
    double grad = std::numeric_limits<double>::infinity();
    for (int it = 0; it < opts.max_iterations; ++it) {
        const Matrix3cd r = likelihood_operator(weights, total, rho);
        grad = (r * rho * r - rho).norm();
        if (grad < opts.grad_tol) break;

        Matrix3cd cand = r * rho * r;
        cand = 0.5 * (cand + cand.adjoint());
        cand /= cand.trace().real();
        double llc = log_likelihood(weights, cand);
        if (llc >= ll - std::abs(ll) * 1e-15) {
            rho = cand;
            ll = llc;
            continue;
        }

        bool stepped = false;
        for (double eps = 0.5; eps > 1e-12; eps *= 0.5) {
            const Matrix3cd mix = Matrix3cd::Identity() + eps * r;
            cand = mix * rho * mix.adjoint();
            cand = 0.5 * (cand + cand.adjoint());
            cand /= cand.trace().real();
            llc = log_likelihood(weights, cand);
            if (llc > ll) {
                rho = cand;
                ll = llc;
                stepped = true;
                break;
            }
        }
        if (!stepped) {
            // No float-resolvable improvement left; accept if stationary.
            if (grad < opts.accept_tol) break;
            std::ostringstream msg;
            msg << "likelihood iteration stalled at residual " << grad << " after " << it
                << " iterations";
            throw NumericalError(msg.str());
        }
    }
    if (grad >= opts.accept_tol) {
        std::ostringstream msg;
        msg << "likelihood iteration did not converge: residual " << grad << " after "
            << opts.max_iterations << " iterations";
        throw NumericalError(msg.str());
    }

    HilbertLayout qutrit;
    qutrit.dims = {3};
    qutrit.transmon = 0;
    DensityMatrix out{qutrit, clip_to_psd(rho)};
    out.validate();
    return out;
}

DensityMatrix mle_state(const std::array<std::array<std::int64_t, 3>, 9>& counts,
                        const MleOptions& opts) {
    std::array<std::array<double, 3>, 9> weights{};
    for (int s = 0; s < 9; ++s)
        for (int k = 0; k < 3; ++k) weights[s][k] = static_cast<double>(counts[s][k]);
    return mle_state(weights, opts);
}

// ---- process matrices ----

ProcessMatrix process_matrix(const std::array<Matrix3cd, 6>& outputs) {
    const auto& preps = preparation_set();
    const auto& paulis = pauli_basis();

    // Least-squares superoperator on the qubit block: solve in^T X^T = out^T
    // over the six (input, output) pairs, column-major vectorization.
    Eigen::MatrixXcd in_vecs(6, 4), out_vecs(6, 4);
    double leakage = 0.0;
    for (int i = 0; i < 6; ++i) {
        Eigen::Vector2cd psi;
        psi << preps[i].cg, preps[i].ce;
        const Eigen::Matrix2cd rho_in = psi * psi.adjoint();
        const Eigen::Matrix2cd block = outputs[i].topLeftCorner<2, 2>();
        in_vecs.row(i) = Eigen::Map<const Eigen::Vector4cd>(rho_in.data()).transpose();
        out_vecs.row(i) = Eigen::Map<const Eigen::Vector4cd>(block.data()).transpose();
        leakage += outputs[i](2, 2).real();
    }
    const Eigen::MatrixXcd super =
        in_vecs.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(out_vecs).transpose();

    // Expand the superoperator over the conjugation channels P_m . P_n.
    Eigen::Matrix<Complex, 16, 16> k_matrix;
    for (int m = 0; m < 4; ++m)
        for (int n = 0; n < 4; ++n) {
            const MatrixXcd action =
                kron(MatrixXcd(paulis[n].transpose()), MatrixXcd(paulis[m]));
            k_matrix.col(m * 4 + n) =
                Eigen::Map<const Eigen::Matrix<Complex, 16, 1>>(action.data());
        }
    const Eigen::Matrix<Complex, 16, 1> chi_vec = k_matrix.partialPivLu().solve(
        Eigen::Map<const Eigen::Matrix<Complex, 16, 1>>(Eigen::Matrix4cd(super).data()));

    Matrix4cd chi;
    for (int m = 0; m < 4; ++m)
        for (int n = 0; n < 4; ++n) chi(m, n) = chi_vec[m * 4 + n];
    chi = 0.5 * (chi + chi.adjoint());

    ProcessMatrix out;
    out.leakage = leakage / 6.0;
    out.trace_scale = chi.trace().real();
    if (out.trace_scale < 1e-6)
        throw NumericalError("qubit block carries no weight; inversion is ill-conditioned");
    chi = clip_to_psd(Matrix4cd(chi));
    chi /= chi.trace().real();

    // Move from {I, X, Y, Z} to the real-valued {I, X, iY, Z} convention.
    Matrix4cd frame = Matrix4cd::Identity();
    frame(2, 2) = -kI;
    out.chi = frame * chi * frame.adjoint();
    return out;
}

Matrix4cd identity_chi() {
    Matrix4cd chi = Matrix4cd::Zero();
    chi(0, 0) = 1.0;
    return chi;
}

Matrix4cd amplitude_damping_chi(double gamma) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
    const double a = 0.5 * (1.0 + std::sqrt(1.0 - gamma));
    const double b = 0.5 * (1.0 - std::sqrt(1.0 - gamma));
    Matrix4cd chi = Matrix4cd::Zero();
    chi(0, 0) = a * a;
    chi(0, 3) = chi(3, 0) = a * b;
    chi(3, 3) = b * b;
    chi(1, 1) = chi(1, 2) = chi(2, 1) = chi(2, 2) = 0.25 * gamma;
    return chi;
}

double process_fidelity(const Matrix4cd& chi_exp, const Matrix4cd& chi_ideal) {
    const double scale = 1.0 + chi_exp.norm() + chi_ideal.norm();
    if ((chi_exp - chi_exp.adjoint()).norm() > 1e-8 * scale ||
        (chi_ideal - chi_ideal.adjoint()).norm() > 1e-8 * scale)
        throw ConfigError("process matrices must be Hermitian in a shared basis");
    const Complex f = (chi_exp * chi_ideal).trace();
    const double fidelity = f.real();
    if (fidelity < -1e-6 || fidelity > 1.0 + 1e-6)
        std::cerr << "warning: process fidelity " << fidelity << " outside [0, 1]\n";
    return std::clamp(fidelity, 0.0, 1.0);
}

double photon_loss_estimate(const SampledWaveform& sender_flux,
                            const SampledWaveform& reference_flux) {
    const double sent = trapz(sender_flux.grid, sender_flux.samples).real();
    const double received = trapz(reference_flux.grid, reference_flux.samples).real();
    if (received < 1e-9) throw NumericalError("reference flux integrates below 1e-9");
    return 1.0 - sent / received;
}

}  // namespace tmm
