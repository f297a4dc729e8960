#include "tmm/dynamics.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstring>

namespace tmm {

namespace {

std::uint64_t digest_samples(const VectorXcd& v) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](double x) {
        std::uint64_t bits;
        std::memcpy(&bits, &x, sizeof bits);
        for (int k = 0; k < 8; ++k) {
            h ^= (bits >> (8 * k)) & 0xffull;
            h *= 1099511628211ull;
        }
    };
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        mix(v[i].real());
        mix(v[i].imag());
    }
    return h;
}

// Apply the sign convention used for basis modes: rotate so the first sample
// with magnitude above 1e-3 of the peak is positive real.
void fix_mode_phase(VectorXcd& v) {
    const double peak = v.cwiseAbs().maxCoeff();
    if (peak <= 0.0) return;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (std::abs(v[i]) > 1e-3 * peak) {
            v *= std::abs(v[i]) / v[i];
            return;
        }
    }
}

struct Channel {
    MatrixXcd op;
    MatrixXcd opd;   // op^dagger
    MatrixXcd dd;    // op^dagger op
    MatrixXcd leak;  // -(op^dagger N op - (dd N + N dd)/2): quanta removal rate
};

struct Scratch {
    MatrixXcd H, L, M, LdL, tmp, stage, k1, k2, k3, k4;
    void resize(int d) {
        for (MatrixXcd* m : {&H, &L, &M, &LdL, &tmp, &stage, &k1, &k2, &k3, &k4})
            m->resize(d, d);
    }
};

Complex trace_of_product(const MatrixXcd& a, const MatrixXcd& b) {
    return a.cwiseProduct(b.transpose()).sum();  // tr(a b)
}

// All operators projected onto the evolving subspace, plus the drive lookups.
struct Model {
    HilbertLayout layout;
    std::vector<int> keep;  // full-space indices of the evolving span
    int d = 0;
    double kf = 0.0, sqrt_kf = 0.0, loss = 0.0, loss_amp = 1.0;
    SinkConvention sink_conv = SinkConvention::cascaded;

    bool has_src = false, has_rec = false, has_snk = false, has_loss = false;
    SampledWaveform gs, gr, gv;  // drive values, linearly interpolated

    MatrixXcd h0;                          // alpha / Kerr / chi terms
    MatrixXcd T, Td;                       // two-quanta drive operator
    MatrixXcd CdA, AdC, CvdA, AdCv, CvdC, CdCv;
    MatrixXcd A, Cxi, Cv;                  // lowering operators entering L_0
    MatrixXcd loss_dd, loss_leak;          // unit-rate loss channel pieces
    std::vector<Channel> channels;         // static decoherence
    MatrixXcd n_exc;

    std::vector<VectorXd> pop_weights;  // diagonal observables
    std::vector<std::string> pop_labels;

    MatrixXcd project(const MatrixXcd& full) const {
        MatrixXcd out(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) out(i, j) = full(keep[i], keep[j]);
        return out;
    }

    void assemble_h(double t, MatrixXcd& out) const {
        out = h0;
        if (has_rec) {
            const Complex q = gr.at(t);
            out.noalias() += q * T;
            out.noalias() += std::conj(q) * Td;
        }
        const Complex gst = has_src ? loss_amp * gs.at(t) : Complex(0.0);
        if (has_src) {
            const Complex p = Complex(0.0, 1.0) * gst;
            out.noalias() += p * CdA;
            out.noalias() += std::conj(p) * AdC;
        }
        if (has_snk) {
            const Complex gvt = gv.at(t);
            const Complex p = (sink_conv == SinkConvention::printed ? Complex(0.0, 1.0)
                                                                    : Complex(0.0, -1.0)) *
                              std::conj(gvt);
            out.noalias() += p * CvdA;
            out.noalias() += std::conj(p) * AdCv;
            if (sink_conv == SinkConvention::cascaded && has_src) {
                // direct source-to-sink exchange of the cascaded composition
                const Complex z = (4.0 / kf) * std::conj(gvt) * std::conj(gst);
                const Complex q = z / Complex(0.0, 2.0);
                out.noalias() += q * CvdC;
                out.noalias() += std::conj(q) * CdCv;
            }
        }
    }

    void assemble_l0(double t, MatrixXcd& out) const {
        out = sqrt_kf * A;
        if (has_src) out.noalias() += (2.0 / sqrt_kf) * loss_amp * std::conj(gs.at(t)) * Cxi;
        if (has_snk) out.noalias() += (2.0 / sqrt_kf) * gv.at(t) * Cv;
    }

    double loss_rate(double t) const {
        return has_loss ? loss * (4.0 / kf) * std::norm(gs.at(t)) : 0.0;
    }

    void deriv(double t, const MatrixXcd& rho, MatrixXcd& out, Scratch& s) const {
        assemble_h(t, s.H);
        s.tmp.noalias() = s.H * rho;
        s.tmp.noalias() -= rho * s.H;
        out = Complex(0.0, -1.0) * s.tmp;

        assemble_l0(t, s.L);
        s.LdL.noalias() = s.L.adjoint() * s.L;
        s.M.noalias() = s.L * rho;
        out.noalias() += s.M * s.L.adjoint();
        s.tmp.noalias() = s.LdL * rho;
        s.tmp.noalias() += rho * s.LdL;
        out -= 0.5 * s.tmp;

        const double lr = loss_rate(t);
        if (lr > 0.0) {
            s.M.noalias() = Cxi * rho;
            out.noalias() += lr * (s.M * Cxi.adjoint());
            s.tmp.noalias() = loss_dd * rho;
            s.tmp.noalias() += rho * loss_dd;
            out -= 0.5 * lr * s.tmp;
        }
        for (const Channel& c : channels) {
            s.M.noalias() = c.op * rho;
            out.noalias() += s.M * c.opd;
            s.tmp.noalias() = c.dd * rho;
            s.tmp.noalias() += rho * c.dd;
            out -= 0.5 * s.tmp;
        }
    }

    // quanta removed per unit time by the decay/loss channels (not L_0)
    double leak_rate(double t, const MatrixXcd& rho) const {
        double r = 0.0;
        for (const Channel& c : channels) r += trace_of_product(c.leak, rho).real();
        r += loss_rate(t) * trace_of_product(loss_leak, rho).real();
        return r;
    }
};

MatrixXcd leak_matrix(const MatrixXcd& op, const MatrixXcd& dd, const MatrixXcd& n) {
    return -(op.adjoint() * n * op - 0.5 * (dd * n + n * dd));
}

void check_envelope(const CouplingEnvelope& env, CouplingRole expected, const TimeGrid& grid,
                    double kappa_f, const char* what) {
    if (env.role != expected)
        throw ConfigError(std::string(what) + " drive has the wrong coupling role");
    if (!(env.grid == grid))
        throw ConfigError(std::string(what) + " drive is not on the simulation grid");
    if (std::abs(env.kappa_f - kappa_f) > 1e-9 * kappa_f)
        throw ConfigError(std::string(what) +
                          " drive was built for a different filter linewidth");
}

Model build_model(const HilbertLayout& layout, const DeviceParams& params, const Drives& drives,
                  const SimulationOptions& opts) {
    params.validate();
    if (layout.resonator < 0) throw ConfigError("layout lacks a resonator subsystem");
    if (opts.substeps < 1) throw ConfigError("substeps must be >= 1");
    if (opts.record_stride < 1) throw ConfigError("record_stride must be >= 1");

    Model m;
    m.layout = layout;
    m.kf = params.kappa_f;
    m.sqrt_kf = std::sqrt(params.kappa_f);
    m.loss = params.loss;
    m.loss_amp = std::sqrt(1.0 - params.loss);
    m.sink_conv = opts.sink;

    const bool prose = opts.roles == OperatorRoles::prose_labels;
    if (opts.restrict_single_excitation && prose)
        throw ConfigError(
            "single-excitation restriction is defined for the printed operator roles; "
            "disable it to use the prose reading");

    // role assignment: which slot carries the anharmonic ladder / the filter
    int anh_slot = -1, osc_slot = layout.resonator;
    if (layout.transmon >= 0) {
        anh_slot = prose ? layout.resonator : layout.transmon;
        osc_slot = prose ? layout.transmon : layout.resonator;
        if (layout.dims[anh_slot] < 3)
            throw ConfigError("the anharmonic-ladder subsystem needs at least 3 levels");
    }

    m.has_src = drives.source.has_value();
    m.has_rec = drives.receiver.has_value();
    m.has_snk = drives.sink.has_value();
    m.has_loss = m.has_src && params.loss > 0.0;
    if (m.has_src) {
        if (layout.source < 0) throw ConfigError("source drive requires a source-cavity slot");
        check_envelope(*drives.source, CouplingRole::source_release, drives.grid, m.kf, "source");
        m.gs = drives.source->as_waveform();
    }
    if (m.has_rec) {
        if (layout.transmon < 0) throw ConfigError("receiver drive requires a transmon slot");
        check_envelope(*drives.receiver, CouplingRole::receiver_absorb, drives.grid, m.kf,
                       "receiver");
        m.gr = drives.receiver->as_waveform();
    }
    if (m.has_snk) {
        if (layout.sink < 0) throw ConfigError("sink drive requires a sink-cavity slot");
        check_envelope(*drives.sink, CouplingRole::sink_absorb, drives.grid, m.kf, "sink");
        m.gv = drives.sink->as_waveform();
    }

    // evolving span
    const int dim_full = layout.dim();
    MatrixXcd n_exc_full = excitation_op(layout);
    if (opts.restrict_single_excitation) {
        for (int i = 0; i < dim_full; ++i)
            if (n_exc_full(i, i).real() <= 1.0 + 1e-9) m.keep.push_back(i);
    } else {
        m.keep.resize(dim_full);
        for (int i = 0; i < dim_full; ++i) m.keep[i] = i;
    }
    m.d = static_cast<int>(m.keep.size());

    // static Hamiltonian pieces
    MatrixXcd h0 = MatrixXcd::Zero(dim_full, dim_full);
    if (anh_slot >= 0) {
        const MatrixXcd b = lower(layout.dims[anh_slot]);
        const MatrixXcd nb = b.adjoint() * b;
        h0 += embed(layout, anh_slot,
                    -0.5 * params.alpha * nb +
                        0.5 * params.alpha * (b.adjoint() * b.adjoint() * b * b));
    }
    {
        const MatrixXcd a = lower(layout.dims[osc_slot]);
        if (params.kerr != 0.0)
            h0 += embed(layout, osc_slot,
                        0.5 * params.kerr * (a.adjoint() * a.adjoint() * a * a));
        if (params.chi != 0.0 && anh_slot >= 0)
            h0 += 2.0 * params.chi * (number_op(layout, osc_slot) * number_op(layout, anh_slot));
    }
    m.h0 = m.project(h0);
    m.n_exc = m.project(n_exc_full);

    const MatrixXcd a_full = embed(layout, osc_slot, lower(layout.dims[osc_slot]));
    m.A = m.project(a_full);
    if (layout.source >= 0) {
        const MatrixXcd c_full = embed(layout, layout.source, lower(2));
        m.Cxi = m.project(c_full);
        m.CdA = m.Cxi.adjoint() * m.A;
        m.AdC = m.CdA.adjoint();
        m.loss_dd = m.Cxi.adjoint() * m.Cxi;
        m.loss_leak = leak_matrix(m.Cxi, m.loss_dd, m.n_exc);
    }
    if (layout.sink >= 0) {
        const MatrixXcd c_full = embed(layout, layout.sink, lower(2));
        m.Cv = m.project(c_full);
        m.CvdA = m.Cv.adjoint() * m.A;
        m.AdCv = m.CvdA.adjoint();
        if (layout.source >= 0) {
            m.CvdC = m.Cv.adjoint() * m.Cxi;
            m.CdCv = m.CvdC.adjoint();
        }
    }
    if (anh_slot >= 0) {
        const MatrixXcd b = lower(layout.dims[anh_slot]);
        const double scale = opts.f0g1_bare_ladder ? 1.0 : 1.0 / std::sqrt(2.0);
        const MatrixXcd t_full = scale * (embed(layout, anh_slot, b.adjoint() * b.adjoint()) *
                                          a_full);
        m.T = m.project(t_full);
        m.Td = m.T.adjoint();
    }

    // transmon decoherence (physical transmon slot under either role reading)
    if (layout.transmon >= 0) {
        auto ladder = [&](int lo, int hi, double rate) {
            MatrixXcd op3 = MatrixXcd::Zero(3, 3);
            op3(lo, hi) = std::sqrt(rate);
            Channel c;
            c.op = m.project(embed(layout, layout.transmon, op3));
            c.opd = c.op.adjoint();
            c.dd = c.opd * c.op;
            c.leak = leak_matrix(c.op, c.dd, m.n_exc);
            m.channels.push_back(std::move(c));
        };
        if (std::isfinite(params.t1ge)) ladder(0, 1, 1.0 / params.t1ge);
        if (std::isfinite(params.t1ef)) ladder(1, 2, 1.0 / params.t1ef);
        const double dph = params.dephasing_rate();
        if (dph > 0.0) {
            MatrixXcd op3 = MatrixXcd::Zero(3, 3);
            op3(1, 1) = 1.0;
            op3(2, 2) = 2.0;
            Channel c;
            c.op = std::sqrt(2.0 * dph) * m.project(embed(layout, layout.transmon, op3));
            c.opd = c.op.adjoint();
            c.dd = c.opd * c.op;
            c.leak = leak_matrix(c.op, c.dd, m.n_exc);
            m.channels.push_back(std::move(c));
        }
    }

    // diagonal population observables
    auto add_pop = [&](int slot, const MatrixXcd& op1, const std::string& label) {
        const MatrixXcd full = embed(layout, slot, op1);
        VectorXd w(m.d);
        for (int i = 0; i < m.d; ++i) w[i] = full(m.keep[i], m.keep[i]).real();
        m.pop_weights.push_back(std::move(w));
        m.pop_labels.push_back(label);
    };
    auto level_proj = [](int dim, int k) {
        MatrixXcd p = MatrixXcd::Zero(dim, dim);
        p(k, k) = 1.0;
        return p;
    };
    if (layout.source >= 0) add_pop(layout.source, level_proj(2, 1), "source_e");
    if (layout.transmon >= 0) {
        add_pop(layout.transmon, level_proj(3, 0), "transmon_g");
        add_pop(layout.transmon, level_proj(3, 1), "transmon_e");
        add_pop(layout.transmon, level_proj(3, 2), "transmon_f");
    }
    {
        const MatrixXcd nfull = number_op(layout, layout.resonator);
        VectorXd w(m.d);
        for (int i = 0; i < m.d; ++i) w[i] = nfull(m.keep[i], m.keep[i]).real();
        m.pop_weights.push_back(std::move(w));
        m.pop_labels.push_back("resonator_n");
    }
    if (layout.sink >= 0) add_pop(layout.sink, level_proj(2, 1), "sink_e");

    return m;
}

void rk4_interval(const Model& model, const TimeGrid& g, int i, int substeps, MatrixXcd& state,
                  Scratch& s) {
    const double h = g.dt / substeps;
    for (int k = 0; k < substeps; ++k) {
        const double t = g.t(i) + k * h;
        model.deriv(t, state, s.k1, s);
        s.stage = state + (0.5 * h) * s.k1;
        model.deriv(t + 0.5 * h, s.stage, s.k2, s);
        s.stage = state + (0.5 * h) * s.k2;
        model.deriv(t + 0.5 * h, s.stage, s.k3, s);
        s.stage = state + h * s.k3;
        model.deriv(t + h, s.stage, s.k4, s);
        state += (h / 6.0) * (s.k1 + 2.0 * s.k2 + 2.0 * s.k3 + s.k4);
    }
}

double min_eig(const MatrixXcd& rho) {
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(0.5 * (rho + rho.adjoint()),
                                                Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

}  // namespace

StagedBasis staged_basis(int top_mode, double kappa_ph, double kappa_f, double max_delay) {
    if (top_mode < 0) throw ConfigError("mode index must be non-negative");
    const TimeGrid base = default_grid_for_sech(kappa_ph, top_mode);
    const double margin = std::max(0.0, max_delay) + 32.0 / kappa_f;
    const int pad = static_cast<int>(std::ceil(margin / base.dt));
    const TimeGrid grid(base.t_start, base.dt, base.n_points + pad);
    return {grid, sech_basis(top_mode, kappa_ph, grid)};
}

// ---- DeviceParams ----

void DeviceParams::validate() const {
    if (!(kappa_f > 0.0) || !std::isfinite(kappa_f))
        throw ConfigError("kappa_f must be positive and finite");
    if (!std::isfinite(alpha) || !std::isfinite(kerr) || !std::isfinite(chi))
        throw ConfigError("alpha, kerr and chi must be finite");
    for (double tc : {t1ge, t1ef, t2ge_star})
        if (!(tc > 0.0)) throw ConfigError("coherence times must be positive (or infinite)");
    if (!(loss >= 0.0 && loss < 1.0)) throw ConfigError("loss must lie in [0, 1)");
    if (std::isfinite(t2ge_star)) {
        const double raw = 1.0 / t2ge_star - (std::isfinite(t1ge) ? 0.5 / t1ge : 0.0);
        if (raw < -1e-9) throw ConfigError("T2* exceeds the 2*T1ge amplitude-damping limit");
    }
}

double DeviceParams::dephasing_rate() const {
    const double r2 = std::isfinite(t2ge_star) ? 1.0 / t2ge_star : 0.0;
    const double r1 = std::isfinite(t1ge) ? 0.5 / t1ge : 0.0;
    return std::max(0.0, r2 - r1);
}

DeviceParams DeviceParams::ideal() { return DeviceParams{}; }

DeviceParams DeviceParams::sender_chip() {
    DeviceParams p;
    p.kappa_f = 2.0 * 3.14159265358979323846 * 138e6;
    p.t1ge = 29e-6;
    p.t1ef = 22e-6;
    p.t2ge_star = 11e-6;
    return p;
}

DeviceParams DeviceParams::receiver_chip() {
    DeviceParams p;
    p.kappa_f = 2.0 * 3.14159265358979323846 * 164e6;
    p.t1ge = 19e-6;
    p.t1ef = 11e-6;
    p.t2ge_star = 9e-6;
    return p;
}

// ---- reference operator assembly ----

MatrixXcd build_hamiltonian(double t, const DeviceParams& params, const Drives& drives,
                            const HilbertLayout& layout, const SimulationOptions& opts) {
    SimulationOptions full = opts;
    full.restrict_single_excitation = false;
    const Model m = build_model(layout, params, drives, full);
    MatrixXcd h(m.d, m.d);
    m.assemble_h(t, h);
    return h;
}

MatrixXcd output_operator(double t, const DeviceParams& params, const Drives& drives,
                          const HilbertLayout& layout, const SimulationOptions& opts) {
    SimulationOptions full = opts;
    full.restrict_single_excitation = false;
    const Model m = build_model(layout, params, drives, full);
    MatrixXcd l(m.d, m.d);
    m.assemble_l0(t, l);
    return l;
}

// ---- record helpers ----

TimeGrid SimulationRecord::record_grid() const {
    return TimeGrid(grid.t_start, grid.dt * stride, static_cast<int>(i_out.size()));
}

SampledWaveform SimulationRecord::i_out_waveform() const {
    return SampledWaveform(record_grid(), i_out.cast<Complex>(), WaveformKind::field_record);
}

// ---- evolve ----

SimulationRecord evolve(const DensityMatrix& rho0, const DeviceParams& params,
                        const Drives& drives, const SimulationOptions& opts) {
    rho0.validate();
    const Model model = build_model(rho0.layout, params, drives, opts);
    const TimeGrid& g = drives.grid;

    MatrixXcd rho = model.project(rho0.rho);
    if (model.d < rho0.layout.dim()) {
        const double kept = rho.trace().real();
        if (std::abs(kept - rho0.rho.trace().real()) > 1e-10)
            throw ConfigError(
                "initial state has weight outside the single-excitation span; disable "
                "restrict_single_excitation");
    }

    const int stride = opts.record_stride;
    const int n_rec = (g.n_points - 1) / stride + 1;
    const int n_pop = static_cast<int>(model.pop_labels.size());

    SimulationRecord rec;
    rec.layout = rho0.layout;
    rec.grid = g;
    rec.stride = stride;
    rec.i_out.resize(n_rec);
    rec.mean_field.resize(n_rec);
    rec.populations.resize(n_rec, n_pop);
    rec.population_labels = model.pop_labels;
    rec.params = params;
    rec.options = opts;
    rec.source_digest = model.has_src ? digest_samples(model.gs.samples) : 0;

    Scratch scr;
    scr.resize(model.d);
    VectorXd flux(g.n_points), leak(g.n_points);
    std::vector<MatrixXcd> checkpoints;
    if (opts.record_g1) checkpoints.reserve(n_rec);

    double min_eigenvalue = 0.0, trace_drift = 0.0;
    for (int i = 0; i < g.n_points; ++i) {
        const double t = g.t(i);
        model.assemble_l0(t, scr.L);
        scr.M.noalias() = scr.L * rho;
        flux[i] = scr.L.conjugate().cwiseProduct(scr.M).sum().real();
        leak[i] = model.leak_rate(t, rho);

        if (i % stride == 0) {
            const int r = i / stride;
            rec.i_out[r] = flux[i];
            rec.mean_field[r] = scr.M.trace();
            for (int p = 0; p < n_pop; ++p)
                rec.populations(r, p) =
                    model.pop_weights[p].dot(rho.diagonal().real());
            const double drift = std::abs(rho.trace().real() - 1.0);
            trace_drift = std::max(trace_drift, drift);
            if (drift > opts.trace_abort)
                throw NumericalError("trace drift " + std::to_string(drift) +
                                     " exceeds the abort threshold at t index " +
                                     std::to_string(i));
            if (opts.check_positivity) {
                const double lo = min_eig(rho);
                min_eigenvalue = std::min(min_eigenvalue, lo);
                if (lo < -1e-8)
                    throw NumericalError("state lost positivity (min eigenvalue " +
                                         std::to_string(lo) + ") at t index " +
                                         std::to_string(i));
            }
            if (opts.record_g1) checkpoints.push_back(rho);
        }
        if (i + 1 < g.n_points) rk4_interval(model, g, i, opts.substeps, rho, scr);
    }
    rec.energy_out = trapz(g, flux);
    rec.excitation_leaked = trapz(g, leak);
    rec.trace_drift = trace_drift;
    rec.min_eigenvalue = min_eigenvalue;

    // embed the final state back into the full space
    const int dim_full = rho0.layout.dim();
    MatrixXcd full = MatrixXcd::Zero(dim_full, dim_full);
    for (int i = 0; i < model.d; ++i)
        for (int j = 0; j < model.d; ++j) full(model.keep[i], model.keep[j]) = rho(i, j);
    rec.final_state = DensityMatrix{rho0.layout, 0.5 * (full + full.adjoint())};
    rec.final_state.validate();

    if (opts.record_g1) {
        // quantum regression: G(r, r') = tr(L0(t_r') E[rho(t_r) L0(t_r)^dagger])
        const TimeGrid rg = rec.record_grid();
        MatrixXcd G = MatrixXcd::Zero(n_rec, n_rec);
        MatrixXcd l_now(model.d, model.d), x(model.d, model.d);
        for (int r = 0; r < n_rec; ++r) {
            model.assemble_l0(rg.t(r), l_now);
            x.noalias() = checkpoints[r] * l_now.adjoint();
            G(r, r) = trace_of_product(l_now, x);
            for (int rp = r + 1; rp < n_rec; ++rp) {
                for (int i = (rp - 1) * stride; i < rp * stride; ++i)
                    rk4_interval(model, g, i, opts.substeps, x, scr);
                model.assemble_l0(rg.t(rp), l_now);
                const Complex val = trace_of_product(l_now, x);
                G(r, rp) = val;
                G(rp, r) = std::conj(val);
            }
        }
        rec.g1 = std::move(G);
    }
    return rec;
}

// ---- derived quantities ----

double absorption_efficiency(const SimulationRecord& residual, const SimulationRecord& baseline) {
    if (!(residual.grid == baseline.grid))
        throw ConfigError("efficiency records live on different grids");
    if (residual.source_digest != baseline.source_digest)
        throw ConfigError("efficiency records come from different source drives");
    if (baseline.energy_out < 1e-6)
        throw NumericalError("baseline emission energy below 1e-6; efficiency undefined");
    return 1.0 - residual.energy_out / baseline.energy_out;
}

Complex predicted_overlap(const SampledWaveform& emitted, const SampledWaveform& absorbable,
                          double delta_t) {
    const TimeGrid& g = emitted.grid;
    VectorXcd prod(g.n_points);
    for (int i = 0; i < g.n_points; ++i) {
        const double t = g.t(i);
        prod[i] = std::conj(emitted.samples[i]) * absorbable.at(-t + delta_t);
    }
    return trapz(g, prod);
}

AbsorptionRun simulate_absorption(int m, int n, double tau, double kappa_ph,
                                  const DeviceParams& params, const SimulationOptions& opts) {
    params.validate();
    if (m < 0 || n < 0) throw ConfigError("mode indices must be non-negative");
    const StagedBasis st = staged_basis(std::max(m, n), kappa_ph, params.kappa_f, tau);
    const HilbertLayout layout = HilbertLayout::absorption(opts.n_fock);
    const DensityMatrix rho0 = source_qubit_state(layout, 0.0, 1.0);

    Drives driven{st.grid, {}, {}, {}};
    driven.source = source_coupling(st.basis[m], params.kappa_f);
    driven.receiver = receiver_coupling(st.basis[n], params.kappa_f, tau);

    AbsorptionRun out;
    out.residual = evolve(rho0, params, driven, opts);

    Drives bare{st.grid, {}, {}, {}};
    bare.source = driven.source;
    SimulationOptions bopts = opts;
    bopts.record_g1 = false;
    out.baseline = evolve(rho0, params, bare, bopts);

    out.efficiency = absorption_efficiency(out.residual, out.baseline);
    out.predicted_sq_overlap = std::norm(predicted_overlap(st.basis[m], st.basis[n], tau));
    return out;
}

DelayScan sweep_delay(int m, int n, const std::vector<double>& taus, double kappa_ph,
                      const DeviceParams& params, const SimulationOptions& opts) {
    params.validate();
    if (taus.empty()) throw ConfigError("delay sweep needs at least one tau");
    if (m < 0 || n < 0) throw ConfigError("mode indices must be non-negative");
    const double tau_max = *std::max_element(taus.begin(), taus.end());
    const StagedBasis st = staged_basis(std::max(m, n), kappa_ph, params.kappa_f, tau_max);
    const HilbertLayout layout = HilbertLayout::absorption(opts.n_fock);
    const DensityMatrix rho0 = source_qubit_state(layout, 0.0, 1.0);

    SimulationOptions o = opts;
    o.record_g1 = false;

    Drives bare{st.grid, {}, {}, {}};
    bare.source = source_coupling(st.basis[m], params.kappa_f);
    const SimulationRecord baseline = evolve(rho0, params, bare, o);

    DelayScan scan;
    scan.points.reserve(taus.size());
    for (double tau : taus) {
        Drives driven = bare;
        driven.receiver = receiver_coupling(st.basis[n], params.kappa_f, tau);
        const SimulationRecord residual = evolve(rho0, params, driven, o);
        DelayPoint pt;
        pt.tau = tau;
        pt.efficiency = absorption_efficiency(residual, baseline);
        pt.predicted_sq_overlap = std::norm(predicted_overlap(st.basis[m], st.basis[n], tau));
        scan.points.push_back(pt);
    }
    const auto best = std::max_element(
        scan.points.begin(), scan.points.end(),
        [](const DelayPoint& a, const DelayPoint& b) { return a.efficiency < b.efficiency; });
    scan.tau_opt = best->tau;
    scan.best_efficiency = best->efficiency;
    const auto bestp = std::max_element(scan.points.begin(), scan.points.end(),
                                        [](const DelayPoint& a, const DelayPoint& b) {
                                            return a.predicted_sq_overlap < b.predicted_sq_overlap;
                                        });
    scan.tau_opt_predicted = bestp->tau;
    return scan;
}

// ---- output-field coherence ----

CoherenceModes first_order_coherence(const SimulationRecord& record) {
    if (!record.g1)
        throw ConfigError("record carries no two-time kernel; rerun with record_g1");
    const MatrixXcd& G = *record.g1;
    const TimeGrid rg = record.record_grid();
    const double dt = rg.dt;

    // kernel as an integral operator: K v = n v with quadrature weight dt
    const MatrixXcd K = 0.5 * (G.transpose() + G.conjugate());
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(K);
    if (es.info() != Eigen::Success)
        throw NumericalError("eigendecomposition of the two-time kernel failed");

    const int n = static_cast<int>(K.rows());
    CoherenceModes cm;
    cm.grid = rg;
    cm.kernel = G;
    cm.occupancies.resize(n);
    for (int i = 0; i < n; ++i) cm.occupancies[i] = es.eigenvalues()[n - 1 - i] * dt;
    if (cm.occupancies[n - 1] < -1e-8)
        throw NumericalError("two-time kernel is not positive semidefinite");

    const int n_keep = std::min(n, 8);
    cm.modes.reserve(n_keep);
    for (int i = 0; i < n_keep; ++i) {
        VectorXcd v = es.eigenvectors().col(n - 1 - i) / std::sqrt(dt);
        fix_mode_phase(v);
        cm.modes.push_back(std::move(v));
    }
    cm.flux_total = trapz(rg, VectorXd(G.diagonal().real()));
    cm.leading_degenerate = n >= 2 && (cm.occupancies[0] - cm.occupancies[1]) < 1e-3;
    return cm;
}

SampledWaveform rejected_waveform(const SimulationRecord& record) {
    const CoherenceModes cm = first_order_coherence(record);
    if (cm.leading_degenerate)
        throw NumericalError(
            "leading output-mode occupancies are nearly degenerate; dominant mode undefined");
    const VectorXcd v = std::sqrt(std::max(0.0, cm.occupancies[0])) * cm.modes[0];
    return SampledWaveform(cm.grid, v, WaveformKind::field_record);
}

MatrixXd rejected_orthogonality(const std::vector<SimulationRecord>& records) {
    const int k = static_cast<int>(records.size());
    if (k == 0) throw ConfigError("no records given");
    std::vector<VectorXcd> modes;
    TimeGrid rg;
    for (int i = 0; i < k; ++i) {
        const CoherenceModes cm = first_order_coherence(records[i]);
        if (i == 0)
            rg = cm.grid;
        else if (!(cm.grid == rg))
            throw ConfigError("records live on different record grids");
        modes.push_back(cm.modes[0]);
    }
    MatrixXd out(k, k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
            out(i, j) = std::norm(modes[i].dot(modes[j]) * rg.dt);  // dot conjugates lhs
    return out;
}

// ---- downstream capture ----

CaptureResult capture_fidelity(int m, int n, Complex cg, Complex ce, double kappa_ph,
                               const DeviceParams& params, double tau_receiver, double tau_sink,
                               const SimulationOptions& opts, double frame_phase) {
    params.validate();
    if (m < 0) throw ConfigError("mode index must be non-negative");
    const int top = std::max({m, n, 0});
    const StagedBasis st =
        staged_basis(top, kappa_ph, params.kappa_f, std::max(tau_receiver, tau_sink));
    const HilbertLayout layout = HilbertLayout::capture(opts.n_fock);
    const DensityMatrix rho0 = source_qubit_state(layout, cg, ce);

    Drives drv{st.grid, {}, {}, {}};
    drv.source = source_coupling(st.basis[m], params.kappa_f);
    if (n >= 0) drv.receiver = receiver_coupling(st.basis[n], params.kappa_f, tau_receiver);
    drv.sink = sink_coupling(st.basis[m], params.kappa_f, tau_sink);

    SimulationOptions o = opts;
    o.record_g1 = false;
    const SimulationRecord rec = evolve(rho0, params, drv, o);

    MatrixXcd sink = rec.final_state.reduced(layout.sink);
    const Complex rot = std::exp(Complex(0.0, -frame_phase));
    sink(1, 0) *= rot;
    sink(0, 1) *= std::conj(rot);

    HilbertLayout sink_only;
    sink_only.dims = {2};
    sink_only.sink = 0;

    Eigen::Vector2cd psi;
    psi << cg, ce;
    CaptureResult out;
    out.sink_state = DensityMatrix{sink_only, sink};
    out.sink_state.validate();
    out.fidelity = (psi.adjoint() * sink * psi)(0).real();
    out.sink_population = sink(1, 1).real();
    return out;
}

double capture_frame_phase(double kappa_ph, const DeviceParams& params, double tau_receiver,
                           double tau_sink, const SimulationOptions& opts) {
    DeviceParams cal = params;
    cal.t1ge = cal.t1ef = cal.t2ge_star = std::numeric_limits<double>::infinity();
    cal.loss = 0.0;
    const double inv = 1.0 / std::sqrt(2.0);
    const CaptureResult r =
        capture_fidelity(0, 3, inv, inv, kappa_ph, cal, tau_receiver, tau_sink, opts, 0.0);
    const Complex c = r.sink_state.rho(1, 0);
    if (std::abs(c) < 1e-6)
        throw NumericalError("sink coherence too small to define a frame phase");
    return std::arg(c);
}

}  // namespace tmm
