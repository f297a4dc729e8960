#include "tmm/pulsesynth.hpp"

#include <cmath>

#include "tmm/modebasis.hpp"

namespace tmm {

SampledWaveform RateProfile::as_waveform() const {
    return {grid, gamma.cast<Complex>(), WaveformKind::rate};
}

SampledWaveform CouplingEnvelope::as_waveform() const {
    return {grid, g, WaveformKind::drive_envelope};
}

RateProfile decay_rate(const SampledWaveform& mode, double cap, double floor) {
    if (mode.kind != WaveformKind::mode_function)
        throw ConfigError("decay_rate: input must be a mode_function");
    if (!(cap > 0.0)) throw ConfigError("decay_rate: cap must be positive");
    if (!(floor > 0.0) || floor >= 1.0) throw ConfigError("decay_rate: floor must be in (0, 1)");
    VectorXd a2 = mode.abs2();
    VectorXd cum = cumtrapz(mode.grid, a2);
    RateProfile out;
    out.grid = mode.grid;
    out.cap = cap;
    out.gamma.resize(mode.grid.n_points);
    for (int i = 0; i < mode.grid.n_points; ++i) {
        double remaining = 1.0 - cum[i];
        if (remaining < floor) {
            if (out.truncation_index < 0) out.truncation_index = i;
            out.gamma[i] = 0.0;
        } else {
            out.gamma[i] = std::min(a2[i] / remaining, cap);
        }
    }
    return out;
}

CouplingEnvelope source_coupling(const SampledWaveform& mode, double kappa_f, double floor) {
    if (mode.kind != WaveformKind::mode_function)
        throw ConfigError("source_coupling: input must be a mode_function");
    if (!(kappa_f > 0.0)) throw ConfigError("source_coupling: kappa_f must be positive");
    if (!(floor > 0.0) || floor >= 1.0)
        throw ConfigError("source_coupling: floor must be in (0, 1)");
    VectorXd cum = cumtrapz(mode.grid, mode.abs2());
    CouplingEnvelope env;
    env.grid = mode.grid;
    env.kappa_f = kappa_f;
    env.role = CouplingRole::source_release;
    env.g.resize(mode.grid.n_points);
    double pref = 0.5 * std::sqrt(kappa_f);
    for (int i = 0; i < mode.grid.n_points; ++i) {
        double remaining = 1.0 - cum[i];
        env.g[i] = (remaining < floor)
                       ? Complex(0, 0)
                       : pref * std::conj(mode.samples[i]) / std::sqrt(remaining);
    }
    return env;
}

CouplingEnvelope receiver_coupling(const SampledWaveform& mode, double kappa_f, double delta_t) {
    if (mode.kind != WaveformKind::mode_function)
        throw ConfigError("receiver_coupling: input must be a mode_function");
    if (!(kappa_f > 0.0)) throw ConfigError("receiver_coupling: kappa_f must be positive");
    VectorXd cum = cumtrapz(mode.grid, mode.abs2());
    SampledWaveform cumw(mode.grid, cum.cast<Complex>(), WaveformKind::field_record);
    CouplingEnvelope env;
    env.grid = mode.grid;
    env.kappa_f = kappa_f;
    env.delta_t = delta_t;
    env.role = CouplingRole::receiver_absorb;
    env.g.resize(mode.grid.n_points);
    double pref = 0.5 * std::sqrt(kappa_f);
    for (int i = 0; i < mode.grid.n_points; ++i) {
        double s = mode.grid.t(i) - delta_t;  // mode time
        Complex xi = mode.at(s);
        double acc = std::max(cumw.at(s).real(), kEnergyFloor);
        env.g[i] = pref * xi / std::sqrt(acc);
    }
    return env;
}

CouplingEnvelope sink_coupling(const SampledWaveform& mode, double kappa_f, double delta_t) {
    if (mode.kind != WaveformKind::mode_function)
        throw ConfigError("sink_coupling: input must be a mode_function");
    if (!(kappa_f > 0.0)) throw ConfigError("sink_coupling: kappa_f must be positive");
    VectorXd cum = cumtrapz(mode.grid, mode.abs2());
    SampledWaveform cumw(mode.grid, cum.cast<Complex>(), WaveformKind::field_record);
    CouplingEnvelope env;
    env.grid = mode.grid;
    env.kappa_f = kappa_f;
    env.delta_t = delta_t;
    env.role = CouplingRole::sink_absorb;
    env.g.resize(mode.grid.n_points);
    double pref = 0.5 * std::sqrt(kappa_f);
    for (int i = 0; i < mode.grid.n_points; ++i) {
        double s = -mode.grid.t(i) + delta_t;  // source-envelope time
        Complex xi = mode.at(s);
        double remaining = 1.0 - cumw.at(s).real();
        env.g[i] = (remaining < kEnergyFloor) ? Complex(0, 0)
                                              : pref * std::conj(xi) / std::sqrt(remaining);
    }
    return env;
}

SampledWaveform time_reverse(const SampledWaveform& w, double delta_t) {
    VectorXcd out(w.grid.n_points);
    for (int i = 0; i < w.grid.n_points; ++i) out[i] = w.at(-w.grid.t(i) + delta_t);
    return {w.grid, std::move(out), w.kind};
}

// ---- DAC ----

void DacModel::validate() const {
    if (!(sample_rate > 0.0)) throw ConfigError("DacModel: sample_rate must be positive");
    if (bits < 1 || bits > 24) throw ConfigError("DacModel: bits out of range [1, 24]");
    if (!(full_scale > 0.0)) throw ConfigError("DacModel: full_scale must be positive");
}

namespace {

// Index of the DAC sample holding at time t (clock aligned to the grid start).
int dac_index(const TimeGrid& g, double sample_rate, double t) {
    return static_cast<int>(std::floor((t - g.t_start) * sample_rate + 1e-12));
}

double round_mid_rise(double x, double step, int levels_half) {
    int k = static_cast<int>(std::floor(x / step));
    k = std::clamp(k, -levels_half, levels_half - 1);
    return (k + 0.5) * step;
}

SampledWaveform sample_and_hold(const SampledWaveform& w, const DacModel& dac, bool round) {
    dac.validate();
    double quad_peak = std::max(w.samples.real().cwiseAbs().maxCoeff(),
                                w.samples.imag().cwiseAbs().maxCoeff());
    if (quad_peak > dac.full_scale * (1.0 + 1e-12))
        throw ConfigError("quantize: waveform exceeds DAC full scale (clipping)");
    const double step = dac.full_scale / std::pow(2.0, dac.bits - 1);
    const int half = 1 << (dac.bits - 1);
    const double ts = 1.0 / dac.sample_rate;
    // The output pattern has a finite duration: the channel is off (exact
    // zero) before the first and after the last nonzero input sample, and a
    // quadrature that carries no signal at all is never driven. Only within
    // the support does the mid-rise rounding apply.
    int i0 = 0, i1 = w.grid.n_points - 1;
    while (i0 <= i1 && std::abs(w.samples[i0]) == 0.0) ++i0;
    while (i1 >= i0 && std::abs(w.samples[i1]) == 0.0) --i1;
    const bool has_re = w.samples.real().cwiseAbs().maxCoeff() > 0.0;
    const bool has_im = w.samples.imag().cwiseAbs().maxCoeff() > 0.0;
    VectorXcd out = VectorXcd::Zero(w.grid.n_points);
    int last_k = -1;
    Complex held(0, 0);
    for (int i = i0; i <= i1; ++i) {
        int k = dac_index(w.grid, dac.sample_rate, w.grid.t(i));
        if (k != last_k) {
            Complex v = w.at(w.grid.t_start + k * ts);
            if (round) {
                double re = has_re ? round_mid_rise(v.real(), step, half) : 0.0;
                double im = has_im ? round_mid_rise(v.imag(), step, half) : 0.0;
                held = Complex(re, im);
            } else {
                held = v;
            }
            last_k = k;
        }
        out[i] = held;
    }
    return {w.grid, std::move(out), WaveformKind::drive_envelope};
}

}  // namespace

SampledWaveform quantize(const SampledWaveform& w, const DacModel& dac) {
    return sample_and_hold(w, dac, /*round=*/true);
}

QuantizedLevels quantize_levels(const SampledWaveform& w, const DacModel& dac) {
    // Integer codes for the same pattern quantize() produces: the pattern
    // spans only the waveform's support, one code per DAC clock tick.
    SampledWaveform q = quantize(w, dac);
    const double step = dac.full_scale / std::pow(2.0, dac.bits - 1);
    const double ts = 1.0 / dac.sample_rate;
    int i0 = 0, i1 = q.grid.n_points - 1;
    while (i0 <= i1 && std::abs(q.samples[i0]) == 0.0) ++i0;
    while (i1 >= i0 && std::abs(q.samples[i1]) == 0.0) --i1;
    QuantizedLevels out;
    out.sample_period = ts;
    if (i0 > i1) {  // empty pattern
        out.t_start = q.grid.t_start;
        return out;
    }
    int k0 = dac_index(q.grid, dac.sample_rate, q.grid.t(i0));
    int k1 = dac_index(q.grid, dac.sample_rate, q.grid.t(i1));
    out.t_start = q.grid.t_start + k0 * ts;
    auto code = [&](double x) {
        // recover the mid-rise code from the level centre (k + 0.5) step;
        // an undriven quadrature (exact zero) exports code 0
        if (x == 0.0) return 0;
        return static_cast<int>(std::lround(x / step - 0.5));
    };
    for (int k = k0; k <= k1; ++k) {
        int i = q.grid.index_near(q.grid.t_start + k * ts);
        out.re.push_back(code(q.samples[i].real()));
        out.im.push_back(code(q.samples[i].imag()));
    }
    return out;
}

SampledWaveform regenerate_from_coupling(const CouplingEnvelope& env) {
    if (!(env.kappa_f > 0.0)) throw ConfigError("regenerate_from_coupling: kappa_f must be positive");
    VectorXd g2(env.grid.n_points);
    for (int i = 0; i < env.grid.n_points; ++i) g2[i] = std::norm(env.g[i]);
    VectorXd cum = cumtrapz(env.grid, g2);
    VectorXcd xi(env.grid.n_points);
    double pref = 2.0 / std::sqrt(env.kappa_f);
    for (int i = 0; i < env.grid.n_points; ++i)
        xi[i] = pref * std::conj(env.g[i]) * std::exp(-(2.0 / env.kappa_f) * cum[i]);
    return {env.grid, std::move(xi), WaveformKind::field_record};
}

double drive_full_scale(double kappa_ph, double kappa_f, int m_max) {
    double fs = 0.0;
    for (int m = 0; m <= m_max; ++m) {
        TimeGrid grid = default_grid_for_sech(kappa_ph, m);
        ModeBasis basis = sech_basis(m, kappa_ph, grid);
        CouplingEnvelope env = source_coupling(basis[m], kappa_f);
        fs = std::max({fs, env.g.real().cwiseAbs().maxCoeff(), env.g.imag().cwiseAbs().maxCoeff()});
    }
    return fs;
}

double quantization_infidelity(int m, double kappa_ph, double kappa_f, const DacModel& dac) {
    TimeGrid grid = default_grid_for_sech(kappa_ph, m);
    ModeBasis basis = sech_basis(m, kappa_ph, grid);
    CouplingEnvelope env = source_coupling(basis[m], kappa_f);
    SampledWaveform held = sample_and_hold(env.as_waveform(), dac, /*round=*/false);
    SampledWaveform rounded = sample_and_hold(env.as_waveform(), dac, /*round=*/true);
    CouplingEnvelope env_ref = env, env_q = env;
    env_ref.g = held.samples;
    env_q.g = rounded.samples;
    SampledWaveform ref = regenerate_from_coupling(env_ref);
    SampledWaveform q = regenerate_from_coupling(env_q);
    double n_ref = ref.energy(), n_q = q.energy();
    if (!(n_ref > 0.0) || !(n_q > 0.0))
        throw NumericalError("quantization_infidelity: regenerated waveform has no energy");
    Complex I = overlap(ref, q);
    double f = std::norm(I) / (n_ref * n_q);
    return std::max(0.0, 1.0 - f);
}

}  // namespace tmm
