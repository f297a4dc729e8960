#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "tmm/dynamics.hpp"

using namespace tmm;
using std::numbers::pi;

namespace {

const double kKappa = 2.0 * pi * 5e6;  // rad/s, photon bandwidth

// Simulation grid for modes up to `top` with room for delayed drives.
TimeGrid padded_grid(int top, double kappa_f, double slack) {
    TimeGrid base = default_grid_for_sech(kKappa, top);
    const int pad = static_cast<int>(std::ceil((slack + 32.0 / kappa_f) / base.dt));
    return TimeGrid(base.t_start, base.dt, base.n_points + pad);
}

double overlap_with_shifted(const TimeGrid& g, const VectorXcd& v, const SampledWaveform& ref,
                            double shift) {
    VectorXcd prod(g.n_points);
    for (int i = 0; i < g.n_points; ++i)
        prod[i] = std::conj(v[i]) * ref.at(g.t(i) - shift);
    return std::norm(trapz(g, prod));
}

}  // namespace

// ---- Hilbert-space plumbing ----

TEST_CASE("layouts expose the expected slots and dimensions") {
    HilbertLayout b = HilbertLayout::baseline(3);
    CHECK(b.dim() == 6);
    CHECK(b.source == 0);
    CHECK(b.transmon == -1);
    CHECK(b.resonator == 1);

    HilbertLayout a = HilbertLayout::absorption(3);
    CHECK(a.dim() == 18);
    CHECK(a.transmon == 1);
    CHECK(a.sink == -1);

    HilbertLayout c = HilbertLayout::capture(4);
    CHECK(c.dim() == 48);
    CHECK(c.sink == 3);
    CHECK_THROWS_AS(HilbertLayout::absorption(1), ConfigError);
}

TEST_CASE("lowering operator and embedding act on the right factors") {
    MatrixXcd l3 = lower(3);
    CHECK(std::abs(l3(0, 1) - 1.0) < 1e-15);
    CHECK(std::abs(l3(1, 2) - std::sqrt(2.0)) < 1e-15);
    CHECK(l3(2, 2) == Complex(0.0));

    HilbertLayout lay = HilbertLayout::absorption(3);
    MatrixXcd n_res = number_op(lay, lay.resonator);
    // product index (source, transmon, resonator) row-major
    CHECK(n_res(5, 5).real() == doctest::Approx(2.0));   // |0, g, 2>
    CHECK(n_res(9, 9).real() == doctest::Approx(0.0));   // |1, g, 0>
    MatrixXcd n_exc = excitation_op(lay);
    CHECK(n_exc(9, 9).real() == doctest::Approx(1.0));   // source photon
    CHECK(n_exc(6, 6).real() == doctest::Approx(1.0));   // |0, f, 0> counts one quantum
    CHECK(n_exc(7, 7).real() == doctest::Approx(2.0));   // |0, f, 1>
}

TEST_CASE("partial trace and state builders behave") {
    HilbertLayout lay = HilbertLayout::absorption(2);
    DensityMatrix rho = source_qubit_state(lay, 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0));
    rho.validate();
    MatrixXcd src = rho.reduced(lay.source);
    CHECK(src(0, 0).real() == doctest::Approx(0.5));
    CHECK(src(0, 1).real() == doctest::Approx(0.5));
    CHECK(rho.population(lay.transmon, 0) == doctest::Approx(1.0));
    CHECK(rho.population(lay.source, 1) == doctest::Approx(0.5));

    CHECK_THROWS_AS(source_qubit_state(lay, 1.0, 1.0), ConfigError);  // not normalized
    DensityMatrix bad = vacuum_state(lay);
    bad.rho(0, 1) = 1.0;  // non-Hermitian
    CHECK_THROWS_AS(bad.validate(), NumericalError);
}

// ---- device parameters ----

TEST_CASE("device parameter validation and dephasing rate") {
    DeviceParams p = DeviceParams::receiver_chip();
    p.validate();
    // 1/T_phi = 1/T2* - 1/(2 T1ge)
    CHECK(p.dephasing_rate() == doctest::Approx(1.0 / 9e-6 - 1.0 / 38e-6).epsilon(1e-12));
    CHECK(DeviceParams::ideal().dephasing_rate() == 0.0);

    DeviceParams bad = p;
    bad.loss = 1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = p;
    bad.kappa_f = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = p;
    bad.t2ge_star = 1.0;  // far beyond the 2*T1 limit
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

// ---- Hamiltonian assembly ----

TEST_CASE("assembled Hamiltonian is Hermitian and vanishes without couplings") {
    DeviceParams ideal = DeviceParams::ideal();
    HilbertLayout lay = HilbertLayout::capture(3);
    TimeGrid grid = padded_grid(1, ideal.kappa_f, 10e-9);
    ModeBasis basis = sech_basis(1, kKappa, grid);

    Drives drv{grid, {}, {}, {}};
    drv.source = source_coupling(basis[0], ideal.kappa_f);
    drv.receiver = receiver_coupling(basis[1], ideal.kappa_f, 2e-9);
    drv.sink = sink_coupling(basis[0], ideal.kappa_f, 6e-9);

    for (double frac : {0.31, 0.5, 0.77}) {
        const double t = grid.t_start + frac * grid.span();
        MatrixXcd h = build_hamiltonian(t, ideal, drv, lay);
        const double scale = h.cwiseAbs().maxCoeff();
        CHECK((h - h.adjoint()).cwiseAbs().maxCoeff() <= 1e-12 * scale);
    }

    DeviceParams bare = ideal;
    bare.alpha = 0.0;
    Drives none{grid, {}, {}, {}};
    CHECK(build_hamiltonian(0.0, bare, none, lay).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("photon-exchange term conserves the excitation count") {
    DeviceParams dev = DeviceParams::ideal();
    dev.alpha = 0.0;
    HilbertLayout lay = HilbertLayout::absorption(3);
    TimeGrid grid = padded_grid(0, dev.kappa_f, 0.0);
    ModeBasis basis = sech_basis(0, kKappa, grid);
    Drives drv{grid, {}, {}, {}};
    drv.source = source_coupling(basis[0], dev.kappa_f);
    drv.receiver = receiver_coupling(basis[0], dev.kappa_f, 1.5e-9);

    const MatrixXcd n = excitation_op(lay);
    for (double frac : {0.3, 0.6}) {
        const double t = grid.t_start + frac * grid.span();
        MatrixXcd h = build_hamiltonian(t, dev, drv, lay);
        const double scale = h.cwiseAbs().maxCoeff();
        CHECK((h * n - n * h).cwiseAbs().maxCoeff() <= 1e-12 * scale);
    }
}

TEST_CASE("operator-role readings and sink conventions give different generators") {
    DeviceParams ideal = DeviceParams::ideal();
    HilbertLayout lay = HilbertLayout::capture(3);
    TimeGrid grid = padded_grid(0, ideal.kappa_f, 10e-9);
    ModeBasis basis = sech_basis(0, kKappa, grid);
    Drives drv{grid, {}, {}, {}};
    drv.source = source_coupling(basis[0], ideal.kappa_f);
    drv.receiver = receiver_coupling(basis[0], ideal.kappa_f, 2e-9);
    drv.sink = sink_coupling(basis[0], ideal.kappa_f, 6e-9);
    const double t = grid.t_start + 0.45 * grid.span();

    SimulationOptions printed;
    SimulationOptions prose;
    prose.roles = OperatorRoles::prose_labels;
    MatrixXcd h_printed = build_hamiltonian(t, ideal, drv, lay, printed);
    MatrixXcd h_prose = build_hamiltonian(t, ideal, drv, lay, prose);
    CHECK((h_printed - h_prose).cwiseAbs().maxCoeff() > 1e-6 * h_printed.cwiseAbs().maxCoeff());

    SimulationOptions printed_sink;
    printed_sink.sink = SinkConvention::printed;
    MatrixXcd h_sink = build_hamiltonian(t, ideal, drv, lay, printed_sink);
    CHECK((h_printed - h_sink).cwiseAbs().maxCoeff() > 1e-6 * h_printed.cwiseAbs().maxCoeff());
}

TEST_CASE("drive wiring is validated") {
    DeviceParams ideal = DeviceParams::ideal();
    HilbertLayout lay = HilbertLayout::absorption(3);
    TimeGrid grid = padded_grid(0, ideal.kappa_f, 0.0);
    TimeGrid other(grid.t_start, grid.dt, grid.n_points - 7);
    ModeBasis basis = sech_basis(0, kKappa, grid);
    ModeBasis obasis = sech_basis(0, kKappa, other);
    DensityMatrix rho0 = vacuum_state(lay);

    Drives off_grid{grid, {}, {}, {}};
    off_grid.source = source_coupling(obasis[0], ideal.kappa_f);
    CHECK_THROWS_AS(evolve(rho0, ideal, off_grid, {}), ConfigError);

    Drives wrong_role{grid, {}, {}, {}};
    wrong_role.source = receiver_coupling(basis[0], ideal.kappa_f, 0.0);
    CHECK_THROWS_AS(evolve(rho0, ideal, wrong_role, {}), ConfigError);

    Drives wrong_kf{grid, {}, {}, {}};
    wrong_kf.source = source_coupling(basis[0], 0.5 * ideal.kappa_f);
    CHECK_THROWS_AS(evolve(rho0, ideal, wrong_kf, {}), ConfigError);

    Drives needs_transmon{grid, {}, {}, {}};
    needs_transmon.receiver = receiver_coupling(basis[0], ideal.kappa_f, 0.0);
    DensityMatrix base0 = vacuum_state(HilbertLayout::baseline(3));
    CHECK_THROWS_AS(evolve(base0, ideal, needs_transmon, {}), ConfigError);

    SimulationOptions prose_restricted;
    prose_restricted.roles = OperatorRoles::prose_labels;
    Drives none{grid, {}, {}, {}};
    CHECK_THROWS_AS(evolve(rho0, ideal, none, prose_restricted), ConfigError);
}

// ---- evolution basics ----

TEST_CASE("vacuum with no drives is stationary") {
    DeviceParams ideal = DeviceParams::ideal();
    HilbertLayout lay = HilbertLayout::absorption(3);
    TimeGrid grid = padded_grid(0, ideal.kappa_f, 0.0);
    Drives none{grid, {}, {}, {}};
    SimulationRecord rec = evolve(vacuum_state(lay), ideal, none, {});
    CHECK(rec.i_out.cwiseAbs().maxCoeff() < 1e-14);
    CHECK(rec.energy_out < 1e-12);
    CHECK(rec.trace_drift < 1e-12);
    CHECK(std::abs(rec.final_state.rho(0, 0).real() - 1.0) < 1e-12);
    CHECK(rec.final_state.rho.cwiseAbs().sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("single-photon release: energy, coherence modes and round trip") {
    DeviceParams ideal = DeviceParams::ideal();
    HilbertLayout lay = HilbertLayout::absorption(3);
    TimeGrid grid = padded_grid(0, ideal.kappa_f, 0.0);
    ModeBasis basis = sech_basis(0, kKappa, grid);
    Drives drv{grid, {}, {}, {}};
    drv.source = source_coupling(basis[0], ideal.kappa_f);
    SimulationOptions opts;
    opts.record_g1 = true;
    opts.record_stride = 8;
    SimulationRecord rec = evolve(source_qubit_state(lay, 0.0, 1.0), ideal, drv, opts);

    // released energy within 1e-3 of one photon; trace preserved within 1e-6
    CHECK(rec.energy_out == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(std::abs(rec.energy_out - 1.0) < 1e-4);
    CHECK(rec.trace_drift < 1e-6);
    CHECK(rec.min_eigenvalue >= -1e-8);
    CHECK(rec.excitation_leaked == 0.0);

    // energy budget: emitted + retained = initial photon
    const int last = static_cast<int>(rec.i_out.size()) - 1;
    double retained = 0.0;
    for (int p = 0; p < static_cast<int>(rec.population_labels.size()); ++p)
        if (rec.population_labels[p] != "transmon_g")
            retained += rec.populations(last, p);
    CHECK(rec.energy_out + retained == doctest::Approx(1.0).epsilon(1e-3));

    // dominant coherence mode carries the photon: n0 = 1 within 1e-3
    CoherenceModes cm = first_order_coherence(rec);
    CHECK(cm.occupancies[0] == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(cm.occupancies[1] <= 1e-3);
    CHECK_FALSE(cm.leading_degenerate);
    // trace identity: sum of occupancies = integrated flux within 1e-3
    CHECK(cm.occupancies.sum() == doctest::Approx(rec.energy_out).epsilon(1e-3));

    // the output waveform is the mode function delayed by the filter; the
    // best-shift overlap must come back above 1 - 1e-4
    double best = 0.0;
    for (double shift = 0.0; shift <= 8e-9; shift += 0.05e-9)
        best = std::max(best,
                        overlap_with_shifted(cm.grid, VectorXcd(cm.modes[0]), basis[0], shift));
    CHECK(best >= 1.0 - 1e-4);

    // with the receiver off, the rejected waveform is the emitted waveform
    SampledWaveform rej = rejected_waveform(rec);
    CHECK(rej.energy() == doctest::Approx(rec.energy_out).epsilon(1e-3));
}

TEST_CASE("restriction to the single-quantum span is exact, as is the Fock cutoff") {
    DeviceParams ideal = DeviceParams::ideal();
    HilbertLayout lay = HilbertLayout::absorption(3);
    TimeGrid grid = padded_grid(0, ideal.kappa_f, 0.0);
    ModeBasis basis = sech_basis(0, kKappa, grid);
    Drives drv{grid, {}, {}, {}};
    drv.source = source_coupling(basis[0], ideal.kappa_f);
    drv.receiver = receiver_coupling(basis[0], ideal.kappa_f, 1.5e-9);
    DensityMatrix rho0 = source_qubit_state(lay, 0.6, 0.8);

    SimulationOptions restricted;
    SimulationOptions full;
    full.restrict_single_excitation = false;
    SimulationRecord a = evolve(rho0, ideal, drv, restricted);
    SimulationRecord b = evolve(rho0, ideal, drv, full);
    CHECK(std::abs(a.energy_out - b.energy_out) < 1e-9);
    CHECK((a.final_state.rho - b.final_state.rho).cwiseAbs().maxCoeff() < 1e-9);

    SimulationOptions deeper = full;
    deeper.n_fock = 4;
    HilbertLayout lay4 = HilbertLayout::absorption(4);
    SimulationRecord c = evolve(source_qubit_state(lay4, 0.6, 0.8), ideal, drv, deeper);
    CHECK(std::abs(a.energy_out - c.energy_out) < 1e-9);
}

// ---- absorption ----

TEST_CASE("matched ideal absorption exceeds 0.99 and tracks the overlap prediction") {
    DeviceParams ideal = DeviceParams::ideal();
    AbsorptionRun run = simulate_absorption(0, 0, 1.5e-9, kKappa, ideal, {});
    CHECK(run.efficiency >= 0.99);
    CHECK(run.residual.energy_out <= 0.01);  // residual flux of the matched case
    CHECK(std::abs(run.efficiency - run.predicted_sq_overlap) <= 0.02);
    CHECK(run.baseline.energy_out == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("mismatched and far-detuned drives absorb almost nothing") {
    DeviceParams ideal = DeviceParams::ideal();
    AbsorptionRun run01 = simulate_absorption(0, 1, 1.5e-9, kKappa, ideal, {});
    CHECK(std::abs(run01.efficiency) <= 0.02);
    CHECK(std::abs(run01.efficiency - run01.predicted_sq_overlap) <= 0.02);

    // delay far beyond the pulse width: no temporal overlap left
    AbsorptionRun far = simulate_absorption(0, 0, 2.5e-6, kKappa, ideal, {});
    CHECK(std::abs(far.efficiency) <= 0.02);
}

TEST_CASE("delay sweep is unimodal around a few nanoseconds") {
    DeviceParams ideal = DeviceParams::ideal();
    std::vector<double> taus;
    for (double t = 0.0; t <= 6e-9; t += 0.5e-9) taus.push_back(t);
    DelayScan scan = sweep_delay(0, 0, taus, kKappa, ideal, {});
    CHECK(scan.best_efficiency >= 0.99);
    CHECK(scan.tau_opt > 0.0);
    CHECK(scan.tau_opt < 4e-9);
    // single maximum: efficiencies rise then fall
    int direction_changes = 0;
    for (size_t i = 2; i < scan.points.size(); ++i) {
        const double d1 = scan.points[i - 1].efficiency - scan.points[i - 2].efficiency;
        const double d2 = scan.points[i].efficiency - scan.points[i - 1].efficiency;
        if (d1 > 0 && d2 < 0) ++direction_changes;
    }
    CHECK(direction_changes == 1);
    // prediction peaks at zero delay for the symmetric mode
    CHECK(scan.tau_opt_predicted == doctest::Approx(0.0));
}

TEST_CASE("optimal delay shifts earlier when the truncation floor rises") {
    DeviceParams ideal = DeviceParams::ideal();
    TimeGrid grid = padded_grid(0, ideal.kappa_f, 10e-9);
    ModeBasis basis = sech_basis(0, kKappa, grid);
    HilbertLayout lay = HilbertLayout::absorption(3);
    DensityMatrix rho0 = source_qubit_state(lay, 0.0, 1.0);

    auto tau_opt_for_floor = [&](double floor) {
        Drives bare{grid, {}, {}, {}};
        bare.source = source_coupling(basis[0], ideal.kappa_f, floor);
        SimulationRecord base = evolve(rho0, ideal, bare, {});
        double best = -1.0, arg = 0.0;
        for (double tau = 1.0e-9; tau <= 2.0e-9; tau += 0.1e-9) {
            Drives drv = bare;
            drv.receiver = receiver_coupling(basis[0], ideal.kappa_f, tau);
            const double r = absorption_efficiency(evolve(rho0, ideal, drv, {}), base);
            if (r > best) {
                best = r;
                arg = tau;
            }
        }
        return arg;
    };
    const double sharp = tau_opt_for_floor(1e-6);
    const double blunt = tau_opt_for_floor(1e-3);
    CHECK(sharp == doctest::Approx(1.5e-9).epsilon(0.1));
    CHECK(blunt < sharp - 0.05e-9);
}

TEST_CASE("efficiency is invariant under a global mode phase") {
    DeviceParams ideal = DeviceParams::ideal();
    TimeGrid grid = padded_grid(0, ideal.kappa_f, 5e-9);
    ModeBasis basis = sech_basis(0, kKappa, grid);
    HilbertLayout lay = HilbertLayout::absorption(3);
    DensityMatrix rho0 = source_qubit_state(lay, 0.0, 1.0);

    const Complex phase = std::exp(Complex(0.0, pi / 3.0));
    SampledWaveform rotated(grid, VectorXcd(phase * basis[0].samples),
                            WaveformKind::mode_function);

    auto run = [&](const SampledWaveform& mode) {
        Drives bare{grid, {}, {}, {}};
        bare.source = source_coupling(mode, ideal.kappa_f);
        Drives drv = bare;
        drv.receiver = receiver_coupling(mode, ideal.kappa_f, 1.5e-9);
        return absorption_efficiency(evolve(rho0, ideal, drv, {}), evolve(rho0, ideal, bare, {}));
    };
    CHECK(std::abs(run(basis[0]) - run(rotated)) < 1e-9);
}

TEST_CASE("halving the step leaves the efficiency unchanged to 1e-4") {
    DeviceParams ideal = DeviceParams::ideal();
    SimulationOptions fine;
    fine.substeps = 4;
    AbsorptionRun coarse = simulate_absorption(0, 0, 1.5e-9, kKappa, ideal, {});
    AbsorptionRun halved = simulate_absorption(0, 0, 1.5e-9, kKappa, ideal, fine);
    CHECK(std::abs(coarse.efficiency - halved.efficiency) < 1e-4);
}

TEST_CASE("efficiency bookkeeping rejects mismatched records") {
    DeviceParams ideal = DeviceParams::ideal();
    TimeGrid grid = padded_grid(0, ideal.kappa_f, 0.0);
    ModeBasis basis = sech_basis(0, kKappa, grid);
    HilbertLayout lay = HilbertLayout::absorption(3);
    DensityMatrix rho0 = source_qubit_state(lay, 0.0, 1.0);

    Drives a{grid, {}, {}, {}};
    a.source = source_coupling(basis[0], ideal.kappa_f);
    Drives b{grid, {}, {}, {}};
    b.source = source_coupling(basis[0], ideal.kappa_f, 1e-4);  // different truncation
    SimulationRecord ra = evolve(rho0, ideal, a, {});
    SimulationRecord rb = evolve(rho0, ideal, b, {});
    CHECK_THROWS_AS(absorption_efficiency(ra, rb), ConfigError);

    // no source at all: baseline energy is undefined
    Drives none{grid, {}, {}, {}};
    SimulationRecord rn = evolve(rho0, ideal, none, {});
    CHECK_THROWS_AS(absorption_efficiency(rn, rn), NumericalError);
}

// ---- decoherent transfer ----

TEST_CASE("measured-device decoherence and loss close the energy budget") {
    DeviceParams dev = DeviceParams::receiver_chip();
    dev.loss = 0.33;
    AbsorptionRun run = simulate_absorption(0, 0, 1.5e-9, kKappa, dev, {});
    const SimulationRecord& r = run.residual;
    const int last = static_cast<int>(r.i_out.size()) - 1;
    double retained = 0.0;
    for (int p = 0; p < static_cast<int>(r.population_labels.size()); ++p)
        if (r.population_labels[p] != "transmon_g")
            retained += r.populations(last, p);
    CHECK(r.energy_out + r.excitation_leaked + retained == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(r.excitation_leaked > 0.3);  // the beam-splitter loss dominates
    CHECK(run.efficiency > 0.9);       // loss cancels in the ratio
}

// ---- rejected-photon structure ----

TEST_CASE("rejected mode-0 photon keeps its shape and occupancy against a mode-3 drive") {
    DeviceParams ideal = DeviceParams::ideal();
    SimulationOptions opts;
    opts.record_g1 = true;
    opts.record_stride = 8;
    AbsorptionRun run = simulate_absorption(0, 3, 4e-9, kKappa, ideal, opts);
    CoherenceModes cm = first_order_coherence(run.residual);

    CHECK(cm.occupancies[0] == doctest::Approx(1.000).epsilon(0.005));
    CHECK(cm.occupancies.sum() == doctest::Approx(run.residual.energy_out).epsilon(1e-3));

    // the rejected waveform still looks like the emitted mode
    SampledWaveform rej = rejected_waveform(run.residual);
    TimeGrid grid = run.residual.grid;
    ModeBasis basis = sech_basis(0, kKappa, grid);
    double best = 0.0;
    for (double shift = 0.0; shift <= 8e-9; shift += 0.1e-9) {
        double num = overlap_with_shifted(cm.grid, VectorXcd(cm.modes[0]), basis[0], shift);
        best = std::max(best, num);
    }
    CHECK(best >= 0.95);
}

// ---- downstream capture ----

TEST_CASE("rejected photon is captured with high state fidelity for (0,3)") {
    DeviceParams ideal = DeviceParams::ideal();
    const double tau_r = 4e-9, tau_s = 8e-9;
    const double phase = capture_frame_phase(kKappa, ideal, tau_r, tau_s, {});
    CHECK(std::abs(phase) < 0.05);  // cascaded convention: no spurious frame phase

    const double inv = 1.0 / std::sqrt(2.0);
    const Complex i1(0.0, 1.0);
    struct Case {
        Complex cg, ce;
    };
    for (const Case& c : {Case{1.0, 0.0}, Case{0.0, 1.0}, Case{inv, -inv}, Case{inv, i1 * inv}}) {
        CaptureResult r =
            capture_fidelity(0, 3, c.cg, c.ce, kKappa, ideal, tau_r, tau_s, {}, phase);
        CHECK(r.fidelity >= 0.99);
    }
}

TEST_CASE("capture degrades for (3,0) but keeps the coherence phase deterministic") {
    DeviceParams ideal = DeviceParams::ideal();
    const double inv = 1.0 / std::sqrt(2.0);
    CaptureResult good = capture_fidelity(0, 3, 0.0, 1.0, kKappa, ideal, 4e-9, 8e-9, {}, 0.0);
    CaptureResult poor = capture_fidelity(3, 0, 0.0, 1.0, kKappa, ideal, 4e-9, 0.0, {}, 0.0);
    CHECK(good.fidelity > 0.99);
    CHECK(poor.fidelity < 0.5);            // markedly lower for m > n
    CHECK(good.fidelity > poor.fidelity);  // higher for m < n

    CaptureResult bal = capture_fidelity(3, 0, inv, inv, kKappa, ideal, 4e-9, 0.0, {}, 0.0);
    CHECK(std::abs(bal.sink_state.rho(1, 0)) > 0.1);  // coherence survives
    CHECK(std::abs(std::abs(std::arg(bal.sink_state.rho(1, 0))) - pi) < 0.05);

    // vacuum input passes through any configuration untouched
    CaptureResult vac = capture_fidelity(3, 0, 1.0, 0.0, kKappa, ideal, 4e-9, 0.0, {}, 0.0);
    CHECK(vac.fidelity >= 0.999);
}

TEST_CASE("the printed sink sign fails to capture, the cascaded one succeeds") {
    DeviceParams ideal = DeviceParams::ideal();
    SimulationOptions printed;
    printed.sink = SinkConvention::printed;
    CaptureResult casc = capture_fidelity(0, 3, 0.0, 1.0, kKappa, ideal, 4e-9, 8e-9, {}, 0.0);
    CaptureResult prnt =
        capture_fidelity(0, 3, 0.0, 1.0, kKappa, ideal, 4e-9, 8e-9, printed, 0.0);
    CHECK(casc.sink_population > 0.99);
    CHECK(prnt.sink_population < 0.6);
}
