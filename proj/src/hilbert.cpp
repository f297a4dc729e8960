#include "tmm/hilbert.hpp"

#include <cmath>

namespace tmm {

int HilbertLayout::dim() const {
    int d = 1;
    for (int x : dims) d *= x;
    return d;
}

static void check_n_fock(int n_fock) {
    if (n_fock < 2) throw ConfigError("HilbertLayout: n_fock must be >= 2");
}

HilbertLayout HilbertLayout::baseline(int n_fock) {
    check_n_fock(n_fock);
    HilbertLayout l;
    l.dims = {2, n_fock};
    l.source = 0;
    l.resonator = 1;
    return l;
}

HilbertLayout HilbertLayout::absorption(int n_fock) {
    check_n_fock(n_fock);
    HilbertLayout l;
    l.dims = {2, 3, n_fock};
    l.source = 0;
    l.transmon = 1;
    l.resonator = 2;
    return l;
}

HilbertLayout HilbertLayout::capture(int n_fock) {
    check_n_fock(n_fock);
    HilbertLayout l;
    l.dims = {2, 3, n_fock, 2};
    l.source = 0;
    l.transmon = 1;
    l.resonator = 2;
    l.sink = 3;
    return l;
}

MatrixXcd lower(int d) {
    MatrixXcd a = MatrixXcd::Zero(d, d);
    for (int n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
    return a;
}

MatrixXcd kron(const MatrixXcd& a, const MatrixXcd& b) {
    MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

MatrixXcd embed(const HilbertLayout& layout, int slot, const MatrixXcd& op) {
    if (slot < 0 || slot >= static_cast<int>(layout.dims.size()))
        throw ConfigError("embed: slot not present in layout");
    if (op.rows() != layout.dims[slot] || op.cols() != layout.dims[slot])
        throw ConfigError("embed: operator dimension does not match slot");
    MatrixXcd out = MatrixXcd::Identity(1, 1);
    for (int k = 0; k < static_cast<int>(layout.dims.size()); ++k) {
        out = kron(out, k == slot ? op : MatrixXcd::Identity(layout.dims[k], layout.dims[k]));
    }
    return out;
}

MatrixXcd number_op(const HilbertLayout& layout, int slot) {
    if (slot < 0 || slot >= static_cast<int>(layout.dims.size()))
        throw ConfigError("number_op: slot not present in layout");
    int d = layout.dims[slot];
    MatrixXcd n = MatrixXcd::Zero(d, d);
    for (int k = 0; k < d; ++k) n(k, k) = k;
    return embed(layout, slot, n);
}

MatrixXcd excitation_op(const HilbertLayout& layout) {
    MatrixXcd out = MatrixXcd::Zero(layout.dim(), layout.dim());
    if (layout.source >= 0) out += number_op(layout, layout.source);
    if (layout.resonator >= 0) out += number_op(layout, layout.resonator);
    if (layout.sink >= 0) out += number_op(layout, layout.sink);
    if (layout.transmon >= 0) {
        // |e> and |f> each hold one quantum (the two-quanta internal jump
        // g -> f happens while the resonator loses one photon).
        MatrixXcd w = MatrixXcd::Zero(3, 3);
        w(1, 1) = 1.0;
        w(2, 2) = 1.0;
        out += embed(layout, layout.transmon, w);
    }
    return out;
}

void DensityMatrix::validate() const {
    if (rho.rows() != layout.dim() || rho.cols() != layout.dim())
        throw ConfigError("DensityMatrix: entries do not match layout dimension");
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
        throw NumericalError("DensityMatrix: not Hermitian within 1e-10");
    if (std::abs(rho.trace().real() - 1.0) > 1e-8 || std::abs(rho.trace().imag()) > 1e-8)
        throw NumericalError("DensityMatrix: trace deviates from 1 by more than 1e-8");
    if (min_eigenvalue() < -1e-8)
        throw NumericalError("DensityMatrix: negative eigenvalue below -1e-8");
}

double DensityMatrix::min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(0.5 * (rho + rho.adjoint()),
                                                Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

MatrixXcd DensityMatrix::reduced(int keep) const {
    if (keep < 0 || keep >= static_cast<int>(layout.dims.size()))
        throw ConfigError("reduced: slot not present in layout");
    // dimensions left of, at, and right of the kept slot
    int dl = 1, dk = layout.dims[keep], dr = 1;
    for (int k = 0; k < keep; ++k) dl *= layout.dims[k];
    for (int k = keep + 1; k < static_cast<int>(layout.dims.size()); ++k) dr *= layout.dims[k];
    MatrixXcd out = MatrixXcd::Zero(dk, dk);
    for (int i = 0; i < dk; ++i)
        for (int j = 0; j < dk; ++j)
            for (int l = 0; l < dl; ++l)
                for (int r = 0; r < dr; ++r)
                    out(i, j) += rho((l * dk + i) * dr + r, (l * dk + j) * dr + r);
    return out;
}

double DensityMatrix::population(int slot, int level) const {
    MatrixXcd red = reduced(slot);
    if (level < 0 || level >= red.rows()) throw ConfigError("population: level out of range");
    return red(level, level).real();
}

DensityMatrix vacuum_state(const HilbertLayout& layout) {
    int d = layout.dim();
    MatrixXcd rho = MatrixXcd::Zero(d, d);
    rho(0, 0) = 1.0;
    return {layout, std::move(rho)};
}

DensityMatrix source_qubit_state(const HilbertLayout& layout, Complex cg, Complex ce) {
    if (layout.source != 0)
        throw ConfigError("source_qubit_state: layout must lead with the source cavity");
    double n2 = std::norm(cg) + std::norm(ce);
    if (std::abs(n2 - 1.0) > 1e-10)
        throw ConfigError("source_qubit_state: amplitudes must be normalized");
    int d = layout.dim();
    int rest = d / 2;  // source is the leftmost factor
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(d);
    psi[0] = cg;
    psi[rest] = ce;  // |1>_source (x) ground of the rest
    MatrixXcd rho = psi * psi.adjoint();
    return {layout, std::move(rho)};
}

}  // namespace tmm
