#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "tmm/errors.hpp"
#include "tmm/grid.hpp"

namespace tmm {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;

// Ordered tensor factors of the simulation space. Slot indices are -1 when a
// subsystem is absent from the layout.
//   baseline:   source(2) x resonator(n_fock)                  - emission only
//   absorption: source(2) x transmon(3) x resonator(n_fock)
//   capture:    source(2) x transmon(3) x resonator(n_fock) x sink(2)
struct HilbertLayout {
    std::vector<int> dims;
    int source = -1;
    int transmon = -1;
    int resonator = -1;
    int sink = -1;

    int dim() const;
    bool operator==(const HilbertLayout&) const = default;

    static HilbertLayout baseline(int n_fock = 3);
    static HilbertLayout absorption(int n_fock = 3);
    static HilbertLayout capture(int n_fock = 3);
};

// Truncated annihilation operator on d levels.
MatrixXcd lower(int d);

MatrixXcd kron(const MatrixXcd& a, const MatrixXcd& b);

// Lift a single-subsystem operator into the full space at the given slot.
MatrixXcd embed(const HilbertLayout& layout, int slot, const MatrixXcd& op);

// Number operator of one slot in the full space.
MatrixXcd number_op(const HilbertLayout& layout, int slot);

// Quanta bookkeeping operator: photon number in source, resonator and sink
// plus transmon level weight (|e> and |f> each hold one absorbed quantum).
// Every generator of the printed-equation model either commutes with it
// (diagonal terms, exchange terms, the normalized two-quanta drive) or lowers
// it (decay channels), so evolution never leaves its initial eigenspace span.
MatrixXcd excitation_op(const HilbertLayout& layout);

// Density operator with its layout. Validation enforces hermiticity within
// 1e-10, unit trace within 1e-8 and minimum eigenvalue >= -1e-8.
struct DensityMatrix {
    HilbertLayout layout;
    MatrixXcd rho;

    void validate() const;
    double min_eigenvalue() const;
    // Trace out every slot except `keep`.
    MatrixXcd reduced(int keep) const;
    double population(int slot, int level) const;
};

// All subsystems in their ground state.
DensityMatrix vacuum_state(const HilbertLayout& layout);

// Source-cavity qubit state cg|0> + ce|1>, everything else ground.
DensityMatrix source_qubit_state(const HilbertLayout& layout, Complex cg, Complex ce);

}  // namespace tmm
