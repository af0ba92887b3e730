#pragma once

#include "dnaxbar/common.hpp"
#include "dnaxbar/iv_table.hpp"

#include <Eigen/SparseCore>

#include <memory>
#include <string>
#include <vector>

namespace dnaxbar {

struct CrossbarSpec {
    int m = 1;
    int n = 1;
    double r_int_ohm = 1e4;
    double v_in = 1.0;
    BitMatrix bits;  // m x n, 1 selects pair->logic1
    Matrix delta;    // m x n Fermi offsets in eV; empty means all zero
    std::shared_ptr<const StrandPair> pair;

    double delta_at(int i, int j) const { return delta.size() == 0 ? 0.0 : delta(i, j); }
    const IVTable& table(int i, int j) const { return pair->table_for(bits(i, j) != 0); }

    // Dimensions, positivity, bit values, and delta within both tables' ranges.
    void validate() const;
};

// Homogeneous spec: every cell stores `bit`.
CrossbarSpec homogeneous_spec(int m, int n, double r_int, std::shared_ptr<const StrandPair> pair, bool bit,
                              double v_in = 1.0);

struct SneakParams {
    Eigen::VectorXd alpha;  // per row
    Eigen::VectorXd beta;   // per column
};

enum class SolverKind { Parametric, Kirchhoff };

std::string to_string(SolverKind kind);
SolverKind parse_solver_kind(const std::string& text);

struct SolverOptions {
    double v_start = 0.05;    // V, initial linearization point
    double tolerance = 1e-6;  // V, max |dV| between iterations
    int max_iterations = 200;
    double relaxation = 0.7;  // applied once the residual grows
    double v_floor = kDefaultVFloor;
    int threads = 0;
};

// Per active row diagnostics from the nodal solve.
struct RowBalance {
    double source_current = 0.0;  // A, drawn from V_in
    double ground_current = 0.0;  // A, summed over grounded columns
    double max_kcl_residual = 0.0;  // A, worst node
    double dissipation = 0.0;       // W, summed over every resistor and cell
};

struct ReadoutSolution {
    SolverKind solver = SolverKind::Parametric;
    Matrix v_cell;        // V_ij with row i active
    Matrix i_out;         // A, current out of column j with row i active
    Matrix v_normalized;  // V_ij / (V_in alpha_i)
    SneakParams params;
    Eigen::VectorXd source_current;  // A, per active row
    double power_w = 0.0;
    int iterations = 0;  // worst row
    bool converged = false;
    double residual = 0.0;          // V, worst row
    std::vector<RowBalance> balance;  // Kirchhoff only
};

// Calibration conductances. Active-row cells use g_active and floating-row
// cells g_float; the defaults average the two strands at V_in and at v_floor.
struct CalibrationInputs {
    double g_active = 0.0;
    double g_float = 0.0;
};

CalibrationInputs default_calibration_inputs(const CrossbarSpec& spec, double v_floor = kDefaultVFloor);

// alpha_i and beta_j fitted to linear nodal solves of a homogeneous array,
// one solve per active row. Results are clamped to (0, 1] and cached.
SneakParams calibrate_sneak_params(const CrossbarSpec& spec, const CalibrationInputs& inputs, int threads = 0);
SneakParams calibrate_sneak_params(const CrossbarSpec& spec, double g_mean, int threads = 0);

// Row voltage fractions V_ij / (V_in alpha_i) for conductances g along one
// row with wordline segment resistance r:
//   F_j = (1 + r sum_{k>j} g_k (k - j)) / (1 + r sum_k g_k (k - 1)).
Eigen::VectorXd row_voltage_fraction(const Eigen::Ref<const Eigen::VectorXd>& g, double r);

ReadoutSolution parametric_solve(const CrossbarSpec& spec, const SneakParams& params, const SolverOptions& options = {});

// I_ij = beta_j I_DNA(V_ij, delta_ij).
Matrix readout_currents(const Matrix& v_cell, const SneakParams& params, const CrossbarSpec& spec);

Matrix normalized_voltages(const Matrix& v_cell, const SneakParams& params, const CrossbarSpec& spec);

ReadoutSolution kirchhoff_solve(const CrossbarSpec& spec, const SolverOptions& options = {});

// (1 / m) sum_i V_in I_source(i).
double compute_power(const CrossbarSpec& spec, const Eigen::VectorXd& source_current);

// Parametric path calibrates with the default inputs first.
ReadoutSolution solve(const CrossbarSpec& spec, SolverKind kind, const SolverOptions& options = {});

// Signed cell current and secant conductance; negative voltages mirror the table.
double cell_current(const IVTable& table, double v, double delta);
double cell_conductance(const IVTable& table, double v, double delta, double v_floor = kDefaultVFloor);

// Nodal network of the whole array with one row driven. Unknowns are the
// wordline nodes w(i, j) followed by the bitline nodes b(i, j).
class CrossbarNetwork {
public:
    CrossbarNetwork(int m, int n, double r_int);

    Eigen::Index size() const { return 2 * static_cast<Eigen::Index>(m_) * n_; }
    Eigen::Index w(int i, int j) const { return static_cast<Eigen::Index>(i) * n_ + j; }
    Eigen::Index b(int i, int j) const { return static_cast<Eigen::Index>(m_) * n_ + w(i, j); }

    // Writes cell conductances (m x n) and the active row (-1 for none) into the matrix.
    void assemble(const Matrix& g_cell, int active_row);

    const Eigen::SparseMatrix<double>& matrix() const { return a_; }
    Eigen::VectorXd rhs(double v_in) const;
    Matrix cell_voltages(const Eigen::VectorXd& x) const;
    Eigen::VectorXd column_currents(const Eigen::VectorXd& x) const;

    // KCL and energy accounting for a solution x of the assembled system.
    RowBalance balance(const Eigen::VectorXd& x, double v_in) const;

private:
    int m_, n_;
    double g_int_;
    int active_ = -1;
    Matrix g_cell_;
    Eigen::SparseMatrix<double> a_;
    std::vector<Eigen::Index> diag_pos_;                 // value index of each diagonal entry
    std::vector<Eigen::Index> cell_pos_wb_, cell_pos_bw_;  // value index of each cell's off-diagonal pair
    Eigen::VectorXd base_diag_;                          // interconnect and ground part of the diagonal
};

}  // namespace dnaxbar
