#include "dnaxbar/crossbar.hpp"
#include "dnaxbar/parallel.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>

namespace dnaxbar {

namespace {

using Sparse = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;
using Factorization = Eigen::SimplicialLDLT<Sparse, Eigen::Lower, Eigen::AMDOrdering<int>>;

Eigen::Index value_index(const Sparse& a, Eigen::Index row, Eigen::Index col) {
    const auto* inner = a.innerIndexPtr();
    const auto begin = a.outerIndexPtr()[col];
    const auto end = a.outerIndexPtr()[col + 1];
    const auto* it = std::lower_bound(inner + begin, inner + end, static_cast<int>(row));
    if (it == inner + end || *it != row) throw NumericalError("crossbar network: missing matrix entry");
    return it - inner;
}

// Conjugate gradients preconditioned by a factorization of a nearby matrix.
// Returns the iteration count, or -1 if the tolerance was not reached.
int preconditioned_cg(const Sparse& a, const Factorization& pre, const Eigen::VectorXd& rhs, Eigen::VectorXd& x,
                      double rel_tol, int max_iterations) {
    Eigen::VectorXd r = rhs - a * x;
    const double stop = rel_tol * rhs.norm();
    if (r.norm() <= stop) return 0;
    Eigen::VectorXd z = pre.solve(r);
    Eigen::VectorXd p = z;
    double rz = r.dot(z);
    for (int it = 1; it <= max_iterations; ++it) {
        const Eigen::VectorXd ap = a * p;
        const double step = rz / p.dot(ap);
        x += step * p;
        r -= step * ap;
        if (r.norm() <= stop) return it;
        z = pre.solve(r);
        const double rz_next = r.dot(z);
        p = z + (rz_next / rz) * p;
        rz = rz_next;
    }
    return -1;
}

// Picard steps solve by CG preconditioned with the last factorization and
// refactorize only when CG stalls.
constexpr int kCgLimit = 25;
constexpr int kRowChunk = 16;
constexpr double kCgTolerance = 1e-14;

}  // namespace

CrossbarNetwork::CrossbarNetwork(int m, int n, double r_int) : m_(m), n_(n), g_int_(1.0 / r_int) {
    if (m < 1 || n < 1) throw InputError("crossbar network: m and n must be at least 1");
    if (!(r_int > 0.0) || !std::isfinite(r_int)) throw InputError("crossbar network: r_int must be positive");
    const Eigen::Index size = this->size();
    base_diag_ = Eigen::VectorXd::Zero(size);
    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(size) * 5);
    auto edge = [&](Eigen::Index p, Eigen::Index q, double g) {
        trip.emplace_back(p, q, -g);
        trip.emplace_back(q, p, -g);
        base_diag_[p] += g;
        base_diag_[q] += g;
    };
    for (int i = 0; i < m; ++i)
        for (int j = 0; j + 1 < n; ++j) edge(w(i, j), w(i, j + 1), g_int_);
    for (int i = 0; i + 1 < m; ++i)
        for (int j = 0; j < n; ++j) edge(b(i, j), b(i + 1, j), g_int_);
    for (int j = 0; j < n; ++j) base_diag_[b(m - 1, j)] += g_int_;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            trip.emplace_back(w(i, j), b(i, j), 0.0);
            trip.emplace_back(b(i, j), w(i, j), 0.0);
        }
    for (Eigen::Index k = 0; k < size; ++k) trip.emplace_back(k, k, 0.0);

    a_.resize(size, size);
    a_.setFromTriplets(trip.begin(), trip.end());
    a_.makeCompressed();

    diag_pos_.resize(static_cast<std::size_t>(size));
    for (Eigen::Index k = 0; k < size; ++k) diag_pos_[static_cast<std::size_t>(k)] = value_index(a_, k, k);
    cell_pos_wb_.resize(static_cast<std::size_t>(m) * n);
    cell_pos_bw_.resize(static_cast<std::size_t>(m) * n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            const auto c = static_cast<std::size_t>(w(i, j));
            cell_pos_wb_[c] = value_index(a_, w(i, j), b(i, j));
            cell_pos_bw_[c] = value_index(a_, b(i, j), w(i, j));
        }
    g_cell_ = Matrix::Zero(m, n);
}

void CrossbarNetwork::assemble(const Matrix& g_cell, int active_row) {
    if (g_cell.rows() != m_ || g_cell.cols() != n_) throw InputError("crossbar network: conductance shape mismatch");
    if (active_row < -1 || active_row >= m_) throw InputError("crossbar network: active row out of range");
    g_cell_ = g_cell;
    active_ = active_row;
    double* val = a_.valuePtr();
    for (Eigen::Index k = 0; k < size(); ++k) val[diag_pos_[static_cast<std::size_t>(k)]] = base_diag_[k];
    for (int i = 0; i < m_; ++i)
        for (int j = 0; j < n_; ++j) {
            const double g = g_cell(i, j);
            const auto c = static_cast<std::size_t>(w(i, j));
            val[cell_pos_wb_[c]] = -g;
            val[cell_pos_bw_[c]] = -g;
            val[diag_pos_[static_cast<std::size_t>(w(i, j))]] += g;
            val[diag_pos_[static_cast<std::size_t>(b(i, j))]] += g;
        }
    if (active_ >= 0) val[diag_pos_[static_cast<std::size_t>(w(active_, 0))]] += g_int_;
}

Eigen::VectorXd CrossbarNetwork::rhs(double v_in) const {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(size());
    if (active_ >= 0) r[w(active_, 0)] = g_int_ * v_in;
    return r;
}

Matrix CrossbarNetwork::cell_voltages(const Eigen::VectorXd& x) const {
    Matrix v(m_, n_);
    for (int i = 0; i < m_; ++i)
        for (int j = 0; j < n_; ++j) v(i, j) = x[w(i, j)] - x[b(i, j)];
    return v;
}

Eigen::VectorXd CrossbarNetwork::column_currents(const Eigen::VectorXd& x) const {
    Eigen::VectorXd c(n_);
    for (int j = 0; j < n_; ++j) c[j] = g_int_ * x[b(m_ - 1, j)];
    return c;
}

RowBalance CrossbarNetwork::balance(const Eigen::VectorXd& x, double v_in) const {
    RowBalance r;
    // Residual from the element list, independent of the assembled matrix.
    Eigen::VectorXd net = Eigen::VectorXd::Zero(size());
    auto flow = [&](Eigen::Index p, Eigen::Index q, double g) {
        const double dv = x[p] - x[q];
        net[p] -= g * dv;
        net[q] += g * dv;
        r.dissipation += g * dv * dv;
    };
    for (int i = 0; i < m_; ++i)
        for (int j = 0; j + 1 < n_; ++j) flow(w(i, j), w(i, j + 1), g_int_);
    for (int i = 0; i + 1 < m_; ++i)
        for (int j = 0; j < n_; ++j) flow(b(i, j), b(i + 1, j), g_int_);
    for (int i = 0; i < m_; ++i)
        for (int j = 0; j < n_; ++j) flow(w(i, j), b(i, j), g_cell_(i, j));
    for (int j = 0; j < n_; ++j) {
        const double vb = x[b(m_ - 1, j)];
        net[b(m_ - 1, j)] -= g_int_ * vb;
        r.ground_current += g_int_ * vb;
        r.dissipation += g_int_ * vb * vb;
    }
    if (active_ >= 0) {
        const double dv = v_in - x[w(active_, 0)];
        r.source_current = g_int_ * dv;
        net[w(active_, 0)] += r.source_current;
        r.dissipation += g_int_ * dv * dv;
    }
    r.max_kcl_residual = net.cwiseAbs().maxCoeff();
    return r;
}

ReadoutSolution kirchhoff_solve(const CrossbarSpec& spec, const SolverOptions& options) {
    spec.validate();
    const int m = spec.m, n = spec.n;
    const CrossbarNetwork base(m, n, spec.r_int_ohm);

    ReadoutSolution sol;
    sol.solver = SolverKind::Kirchhoff;
    sol.v_cell = Matrix::Zero(m, n);
    sol.i_out = Matrix::Zero(m, n);
    sol.source_current = Eigen::VectorXd::Zero(m);
    sol.balance.assign(static_cast<std::size_t>(m), RowBalance{});
    std::vector<int> iterations(static_cast<std::size_t>(m), 0);
    std::vector<double> residuals(static_cast<std::size_t>(m), 0.0);
    std::vector<char> converged(static_cast<std::size_t>(m), 0);

    // Rows are solved in fixed chunks so results do not depend on the thread
    // count. Inside a chunk each row starts from its predecessor's solution
    // and reuses its factorization as the CG preconditioner.
    const int chunks = (m + kRowChunk - 1) / kRowChunk;
    parallel_for(static_cast<std::size_t>(chunks), resolve_threads(options.threads), [&](std::size_t chunk) {
        CrossbarNetwork net = base;
        Factorization solver;
        bool analyzed = false, factored = false;
        Matrix v = Matrix::Constant(m, n, options.v_start);
        Matrix g(m, n);
        Eigen::VectorXd x;
        Matrix v_new;
        const int first = static_cast<int>(chunk) * kRowChunk;
        for (int a = first; a < std::min(m, first + kRowChunk); ++a) {
            const auto row = static_cast<std::size_t>(a);
            if (a > first) {
                // The previous active row becomes floating and vice versa.
                v = v_new;
                v.row(a).swap(v.row(a - 1));
            }
            double prev_res = std::numeric_limits<double>::infinity();
            bool relaxed = false;
            for (int it = 1; it <= options.max_iterations; ++it) {
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j)
                        g(i, j) = cell_conductance(spec.table(i, j), v(i, j), spec.delta_at(i, j), options.v_floor);
                net.assemble(g, a);
                if (!analyzed) {
                    solver.analyzePattern(net.matrix());
                    analyzed = true;
                }
                const Eigen::VectorXd rhs = net.rhs(spec.v_in);
                bool solved = false;
                if (factored) {
                    Eigen::VectorXd guess = x;
                    if (preconditioned_cg(net.matrix(), solver, rhs, guess, kCgTolerance, kCgLimit) >= 0) {
                        x = std::move(guess);
                        solved = true;
                    }
                }
                if (!solved) {
                    solver.factorize(net.matrix());
                    if (solver.info() != Eigen::Success) throw NumericalError("kirchhoff_solve: factorization failed");
                    factored = true;
                    x = solver.solve(rhs);
                }
                if (!x.allFinite()) throw NumericalError("kirchhoff_solve: non-finite node voltages");
                v_new = net.cell_voltages(x);
                const double res = (v_new - v).cwiseAbs().maxCoeff();
                iterations[row] = it;
                residuals[row] = res;
                if (res <= options.tolerance) {
                    converged[row] = 1;
                    break;
                }
                if (res > prev_res) relaxed = true;
                prev_res = res;
                v = relaxed ? Matrix(v + options.relaxation * (v_new - v)) : v_new;
            }
            sol.v_cell.row(a) = v_new.row(a);
            sol.i_out.row(a) = net.column_currents(x).transpose();
            sol.balance[row] = net.balance(x, spec.v_in);
            sol.source_current[a] = sol.balance[row].source_current;
        }
    });

    sol.params.alpha = sol.v_cell.col(0) / spec.v_in;
    sol.params.beta = Eigen::VectorXd::Ones(n);
    sol.v_normalized = normalized_voltages(sol.v_cell, sol.params, spec);
    sol.power_w = compute_power(spec, sol.source_current);
    sol.iterations = *std::max_element(iterations.begin(), iterations.end());
    sol.residual = *std::max_element(residuals.begin(), residuals.end());
    sol.converged = std::all_of(converged.begin(), converged.end(), [](char c) { return c != 0; });
    return sol;
}

}  // namespace dnaxbar
