#include "dnaxbar/crossbar.hpp"
#include "dnaxbar/parallel.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <tuple>

namespace dnaxbar {

namespace {

double clamp_unit(double x) {
    constexpr double tiny = 1e-12;
    return std::min(1.0, std::max(tiny, x));
}

void check_delta_range(const IVTable& t, double d, int i, int j) {
    if (!(d >= t.delta_min() && d <= t.delta_max())) {
        std::ostringstream os;
        os << "crossbar spec: delta(" << i << ", " << j << ") = " << d << " eV outside table '" << t.strand_id
           << "' range [" << t.delta_min() << ", " << t.delta_max() << "]";
        throw InputError(os.str());
    }
}

using CalibrationKey = std::tuple<int, int, double, double, double, double>;

std::mutex& cache_mutex() {
    static std::mutex mu;
    return mu;
}

std::map<CalibrationKey, SneakParams>& cache() {
    static std::map<CalibrationKey, SneakParams> c;
    return c;
}

}  // namespace

void CrossbarSpec::validate() const {
    if (m < 1 || n < 1) throw InputError("crossbar spec: m and n must be at least 1");
    if (!(r_int_ohm > 0.0) || !std::isfinite(r_int_ohm)) throw InputError("crossbar spec: r_int must be positive");
    if (!(v_in > 0.0) || !std::isfinite(v_in)) throw InputError("crossbar spec: v_in must be positive");
    if (!pair) throw InputError("crossbar spec: no strand pair attached");
    pair->validate();
    if (bits.rows() != m || bits.cols() != n) throw InputError("crossbar spec: bits must be m x n");
    for (Eigen::Index k = 0; k < bits.size(); ++k)
        if (bits.data()[k] > 1) throw InputError("crossbar spec: bits must be 0 or 1");
    if (v_in > pair->logic1.v_max() || v_in > pair->logic0.v_max())
        throw InputError("crossbar spec: v_in exceeds the tables' bias range");
    if (delta.size() != 0) {
        if (delta.rows() != m || delta.cols() != n) throw InputError("crossbar spec: delta must be m x n");
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
                if (!std::isfinite(delta(i, j))) throw InputError("crossbar spec: non-finite delta");
                check_delta_range(table(i, j), delta(i, j), i, j);
            }
    } else {
        check_delta_range(pair->logic1, 0.0, 0, 0);
        check_delta_range(pair->logic0, 0.0, 0, 0);
    }
}

CrossbarSpec homogeneous_spec(int m, int n, double r_int, std::shared_ptr<const StrandPair> pair, bool bit,
                              double v_in) {
    CrossbarSpec s;
    s.m = m;
    s.n = n;
    s.r_int_ohm = r_int;
    s.v_in = v_in;
    s.bits = BitMatrix::Constant(m, n, bit ? 1 : 0);
    s.pair = std::move(pair);
    return s;
}

std::string to_string(SolverKind kind) { return kind == SolverKind::Parametric ? "parametric" : "kirchhoff"; }

SolverKind parse_solver_kind(const std::string& text) {
    if (text == "parametric") return SolverKind::Parametric;
    if (text == "kirchhoff") return SolverKind::Kirchhoff;
    throw InputError("unknown solver '" + text + "' (expected parametric or kirchhoff)");
}

double cell_current(const IVTable& table, double v, double delta) {
    if (v < 0.0 && v < table.v_min()) return -interpolate_current(table, -v, delta);
    return interpolate_current(table, v, delta);
}

double cell_conductance(const IVTable& table, double v, double delta, double v_floor) {
    if (v < 0.0 && v < table.v_min()) v = -v;
    return small_signal_conductance(table, v, delta, v_floor);
}

CalibrationInputs default_calibration_inputs(const CrossbarSpec& spec, double v_floor) {
    if (!spec.pair) throw InputError("calibration: no strand pair attached");
    const auto& p = *spec.pair;
    CalibrationInputs c;
    c.g_active = 0.5 * (small_signal_conductance(p.logic1, spec.v_in, 0.0, v_floor) +
                        small_signal_conductance(p.logic0, spec.v_in, 0.0, v_floor));
    c.g_float = 0.5 * (small_signal_conductance(p.logic1, v_floor, 0.0, v_floor) +
                       small_signal_conductance(p.logic0, v_floor, 0.0, v_floor));
    return c;
}

Eigen::VectorXd row_voltage_fraction(const Eigen::Ref<const Eigen::VectorXd>& g, double r) {
    const Eigen::Index n = g.size();
    // a[j] = sum_{k>j} g_k (k - j), built right to left from the suffix sum of g.
    Eigen::VectorXd a(n);
    double suffix = 0.0;
    double acc = 0.0;
    for (Eigen::Index j = n - 1; j >= 0; --j) {
        a[j] = acc;
        suffix += g[j];
        acc += suffix;
    }
    const double den = 1.0 + r * a[0];
    Eigen::VectorXd f(n);
    for (Eigen::Index j = 0; j < n; ++j) f[j] = (1.0 + r * a[j]) / den;
    return f;
}

SneakParams calibrate_sneak_params(const CrossbarSpec& spec, const CalibrationInputs& in, int threads) {
    if (spec.m < 1 || spec.n < 1) throw InputError("calibration: m and n must be at least 1");
    if (!(spec.r_int_ohm > 0.0) || !(spec.v_in > 0.0)) throw InputError("calibration: r_int and v_in must be positive");
    if (!(in.g_active > 0.0) || !(in.g_float > 0.0) || !std::isfinite(in.g_active) || !std::isfinite(in.g_float))
        throw InputError("calibration: conductances must be positive");
    const int m = spec.m, n = spec.n;
    const CalibrationKey key{m, n, spec.r_int_ohm, spec.v_in, in.g_active, in.g_float};
    {
        std::lock_guard lock(cache_mutex());
        if (auto it = cache().find(key); it != cache().end()) return it->second;
    }

    const CrossbarNetwork base(m, n, spec.r_int_ohm);
    Matrix v_row(m, n), i_row(m, n);
    parallel_for(static_cast<std::size_t>(m), resolve_threads(threads), [&](std::size_t row) {
        const int a = static_cast<int>(row);
        CrossbarNetwork net = base;
        Matrix g = Matrix::Constant(m, n, in.g_float);
        g.row(a).setConstant(in.g_active);
        net.assemble(g, a);
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(net.matrix());
        if (solver.info() != Eigen::Success) throw NumericalError("calibration: factorization failed");
        const Eigen::VectorXd x = solver.solve(net.rhs(spec.v_in));
        v_row.row(a) = net.cell_voltages(x).row(a);
        i_row.row(a) = net.column_currents(x).transpose();
    });

    const Eigen::VectorXd f = row_voltage_fraction(Eigen::VectorXd::Constant(n, in.g_active), spec.r_int_ohm);
    SneakParams p;
    p.alpha.resize(m);
    for (int i = 0; i < m; ++i) p.alpha[i] = v_row(i, 0) / (spec.v_in * f[0]);
    // beta compares oracle outputs with the cell current the parametric voltage would drive.
    p.beta = Eigen::VectorXd::Zero(n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < m; ++i) p.beta[j] += i_row(i, j) / (in.g_active * spec.v_in * p.alpha[i] * f[j]);
        p.beta[j] /= m;
    }
    p.alpha = p.alpha.unaryExpr(&clamp_unit);
    p.beta = p.beta.unaryExpr(&clamp_unit);

    std::lock_guard lock(cache_mutex());
    cache().emplace(key, p);
    return p;
}

SneakParams calibrate_sneak_params(const CrossbarSpec& spec, double g_mean, int threads) {
    return calibrate_sneak_params(spec, CalibrationInputs{g_mean, g_mean}, threads);
}

Matrix readout_currents(const Matrix& v_cell, const SneakParams& params, const CrossbarSpec& spec) {
    if (v_cell.rows() != spec.m || v_cell.cols() != spec.n || params.beta.size() != spec.n)
        throw InputError("readout_currents: shape mismatch");
    Matrix out(spec.m, spec.n);
    for (int i = 0; i < spec.m; ++i)
        for (int j = 0; j < spec.n; ++j)
            out(i, j) = params.beta[j] * cell_current(spec.table(i, j), v_cell(i, j), spec.delta_at(i, j));
    return out;
}

Matrix normalized_voltages(const Matrix& v_cell, const SneakParams& params, const CrossbarSpec& spec) {
    if (v_cell.rows() != spec.m || params.alpha.size() != spec.m)
        throw InputError("normalized_voltages: shape mismatch");
    Matrix out(v_cell.rows(), v_cell.cols());
    for (Eigen::Index i = 0; i < v_cell.rows(); ++i) out.row(i) = v_cell.row(i) / (spec.v_in * params.alpha[i]);
    return out;
}

double compute_power(const CrossbarSpec& spec, const Eigen::VectorXd& source_current) {
    if (source_current.size() != spec.m) throw InputError("compute_power: need one source current per row");
    return spec.v_in * source_current.sum() / static_cast<double>(spec.m);
}

ReadoutSolution parametric_solve(const CrossbarSpec& spec, const SneakParams& params, const SolverOptions& options) {
    spec.validate();
    const int m = spec.m, n = spec.n;
    if (params.alpha.size() != m || params.beta.size() != n) throw InputError("parametric_solve: sneak parameter sizes");
    for (Eigen::Index k = 0; k < params.alpha.size(); ++k)
        if (!(params.alpha[k] > 0.0 && params.alpha[k] <= 1.0)) throw InputError("parametric_solve: alpha outside (0, 1]");
    for (Eigen::Index k = 0; k < params.beta.size(); ++k)
        if (!(params.beta[k] > 0.0 && params.beta[k] <= 1.0)) throw InputError("parametric_solve: beta outside (0, 1]");

    const double r = spec.r_int_ohm;
    ReadoutSolution sol;
    sol.solver = SolverKind::Parametric;
    sol.params = params;
    sol.v_cell = Matrix::Zero(m, n);
    std::vector<int> iterations(static_cast<std::size_t>(m), 0);
    std::vector<double> residuals(static_cast<std::size_t>(m), 0.0);
    std::vector<char> converged(static_cast<std::size_t>(m), 0);

    parallel_for(static_cast<std::size_t>(m), resolve_threads(options.threads), [&](std::size_t row) {
        const int i = static_cast<int>(row);
        Eigen::VectorXd v = Eigen::VectorXd::Constant(n, options.v_start);
        Eigen::VectorXd v_new(n), g(n);
        double prev_res = std::numeric_limits<double>::infinity();
        bool relaxed = false;
        for (int it = 1; it <= options.max_iterations; ++it) {
            for (int j = 0; j < n; ++j) g[j] = cell_conductance(spec.table(i, j), v[j], spec.delta_at(i, j), options.v_floor);
            v_new = row_voltage_fraction(g, r) * (spec.v_in * params.alpha[i]);
            const double res = (v_new - v).cwiseAbs().maxCoeff();
            iterations[row] = it;
            residuals[row] = res;
            if (res <= options.tolerance) {
                converged[row] = 1;
                break;
            }
            if (res > prev_res) relaxed = true;
            prev_res = res;
            v = relaxed ? Eigen::VectorXd(v + options.relaxation * (v_new - v)) : v_new;
        }
        sol.v_cell.row(i) = v_new.transpose();
    });

    sol.i_out = readout_currents(sol.v_cell, params, spec);
    sol.v_normalized = normalized_voltages(sol.v_cell, params, spec);
    sol.source_current = sol.i_out.rowwise().sum();
    sol.power_w = compute_power(spec, sol.source_current);
    sol.iterations = *std::max_element(iterations.begin(), iterations.end());
    sol.residual = *std::max_element(residuals.begin(), residuals.end());
    sol.converged = std::all_of(converged.begin(), converged.end(), [](char c) { return c != 0; });
    return sol;
}

ReadoutSolution solve(const CrossbarSpec& spec, SolverKind kind, const SolverOptions& options) {
    if (kind == SolverKind::Kirchhoff) return kirchhoff_solve(spec, options);
    spec.validate();
    const auto params = calibrate_sneak_params(spec, default_calibration_inputs(spec, options.v_floor), options.threads);
    return parametric_solve(spec, params, options);
}

}  // namespace dnaxbar
