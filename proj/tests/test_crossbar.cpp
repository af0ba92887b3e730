#include "dnaxbar/crossbar.hpp"

#include <doctest.h>

#include <Eigen/SparseLU>

#include <cmath>
#include <limits>
#include <tuple>
#include <random>

using namespace dnaxbar;

namespace {

std::shared_ptr<const StrandPair> ohmic_pair(double r1, double r0) {
    SynthesisParams a, b;
    a.strand_id = "ohmic-1";
    a.r_low = a.r_high = r1;
    a.delta_sensitivity = 0.0;
    b.strand_id = "ohmic-0";
    b.r_low = b.r_high = r0;
    b.delta_sensitivity = 0.0;
    return std::make_shared<const StrandPair>(StrandPair{synthesize_table(a), synthesize_table(b), "test"});
}

std::shared_ptr<const StrandPair> shipped_pair() { return std::make_shared<const StrandPair>(representative_pair()); }

BitMatrix random_bits(int m, int n, unsigned seed) {
    std::mt19937 gen(seed);
    BitMatrix b(m, n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) b(i, j) = static_cast<std::uint8_t>(gen() & 1u);
    return b;
}

// Independent nodal solve of a linear array: wordline node (i,j) is i*n+j,
// bitline node is m*n + i*n + j.
struct LinearSolution {
    Eigen::VectorXd x;
    double source_current = 0.0;
    Eigen::VectorXd ground;  // per column
    double dissipation = 0.0;
    double max_kcl = 0.0;
};

LinearSolution solve_linear(const Matrix& g, double r, int active, double v_in) {
    const int m = static_cast<int>(g.rows()), n = static_cast<int>(g.cols());
    const double gi = 1.0 / r;
    auto w = [&](int i, int j) { return i * n + j; };
    auto b = [&](int i, int j) { return m * n + i * n + j; };
    std::vector<std::tuple<int, int, double>> edges;  // node -1 is ground, -2 the source
    for (int i = 0; i < m; ++i)
        for (int j = 0; j + 1 < n; ++j) edges.emplace_back(w(i, j), w(i, j + 1), gi);
    for (int i = 0; i + 1 < m; ++i)
        for (int j = 0; j < n; ++j) edges.emplace_back(b(i, j), b(i + 1, j), gi);
    for (int j = 0; j < n; ++j) edges.emplace_back(b(m - 1, j), -1, gi);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) edges.emplace_back(w(i, j), b(i, j), g(i, j));
    edges.emplace_back(-2, w(active, 0), gi);

    const int size = 2 * m * n;
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(size);
    for (auto [p, q, c] : edges) {
        if (p >= 0) trip.emplace_back(p, p, c);
        if (q >= 0) trip.emplace_back(q, q, c);
        if (p >= 0 && q >= 0) {
            trip.emplace_back(p, q, -c);
            trip.emplace_back(q, p, -c);
        }
        if (p == -2) rhs(q) += c * v_in;
    }
    Eigen::SparseMatrix<double> a(size, size);
    a.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(a);
    LinearSolution s;
    s.x = lu.solve(rhs);
    auto volt = [&](int node) { return node == -1 ? 0.0 : node == -2 ? v_in : s.x(node); };
    Eigen::VectorXd net = Eigen::VectorXd::Zero(size);
    s.ground = Eigen::VectorXd::Zero(n);
    for (auto [p, q, c] : edges) {
        const double i = c * (volt(p) - volt(q));  // p -> q
        s.dissipation += i * (volt(p) - volt(q));
        if (p >= 0) net(p) -= i;
        if (q >= 0) net(q) += i;
        if (p == -2) s.source_current = i;
        if (q == -1) s.ground(p - b(m - 1, 0)) = i;
    }
    s.max_kcl = net.cwiseAbs().maxCoeff();
    return s;
}

Matrix conductances(const CrossbarSpec& s) {
    Matrix g(s.m, s.n);
    for (int i = 0; i < s.m; ++i)
        for (int j = 0; j < s.n; ++j) g(i, j) = interpolate_current(s.table(i, j), 1.0, 0.0);  // ohmic: I(1 V) = g
    return g;
}

}  // namespace

TEST_CASE("row voltage fraction against a direct double sum") {
    std::mt19937 gen(5);
    std::uniform_real_distribution<double> u(1e-9, 1e-6);
    Eigen::VectorXd g(17);
    for (int k = 0; k < 17; ++k) g(k) = u(gen);
    const double r = 3e4;
    const Eigen::VectorXd f = row_voltage_fraction(g, r);
    double den = 1.0;
    for (int k = 0; k < 17; ++k) den += r * g(k) * k;  // 1-based (k - 1)
    for (int j = 0; j < 17; ++j) {
        double num = 1.0;
        for (int k = j + 1; k < 17; ++k) num += r * g(k) * (k - j);
        CHECK(f(j) == doctest::Approx(num / den).epsilon(1e-13));
    }
    CHECK(f(16) * den == doctest::Approx(1.0).epsilon(1e-13));
    for (int j = 1; j < 17; ++j) CHECK(f(j) <= f(j - 1));
}

TEST_CASE("calibration limits") {
    const auto pair = shipped_pair();
    SUBCASE("vanishing interconnect") {
        const CrossbarSpec s = homogeneous_spec(8, 8, 1.0, pair, true);
        const SneakParams p = calibrate_sneak_params(s, 1e-6);
        CHECK((p.alpha.array() - 1.0).abs().maxCoeff() < 1e-3);
        CHECK((p.beta.array() - 1.0).abs().maxCoeff() < 1e-3);
    }
    SUBCASE("single cell series divider") {
        const CrossbarSpec s = homogeneous_spec(1, 1, 1e4, pair, true);
        const SneakParams p = calibrate_sneak_params(s, 1e-6);
        // Source segment, 1 MOhm cell and ground segment in series.
        CHECK(p.alpha(0) == doctest::Approx(1e6 / (1e6 + 2e4)).epsilon(1e-12));
        CHECK(p.beta(0) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("64x64 shape") {
        const CrossbarSpec s = homogeneous_spec(64, 64, 1e6, pair, true);
        const SneakParams p = calibrate_sneak_params(s, 1e-6);
        for (int i = 1; i < 64; ++i) CHECK(p.alpha(i) > p.alpha(i - 1));
        CHECK(p.alpha.maxCoeff() <= 1.0);
        CHECK(p.beta.minCoeff() > 0.0);
        // Oracle column gains: output current over g V_in alpha_i F_j, row averaged.
        const Eigen::VectorXd f = row_voltage_fraction(Eigen::VectorXd::Constant(64, 1e-6), 1e6);
        const Matrix g = Matrix::Constant(64, 64, 1e-6);
        Eigen::VectorXd gain = Eigen::VectorXd::Zero(64);
        for (int i = 0; i < 64; ++i) {
            const auto sol = solve_linear(g, 1e6, i, 1.0);
            const double alpha = sol.x(i * 64) - sol.x(64 * 64 + i * 64);
            CHECK(p.alpha(i) == doctest::Approx(std::min(1.0, alpha / f(0))).epsilon(1e-8));
            gain += sol.ground / (1e-6 * alpha) / 64.0;
        }
        // Distortion grows toward the far column: the effective gain falls with j.
        for (int j = 1; j < 64; ++j) CHECK(gain(j) < gain(j - 1));
        for (int j = 0; j < 64; ++j) CHECK(p.beta(j) == doctest::Approx(std::min(1.0, gain(j) / f(j))).epsilon(1e-8));
    }
}

TEST_CASE("parametric solve reductions") {
    const auto pair = ohmic_pair(1e6, 1e7);
    SUBCASE("1x1") {
        const CrossbarSpec s = homogeneous_spec(1, 1, 1e4, pair, true);
        SneakParams p;
        p.alpha = Eigen::VectorXd::Constant(1, 0.9);
        p.beta = Eigen::VectorXd::Constant(1, 0.8);
        const ReadoutSolution sol = parametric_solve(s, p);
        CHECK(sol.v_cell(0, 0) == doctest::Approx(0.9).epsilon(1e-14));
        CHECK(sol.v_normalized(0, 0) == 1.0);
        CHECK(sol.i_out(0, 0) == doctest::Approx(0.8 * 0.9e-6).epsilon(1e-12));
    }
    SUBCASE("linear tables converge at once to the direct evaluation") {
        CrossbarSpec s = homogeneous_spec(6, 9, 2e4, pair, true);
        s.bits = random_bits(6, 9, 3);
        const SneakParams p = calibrate_sneak_params(s, 5e-7);
        const ReadoutSolution sol = parametric_solve(s, p);
        CHECK(sol.converged);
        CHECK(sol.iterations <= 2);
        const Matrix g = conductances(s);
        for (int i = 0; i < 6; ++i) {
            const Eigen::VectorXd f = row_voltage_fraction(g.row(i).transpose(), 2e4);
            for (int j = 0; j < 9; ++j) CHECK(sol.v_cell(i, j) == doctest::Approx(f(j) * p.alpha(i)).epsilon(1e-9));
        }
    }
}

TEST_CASE("parametric matches the nodal solve on a homogeneous nonlinear array") {
    const CrossbarSpec s = homogeneous_spec(64, 64, 1e5, shipped_pair(), true);
    const ReadoutSolution par = solve(s, SolverKind::Parametric);
    const ReadoutSolution kir = kirchhoff_solve(s);
    REQUIRE(par.converged);
    REQUIRE(kir.converged);
    const double rel = ((par.v_cell - kir.v_cell).array().abs() / kir.v_cell.array().abs()).maxCoeff();
    CHECK(rel <= 0.05);
}

TEST_CASE("readout currents") {
    const auto pair = shipped_pair();
    CrossbarSpec s = homogeneous_spec(3, 4, 1e4, pair, true);
    s.bits = random_bits(3, 4, 8);
    SneakParams p;
    p.alpha = Eigen::VectorXd::Ones(3);
    p.beta = Eigen::VectorXd::Ones(4);
    Matrix v(3, 4);
    v << 0.1, 0.5, 0.9, 0.0, 0.2, 0.33, 0.71, 1.0, 0.0, 0.05, 0.6, 0.8;
    const Matrix i = readout_currents(v, p, s);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) CHECK(i(r, c) == interpolate_current(s.table(r, c), v(r, c), 0.0));
    CHECK(i(0, 3) == 0.0);
    CHECK(i(2, 0) == 0.0);
    CHECK(cell_current(s.table(0, 0), -0.4, 0.0) == -cell_current(s.table(0, 0), 0.4, 0.0));
}

TEST_CASE("4x4 mixed bits: parametric column currents track the nodal solve") {
    CrossbarSpec s = homogeneous_spec(4, 4, 1e5, shipped_pair(), true);
    s.bits << 1, 0, 1, 1, 0, 1, 0, 0, 1, 1, 0, 1, 0, 0, 1, 0;
    const ReadoutSolution par = solve(s, SolverKind::Parametric);
    const ReadoutSolution kir = kirchhoff_solve(s);
    CHECK(((par.i_out - kir.i_out).array().abs() / kir.i_out.array().abs()).maxCoeff() <= 0.05);
}

TEST_CASE("nodal solve of a single cell") {
    const CrossbarSpec s = homogeneous_spec(1, 1, 1e4, ohmic_pair(1e6, 1e7), true);
    const ReadoutSolution sol = kirchhoff_solve(s);
    CHECK(sol.converged);
    CHECK(sol.i_out(0, 0) == doctest::Approx(1.0 / 1.02e6).epsilon(1e-9));
    CHECK(sol.v_cell(0, 0) == doctest::Approx(1e6 / 1.02e6).epsilon(1e-9));
    CHECK(sol.power_w == doctest::Approx(1.0 / 1.02e6).epsilon(1e-9));
    CHECK(sol.v_normalized(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("ideal wires give every cell the full input") {
    CrossbarSpec s = homogeneous_spec(5, 6, 1e-3, shipped_pair(), true);
    s.bits = random_bits(5, 6, 4);
    const ReadoutSolution sol = kirchhoff_solve(s);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 6; ++j) {
            CHECK(sol.v_cell(i, j) == doctest::Approx(1.0).epsilon(1e-6));
            CHECK(sol.i_out(i, j) == doctest::Approx(interpolate_current(s.table(i, j), 1.0, 0.0)).epsilon(1e-5));
        }
    CHECK((sol.v_normalized.array() - 1.0).abs().maxCoeff() < 1e-6);
}

TEST_CASE("nodal solve of a linear array against an independent solver") {
    CrossbarSpec s = homogeneous_spec(6, 7, 3e5, ohmic_pair(2e6, 2e7), true);
    s.bits = random_bits(6, 7, 12);
    const ReadoutSolution sol = kirchhoff_solve(s);
    const Matrix g = conductances(s);
    for (int a = 0; a < 6; ++a) {
        const LinearSolution ref = solve_linear(g, 3e5, a, 1.0);
        CHECK(sol.source_current(a) == doctest::Approx(ref.source_current).epsilon(1e-9));
        for (int j = 0; j < 7; ++j) {
            CHECK(sol.i_out(a, j) == doctest::Approx(ref.ground(j)).epsilon(1e-9));
            CHECK(sol.v_cell(a, j) == doctest::Approx(ref.x(a * 7 + j) - ref.x(42 + a * 7 + j)).epsilon(1e-9));
        }
        CHECK(sol.balance[static_cast<std::size_t>(a)].dissipation == doctest::Approx(ref.dissipation).epsilon(1e-9));
        CHECK(ref.max_kcl <= 1e-9 * ref.source_current);
    }
}

TEST_CASE("global balance on random nonlinear arrays") {
    for (int size : {8, 64}) {
        CrossbarSpec s = homogeneous_spec(size, size, 1e5, shipped_pair(), true);
        s.bits = random_bits(size, size, static_cast<unsigned>(size));
        const ReadoutSolution sol = kirchhoff_solve(s);
        REQUIRE(sol.converged);
        double source_power = 0;
        for (int a = 0; a < size; ++a) {
            const double src = sol.source_current(a);
            CHECK(std::abs(src - sol.i_out.row(a).sum()) <= 1e-9 * src);
            const auto& bal = sol.balance[static_cast<std::size_t>(a)];
            CHECK(bal.max_kcl_residual <= 1e-9 * src);
            CHECK(bal.dissipation == doctest::Approx(s.v_in * src).epsilon(1e-6));
            source_power += s.v_in * src;
        }
        CHECK(sol.power_w == doctest::Approx(source_power / size).epsilon(1e-12));
    }
}

TEST_CASE("power falls as the interconnect resistance doubles") {
    const auto pair = ohmic_pair(1e6, 1e7);
    double last = std::numeric_limits<double>::infinity();
    for (double r : {1e4, 2e4, 4e4, 8e4}) {
        const ReadoutSolution sol = kirchhoff_solve(homogeneous_spec(8, 8, r, pair, true));
        CHECK(sol.power_w < last);
        last = sol.power_w;
    }
    Eigen::VectorXd src(2);
    src << 1e-6, 3e-6;
    CrossbarSpec s = homogeneous_spec(2, 2, 1e4, pair, true);
    CHECK(compute_power(s, src) == doctest::Approx(2e-6).epsilon(1e-15));
}

TEST_CASE("high-conductance strand degrades more") {
    const auto pair = shipped_pair();
    const ReadoutSolution hi = kirchhoff_solve(homogeneous_spec(64, 64, 1e6, pair, true));
    const ReadoutSolution lo = kirchhoff_solve(homogeneous_spec(64, 64, 1e6, pair, false));
    for (int i = 0; i < 64; i += 9)
        for (int j = 1; j < 64; ++j) {
            CHECK(hi.v_normalized(i, j) <= hi.v_normalized(i, j - 1) + 1e-12);
            CHECK(lo.v_normalized(i, j) <= lo.v_normalized(i, j - 1) + 1e-12);
        }
    CHECK(hi.v_normalized.minCoeff() < lo.v_normalized.minCoeff());
    CHECK(hi.v_normalized.mean() < lo.v_normalized.mean());
}

TEST_CASE("spec validation") {
    CrossbarSpec s = homogeneous_spec(2, 2, 1e4, shipped_pair(), true);
    CHECK_NOTHROW(s.validate());
    s.bits(0, 1) = 2;
    CHECK_THROWS_AS(s.validate(), InputError);
    s = homogeneous_spec(2, 2, -1.0, shipped_pair(), true);
    CHECK_THROWS_AS(s.validate(), InputError);
    s = homogeneous_spec(2, 2, 1e4, shipped_pair(), true, 1.5);
    CHECK_THROWS_AS(s.validate(), InputError);
    s = homogeneous_spec(2, 2, 1e4, shipped_pair(), true);
    s.delta = Matrix::Constant(2, 2, 0.5);
    CHECK_THROWS_AS(s.validate(), InputError);
    CHECK_THROWS_AS(parse_solver_kind("newton"), InputError);
}
