#include "dnaxbar/variability.hpp"
#include "dnaxbar/parallel.hpp"
#include "dnaxbar/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

namespace dnaxbar {

std::string to_string(Polarity p) { return p == Polarity::HighIsOne ? "high_is_one" : "low_is_one"; }

ThresholdResult optimal_threshold(std::span<const double> currents, std::span<const std::uint8_t> labels) {
    if (currents.size() != labels.size()) throw InputError("optimal_threshold: currents and labels differ in length");
    if (currents.empty()) throw InputError("optimal_threshold: no samples");
    const std::size_t total = currents.size();
    std::size_t ones = 0;
    for (auto l : labels) ones += l != 0;

    constexpr double inf = std::numeric_limits<double>::infinity();
    ThresholdResult best;
    if (ones == 0 || ones == total) {
        best.single_class = true;
        best.threshold = ones == 0 ? inf : -inf;
        return best;
    }

    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return currents[a] < currents[b]; });

    // Errors with HighIsOne when the cut sits below everything: every zero is above it.
    std::size_t ones_below = 0, zeros_below = 0;
    const std::size_t zeros = total - ones;
    double best_margin = -1.0;
    bool have = false;

    auto consider = [&](double t, double margin) {
        const std::size_t high_err = ones_below + (zeros - zeros_below);
        const std::size_t low_err = total - high_err;
        const std::pair<std::size_t, Polarity> options[] = {{high_err, Polarity::HighIsOne}, {low_err, Polarity::LowIsOne}};
        for (const auto& [err, pol] : options) {
            if (!have || err < best.errors || (err == best.errors && margin > best_margin)) {
                have = true;
                best.errors = err;
                best.threshold = t;
                best.polarity = pol;
                best_margin = margin;
            }
        }
    };

    consider(-inf, 0.0);
    std::size_t k = 0;
    while (k < total) {
        const double value = currents[order[k]];
        while (k < total && currents[order[k]] == value) {
            (labels[order[k]] ? ones_below : zeros_below) += 1;
            ++k;
        }
        if (k < total) {
            const double next = currents[order[k]];
            consider(value + 0.5 * (next - value), next - value);
        }
    }
    consider(inf, 0.0);
    best.ber = static_cast<double>(best.errors) / static_cast<double>(total);
    return best;
}

double compute_ber(const Matrix& i_out, const BitMatrix& bits, double threshold, Polarity polarity, std::size_t valid) {
    if (i_out.rows() != bits.rows() || i_out.cols() != bits.cols()) throw InputError("compute_ber: shape mismatch");
    const std::size_t cols = static_cast<std::size_t>(bits.cols());
    const std::size_t cells = std::min(valid, static_cast<std::size_t>(bits.size()));
    if (cells == 0) return 0.0;
    std::size_t wrong = 0;
    for (std::size_t c = 0; c < cells; ++c) {
        const auto i = static_cast<Eigen::Index>(c / cols), j = static_cast<Eigen::Index>(c % cols);
        wrong += classify(i_out(i, j), threshold, polarity) != (bits(i, j) != 0);
    }
    return static_cast<double>(wrong) / static_cast<double>(cells);
}

void McConfig::validate() const {
    if (trials < 1) throw InputError("mc config: trials must be at least 1");
    if (m < 1 || n < 1) throw InputError("mc config: m and n must be at least 1");
    if (!(r_int_ohm > 0.0)) throw InputError("mc config: r_int must be positive");
    if (!(v_in > 0.0)) throw InputError("mc config: v_in must be positive");
    if (!(p_one >= 0.0 && p_one <= 1.0)) throw InputError("mc config: p_one must lie in [0, 1]");
    if (histogram_bins < 1) throw InputError("mc config: histogram_bins must be at least 1");
    if (!pair) throw InputError("mc config: no strand pair attached");
    pair->validate();
    const double limit = std::min(pair->logic1.delta_max(), pair->logic0.delta_max());
    if (!(delta_max >= 0.0 && delta_max <= limit))
        throw InputError("mc config: delta_max must lie in [0, " + std::to_string(limit) + "] eV");
    if (pair->logic1.delta_min() > 0.0 || pair->logic0.delta_min() > 0.0)
        throw InputError("mc config: tables must include delta = 0");
}

Matrix sample_deltas(const McConfig& config, std::uint64_t trial) {
    Stream rng(config.seed, "delta", trial);
    Matrix d(config.m, config.n);
    if (!config.per_cell_delta) {
        d.setConstant(rng.uniform(0.0, config.delta_max));
        return d;
    }
    for (int i = 0; i < config.m; ++i)
        for (int j = 0; j < config.n; ++j) d(i, j) = rng.uniform(0.0, config.delta_max);
    return d;
}

BitMatrix sample_bits(const McConfig& config, std::uint64_t trial) {
    Stream rng(config.seed, "bits", trial);
    BitMatrix b(config.m, config.n);
    for (int i = 0; i < config.m; ++i)
        for (int j = 0; j < config.n; ++j) b(i, j) = rng.bernoulli(config.p_one) ? 1 : 0;
    return b;
}

McReport run_mc(const McConfig& config) {
    config.validate();
    const auto trials = static_cast<std::size_t>(config.trials);
    McReport rep;
    rep.solver = to_string(config.solver);
    rep.ber_samples.assign(trials, std::numeric_limits<double>::quiet_NaN());
    rep.threshold_samples.assign(trials, std::numeric_limits<double>::quiet_NaN());
    rep.polarity_samples.assign(trials, Polarity::HighIsOne);
    rep.failed.assign(trials, 0);
    rep.single_class.assign(trials, 0);
    rep.mean_voltage_samples.assign(trials, std::numeric_limits<double>::quiet_NaN());

    // Currents never exceed the undistorted cell current at V_in and delta = 0.
    const auto& p = *config.pair;
    const double top = std::max(interpolate_current(p.logic1, config.v_in, 0.0), interpolate_current(p.logic0, config.v_in, 0.0));
    const auto bins = static_cast<std::size_t>(config.histogram_bins);
    rep.histogram.edges_na.resize(bins + 1);
    for (std::size_t b = 0; b <= bins; ++b)
        rep.histogram.edges_na[b] = top * 1e9 * static_cast<double>(b) / static_cast<double>(bins);
    std::vector<std::vector<std::uint64_t>> h0(trials), h1(trials);

    SolverOptions options;
    options.threads = 1;
    CrossbarSpec base;
    base.m = config.m;
    base.n = config.n;
    base.r_int_ohm = config.r_int_ohm;
    base.v_in = config.v_in;
    base.pair = config.pair;
    std::optional<SneakParams> params;
    if (config.solver == SolverKind::Parametric)
        params = calibrate_sneak_params(base, default_calibration_inputs(base), config.threads);

    parallel_for(trials, resolve_threads(config.threads), [&](std::size_t t) {
        CrossbarSpec spec = base;
        spec.bits = sample_bits(config, t);
        spec.delta = sample_deltas(config, t);
        ReadoutSolution sol;
        try {
            sol = params ? parametric_solve(spec, *params, options) : kirchhoff_solve(spec, options);
        } catch (const NumericalError&) {
            rep.failed[t] = 1;
            return;
        }
        if (!sol.converged) {
            rep.failed[t] = 1;
            return;
        }
        const std::size_t cells = static_cast<std::size_t>(spec.m) * static_cast<std::size_t>(spec.n);
        std::vector<double> cur(cells);
        std::vector<std::uint8_t> lab(cells);
        h0[t].assign(bins, 0);
        h1[t].assign(bins, 0);
        for (int i = 0; i < spec.m; ++i)
            for (int j = 0; j < spec.n; ++j) {
                const std::size_t c = static_cast<std::size_t>(i) * spec.n + j;
                cur[c] = sol.i_out(i, j);
                lab[c] = spec.bits(i, j);
                const double x = cur[c] / top * static_cast<double>(bins);
                const auto b = static_cast<std::size_t>(std::clamp(x, 0.0, static_cast<double>(bins - 1)));
                (lab[c] ? h1[t] : h0[t])[b] += 1;
            }
        const auto th = optimal_threshold(cur, lab);
        rep.ber_samples[t] = th.ber;
        rep.threshold_samples[t] = th.threshold;
        rep.polarity_samples[t] = th.polarity;
        rep.single_class[t] = th.single_class ? 1 : 0;
        rep.mean_voltage_samples[t] = sol.v_cell.mean();
    });

    rep.histogram.logic0.assign(bins, 0);
    rep.histogram.logic1.assign(bins, 0);
    double ber_sum = 0.0, v_sum = 0.0;
    std::size_t ok = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        if (rep.failed[t]) {
            ++rep.failed_trials;
            continue;
        }
        ++ok;
        ber_sum += rep.ber_samples[t];
        v_sum += rep.mean_voltage_samples[t];
        for (std::size_t b = 0; b < bins; ++b) {
            rep.histogram.logic0[b] += h0[t][b];
            rep.histogram.logic1[b] += h1[t][b];
        }
    }
    if (ok == 0) throw NumericalError("run_mc: every trial failed to converge");
    rep.ber_mean = ber_sum / static_cast<double>(ok);
    rep.mean_cell_voltage = v_sum / static_cast<double>(ok);
    return rep;
}

}  // namespace dnaxbar
