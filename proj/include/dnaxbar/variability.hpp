#pragma once

#include "dnaxbar/crossbar.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dnaxbar {

enum class Polarity { HighIsOne, LowIsOne };

std::string to_string(Polarity p);

struct ThresholdResult {
    double threshold = 0.0;  // A; may be +/- infinity
    Polarity polarity = Polarity::HighIsOne;
    std::size_t errors = 0;
    double ber = 0.0;
    bool single_class = false;
};

// Class assigned to a current under a threshold rule (strictly above = high).
inline bool classify(double current, double threshold, Polarity polarity) {
    const bool high = current > threshold;
    return polarity == Polarity::HighIsOne ? high : !high;
}

// Exhaustive scan of midpoints between consecutive distinct currents plus the
// two infinite sentinels, under both polarities. Ties go to the cut with the
// wider gap, then to the earliest candidate (ascending, HighIsOne first).
ThresholdResult optimal_threshold(std::span<const double> currents, std::span<const std::uint8_t> labels);

// Fraction of cells whose thresholded class differs from the stored bit.
// `valid` limits the count to the first cells in row-major order (default all).
double compute_ber(const Matrix& i_out, const BitMatrix& bits, double threshold, Polarity polarity,
                   std::size_t valid = static_cast<std::size_t>(-1));

struct McConfig {
    int trials = 1000;
    double delta_max = 0.1;  // eV
    int m = 64;
    int n = 64;
    double r_int_ohm = 1e5;
    double p_one = 0.5;
    std::uint64_t seed = 1;
    double v_in = 1.0;
    SolverKind solver = SolverKind::Parametric;
    bool per_cell_delta = true;  // false draws one offset per trial
    int histogram_bins = 50;
    int threads = 0;
    std::shared_ptr<const StrandPair> pair;

    void validate() const;
};

// Row-major uniform draws on [0, delta_max], fixed by (seed, trial).
Matrix sample_deltas(const McConfig& config, std::uint64_t trial);

// Bernoulli(p_one) bits, fixed by (seed, trial).
BitMatrix sample_bits(const McConfig& config, std::uint64_t trial);

struct ClassHistogram {
    std::vector<double> edges_na;  // bins + 1 edges in nA
    std::vector<std::uint64_t> logic0;
    std::vector<std::uint64_t> logic1;
};

struct McReport {
    std::string solver;
    std::vector<double> ber_samples;        // per trial, NaN for failed trials
    std::vector<double> threshold_samples;  // A
    std::vector<Polarity> polarity_samples;
    std::vector<char> failed;                // per trial
    std::vector<char> single_class;          // per trial
    std::vector<double> mean_voltage_samples;  // V, per trial
    double ber_mean = 0.0;
    double mean_cell_voltage = 0.0;
    int failed_trials = 0;
    ClassHistogram histogram;
};

McReport run_mc(const McConfig& config);

}  // namespace dnaxbar
