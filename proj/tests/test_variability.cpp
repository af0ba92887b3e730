#include "dnaxbar/variability.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

using namespace dnaxbar;

namespace {

// Every cut "current > t" with t at -inf or at a sample value, both polarities.
std::size_t brute_force_errors(const std::vector<double>& c, const std::vector<std::uint8_t>& l) {
    std::vector<double> cuts = c;
    cuts.push_back(-std::numeric_limits<double>::infinity());
    std::size_t best = c.size();
    for (double t : cuts)
        for (int pol = 0; pol < 2; ++pol) {
            std::size_t e = 0;
            for (std::size_t k = 0; k < c.size(); ++k) {
                const bool high = c[k] > t;
                const bool one = pol == 0 ? high : !high;
                e += one != (l[k] != 0);
            }
            best = std::min(best, e);
        }
    return best;
}

ThresholdResult threshold_of(std::vector<double> zeros, std::vector<double> ones) {
    std::vector<double> c;
    std::vector<std::uint8_t> l;
    for (double z : zeros) {
        c.push_back(z);
        l.push_back(0);
    }
    for (double o : ones) {
        c.push_back(o);
        l.push_back(1);
    }
    return optimal_threshold(c, l);
}

}  // namespace

TEST_CASE("delta sampling") {
    McConfig c;
    c.m = 4;
    c.n = 5;
    c.delta_max = 0.0;
    CHECK(sample_deltas(c, 3).cwiseAbs().maxCoeff() == 0.0);
    c.delta_max = 0.2;
    CHECK(sample_deltas(c, 7) == sample_deltas(c, 7));
    CHECK(sample_deltas(c, 7) != sample_deltas(c, 8));
    CHECK(sample_bits(c, 2) == sample_bits(c, 2));
    c.per_cell_delta = false;
    const Matrix one = sample_deltas(c, 1);
    CHECK((one.array() == one(0, 0)).all());
}

TEST_CASE("uniform offsets have the right mean") {
    McConfig c;
    c.m = 1000;
    c.n = 1000;
    c.delta_max = 0.1;
    const Matrix d = sample_deltas(c, 0);
    CHECK(d.minCoeff() >= 0.0);
    CHECK(d.maxCoeff() <= 0.1);
    const double sigma = 0.1 / std::sqrt(12.0) / std::sqrt(1e6);
    CHECK(std::abs(d.mean() - 0.05) <= 3 * sigma);
}

TEST_CASE("optimal threshold examples") {
    const auto sep = threshold_of({1e-9, 2e-9, 3e-9}, {10e-9, 11e-9});
    CHECK(sep.ber == 0.0);
    CHECK(sep.threshold > 3e-9);
    CHECK(sep.threshold < 10e-9);
    CHECK(sep.polarity == Polarity::HighIsOne);

    CHECK(threshold_of({1, 2, 2, 5}, {1, 2, 2, 5}).ber == 0.5);
    CHECK(threshold_of({1, 5}, {3, 7}).ber == 0.25);

    const auto single = threshold_of({1, 2, 3}, {});
    CHECK(single.single_class);
    CHECK(single.ber == 0.0);
    CHECK(std::isinf(single.threshold));

    const auto inverted = threshold_of({10, 11}, {1, 2});
    CHECK(inverted.ber == 0.0);
    CHECK(inverted.polarity == Polarity::LowIsOne);
}

TEST_CASE("optimal threshold equals brute force on random sets") {
    std::mt19937 gen(99);
    for (int rep = 0; rep < 300; ++rep) {
        const int size = 2 + static_cast<int>(gen() % 40);
        std::vector<double> c(static_cast<std::size_t>(size));
        std::vector<std::uint8_t> l(c.size());
        bool zero = false, one = false;
        for (std::size_t k = 0; k < c.size(); ++k) {
            c[k] = static_cast<double>(gen() % 12);  // ties on purpose
            l[k] = static_cast<std::uint8_t>(gen() & 1u);
            (l[k] ? one : zero) = true;
        }
        const auto r = optimal_threshold(c, l);
        CHECK(r.errors == brute_force_errors(c, l));
        if (zero && one) CHECK(r.ber <= 0.5);
        // The reported threshold reproduces the reported error count.
        std::size_t e = 0;
        for (std::size_t k = 0; k < c.size(); ++k) e += classify(c[k], r.threshold, r.polarity) != (l[k] != 0);
        CHECK(e == r.errors);
    }
}

TEST_CASE("bit error rate") {
    Matrix i(2, 2);
    i << 1, 2, 3, 4;
    BitMatrix ones = BitMatrix::Ones(2, 2);
    CHECK(compute_ber(i, ones, 0.5, Polarity::HighIsOne) == 0.0);

    std::mt19937 gen(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix cur(16, 16);
    BitMatrix bits(16, 16);
    for (int r = 0; r < 16; ++r)
        for (int c = 0; c < 16; ++c) {
            cur(r, c) = u(gen);
            bits(r, c) = static_cast<std::uint8_t>(gen() & 1u);
        }
    for (auto pol : {Polarity::HighIsOne, Polarity::LowIsOne}) {
        int wrong = 0;
        for (int r = 0; r < 16; ++r)
            for (int c = 0; c < 16; ++c) {
                const bool high = cur(r, c) > 0.4;
                const int read = pol == Polarity::HighIsOne ? high : !high;
                wrong += read != bits(r, c);
            }
        const double ber = compute_ber(cur, bits, 0.4, pol);
        CHECK(ber == wrong / 256.0);
        const BitMatrix flipped = (bits.array() == 0).cast<std::uint8_t>();
        CHECK(compute_ber(cur, flipped, 0.4, pol) == doctest::Approx(1.0 - ber).epsilon(1e-15));
    }
    // Only the first `valid` cells in row-major order are counted.
    BitMatrix z = BitMatrix::Zero(2, 2);
    CHECK(compute_ber(i, z, 2.5, Polarity::HighIsOne, 2) == 0.0);
    CHECK(compute_ber(i, z, 2.5, Polarity::HighIsOne, 3) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("monte carlo basics") {
    McConfig c;
    c.pair = std::make_shared<const StrandPair>(representative_pair());
    c.m = c.n = 16;
    c.trials = 1;
    c.delta_max = 0.0;
    c.r_int_ohm = 1e4;
    const McReport r = run_mc(c);
    CHECK(r.ber_mean == 0.0);
    CHECK(r.failed_trials == 0);

    c.trials = 6;
    c.delta_max = 0.2;
    c.r_int_ohm = 1e6;
    const McReport a = run_mc(c), b = run_mc(c);
    CHECK(a.ber_samples == b.ber_samples);
    CHECK(a.threshold_samples == b.threshold_samples);
    CHECK(a.histogram.logic0 == b.histogram.logic0);
    CHECK(a.histogram.logic1 == b.histogram.logic1);
    c.threads = 1;
    CHECK(run_mc(c).ber_samples == a.ber_samples);

    McConfig bad = c;
    bad.trials = 0;
    CHECK_THROWS_AS(run_mc(bad), InputError);
    bad = c;
    bad.p_one = 1.5;
    CHECK_THROWS_AS(run_mc(bad), InputError);
}

TEST_CASE("bit error rate grows with interconnect resistance") {
    McConfig c;
    c.pair = std::make_shared<const StrandPair>(representative_pair());
    c.trials = 100;
    c.delta_max = 0.2;
    c.seed = 11;
    c.r_int_ohm = 1e5;
    const double low = run_mc(c).ber_mean;
    c.r_int_ohm = 1e6;
    const double high = run_mc(c).ber_mean;
    CHECK(high > low);
}
