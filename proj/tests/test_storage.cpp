#include "dnaxbar/storage.hpp"

#include <doctest.h>

#include <bit>
#include <random>

using namespace dnaxbar;

namespace {

std::size_t popcount_bytes(const std::vector<std::uint8_t>& bytes) {
    std::size_t n = 0;
    for (auto b : bytes) n += static_cast<std::size_t>(std::popcount(b));
    return n;
}

std::vector<std::uint8_t> random_bytes(std::size_t n, unsigned seed) {
    std::mt19937 gen(seed);
    std::vector<std::uint8_t> v(n);
    for (auto& b : v) b = static_cast<std::uint8_t>(gen() & 0xffu);
    return v;
}

}  // namespace

TEST_CASE("image to bits") {
    ImageJob job;
    job.source = {0xF0};
    CHECK(image_to_bits(job) == std::vector<std::uint8_t>{1, 1, 1, 1, 0, 0, 0, 0});
    job.source = {0, 255};
    job.mode = Binarization::GrayThreshold;
    CHECK(image_to_bits(job) == std::vector<std::uint8_t>{0, 1});
    job.source = {127, 128};
    CHECK(image_to_bits(job) == std::vector<std::uint8_t>{0, 1});
    job.source.clear();
    CHECK_THROWS_AS(image_to_bits(job), InputError);

    ImageJob raw;
    raw.source = random_bytes(1000, 1);
    const auto bits = image_to_bits(raw);
    CHECK(bits.size() == 8000);
    std::size_t ones = 0;
    for (auto b : bits) ones += b;
    CHECK(ones == popcount_bytes(raw.source));
}

TEST_CASE("tiling") {
    std::vector<std::uint8_t> bits(10, 1);
    auto set = tile_bits(bits, 2, 2);
    CHECK(set.tiles.size() == 3);
    CHECK(set.pad == 2);
    CHECK(set.tiles[2].valid == 2);
    CHECK(set.tiles[2].bits(1, 0) == 0);
    CHECK(set.tiles[2].bits(1, 1) == 0);

    set = tile_bits(std::vector<std::uint8_t>(12, 0), 3, 4);
    CHECK(set.tiles.size() == 1);
    CHECK(set.pad == 0);

    ImageJob raw;
    raw.source = random_bytes(333, 2);
    const auto in = image_to_bits(raw);
    set = tile_bits(in, 7, 5);
    CHECK(untile_bits(set) == in);
    // Row-major fill.
    CHECK(set.tiles[0].bits(0, 4) == in[4]);
    CHECK(set.tiles[0].bits(1, 0) == in[5]);
}

TEST_CASE("bit load") {
    Tile t;
    t.bits = BitMatrix::Zero(4, 4);
    t.valid = 16;
    CHECK(*bit_load(t) == 0.0);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) t.bits(i, j) = static_cast<std::uint8_t>((i + j) % 2);
    CHECK(*bit_load(t) == 50.0);
    t.valid = 0;
    CHECK(!bit_load(t).has_value());

    std::mt19937 gen(3);
    t.bits.resize(16, 16);
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j) t.bits(i, j) = static_cast<std::uint8_t>(gen() % 3 == 0);
    t.valid = 200;
    std::size_t ones = 0;
    for (std::size_t k = 0; k < 200; ++k) ones += t.bits(static_cast<Eigen::Index>(k / 16), static_cast<Eigen::Index>(k % 16));
    CHECK(*bit_load(t) == doctest::Approx(100.0 * static_cast<double>(ones) / 200.0).epsilon(1e-15));
}

TEST_CASE("reconstruction") {
    std::mt19937 gen(8);
    Matrix cur(16, 16);
    BitMatrix bits(16, 16);
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j) {
            bits(i, j) = static_cast<std::uint8_t>(gen() & 1u);
            cur(i, j) = (bits(i, j) ? 10e-9 : 1e-9) * (1.0 + 0.1 * (gen() % 5));
        }
    CHECK(reconstruct_bits(cur, 5e-9, Polarity::HighIsOne, 256) == bits);
    CHECK(reconstruct_bits(cur, 1.0, Polarity::HighIsOne, 256) == BitMatrix::Zero(16, 16));

    const double t = 2.2e-9;
    for (auto pol : {Polarity::HighIsOne, Polarity::LowIsOne}) {
        const BitMatrix r = reconstruct_bits(cur, t, pol, 250);
        for (int k = 0; k < 256; ++k) {
            const int i = k / 16, j = k % 16;
            const bool high = cur(i, j) > t;
            const int want = k >= 250 ? 0 : (pol == Polarity::HighIsOne ? high : !high);
            CHECK(r(i, j) == want);
        }
    }
}

TEST_CASE("box statistics") {
    const BoxStats b = box_stats({5, 1, 3, 2, 4});
    CHECK(b.min == 1);
    CHECK(b.q1 == 2);
    CHECK(b.median == 3);
    CHECK(b.q3 == 4);
    CHECK(b.max == 5);
    CHECK(b.count == 5);
    const BoxStats e = box_stats({1, 2, 3, 4});
    CHECK(e.median == 2.5);
    CHECK(e.q1 == 1.75);
    CHECK(e.q3 == 3.25);
    CHECK_THROWS_AS(box_stats({}), InputError);
}

TEST_CASE("storage pipeline") {
    auto pair = std::make_shared<const StrandPair>(representative_pair());
    SUBCASE("all-zero tile") {
        Tile t;
        t.bits = BitMatrix::Zero(8, 8);
        t.valid = 64;
        const auto rep = run_storage_tiles({t}, pair, {1e4});
        REQUIRE(rep.per_tile.size() == 1);
        CHECK(rep.per_tile[0].bit_load_pct == 0.0);
        CHECK(rep.per_tile[0].ber == 0.0);
        CHECK(rep.per_tile[0].exact);
    }
    SUBCASE("image round trip at low interconnect resistance") {
        ImageJob job;
        job.name = "noise";
        job.source = random_bytes(2048, 5);
        const auto rep = run_storage_benchmark({job}, pair, {1e4}, {{16, 16}, {32, 32}});
        CHECK(rep.per_tile.size() == 64 + 16);
        for (const auto& t : rep.per_tile) {
            CHECK(t.ber == 0.0);
            CHECK(t.exact);
        }
        CHECK(rep.failed_tiles == 0);
        CHECK(rep.power_vs_rint.size() == 2);
    }
    SUBCASE("power averages and bins") {
        std::vector<Tile> tiles;
        std::mt19937 gen(6);
        for (int k = 0; k < 6; ++k) {
            Tile t;
            t.bits.resize(8, 8);
            for (int i = 0; i < 8; ++i)
                for (int j = 0; j < 8; ++j) t.bits(i, j) = static_cast<std::uint8_t>(gen() % 4 < static_cast<unsigned>(k % 4));
            t.valid = 64;
            tiles.push_back(t);
        }
        const auto rep = run_storage_tiles(tiles, pair, {1e4, 1e6});
        for (double r : {1e4, 1e6}) {
            double sum = 0;
            int count = 0;
            for (const auto& t : rep.per_tile)
                if (t.r_int_ohm == r) {
                    sum += t.power_w;
                    ++count;
                }
            CHECK(rep.power_vs_rint.at({8, 8, r}) == doctest::Approx(sum / count).epsilon(1e-12));
        }
        std::size_t binned = 0;
        for (const auto& [bin, stats] : rep.binned_ber.at({8, 8, 1e4})) binned += stats.count;
        CHECK(binned == 6);
    }
}
