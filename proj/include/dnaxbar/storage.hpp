#pragma once

#include "dnaxbar/crossbar.hpp"
#include "dnaxbar/variability.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dnaxbar {

enum class Binarization { RawBits, GrayThreshold };

struct ImageJob {
    std::string name;
    std::vector<std::uint8_t> source;
    Binarization mode = Binarization::RawBits;
    std::uint8_t level = 128;  // gray-threshold cut: byte >= level is a 1
};

// Raw mode expands each byte most significant bit first; gray mode emits one
// bit per byte.
std::vector<std::uint8_t> image_to_bits(const ImageJob& job);

struct Tile {
    BitMatrix bits;
    std::size_t valid = 0;  // leading row-major cells that carry data; the rest is zero padding
};

struct TileSet {
    std::vector<Tile> tiles;
    std::size_t pad = 0;
};

// Row-major fill of m x n tiles; the last tile is zero padded.
TileSet tile_bits(const std::vector<std::uint8_t>& bits, int m, int n);

// Concatenates the data cells of every tile (inverse of tile_bits).
std::vector<std::uint8_t> untile_bits(const TileSet& set);

// 100 * ones / data cells; empty for an all-pad tile.
std::optional<double> bit_load(const Tile& tile);

// Thresholded bits; padded cells read as 0.
BitMatrix reconstruct_bits(const Matrix& i_out, double threshold, Polarity polarity, std::size_t valid);

struct BoxStats {
    double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
    std::size_t count = 0;
};

// Linear-interpolated quartiles of a non-empty sample.
BoxStats box_stats(std::vector<double> values);

struct TileResult {
    std::size_t tile_id = 0;  // index over all tiles of all jobs for this size
    std::string job;
    int m = 0, n = 0;
    double r_int_ohm = 0.0;
    double bit_load_pct = 0.0;
    double ber = 0.0;
    double power_w = 0.0;
    double threshold = 0.0;
    Polarity polarity = Polarity::HighIsOne;
    bool exact = false;  // reconstruction equals the stored bits
};

struct StorageKey {
    int m = 0, n = 0;
    double r_int_ohm = 0.0;
    auto operator<=>(const StorageKey&) const = default;
};

struct StorageReport {
    std::vector<TileResult> per_tile;
    std::map<StorageKey, std::map<int, BoxStats>> binned_ber;  // by rounded bit-load percent
    std::map<StorageKey, double> power_vs_rint;                // mean power, W
    std::size_t failed_tiles = 0;
    std::size_t skipped_tiles = 0;  // all-pad tiles
};

struct StorageOptions {
    SolverKind solver = SolverKind::Parametric;
    int threads = 0;
    double v_in = 1.0;
};

StorageReport run_storage_benchmark(const std::vector<ImageJob>& jobs, std::shared_ptr<const StrandPair> pair,
                                    const std::vector<double>& r_int_list,
                                    const std::vector<std::pair<int, int>>& sizes, const StorageOptions& options = {});

// Same pipeline over prepared tiles (used for synthetic bit-load sweeps).
StorageReport run_storage_tiles(const std::vector<Tile>& tiles, std::shared_ptr<const StrandPair> pair,
                                const std::vector<double>& r_int_list, const StorageOptions& options = {});

}  // namespace dnaxbar
