#include "dnaxbar/storage.hpp"
#include "dnaxbar/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace dnaxbar {

std::vector<std::uint8_t> image_to_bits(const ImageJob& job) {
    if (job.source.empty()) throw InputError("image_to_bits: empty input '" + job.name + "'");
    std::vector<std::uint8_t> bits;
    if (job.mode == Binarization::GrayThreshold) {
        bits.reserve(job.source.size());
        for (auto byte : job.source) bits.push_back(byte >= job.level ? 1 : 0);
        return bits;
    }
    bits.reserve(job.source.size() * 8);
    for (auto byte : job.source)
        for (int k = 7; k >= 0; --k) bits.push_back((byte >> k) & 1u);
    return bits;
}

TileSet tile_bits(const std::vector<std::uint8_t>& bits, int m, int n) {
    if (m < 1 || n < 1) throw InputError("tile_bits: tile dimensions must be at least 1");
    const std::size_t cells = static_cast<std::size_t>(m) * static_cast<std::size_t>(n);
    TileSet set;
    const std::size_t count = (bits.size() + cells - 1) / cells;
    set.pad = count * cells - bits.size();
    for (std::size_t t = 0; t < count; ++t) {
        Tile tile;
        tile.bits = BitMatrix::Zero(m, n);
        const std::size_t start = t * cells;
        tile.valid = std::min(cells, bits.size() - start);
        for (std::size_t c = 0; c < tile.valid; ++c)
            tile.bits(static_cast<Eigen::Index>(c / n), static_cast<Eigen::Index>(c % n)) = bits[start + c] ? 1 : 0;
        set.tiles.push_back(std::move(tile));
    }
    return set;
}

std::vector<std::uint8_t> untile_bits(const TileSet& set) {
    std::vector<std::uint8_t> out;
    for (const auto& tile : set.tiles) {
        const auto n = static_cast<std::size_t>(tile.bits.cols());
        for (std::size_t c = 0; c < tile.valid; ++c)
            out.push_back(tile.bits(static_cast<Eigen::Index>(c / n), static_cast<Eigen::Index>(c % n)));
    }
    return out;
}

std::optional<double> bit_load(const Tile& tile) {
    const std::size_t cells = std::min(tile.valid, static_cast<std::size_t>(tile.bits.size()));
    if (cells == 0) return std::nullopt;
    const auto n = static_cast<std::size_t>(tile.bits.cols());
    std::size_t ones = 0;
    for (std::size_t c = 0; c < cells; ++c)
        ones += tile.bits(static_cast<Eigen::Index>(c / n), static_cast<Eigen::Index>(c % n)) != 0;
    return 100.0 * static_cast<double>(ones) / static_cast<double>(cells);
}

BitMatrix reconstruct_bits(const Matrix& i_out, double threshold, Polarity polarity, std::size_t valid) {
    BitMatrix out = BitMatrix::Zero(i_out.rows(), i_out.cols());
    const auto n = static_cast<std::size_t>(i_out.cols());
    const std::size_t cells = std::min(valid, static_cast<std::size_t>(i_out.size()));
    for (std::size_t c = 0; c < cells; ++c) {
        const auto i = static_cast<Eigen::Index>(c / n), j = static_cast<Eigen::Index>(c % n);
        out(i, j) = classify(i_out(i, j), threshold, polarity) ? 1 : 0;
    }
    return out;
}

BoxStats box_stats(std::vector<double> v) {
    if (v.empty()) throw InputError("box_stats: empty sample");
    std::sort(v.begin(), v.end());
    auto q = [&](double p) {
        const double pos = p * static_cast<double>(v.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, v.size() - 1);
        return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
    };
    return {v.front(), q(0.25), q(0.5), q(0.75), v.back(), v.size()};
}

namespace {

struct WorkTile {
    const Tile* tile;
    std::string job;
    std::size_t id;
};

StorageReport run_work(const std::vector<WorkTile>& work, const std::shared_ptr<const StrandPair>& pair,
                       const std::vector<double>& r_int_list, const StorageOptions& options) {
    if (!pair) throw InputError("storage: no strand pair attached");
    if (r_int_list.empty()) throw InputError("storage: no interconnect resistances given");
    StorageReport rep;
    std::vector<const WorkTile*> active;
    for (const auto& w : work) {
        if (bit_load(*w.tile)) active.push_back(&w);
        else ++rep.skipped_tiles;
    }

    const std::size_t jobs = active.size() * r_int_list.size();
    std::vector<std::optional<TileResult>> results(jobs);
    SolverOptions solver_options;
    solver_options.threads = 1;

    // Calibrate up front so workers share cached parameters.
    if (options.solver == SolverKind::Parametric) {
        std::vector<std::pair<int, int>> shapes;
        for (const auto* w : active) shapes.emplace_back(static_cast<int>(w->tile->bits.rows()), static_cast<int>(w->tile->bits.cols()));
        std::sort(shapes.begin(), shapes.end());
        shapes.erase(std::unique(shapes.begin(), shapes.end()), shapes.end());
        for (auto [m, n] : shapes)
            for (double r : r_int_list) {
                CrossbarSpec s;
                s.m = m;
                s.n = n;
                s.r_int_ohm = r;
                s.v_in = options.v_in;
                s.pair = pair;
                calibrate_sneak_params(s, default_calibration_inputs(s), options.threads);
            }
    }

    parallel_for(jobs, resolve_threads(options.threads), [&](std::size_t k) {
        const WorkTile& w = *active[k / r_int_list.size()];
        const double r = r_int_list[k % r_int_list.size()];
        CrossbarSpec spec;
        spec.m = static_cast<int>(w.tile->bits.rows());
        spec.n = static_cast<int>(w.tile->bits.cols());
        spec.r_int_ohm = r;
        spec.v_in = options.v_in;
        spec.bits = w.tile->bits;
        spec.pair = pair;
        ReadoutSolution sol;
        try {
            sol = solve(spec, options.solver, solver_options);
        } catch (const NumericalError&) {
            return;
        }
        if (!sol.converged) return;

        const std::size_t valid = w.tile->valid;
        std::vector<double> cur(valid);
        std::vector<std::uint8_t> lab(valid);
        for (std::size_t c = 0; c < valid; ++c) {
            const auto i = static_cast<Eigen::Index>(c / spec.n), j = static_cast<Eigen::Index>(c % spec.n);
            cur[c] = sol.i_out(i, j);
            lab[c] = spec.bits(i, j);
        }
        const auto th = optimal_threshold(cur, lab);
        TileResult t;
        t.tile_id = w.id;
        t.job = w.job;
        t.m = spec.m;
        t.n = spec.n;
        t.r_int_ohm = r;
        t.bit_load_pct = *bit_load(*w.tile);
        t.ber = compute_ber(sol.i_out, spec.bits, th.threshold, th.polarity, valid);
        t.power_w = sol.power_w;
        t.threshold = th.threshold;
        t.polarity = th.polarity;
        t.exact = reconstruct_bits(sol.i_out, th.threshold, th.polarity, valid) == spec.bits;
        results[k] = t;
    });

    std::map<StorageKey, std::map<int, std::vector<double>>> bers;
    std::map<StorageKey, std::pair<double, std::size_t>> power;
    for (auto& r : results) {
        if (!r) {
            ++rep.failed_tiles;
            continue;
        }
        const StorageKey key{r->m, r->n, r->r_int_ohm};
        bers[key][static_cast<int>(std::lround(r->bit_load_pct))].push_back(r->ber);
        auto& p = power[key];
        p.first += r->power_w;
        p.second += 1;
        rep.per_tile.push_back(std::move(*r));
    }
    for (auto& [key, bins] : bers)
        for (auto& [bin, values] : bins) rep.binned_ber[key][bin] = box_stats(values);
    for (auto& [key, p] : power) rep.power_vs_rint[key] = p.first / static_cast<double>(p.second);
    return rep;
}

void merge(StorageReport& into, StorageReport&& part) {
    for (auto& t : part.per_tile) into.per_tile.push_back(std::move(t));
    for (auto& [k, v] : part.binned_ber) into.binned_ber[k] = std::move(v);
    for (auto& [k, v] : part.power_vs_rint) into.power_vs_rint[k] = v;
    into.failed_tiles += part.failed_tiles;
    into.skipped_tiles += part.skipped_tiles;
}

}  // namespace

StorageReport run_storage_tiles(const std::vector<Tile>& tiles, std::shared_ptr<const StrandPair> pair,
                                const std::vector<double>& r_int_list, const StorageOptions& options) {
    // Group by shape so each key sees one consistent tile population.
    std::map<std::pair<Eigen::Index, Eigen::Index>, std::vector<WorkTile>> groups;
    for (std::size_t i = 0; i < tiles.size(); ++i)
        groups[{tiles[i].bits.rows(), tiles[i].bits.cols()}].push_back({&tiles[i], "tiles", i});
    StorageReport rep;
    for (auto& [shape, work] : groups) merge(rep, run_work(work, pair, r_int_list, options));
    return rep;
}

StorageReport run_storage_benchmark(const std::vector<ImageJob>& jobs, std::shared_ptr<const StrandPair> pair,
                                    const std::vector<double>& r_int_list,
                                    const std::vector<std::pair<int, int>>& sizes, const StorageOptions& options) {
    if (jobs.empty()) throw InputError("storage: no images given");
    if (sizes.empty()) throw InputError("storage: no array sizes given");
    std::vector<std::vector<std::uint8_t>> bits;
    bits.reserve(jobs.size());
    for (const auto& job : jobs) bits.push_back(image_to_bits(job));

    StorageReport rep;
    for (auto [m, n] : sizes) {
        std::vector<TileSet> sets;
        sets.reserve(jobs.size());
        for (const auto& b : bits) sets.push_back(tile_bits(b, m, n));
        std::vector<WorkTile> work;
        std::size_t id = 0;
        for (std::size_t j = 0; j < jobs.size(); ++j)
            for (const auto& tile : sets[j].tiles) work.push_back({&tile, jobs[j].name, id++});
        merge(rep, run_work(work, pair, r_int_list, options));
    }
    return rep;
}

}  // namespace dnaxbar
