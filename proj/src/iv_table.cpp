#include "dnaxbar/iv_table.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dnaxbar {

namespace {

// Locates the cell [i, i+1] containing x and the fractional position t in it.
// At the last node this returns the final cell with t = 1.
void locate(const std::vector<double>& grid, double x, std::size_t& i, double& t) {
    if (grid.size() == 1) {
        i = 0;
        t = 0.0;
        return;
    }
    auto it = std::upper_bound(grid.begin(), grid.end(), x);
    std::size_t hi = static_cast<std::size_t>(it - grid.begin());
    if (hi >= grid.size()) hi = grid.size() - 1;
    if (hi == 0) hi = 1;
    i = hi - 1;
    t = (x - grid[i]) / (grid[hi] - grid[i]);
}

std::string box_message(const IVTable& table, double v, double delta) {
    std::ostringstream os;
    os << "IV table '" << table.strand_id << "': query (v=" << v << " V, delta=" << delta
       << " eV) outside admissible box v in [" << table.v_min() << ", " << table.v_max()
       << "] V, delta in [" << table.delta_min() << ", " << table.delta_max() << "] eV";
    return os.str();
}

bool strictly_increasing(const std::vector<double>& g) {
    for (std::size_t i = 1; i < g.size(); ++i)
        if (!(g[i] > g[i - 1])) return false;
    return true;
}

}  // namespace

double interpolate_current(const IVTable& table, double v, double delta) {
    if (!(v >= table.v_min() && v <= table.v_max() && delta >= table.delta_min() &&
          delta <= table.delta_max()))
        throw InputError(box_message(table, v, delta));

    std::size_t iv = 0, id = 0;
    double tv = 0.0, td = 0.0;
    locate(table.v_grid, v, iv, tv);
    locate(table.delta_grid, delta, id, td);

    const auto& c = table.current;
    if (table.v_grid.size() == 1 && table.delta_grid.size() == 1) return c(0, 0);
    if (table.delta_grid.size() == 1) return c(0, iv) * (1.0 - tv) + c(0, iv + 1) * tv;
    if (table.v_grid.size() == 1) return c(id, 0) * (1.0 - td) + c(id + 1, 0) * td;

    // Interpolating along v first keeps node values bit-exact (weights 0 and 1).
    double lo = tv == 0.0 ? c(id, iv) : (tv == 1.0 ? c(id, iv + 1) : c(id, iv) * (1.0 - tv) + c(id, iv + 1) * tv);
    double hi = tv == 0.0 ? c(id + 1, iv)
                          : (tv == 1.0 ? c(id + 1, iv + 1) : c(id + 1, iv) * (1.0 - tv) + c(id + 1, iv + 1) * tv);
    if (td == 0.0) return lo;
    if (td == 1.0) return hi;
    return lo * (1.0 - td) + hi * td;
}

double small_signal_conductance(const IVTable& table, double v, double delta, double v_floor) {
    if (v_floor <= 0.0) throw InputError("small_signal_conductance: v_floor must be positive");
    if (std::abs(v) < v_floor) {
        // Keep the same box check as the requested point.
        if (!(v >= table.v_min() && v <= table.v_max())) throw InputError(box_message(table, v, delta));
        double vf = v < 0.0 && table.v_min() <= -v_floor ? -v_floor : v_floor;
        return interpolate_current(table, vf, delta) / vf;
    }
    return interpolate_current(table, v, delta) / v;
}

std::vector<double> uniform_grid(double lo, double hi, double step) {
    if (!(step > 0.0) || !(hi >= lo)) throw InputError("uniform_grid: need step > 0 and hi >= lo");
    const double steps = (hi - lo) / step;
    const auto intervals = static_cast<std::size_t>(std::llround(steps));
    if (std::abs(steps - static_cast<double>(intervals)) > 1e-9 * std::max(1.0, steps))
        throw InputError("uniform_grid: (hi - lo) must be a whole number of steps");
    std::vector<double> g(intervals + 1);
    for (std::size_t i = 0; i <= intervals; ++i)
        g[i] = intervals == 0 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(intervals);
    return g;
}

IVTable synthesize_table(const SynthesisParams& p) {
    if (!(p.r_low > 0.0) || !(p.r_high > 0.0) || !std::isfinite(p.r_low) || !std::isfinite(p.r_high))
        throw InputError("synthesize_table: resistances must be positive and finite");
    if (p.r_low > p.r_high) throw InputError("synthesize_table: r_low must not exceed r_high");
    if (!(p.knee > 0.0 && p.knee < 1.0)) throw InputError("synthesize_table: knee must lie in (0, 1) V");
    if (!(p.delta_sensitivity >= 0.0) || !std::isfinite(p.delta_sensitivity))
        throw InputError("synthesize_table: delta_sensitivity must be non-negative");

    IVTable t;
    t.strand_id = p.strand_id;
    t.v_grid = p.v_grid.empty() ? uniform_grid(0.0, 1.0, 0.01) : p.v_grid;
    t.delta_grid = p.delta_grid.empty() ? uniform_grid(0.0, 0.2, 0.01) : p.delta_grid;
    if (!strictly_increasing(t.v_grid) || !strictly_increasing(t.delta_grid))
        throw InputError("synthesize_table: grids must be strictly increasing");

    const double g_low = 1.0 / p.r_low;
    const double g_high = 1.0 / p.r_high;
    const double k2 = p.knee * p.knee;
    t.current.resize(static_cast<Eigen::Index>(t.delta_grid.size()), static_cast<Eigen::Index>(t.v_grid.size()));
    for (std::size_t d = 0; d < t.delta_grid.size(); ++d) {
        const double scale = std::exp(-p.delta_sensitivity * t.delta_grid[d]);
        for (std::size_t k = 0; k < t.v_grid.size(); ++k) {
            const double v = t.v_grid[k];
            const double s = v * v / (v * v + k2);
            t.current(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k)) =
                v * (g_high + (g_low - g_high) * s) * scale;
        }
    }

    auto violations = validate_table(t);
    if (!violations.empty()) throw InputError("synthesize_table: " + violations.front().message);
    return t;
}

std::vector<TableViolation> validate_table(const IVTable& t) {
    std::vector<TableViolation> out;
    auto add = [&](ViolationKind k, std::size_t d, std::size_t v, std::string msg) {
        out.push_back({k, d, v, std::move(msg)});
    };

    if (t.v_grid.empty() || t.delta_grid.empty() ||
        t.current.rows() != static_cast<Eigen::Index>(t.delta_grid.size()) ||
        t.current.cols() != static_cast<Eigen::Index>(t.v_grid.size())) {
        add(ViolationKind::GridShape, 0, 0, "current matrix shape does not match grids");
        return out;
    }
    for (std::size_t i = 1; i < t.v_grid.size(); ++i)
        if (!(t.v_grid[i] > t.v_grid[i - 1]))
            add(ViolationKind::GridOrder, 0, i, "v_grid not strictly increasing at index " + std::to_string(i));
    for (std::size_t i = 1; i < t.delta_grid.size(); ++i)
        if (!(t.delta_grid[i] > t.delta_grid[i - 1]))
            add(ViolationKind::GridOrder, i, 0, "delta_grid not strictly increasing at index " + std::to_string(i));
    if (!(t.v_min() <= 0.0 && t.v_max() >= 1.0))
        add(ViolationKind::GridSpan, 0, 0, "v_grid must span at least [0, 1] V");
    if (!(t.delta_min() <= 0.0 && t.delta_max() >= 0.2))
        add(ViolationKind::GridSpan, 0, 0, "delta_grid must span at least [0, 0.2] eV");

    for (std::size_t d = 0; d < t.delta_grid.size(); ++d)
        for (std::size_t v = 0; v < t.v_grid.size(); ++v)
            if (!std::isfinite(t.current(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(v))))
                add(ViolationKind::NonFinite, d, v,
                    "non-finite current at (delta " + std::to_string(d) + ", v " + std::to_string(v) + ")");

    auto zero = std::find(t.v_grid.begin(), t.v_grid.end(), 0.0);
    if (zero != t.v_grid.end()) {
        auto vz = static_cast<std::size_t>(zero - t.v_grid.begin());
        for (std::size_t d = 0; d < t.delta_grid.size(); ++d)
            if (t.current(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(vz)) != 0.0)
                add(ViolationKind::ZeroBias, d, vz, "non-zero current at zero bias for delta index " + std::to_string(d));
    }

    for (std::size_t d = 0; d < t.delta_grid.size(); ++d)
        for (std::size_t v = 1; v < t.v_grid.size(); ++v) {
            if (t.v_grid[v - 1] < 0.0 || t.v_grid[v] > 1.0) continue;
            auto r = static_cast<Eigen::Index>(d);
            if (t.current(r, static_cast<Eigen::Index>(v)) < t.current(r, static_cast<Eigen::Index>(v - 1)))
                add(ViolationKind::NonMonotone, d, v,
                    "current decreases in V at (delta " + std::to_string(d) + ", v " + std::to_string(v) + ")");
        }
    return out;
}

void require_usable(const IVTable& t) {
    for (const auto& v : validate_table(t)) {
        if (v.kind == ViolationKind::GridShape || v.kind == ViolationKind::GridOrder ||
            v.kind == ViolationKind::NonFinite)
            throw InputError("IV table '" + t.strand_id + "': " + v.message);
    }
}

void StrandPair::validate() const {
    require_usable(logic1);
    require_usable(logic0);
    if (logic1.strand_id == logic0.strand_id)
        throw InputError("strand pair: logic tables must have distinct strand ids (both '" + logic1.strand_id + "')");
}

SynthesisParams representative_logic1_params() {
    SynthesisParams p;
    p.strand_id = "B-CT1C";
    p.r_low = 2e8;
    p.r_high = 1e9;
    p.knee = 0.5;
    p.delta_sensitivity = 10.0;
    return p;
}

SynthesisParams representative_logic0_params() {
    SynthesisParams p;
    p.strand_id = "B-TC1T";
    p.r_low = 2e9;
    p.r_high = 1e10;
    p.knee = 0.5;
    p.delta_sensitivity = 10.0;
    return p;
}

StrandPair representative_pair() {
    return StrandPair{synthesize_table(representative_logic1_params()),
                      synthesize_table(representative_logic0_params()),
                      "logic 1 = B-CT1C (high conductance), logic 0 = B-TC1T; synthetic representative tables"};
}

}  // namespace dnaxbar
