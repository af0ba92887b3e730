#pragma once

#include "dnaxbar/common.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace dnaxbar {

// Per-strand current lookup over (Fermi offset, bias). current(d, v) is the
// current in amperes at delta_grid[d] and v_grid[v].
struct IVTable {
    std::string strand_id;
    std::vector<double> v_grid;      // V, strictly increasing
    std::vector<double> delta_grid;  // eV, strictly increasing
    Matrix current;                  // A, rows = delta, cols = v

    double v_min() const { return v_grid.front(); }
    double v_max() const { return v_grid.back(); }
    double delta_min() const { return delta_grid.front(); }
    double delta_max() const { return delta_grid.back(); }
};

// Bilinear interpolation on the (delta, v) grid. Exact at nodes; throws
// InputError outside the stored box.
double interpolate_current(const IVTable& table, double v, double delta);

inline constexpr double kDefaultVFloor = 1e-3;  // V

// Secant conductance I(v)/v, held at I(v_floor)/v_floor below v_floor.
double small_signal_conductance(const IVTable& table, double v, double delta,
                                double v_floor = kDefaultVFloor);

struct SynthesisParams {
    std::string strand_id = "synthetic";
    double r_low = 1e6;               // ohm, high-bias resistance
    double r_high = 1e6;              // ohm, low-bias resistance
    double knee = 0.5;                // V
    double delta_sensitivity = 10.0;  // 1/eV
    std::vector<double> v_grid;       // defaults to 0..1 V in 10 mV steps
    std::vector<double> delta_grid;   // defaults to 0..0.2 eV in 10 meV steps
};

// Smooth monotone stand-in for a transport-derived table:
//   I(V, d) = V * [g_high + (g_low - g_high) * V^2 / (V^2 + knee^2)] * exp(-s * d)
// with g_low = 1/r_low and g_high = 1/r_high.
IVTable synthesize_table(const SynthesisParams& params);

std::vector<double> uniform_grid(double lo, double hi, double step);

enum class ViolationKind { GridShape, GridOrder, GridSpan, NonFinite, ZeroBias, NonMonotone };

struct TableViolation {
    ViolationKind kind;
    std::size_t delta_index = 0;
    std::size_t v_index = 0;
    std::string message;
};

// Checks every table invariant and reports each violation with its indices.
std::vector<TableViolation> validate_table(const IVTable& table);

// Throws InputError if the table cannot be interpolated at all (shape, order,
// finiteness). Span and monotonicity problems are left to validate_table.
void require_usable(const IVTable& table);

struct StrandPair {
    IVTable logic1;  // stored where the bit is 1
    IVTable logic0;
    std::string mapping_note;

    const IVTable& table_for(bool bit) const { return bit ? logic1 : logic0; }
    void validate() const;
};

// Parameters of the shipped representative tables.
SynthesisParams representative_logic1_params();
SynthesisParams representative_logic0_params();
StrandPair representative_pair();

}  // namespace dnaxbar
