#pragma once

#include "dnaxbar/crossbar.hpp"
#include "dnaxbar/iv_table.hpp"
#include "dnaxbar/storage.hpp"
#include "dnaxbar/transport.hpp"
#include "dnaxbar/variability.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dnaxbar::io {

using Json = nlohmann::json;
namespace fs = std::filesystem;

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

// Parses JSON text; syntax errors name the source, line and column.
Json parse_json(const std::string& text, const std::string& source);
Json read_json(const fs::path& path);
// Pretty-printed with round-trip precision.
void write_json(const fs::path& path, const Json& value);

// Shortest-round-trip decimal (17 significant digits).
std::string format_double(double x);

// Typed field access; errors name the source and field path.
class Reader {
public:
    Reader(const Json& value, std::string source, std::string path = "")
        : value_(value), source_(std::move(source)), path_(std::move(path)) {}

    bool has(const std::string& key) const;
    Reader at(const std::string& key) const;
    double number(const std::string& key) const;
    double number_or(const std::string& key, double fallback) const;
    std::int64_t integer(const std::string& key) const;
    std::int64_t integer_or(const std::string& key, std::int64_t fallback) const;
    std::uint64_t unsigned_or(const std::string& key, std::uint64_t fallback) const;
    std::string text(const std::string& key) const;
    std::string text_or(const std::string& key, const std::string& fallback) const;
    bool flag_or(const std::string& key, bool fallback) const;
    std::vector<double> numbers(const std::string& key) const;
    std::vector<std::int64_t> integers(const std::string& key) const;
    std::vector<std::string> texts(const std::string& key) const;

    const Json& json() const { return value_; }
    [[noreturn]] void fail(const std::string& key, const std::string& what) const;

private:
    const Json& field(const std::string& key) const;
    std::string where(const std::string& key) const;

    const Json& value_;
    std::string source_;
    std::string path_;
};

// QuantumSystem: n_orb, partition, homo_energy_ev, fock, overlap (row-major).
QuantumSystem quantum_system_from_json(const Json& j, const std::string& source = "quantum system");
Json to_json(const QuantumSystem& s);
QuantumSystem load_quantum_system(const fs::path& path);
void save_quantum_system(const fs::path& path, const QuantumSystem& s);

// IVTable: strand_id, v_grid_v, delta_grid_ev, current_a (delta-major).
IVTable iv_table_from_json(const Json& j, const std::string& source = "iv table");
Json to_json(const IVTable& t);
IVTable load_iv_table(const fs::path& path);
void save_iv_table(const fs::path& path, const IVTable& t);

// Crossbar spec plus the optional calibration overrides it may carry.
struct SpecFile {
    CrossbarSpec spec;
    fs::path logic1_path;
    fs::path logic0_path;
    std::optional<double> g_active;
    std::optional<double> g_float;
};

// Table paths are resolved against base_dir.
SpecFile crossbar_spec_from_json(const Json& j, const fs::path& base_dir, const std::string& source = "crossbar spec");
Json to_json(const CrossbarSpec& s, const fs::path& logic1_path, const fs::path& logic0_path);
SpecFile load_crossbar_spec(const fs::path& path);

// Loads the logic pair named by logic1_table / logic0_table, or the shipped
// representative tables when both are absent.
std::shared_ptr<const StrandPair> load_pair(const Reader& r, const fs::path& base_dir);

McConfig mc_config_from_json(const Json& j, const fs::path& base_dir, const std::string& source = "mc config");
McConfig load_mc_config(const fs::path& path);

// CSV helpers. Matrices are written without a header, one row per line.
void write_matrix_csv(const fs::path& path, const Matrix& m);
Matrix read_matrix_csv(const fs::path& path);
std::string long_format_csv(const Matrix& m);  // "row,col,value"

// Output writers; each returns the files it created relative to dir.
std::vector<std::string> write_solution(const fs::path& dir, const ReadoutSolution& s);
std::vector<std::string> write_mc_report(const fs::path& dir, const McReport& r, const McConfig& c);
std::vector<std::string> write_storage_report(const fs::path& dir, const StorageReport& r);

Json to_json(const BoxStats& b);

}  // namespace dnaxbar::io
