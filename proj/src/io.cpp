#include "dnaxbar/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <regex>
#include <sstream>

namespace dnaxbar::io {

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path.string() + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw InputError("write failed for '" + path.string() + "'");
}

Json parse_json(const std::string& text, const std::string& source) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        std::size_t line = 1, col = 1;
        const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
        for (std::size_t i = 0; i < end; ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        std::ostringstream os;
        os << source << ":" << line << ":" << col << ": JSON syntax error";
        const std::string what = e.what();
        if (auto p = what.find("syntax error"); p != std::string::npos) os << " (" << what.substr(p) << ")";
        // Name the field being read when the text stops early.
        static const std::regex key_re("\"([^\"\\\\]+)\"\\s*:");
        std::string last_key;
        const std::string prefix = text.substr(0, end);
        for (std::sregex_iterator it(prefix.begin(), prefix.end(), key_re), stop; it != stop; ++it) last_key = (*it)[1];
        if (!last_key.empty()) os << " while reading field '" << last_key << "'";
        throw InputError(os.str());
    }
}

Json read_json(const fs::path& path) { return parse_json(read_text(path), path.string()); }

void write_json(const fs::path& path, const Json& value) { write_text(path, value.dump(2) + "\n"); }

std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// Reader ---------------------------------------------------------------------

std::string Reader::where(const std::string& key) const {
    return source_ + ": field '" + (path_.empty() ? key : path_ + "." + key) + "'";
}

void Reader::fail(const std::string& key, const std::string& what) const { throw InputError(where(key) + ": " + what); }

bool Reader::has(const std::string& key) const { return value_.is_object() && value_.contains(key) && !value_[key].is_null(); }

const Json& Reader::field(const std::string& key) const {
    if (!value_.is_object()) throw InputError(source_ + ": expected a JSON object" + (path_.empty() ? "" : " at '" + path_ + "'"));
    auto it = value_.find(key);
    if (it == value_.end()) throw InputError(source_ + ": missing field '" + (path_.empty() ? key : path_ + "." + key) + "'");
    return *it;
}

Reader Reader::at(const std::string& key) const { return Reader(field(key), source_, path_.empty() ? key : path_ + "." + key); }

double Reader::number(const std::string& key) const {
    const auto& f = field(key);
    if (!f.is_number()) fail(key, "expected a number");
    return f.get<double>();
}

double Reader::number_or(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

std::int64_t Reader::integer(const std::string& key) const {
    const auto& f = field(key);
    if (f.is_number_integer()) return f.get<std::int64_t>();
    if (f.is_number_float()) {
        const double d = f.get<double>();
        if (std::floor(d) == d && std::abs(d) < 9e15) return static_cast<std::int64_t>(d);
    }
    fail(key, "expected an integer");
}

std::int64_t Reader::integer_or(const std::string& key, std::int64_t fallback) const { return has(key) ? integer(key) : fallback; }

std::uint64_t Reader::unsigned_or(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const auto& f = field(key);
    if (f.is_number_unsigned()) return f.get<std::uint64_t>();
    if (f.is_number_integer() && f.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(f.get<std::int64_t>());
    fail(key, "expected a non-negative integer");
}

std::string Reader::text(const std::string& key) const {
    const auto& f = field(key);
    if (!f.is_string()) fail(key, "expected a string");
    return f.get<std::string>();
}

std::string Reader::text_or(const std::string& key, const std::string& fallback) const { return has(key) ? text(key) : fallback; }

bool Reader::flag_or(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto& f = field(key);
    if (!f.is_boolean()) fail(key, "expected true or false");
    return f.get<bool>();
}

std::vector<double> Reader::numbers(const std::string& key) const {
    const auto& f = field(key);
    if (!f.is_array()) fail(key, "expected an array of numbers");
    std::vector<double> out;
    out.reserve(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (!f[i].is_number()) fail(key, "element " + std::to_string(i) + " is not a number");
        out.push_back(f[i].get<double>());
    }
    return out;
}

std::vector<std::int64_t> Reader::integers(const std::string& key) const {
    const auto& f = field(key);
    if (!f.is_array()) fail(key, "expected an array of integers");
    std::vector<std::int64_t> out;
    out.reserve(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (!f[i].is_number_integer()) fail(key, "element " + std::to_string(i) + " is not an integer");
        out.push_back(f[i].get<std::int64_t>());
    }
    return out;
}

std::vector<std::string> Reader::texts(const std::string& key) const {
    const auto& f = field(key);
    if (!f.is_array()) fail(key, "expected an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (!f[i].is_string()) fail(key, "element " + std::to_string(i) + " is not a string");
        out.push_back(f[i].get<std::string>());
    }
    return out;
}

// Matrices -------------------------------------------------------------------

namespace {

Matrix row_major(const Reader& r, const std::string& key, Eigen::Index rows, Eigen::Index cols) {
    const auto v = r.numbers(key);
    if (static_cast<Eigen::Index>(v.size()) != rows * cols)
        r.fail(key, "expected " + std::to_string(rows * cols) + " values, found " + std::to_string(v.size()));
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = v[static_cast<std::size_t>(i * cols + j)];
    return m;
}

Json flat(const Matrix& m) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) a.push_back(m(i, j));
    return a;
}

}  // namespace

QuantumSystem quantum_system_from_json(const Json& j, const std::string& source) {
    Reader r(j, source);
    QuantumSystem s;
    const auto n = r.integer("n_orb");
    if (n < 1) r.fail("n_orb", "must be at least 1");
    for (auto p : r.integers("partition")) {
        if (p < 1) r.fail("partition", "entries must be positive");
        s.partition.push_back(static_cast<int>(p));
    }
    s.homo_energy_ev = r.number("homo_energy_ev");
    s.fock = row_major(r, "fock", n, n);
    s.overlap = row_major(r, "overlap", n, n);
    try {
        s.validate();
    } catch (const InputError& e) {
        throw InputError(source + ": " + e.what());
    }
    return s;
}

Json to_json(const QuantumSystem& s) {
    Json j;
    j["n_orb"] = s.n_orb();
    j["partition"] = s.partition;
    j["homo_energy_ev"] = s.homo_energy_ev;
    j["fock"] = flat(s.fock);
    j["overlap"] = flat(s.overlap);
    return j;
}

QuantumSystem load_quantum_system(const fs::path& path) { return quantum_system_from_json(read_json(path), path.string()); }

void save_quantum_system(const fs::path& path, const QuantumSystem& s) { write_json(path, to_json(s)); }

IVTable iv_table_from_json(const Json& j, const std::string& source) {
    Reader r(j, source);
    IVTable t;
    t.strand_id = r.text("strand_id");
    t.v_grid = r.numbers("v_grid_v");
    t.delta_grid = r.numbers("delta_grid_ev");
    if (t.v_grid.empty()) r.fail("v_grid_v", "must not be empty");
    if (t.delta_grid.empty()) r.fail("delta_grid_ev", "must not be empty");
    t.current = row_major(r, "current_a", static_cast<Eigen::Index>(t.delta_grid.size()),
                          static_cast<Eigen::Index>(t.v_grid.size()));
    try {
        require_usable(t);
    } catch (const InputError& e) {
        throw InputError(source + ": " + e.what());
    }
    return t;
}

Json to_json(const IVTable& t) {
    Json j;
    j["strand_id"] = t.strand_id;
    j["v_grid_v"] = t.v_grid;
    j["delta_grid_ev"] = t.delta_grid;
    j["current_a"] = flat(t.current);
    return j;
}

IVTable load_iv_table(const fs::path& path) { return iv_table_from_json(read_json(path), path.string()); }

void save_iv_table(const fs::path& path, const IVTable& t) { write_json(path, to_json(t)); }

std::shared_ptr<const StrandPair> load_pair(const Reader& r, const fs::path& base_dir) {
    const bool has1 = r.has("logic1_table"), has0 = r.has("logic0_table");
    if (!has1 && !has0) return std::make_shared<const StrandPair>(representative_pair());
    if (has1 != has0) r.fail(has1 ? "logic0_table" : "logic1_table", "both logic tables must be given together");
    auto resolve = [&](const std::string& key) {
        fs::path p = r.text(key);
        return p.is_absolute() ? p : base_dir / p;
    };
    auto pair = std::make_shared<StrandPair>();
    pair->logic1 = load_iv_table(resolve("logic1_table"));
    pair->logic0 = load_iv_table(resolve("logic0_table"));
    pair->mapping_note = r.text_or("mapping_note", "logic 1 = " + pair->logic1.strand_id + ", logic 0 = " + pair->logic0.strand_id);
    pair->validate();
    return pair;
}

SpecFile crossbar_spec_from_json(const Json& j, const fs::path& base_dir, const std::string& source) {
    Reader r(j, source);
    SpecFile f;
    auto& s = f.spec;
    s.m = static_cast<int>(r.integer("m"));
    s.n = static_cast<int>(r.integer("n"));
    if (s.m < 1) r.fail("m", "must be at least 1");
    if (s.n < 1) r.fail("n", "must be at least 1");
    s.r_int_ohm = r.number("r_int_ohm");
    s.v_in = r.number_or("v_in_v", 1.0);
    const auto bits = r.integers("bits");
    const std::size_t cells = static_cast<std::size_t>(s.m) * static_cast<std::size_t>(s.n);
    if (bits.size() != cells)
        r.fail("bits", "expected " + std::to_string(cells) + " values, found " + std::to_string(bits.size()));
    s.bits.resize(s.m, s.n);
    for (std::size_t c = 0; c < cells; ++c) {
        if (bits[c] != 0 && bits[c] != 1) r.fail("bits", "element " + std::to_string(c) + " is not 0 or 1");
        s.bits(static_cast<Eigen::Index>(c / s.n), static_cast<Eigen::Index>(c % s.n)) = static_cast<std::uint8_t>(bits[c]);
    }
    if (r.has("delta_ev")) s.delta = row_major(r, "delta_ev", s.m, s.n);
    if (r.has("logic1_table")) f.logic1_path = r.text("logic1_table");
    if (r.has("logic0_table")) f.logic0_path = r.text("logic0_table");
    s.pair = load_pair(r, base_dir);
    if (r.has("g_active_s")) f.g_active = r.number("g_active_s");
    if (r.has("g_float_s")) f.g_float = r.number("g_float_s");
    try {
        s.validate();
    } catch (const InputError& e) {
        throw InputError(source + ": " + e.what());
    }
    return f;
}

Json to_json(const CrossbarSpec& s, const fs::path& logic1_path, const fs::path& logic0_path) {
    Json j;
    j["m"] = s.m;
    j["n"] = s.n;
    j["r_int_ohm"] = s.r_int_ohm;
    j["v_in_v"] = s.v_in;
    Json bits = Json::array();
    for (int i = 0; i < s.m; ++i)
        for (int k = 0; k < s.n; ++k) bits.push_back(static_cast<int>(s.bits(i, k)));
    j["bits"] = std::move(bits);
    if (s.delta.size() != 0) j["delta_ev"] = flat(s.delta);
    if (!logic1_path.empty()) j["logic1_table"] = logic1_path.string();
    if (!logic0_path.empty()) j["logic0_table"] = logic0_path.string();
    return j;
}

SpecFile load_crossbar_spec(const fs::path& path) {
    return crossbar_spec_from_json(read_json(path), path.parent_path(), path.string());
}

McConfig mc_config_from_json(const Json& j, const fs::path& base_dir, const std::string& source) {
    Reader r(j, source);
    McConfig c;
    c.trials = static_cast<int>(r.integer_or("trials", c.trials));
    c.delta_max = r.number_or("delta_max_ev", c.delta_max);
    c.m = static_cast<int>(r.integer_or("m", c.m));
    c.n = static_cast<int>(r.integer_or("n", c.n));
    c.r_int_ohm = r.number_or("r_int_ohm", c.r_int_ohm);
    c.p_one = r.number_or("p_one", c.p_one);
    c.seed = r.unsigned_or("seed", c.seed);
    c.v_in = r.number_or("v_in_v", c.v_in);
    if (r.has("solver")) {
        try {
            c.solver = parse_solver_kind(r.text("solver"));
        } catch (const InputError& e) {
            r.fail("solver", e.what());
        }
    }
    c.per_cell_delta = r.flag_or("per_cell_delta", c.per_cell_delta);
    c.histogram_bins = static_cast<int>(r.integer_or("histogram_bins", c.histogram_bins));
    c.threads = static_cast<int>(r.integer_or("threads", c.threads));
    c.pair = load_pair(r, base_dir);
    return c;
}

McConfig load_mc_config(const fs::path& path) { return mc_config_from_json(read_json(path), path.parent_path(), path.string()); }

// CSV ------------------------------------------------------------------------

void write_matrix_csv(const fs::path& path, const Matrix& m) {
    std::string out;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) out += ',';
            out += format_double(m(i, j));
        }
        out += '\n';
    }
    write_text(path, out);
}

Matrix read_matrix_csv(const fs::path& path) {
    std::istringstream in(read_text(path));
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ls(line);
        std::string cell;
        std::size_t field = 0;
        while (std::getline(ls, cell, ',')) {
            ++field;
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw InputError(path.string() + ":" + std::to_string(line_no) + ": field " + std::to_string(field) +
                                 " is not a number");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw InputError(path.string() + ":" + std::to_string(line_no) + ": ragged row");
        rows.push_back(std::move(row));
    }
    Matrix m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return m;
}

std::string long_format_csv(const Matrix& m) {
    std::string out = "row,col,value\n";
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            out += std::to_string(i + 1) + "," + std::to_string(j + 1) + "," + format_double(m(i, j)) + "\n";
    return out;
}

// Reports --------------------------------------------------------------------

namespace {

std::string threshold_text(double t) {
    if (std::isinf(t)) return t > 0 ? "inf" : "-inf";
    if (std::isnan(t)) return "nan";
    return format_double(t);
}

}  // namespace

std::vector<std::string> write_solution(const fs::path& dir, const ReadoutSolution& s) {
    write_matrix_csv(dir / "v_cell.csv", s.v_cell);
    write_matrix_csv(dir / "i_out.csv", s.i_out);
    write_matrix_csv(dir / "v_normalized.csv", s.v_normalized);
    Json j;
    j["solver"] = to_string(s.solver);
    j["power_w"] = s.power_w;
    j["iterations"] = s.iterations;
    j["converged"] = s.converged;
    j["residual_v"] = s.residual;
    j["alpha"] = std::vector<double>(s.params.alpha.data(), s.params.alpha.data() + s.params.alpha.size());
    j["beta"] = std::vector<double>(s.params.beta.data(), s.params.beta.data() + s.params.beta.size());
    j["source_current_a"] =
        std::vector<double>(s.source_current.data(), s.source_current.data() + s.source_current.size());
    if (!s.balance.empty()) {
        double kcl = 0.0;
        for (const auto& b : s.balance)
            kcl = std::max(kcl, b.max_kcl_residual / std::max(std::abs(b.source_current), 1e-300));
        j["max_kcl_residual_rel"] = kcl;
    }
    write_json(dir / "summary.json", j);
    return {"v_cell.csv", "i_out.csv", "v_normalized.csv", "summary.json"};
}

std::vector<std::string> write_mc_report(const fs::path& dir, const McReport& r, const McConfig& c) {
    Json j;
    j["solver"] = r.solver;
    j["trials"] = c.trials;
    j["m"] = c.m;
    j["n"] = c.n;
    j["r_int_ohm"] = c.r_int_ohm;
    j["delta_max_ev"] = c.delta_max;
    j["p_one"] = c.p_one;
    j["seed"] = c.seed;
    j["per_cell_delta"] = c.per_cell_delta;
    j["ber_mean"] = r.ber_mean;
    j["mean_cell_voltage_v"] = r.mean_cell_voltage;
    j["failed_trials"] = r.failed_trials;
    std::size_t single = 0;
    for (char s : r.single_class) single += s != 0;
    j["single_class_trials"] = single;
    j["logic_mapping"] = c.pair->mapping_note;
    write_json(dir / "mc_summary.json", j);

    std::string trials = "trial,ber,threshold_a,polarity,mean_cell_voltage_v,failed\n";
    for (std::size_t t = 0; t < r.ber_samples.size(); ++t) {
        trials += std::to_string(t) + "," + threshold_text(r.ber_samples[t]) + "," + threshold_text(r.threshold_samples[t]) +
                  "," + to_string(r.polarity_samples[t]) + "," + threshold_text(r.mean_voltage_samples[t]) + "," +
                  (r.failed[t] ? "1" : "0") + "\n";
    }
    write_text(dir / "mc_trials.csv", trials);

    std::string hist = "bin_lo_na,bin_hi_na,logic0_count,logic1_count\n";
    for (std::size_t b = 0; b < r.histogram.logic0.size(); ++b)
        hist += format_double(r.histogram.edges_na[b]) + "," + format_double(r.histogram.edges_na[b + 1]) + "," +
                std::to_string(r.histogram.logic0[b]) + "," + std::to_string(r.histogram.logic1[b]) + "\n";
    write_text(dir / "mc_histogram.csv", hist);
    return {"mc_summary.json", "mc_trials.csv", "mc_histogram.csv"};
}

Json to_json(const BoxStats& b) {
    return Json{{"min", b.min}, {"q1", b.q1}, {"median", b.median}, {"q3", b.q3}, {"max", b.max}, {"count", b.count}};
}

std::vector<std::string> write_storage_report(const fs::path& dir, const StorageReport& r) {
    std::string csv = "tile_id,size,r_int_ohm,bit_load_pct,ber,power_w\n";
    for (const auto& t : r.per_tile)
        csv += std::to_string(t.tile_id) + "," + std::to_string(t.m) + "x" + std::to_string(t.n) + "," +
               format_double(t.r_int_ohm) + "," + format_double(t.bit_load_pct) + "," + format_double(t.ber) + "," +
               format_double(t.power_w) + "\n";
    write_text(dir / "storage_tiles.csv", csv);

    Json box = Json::array();
    for (const auto& [key, bins] : r.binned_ber)
        for (const auto& [bin, stats] : bins) {
            Json e = to_json(stats);
            e["size"] = std::to_string(key.m) + "x" + std::to_string(key.n);
            e["r_int_ohm"] = key.r_int_ohm;
            e["bit_load_pct"] = bin;
            box.push_back(std::move(e));
        }
    Json power = Json::array();
    for (const auto& [key, p] : r.power_vs_rint)
        power.push_back({{"size", std::to_string(key.m) + "x" + std::to_string(key.n)}, {"r_int_ohm", key.r_int_ohm}, {"mean_power_w", p}});
    Json j;
    j["box_stats"] = std::move(box);
    j["power_vs_rint"] = std::move(power);
    j["failed_tiles"] = r.failed_tiles;
    j["skipped_tiles"] = r.skipped_tiles;
    write_json(dir / "storage_report.json", j);
    return {"storage_tiles.csv", "storage_report.json"};
}

}  // namespace dnaxbar::io
