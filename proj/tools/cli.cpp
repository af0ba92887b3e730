#include "cli.hpp"

#include "dnaxbar/crossbar.hpp"
#include "dnaxbar/io.hpp"
#include "dnaxbar/manifest.hpp"
#include "dnaxbar/parallel.hpp"
#include "dnaxbar/storage.hpp"
#include "dnaxbar/transport.hpp"
#include "dnaxbar/variability.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

namespace dnaxbar::cli {

namespace {

namespace fs = std::filesystem;
using io::Json;
using io::Reader;

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    std::string solver;
    std::string rint;
    std::string size;
    std::optional<double> delta_max;
    std::optional<int> trials;
    int threads = 0;
};

struct Outcome {
    std::vector<std::string> outputs;
    bool numerical_failure = false;
};

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, sep))
        if (!item.empty()) parts.push_back(item);
    return parts;
}

double parse_number(const std::string& text, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used == text.size()) return v;
    } catch (const std::exception&) {
    }
    throw InputError(what + ": '" + text + "' is not a number");
}

std::vector<double> parse_rint_list(const std::string& text) {
    std::vector<double> out;
    for (const auto& p : split(text, ',')) {
        const double r = parse_number(p, "--rint");
        if (!(r > 0.0)) throw InputError("--rint: resistances must be positive");
        out.push_back(r);
    }
    if (out.empty()) throw InputError("--rint: no values given");
    return out;
}

std::pair<int, int> parse_one_size(const std::string& text) {
    const auto x = text.find('x');
    if (x == std::string::npos) throw InputError("--size: expected <m>x<n>, got '" + text + "'");
    try {
        std::size_t a = 0, b = 0;
        const int m = std::stoi(text.substr(0, x), &a);
        const int n = std::stoi(text.substr(x + 1), &b);
        if (a == x && b == text.size() - x - 1 && m >= 1 && n >= 1) return {m, n};
    } catch (const std::exception&) {
    }
    throw InputError("--size: expected positive <m>x<n>, got '" + text + "'");
}

std::vector<std::pair<int, int>> parse_sizes(const std::string& text) {
    std::vector<std::pair<int, int>> out;
    for (const auto& p : split(text, ',')) out.push_back(parse_one_size(p));
    if (out.empty()) throw InputError("--size: no values given");
    return out;
}

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

std::vector<double> grid_from(const Reader& r, const std::string& key, std::vector<double> fallback) {
    if (!r.has(key)) return fallback;
    if (r.json()[key].is_array()) return r.numbers(key);
    const Reader g = r.at(key);
    return uniform_grid(g.number("start"), g.number("stop"), g.number("step"));
}

void add_flags(DigestBuilder& d, const Options& o) {
    std::ostringstream os;
    os << "seed=" << (o.seed ? std::to_string(*o.seed) : "") << ";solver=" << o.solver << ";rint=" << o.rint
       << ";size=" << o.size << ";delta_max=" << (o.delta_max ? io::format_double(*o.delta_max) : "")
       << ";trials=" << (o.trials ? std::to_string(*o.trials) : "");
    d.add_text("flags", os.str());
}

void add_table_files(DigestBuilder& d, const Reader& r, const fs::path& base) {
    for (const char* key : {"logic1_table", "logic0_table"})
        if (r.has(key)) d.add_file(key, resolve(base, r.text(key)));
}

// Subcommands ----------------------------------------------------------------

Outcome cmd_iv_gen(const Options& o, DigestBuilder& d, std::ostream& out, std::ostream& err) {
    if (o.config.empty()) throw InputError("iv-gen: --config <system or sweep file> is required");
    const fs::path cfg_path = o.config;
    const Json cfg = io::read_json(cfg_path);
    d.add_file("config", cfg_path);
    Reader r(cfg, cfg_path.string());

    QuantumSystem system;
    ContactProbeConfig contacts;
    SweepOptions sweep;
    sweep.threads = o.threads;
    std::vector<double> v_grid = uniform_grid(0.0, 1.0, 0.01);
    std::vector<double> delta_grid = uniform_grid(0.0, 0.2, 0.01);
    if (r.has("fock")) {
        system = io::quantum_system_from_json(cfg, cfg_path.string());
        sweep.strand_id = cfg_path.stem().string();
    } else {
        const fs::path sys_path = resolve(cfg_path.parent_path(), r.text("system"));
        d.add_file("system", sys_path);
        system = io::load_quantum_system(sys_path);
        contacts.gamma_contact_ev = r.number_or("gamma_contact_ev", contacts.gamma_contact_ev);
        contacts.gamma_probe_ev = r.number_or("gamma_probe_ev", contacts.gamma_probe_ev);
        sweep.temperature_k = r.number_or("temperature_k", sweep.temperature_k);
        sweep.max_step_ev = r.number_or("energy_step_ev", sweep.max_step_ev);
        sweep.strand_id = r.text_or("strand_id", sys_path.stem().string());
        v_grid = grid_from(r, "v_grid_v", v_grid);
        delta_grid = grid_from(r, "delta_grid_ev", delta_grid);
    }
    const IVTable table = iv_sweep(system, contacts, v_grid, delta_grid, sweep);
    const auto violations = validate_table(table);
    for (std::size_t k = 0; k < std::min<std::size_t>(violations.size(), 5); ++k)
        err << "warning: " << violations[k].message << "\n";
    if (violations.size() > 5) err << "warning: " << violations.size() - 5 << " further table warnings\n";
    io::save_iv_table(fs::path(o.out) / "iv_table.json", table);
    out << "wrote " << (fs::path(o.out) / "iv_table.json").string() << "\n";
    return {{"iv_table.json"}, false};
}

Outcome cmd_iv_synth(const Options& o, DigestBuilder& d, std::ostream& out, std::ostream&) {
    std::vector<SynthesisParams> params;
    if (o.config.empty()) {
        params = {representative_logic1_params(), representative_logic0_params()};
    } else {
        const fs::path cfg_path = o.config;
        const Json cfg = io::read_json(cfg_path);
        d.add_file("config", cfg_path);
        Reader r(cfg, cfg_path.string());
        SynthesisParams p;
        p.strand_id = r.text("strand_id");
        p.r_low = r.number("r_low_ohm");
        p.r_high = r.number("r_high_ohm");
        p.knee = r.number_or("knee_v", p.knee);
        p.delta_sensitivity = r.number_or("delta_sensitivity_per_ev", p.delta_sensitivity);
        p.v_grid = grid_from(r, "v_grid_v", {});
        p.delta_grid = grid_from(r, "delta_grid_ev", {});
        params.push_back(p);
    }
    Outcome res;
    for (const auto& p : params) {
        const std::string name = p.strand_id + ".json";
        io::save_iv_table(fs::path(o.out) / name, synthesize_table(p));
        out << "wrote " << (fs::path(o.out) / name).string() << "\n";
        res.outputs.push_back(name);
    }
    return res;
}

Outcome cmd_solve(const Options& o, DigestBuilder& d, std::ostream& out, bool oracle) {
    if (o.config.empty()) throw InputError("--config <crossbar spec> is required");
    const fs::path cfg_path = o.config;
    const Json cfg = io::read_json(cfg_path);
    d.add_file("config", cfg_path);
    add_table_files(d, Reader(cfg, cfg_path.string()), cfg_path.parent_path());
    auto file = io::crossbar_spec_from_json(cfg, cfg_path.parent_path(), cfg_path.string());
    if (!o.rint.empty()) {
        const auto list = parse_rint_list(o.rint);
        if (list.size() != 1) throw InputError("--rint: solve takes a single resistance");
        file.spec.r_int_ohm = list.front();
    }
    const SolverKind kind = oracle ? SolverKind::Kirchhoff : (o.solver.empty() ? SolverKind::Parametric : parse_solver_kind(o.solver));
    SolverOptions options;
    options.threads = o.threads;
    ReadoutSolution sol;
    if (kind == SolverKind::Parametric) {
        auto inputs = default_calibration_inputs(file.spec, options.v_floor);
        if (file.g_active) inputs.g_active = *file.g_active;
        if (file.g_float) inputs.g_float = *file.g_float;
        sol = parametric_solve(file.spec, calibrate_sneak_params(file.spec, inputs, o.threads), options);
    } else {
        sol = kirchhoff_solve(file.spec, options);
    }
    Outcome res{io::write_solution(o.out, sol), !sol.converged};
    out << to_string(kind) << ": power " << io::format_double(sol.power_w) << " W, " << sol.iterations
        << " iterations, " << (sol.converged ? "converged" : "NOT converged") << "\n";
    return res;
}

Outcome cmd_mc(const Options& o, DigestBuilder& d, std::ostream& out) {
    McConfig c;
    if (!o.config.empty()) {
        const fs::path cfg_path = o.config;
        const Json cfg = io::read_json(cfg_path);
        d.add_file("config", cfg_path);
        add_table_files(d, Reader(cfg, cfg_path.string()), cfg_path.parent_path());
        c = io::mc_config_from_json(cfg, cfg_path.parent_path(), cfg_path.string());
    } else {
        c.pair = std::make_shared<const StrandPair>(representative_pair());
    }
    if (o.seed) c.seed = *o.seed;
    if (o.trials) c.trials = *o.trials;
    if (o.delta_max) c.delta_max = *o.delta_max;
    if (!o.rint.empty()) {
        const auto list = parse_rint_list(o.rint);
        if (list.size() != 1) throw InputError("--rint: mc takes a single resistance");
        c.r_int_ohm = list.front();
    }
    if (!o.size.empty()) std::tie(c.m, c.n) = parse_one_size(o.size);
    if (!o.solver.empty()) c.solver = parse_solver_kind(o.solver);
    if (o.threads > 0) c.threads = o.threads;
    const McReport rep = run_mc(c);
    out << "mc: mean BER " << io::format_double(rep.ber_mean) << " over " << c.trials - rep.failed_trials
        << " trials (" << rep.failed_trials << " failed)\n";
    return {io::write_mc_report(o.out, rep, c), rep.failed_trials > 0};
}

std::vector<fs::path> list_inputs(const std::vector<fs::path>& paths) {
    std::vector<fs::path> files;
    for (const auto& p : paths) {
        if (fs::is_directory(p)) {
            std::vector<fs::path> dir;
            for (const auto& e : fs::directory_iterator(p))
                if (e.is_regular_file()) dir.push_back(e.path());
            std::sort(dir.begin(), dir.end());
            files.insert(files.end(), dir.begin(), dir.end());
        } else if (fs::is_regular_file(p)) {
            files.push_back(p);
        } else {
            throw InputError("store: input '" + p.string() + "' does not exist");
        }
    }
    if (files.empty()) throw InputError("store: no input files found");
    return files;
}

Outcome cmd_store(const Options& o, DigestBuilder& d, std::ostream& out) {
    if (o.config.empty()) throw InputError("store: --config <storage job> is required");
    const fs::path cfg_path = o.config;
    const Json cfg = io::read_json(cfg_path);
    d.add_file("config", cfg_path);
    Reader r(cfg, cfg_path.string());
    add_table_files(d, r, cfg_path.parent_path());
    const auto pair = io::load_pair(r, cfg_path.parent_path());

    std::vector<fs::path> roots;
    for (const auto& p : r.texts("inputs")) roots.push_back(resolve(cfg_path.parent_path(), p));
    const std::string mode = r.text_or("binarization", "raw-bits");
    if (mode != "raw-bits" && mode != "gray-threshold") r.fail("binarization", "expected raw-bits or gray-threshold");
    const auto level = r.integer_or("level", 128);
    if (level < 0 || level > 255) r.fail("level", "must lie in [0, 255]");

    std::vector<ImageJob> jobs;
    for (const auto& f : list_inputs(roots)) {
        ImageJob job;
        job.name = f.filename().string();
        const std::string bytes = io::read_text(f);
        d.add_text("input:" + job.name, bytes);
        job.source.assign(bytes.begin(), bytes.end());
        job.mode = mode == "raw-bits" ? Binarization::RawBits : Binarization::GrayThreshold;
        job.level = static_cast<std::uint8_t>(level);
        jobs.push_back(std::move(job));
    }

    std::vector<double> rints = {1e4, 1e5, 1e6};
    if (r.has("r_int_ohm")) rints = r.numbers("r_int_ohm");
    if (!o.rint.empty()) rints = parse_rint_list(o.rint);
    std::vector<std::pair<int, int>> sizes = {{64, 64}, {128, 128}};
    if (r.has("sizes")) {
        sizes.clear();
        for (const auto& s : r.texts("sizes")) sizes.push_back(parse_one_size(s));
    }
    if (!o.size.empty()) sizes = parse_sizes(o.size);

    StorageOptions so;
    so.threads = o.threads;
    so.solver = o.solver.empty() ? parse_solver_kind(r.text_or("solver", "parametric")) : parse_solver_kind(o.solver);
    so.v_in = r.number_or("v_in_v", 1.0);
    const StorageReport rep = run_storage_benchmark(jobs, pair, rints, sizes, so);
    out << "store: " << rep.per_tile.size() << " tile solves, " << rep.failed_tiles << " failed, "
        << rep.skipped_tiles << " empty tiles skipped\n";
    return {io::write_storage_report(o.out, rep), false};
}

// plot-data ------------------------------------------------------------------

std::string csv_line(std::initializer_list<std::string> cells) {
    std::string s;
    for (const auto& c : cells) {
        if (!s.empty()) s += ',';
        s += c;
    }
    return s + "\n";
}

Outcome plot_iv(const IVTable& t, const fs::path& out) {
    std::string s = "v_v,delta_ev,current_a\n";
    for (std::size_t d = 0; d < t.delta_grid.size(); ++d)
        for (std::size_t v = 0; v < t.v_grid.size(); ++v)
            s += csv_line({io::format_double(t.v_grid[v]), io::format_double(t.delta_grid[d]),
                           io::format_double(t.current(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(v)))});
    io::write_text(out / "iv_curves.csv", s);
    return {{"iv_curves.csv"}, false};
}

Outcome plot_transmission(const QuantumSystem& system, const fs::path& out, int threads) {
    const PreparedSystem prep = prepare_system(system);
    const TerminalLayout layout(prep.partition);
    const ContactProbeConfig config;
    std::vector<double> e = uniform_grid(-1.0, 1.0, 1e-3);
    for (auto& x : e) x += prep.homo_energy_ev;
    std::string s = "energy_ev,v_bias_v,t_eff,t_coherent\n";
    for (double v : {0.0, 0.5, 1.0}) {
        const Matrix h = apply_bias_ramp(prep.h_b, v, prep.partition);
        const auto spec = transmission_spectrum(h, layout, config, e, resolve_threads(threads));
        for (std::size_t i = 0; i < e.size(); ++i)
            s += csv_line({io::format_double(e[i]), io::format_double(v), io::format_double(spec.t_eff[i]),
                           io::format_double(spec.t_coherent[i])});
    }
    io::write_text(out / "transmission.csv", s);
    return {{"transmission.csv"}, false};
}

Outcome plot_solution(const fs::path& dir, const fs::path& out) {
    Outcome res;
    for (const char* name : {"v_cell", "v_normalized", "i_out"}) {
        const Matrix m = io::read_matrix_csv(dir / (std::string(name) + ".csv"));
        const std::string file = std::string("heatmap_") + name + ".csv";
        io::write_text(out / file, io::long_format_csv(m));
        res.outputs.push_back(file);
    }
    const Json summary = io::read_json(dir / "summary.json");
    Reader r(summary, (dir / "summary.json").string());
    std::string s = "axis,index,value\n";
    const auto alpha = r.numbers("alpha");
    const auto beta = r.numbers("beta");
    for (std::size_t i = 0; i < alpha.size(); ++i) s += csv_line({"alpha", std::to_string(i + 1), io::format_double(alpha[i])});
    for (std::size_t j = 0; j < beta.size(); ++j) s += csv_line({"beta", std::to_string(j + 1), io::format_double(beta[j])});
    io::write_text(out / "sneak_params.csv", s);
    res.outputs.push_back("sneak_params.csv");
    return res;
}

Outcome plot_mc(const fs::path& dir, const fs::path& out) {
    fs::copy_file(dir / "mc_histogram.csv", out / "current_histogram.csv", fs::copy_options::overwrite_existing);
    std::istringstream in(io::read_text(dir / "mc_trials.csv"));
    std::string line, s = "trial,ber_pct\n";
    std::getline(in, line);
    while (std::getline(in, line)) {
        const auto cells = split(line, ',');
        if (cells.size() < 6 || cells[5] == "1") continue;
        s += csv_line({cells[0], io::format_double(100.0 * parse_number(cells[1], "mc_trials.csv ber"))});
    }
    io::write_text(out / "ber_samples.csv", s);
    return {{"current_histogram.csv", "ber_samples.csv"}, false};
}

Outcome plot_storage(const fs::path& dir, const fs::path& out) {
    const fs::path path = dir / "storage_report.json";
    const Json j = io::read_json(path);
    std::string box = "size,r_int_ohm,bit_load_pct,min,q1,median,q3,max,count\n";
    for (const auto& e : j.at("box_stats")) {
        Reader r(e, path.string(), "box_stats");
        box += csv_line({r.text("size"), io::format_double(r.number("r_int_ohm")), std::to_string(r.integer("bit_load_pct")),
                         io::format_double(r.number("min")), io::format_double(r.number("q1")),
                         io::format_double(r.number("median")), io::format_double(r.number("q3")),
                         io::format_double(r.number("max")), std::to_string(r.integer("count"))});
    }
    io::write_text(out / "ber_box.csv", box);
    std::string power = "size,r_int_ohm,mean_power_uw\n";
    for (const auto& e : j.at("power_vs_rint")) {
        Reader r(e, path.string(), "power_vs_rint");
        power += csv_line({r.text("size"), io::format_double(r.number("r_int_ohm")), io::format_double(1e6 * r.number("mean_power_w"))});
    }
    io::write_text(out / "power.csv", power);
    return {{"ber_box.csv", "power.csv"}, false};
}

Outcome cmd_plot_data(const Options& o, DigestBuilder& d, std::ostream& out) {
    if (o.config.empty()) throw InputError("plot-data: --config <report file or directory> is required");
    const fs::path in = o.config;
    const fs::path dest = o.out;
    fs::create_directories(dest);
    Outcome res;
    if (fs::is_directory(in)) {
        for (const char* f : {"summary.json", "mc_summary.json", "storage_report.json"})
            if (fs::exists(in / f)) d.add_file(f, in / f);
        if (fs::exists(in / "summary.json")) res = plot_solution(in, dest);
        else if (fs::exists(in / "mc_summary.json")) res = plot_mc(in, dest);
        else if (fs::exists(in / "storage_report.json")) res = plot_storage(in, dest);
        else throw InputError("plot-data: '" + in.string() + "' holds no solve, mc or store report");
    } else {
        d.add_file("input", in);
        const Json j = io::read_json(in);
        if (j.is_object() && j.contains("current_a")) res = plot_iv(io::iv_table_from_json(j, in.string()), dest);
        else if (j.is_object() && j.contains("fock"))
            res = plot_transmission(io::quantum_system_from_json(j, in.string()), dest, o.threads);
        else throw InputError("plot-data: '" + in.string() + "' is neither an IV table nor a quantum system");
    }
    for (const auto& f : res.outputs) out << "wrote " << (dest / f).string() << "\n";
    return res;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Simulation toolkit for DNA crossbar read-only memory", "dnaxbar"};
    app.require_subcommand(1, 1);
    app.set_version_flag("--version", DNAXBAR_VERSION);

    Options o;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "Input file (or directory for plot-data)");
        sub->add_option("--out", o.out, "Output directory")->capture_default_str();
        sub->add_option("--threads", o.threads, "Worker threads (default: XBAR_THREADS, then all cores)")
            ->check(CLI::NonNegativeNumber);
        sub->add_option("--seed", o.seed, "Random seed");
    };
    auto solver_flag = [&](CLI::App* sub) {
        sub->add_option("--solver", o.solver, "parametric or kirchhoff")->check(CLI::IsMember({"parametric", "kirchhoff"}));
    };

    auto* iv_gen = app.add_subcommand("iv-gen", "Quantum system -> IV table via decoherent transport");
    auto* iv_synth = app.add_subcommand("iv-synth", "Synthetic IV table (no config: the representative pair)");
    auto* solve_cmd = app.add_subcommand("solve", "Crossbar spec -> readout solution");
    auto* oracle = app.add_subcommand("oracle", "Crossbar spec -> full nodal (Kirchhoff) solution");
    auto* mc = app.add_subcommand("mc", "Monte Carlo BER under Fermi-level variability");
    auto* store = app.add_subcommand("store", "Image storage benchmark");
    auto* plot = app.add_subcommand("plot-data", "Report or table -> plotting columns");
    for (auto* sub : {iv_gen, iv_synth, solve_cmd, oracle, mc, store, plot}) common(sub);
    for (auto* sub : {solve_cmd, mc, store}) solver_flag(sub);
    for (auto* sub : {solve_cmd, oracle, mc, store}) sub->add_option("--rint", o.rint, "Interconnect resistance(s), ohm, comma separated");
    for (auto* sub : {mc, store}) sub->add_option("--size", o.size, "Array size <m>x<n> (store: comma separated)");
    mc->add_option("--delta-max", o.delta_max, "Fermi offset range, eV")->check(CLI::NonNegativeNumber);
    mc->add_option("--trials", o.trials, "Monte Carlo trials")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e, out, err);
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        app.exit(e, out, err);
        return kExitOk;
    } catch (const CLI::CallForVersion& e) {
        app.exit(e, out, err);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n";
        const auto subs = app.get_subcommands();
        err << (subs.empty() ? app.help() : subs.front()->help());
        return kExitInput;
    }

    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    RunManifest manifest;
    manifest.command = name;
    manifest.seed = o.seed.value_or(0);
    manifest.artifact_version = DNAXBAR_VERSION;
    manifest.started_utc = utc_now();
    DigestBuilder digest;
    digest.add_text("command", name);
    add_flags(digest, o);

    try {
        fs::create_directories(o.out);
        Outcome res;
        if (name == "iv-gen") res = cmd_iv_gen(o, digest, out, err);
        else if (name == "iv-synth") res = cmd_iv_synth(o, digest, out, err);
        else if (name == "solve") res = cmd_solve(o, digest, out, false);
        else if (name == "oracle") res = cmd_solve(o, digest, out, true);
        else if (name == "mc") res = cmd_mc(o, digest, out);
        else if (name == "store") res = cmd_store(o, digest, out);
        else res = cmd_plot_data(o, digest, out);
        if (name == "mc") {
            // The effective seed is part of the config when no flag is given.
            manifest.seed = o.seed.value_or(o.config.empty() ? McConfig{}.seed : io::load_mc_config(o.config).seed);
        }
        manifest.config_digest = digest.hex();
        manifest.outputs = res.outputs;
        manifest.finished_utc = utc_now();
        write_manifest(o.out, manifest);
        if (res.numerical_failure) {
            err << "error: numerical failure (see outputs in " << o.out << ")\n";
            return kExitNumerical;
        }
        return kExitOk;
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    }
}

}  // namespace dnaxbar::cli
