#include "dnaxbar/io.hpp"
#include "dnaxbar/manifest.hpp"

#include <doctest.h>

#include <filesystem>
#include <functional>

using namespace dnaxbar;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("dnaxbar_test_io_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string error_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("iv table round trip") {
    const fs::path dir = scratch("iv");
    const IVTable t = synthesize_table(representative_logic0_params());
    io::save_iv_table(dir / "t.json", t);
    const IVTable back = io::load_iv_table(dir / "t.json");
    CHECK(back.strand_id == t.strand_id);
    CHECK(back.v_grid == t.v_grid);
    CHECK(back.delta_grid == t.delta_grid);
    CHECK(back.current == t.current);
}

TEST_CASE("crossbar spec round trip") {
    const fs::path dir = scratch("spec");
    const StrandPair pair = representative_pair();
    io::save_iv_table(dir / "a.json", pair.logic1);
    io::save_iv_table(dir / "b.json", pair.logic0);
    CrossbarSpec s;
    s.m = s.n = 128;
    s.r_int_ohm = 2.5e5;
    s.v_in = 0.8;
    s.pair = std::make_shared<const StrandPair>(pair);
    s.bits = BitMatrix::Zero(128, 128);
    s.delta = Matrix::Zero(128, 128);
    for (int i = 0; i < 128; ++i)
        for (int j = 0; j < 128; ++j) {
            s.bits(i, j) = static_cast<std::uint8_t>((i * 7 + j * 3) % 5 == 0);
            s.delta(i, j) = 1e-3 * ((i + j) % 100);
        }
    io::write_json(dir / "spec.json", io::to_json(s, "a.json", "b.json"));
    const io::SpecFile back = io::load_crossbar_spec(dir / "spec.json");
    CHECK(back.spec.m == 128);
    CHECK(back.spec.n == 128);
    CHECK(back.spec.r_int_ohm == s.r_int_ohm);
    CHECK(back.spec.v_in == s.v_in);
    CHECK(back.spec.bits == s.bits);
    CHECK(back.spec.delta == s.delta);
    CHECK(back.spec.pair->logic1.current == pair.logic1.current);
    CHECK(back.spec.pair->logic0.current == pair.logic0.current);
    CHECK(!back.g_active.has_value());
}

TEST_CASE("malformed json names the location") {
    const std::string syntax = error_of([] { io::parse_json("{\"m\": 4,\n \"n\": }", "bad.json"); });
    CHECK(syntax.find("bad.json") != std::string::npos);
    CHECK(syntax.find("bad.json:2:") != std::string::npos);
    CHECK(syntax.find("'n'") != std::string::npos);

    const io::Json j = io::Json::parse(R"({"m": 4, "n": "x"})");
    io::Reader r(j, "spec.json");
    const std::string missing = error_of([&] { r.number("r_int_ohm"); });
    CHECK(missing.find("spec.json") != std::string::npos);
    CHECK(missing.find("r_int_ohm") != std::string::npos);
    const std::string wrong = error_of([&] { r.integer("n"); });
    CHECK(wrong.find("n") != std::string::npos);
    CHECK_THROWS_AS(r.integer("n"), InputError);

    const fs::path dir = scratch("trunc");
    const IVTable t = synthesize_table(SynthesisParams{});
    io::Json tj = io::to_json(t);
    tj.erase("current_a");
    io::write_json(dir / "t.json", tj);
    const std::string trunc = error_of([&] { io::load_iv_table(dir / "t.json"); });
    CHECK(trunc.find("current_a") != std::string::npos);
    CHECK_THROWS_AS(io::load_iv_table(dir / "missing.json"), InputError);
}

TEST_CASE("matrix csv") {
    const fs::path dir = scratch("csv");
    Matrix m(2, 3);
    m << 1.0 / 3.0, -2e-12, 0, 1e300, 5, 6.25;
    io::write_matrix_csv(dir / "m.csv", m);
    CHECK(io::read_matrix_csv(dir / "m.csv") == m);

    io::write_text(dir / "ragged.csv", "1,2\n3\n");
    CHECK_THROWS_AS(io::read_matrix_csv(dir / "ragged.csv"), InputError);
    io::write_text(dir / "text.csv", "1,abc\n");
    const std::string e = error_of([&] { io::read_matrix_csv(dir / "text.csv"); });
    CHECK(e.find("text.csv") != std::string::npos);

    Matrix s(1, 2);
    s << 0.5, 2;
    CHECK(io::long_format_csv(s) == "row,col,value\n1,1,0.5\n1,2,2\n");
}

TEST_CASE("manifest round trip") {
    const fs::path dir = scratch("manifest");
    RunManifest m;
    m.command = "mc";
    m.config_digest = sha256_hex("x");
    m.seed = 18446744073709551615ull;
    m.artifact_version = "1.0.0";
    m.started_utc = utc_now();
    m.finished_utc = utc_now();
    m.outputs = {"a.csv", "b.json"};
    write_manifest(dir, m);
    const RunManifest back = read_manifest(dir);
    CHECK(back.command == m.command);
    CHECK(back.config_digest == m.config_digest);
    CHECK(back.seed == m.seed);
    CHECK(back.artifact_version == m.artifact_version);
    CHECK(back.started_utc == m.started_utc);
    CHECK(back.outputs == m.outputs);
}

TEST_CASE("sha256 known vectors") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");

    DigestBuilder a, b;
    a.add_text("x", "12");
    a.add_text("y", "3");
    b.add_text("x", "1");
    b.add_text("y", "23");
    CHECK(a.hex() != b.hex());
}

TEST_CASE("format double round trips") {
    for (double x : {0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, 1e-6})
        CHECK(std::stod(io::format_double(x)) == x);
}
