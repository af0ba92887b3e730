#include "dnaxbar/manifest.hpp"
#include "dnaxbar/io.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <ctime>

namespace dnaxbar {

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw NumericalError("sha256: digest computation failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xf];
    }
    return out;
}

// Length-prefixed records keep distinct input lists from colliding.
void DigestBuilder::add_text(const std::string& label, const std::string& value) {
    buffer_ += label + "\n" + std::to_string(value.size()) + "\n" + value + "\n";
}

void DigestBuilder::add_file(const std::string& label, const std::filesystem::path& path) {
    add_text(label, io::read_text(path));
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_manifest(const std::filesystem::path& dir, const RunManifest& m) {
    io::Json j;
    j["command"] = m.command;
    j["config_digest"] = m.config_digest;
    j["seed"] = m.seed;
    j["artifact_version"] = m.artifact_version;
    j["started_utc"] = m.started_utc;
    j["finished_utc"] = m.finished_utc;
    j["outputs"] = m.outputs;
    io::write_json(dir / "manifest.json", j);
}

RunManifest read_manifest(const std::filesystem::path& dir) {
    const auto path = dir / "manifest.json";
    const io::Json j = io::read_json(path);
    io::Reader r(j, path.string());
    RunManifest m;
    m.command = r.text("command");
    m.config_digest = r.text("config_digest");
    m.seed = r.unsigned_or("seed", 0);
    m.artifact_version = r.text("artifact_version");
    m.started_utc = r.text_or("started_utc", "");
    m.finished_utc = r.text_or("finished_utc", "");
    if (r.has("outputs")) m.outputs = r.texts("outputs");
    return m;
}

}  // namespace dnaxbar
