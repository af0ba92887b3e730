#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dnaxbar {

// Provenance record written next to every command's outputs. Two runs whose
// manifests agree outside the timestamps produce identical numeric files.
struct RunManifest {
    std::string command;
    std::string config_digest;  // SHA-256 hex over the canonical inputs
    std::uint64_t seed = 0;
    std::string artifact_version;
    std::string started_utc;
    std::string finished_utc;
    std::vector<std::string> outputs;
};

std::string sha256_hex(const std::string& bytes);

// Accumulates inputs in order: option text and the contents of input files.
class DigestBuilder {
public:
    void add_text(const std::string& label, const std::string& value);
    void add_file(const std::string& label, const std::filesystem::path& path);
    std::string hex() const { return sha256_hex(buffer_); }

private:
    std::string buffer_;
};

std::string utc_now();

void write_manifest(const std::filesystem::path& dir, const RunManifest& m);
RunManifest read_manifest(const std::filesystem::path& dir);

}  // namespace dnaxbar
