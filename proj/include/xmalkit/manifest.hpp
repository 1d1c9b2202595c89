#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace xmalkit {

// Everything needed to re-run a CLI command and audit what it consumed:
// the resolved argument vector (input paths absolutized), content hashes of
// the inputs, the dictionary fingerprint, the effective seed, and the
// artifacts written. Timestamps are informational; artifact reproduction is
// governed by command + seed alone.
struct RunManifest {
    std::string command;
    std::vector<std::string> arguments;       // argv after the program name
    std::map<std::string, std::string> inputs;  // absolute path -> content hash
    std::string dict_fingerprint;
    std::uint64_t seed = 0;
    std::string started_at;
    std::string finished_at;
    std::vector<std::string> outputs;  // paths of written artifacts
    std::vector<std::string> notes;    // e.g. defaults that were filled in
};

void save_manifest(const std::string& path, const RunManifest& manifest);
RunManifest load_manifest(const std::string& path);

// FNV-1a over the raw bytes of a file, as a hex string.
std::string file_content_hash(const std::string& path);

// Current UTC time, ISO 8601 with seconds.
std::string iso8601_utc_now();

}  // namespace xmalkit
