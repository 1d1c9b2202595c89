#include "xmalkit/manifest.hpp"

#include <cstdio>
#include <ctime>
#include <fstream>

#include <json.hpp>

#include "xmalkit/errors.hpp"

namespace xmalkit {

void save_manifest(const std::string& path, const RunManifest& manifest) {
    nlohmann::json j;
    j["tool"] = "xmalkit";
    j["manifest_version"] = 1;
    j["command"] = manifest.command;
    j["arguments"] = manifest.arguments;
    j["inputs"] = manifest.inputs;
    j["dict_fingerprint"] = manifest.dict_fingerprint;
    j["seed"] = manifest.seed;
    j["started_at"] = manifest.started_at;
    j["finished_at"] = manifest.finished_at;
    j["outputs"] = manifest.outputs;
    j["notes"] = manifest.notes;
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open " + path + " for writing");
    }
    out << j.dump(2) << '\n';
    if (!out) {
        throw std::runtime_error("failed writing manifest to " + path);
    }
}

RunManifest load_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ParseError(path, 0, "cannot open file");
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path, 0, std::string("invalid manifest JSON: ") + e.what());
    }
    RunManifest m;
    try {
        m.command = j.at("command").get<std::string>();
        m.arguments = j.at("arguments").get<std::vector<std::string>>();
        if (j.contains("inputs")) {
            m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
        }
        m.dict_fingerprint = j.value("dict_fingerprint", std::string());
        m.seed = j.value("seed", std::uint64_t{0});
        m.started_at = j.value("started_at", std::string());
        m.finished_at = j.value("finished_at", std::string());
        if (j.contains("outputs")) {
            m.outputs = j.at("outputs").get<std::vector<std::string>>();
        }
        if (j.contains("notes")) {
            m.notes = j.at("notes").get<std::vector<std::string>>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path, 0, std::string("manifest missing required field: ") + e.what());
    }
    return m;
}

std::string file_content_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ParseError(path, 0, "cannot open file for hashing");
    }
    std::uint64_t h = 1469598103934665603ull;
    char buf[8192];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
        if (!in) break;
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

std::string iso8601_utc_now() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace xmalkit
