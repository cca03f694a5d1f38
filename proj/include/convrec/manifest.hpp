#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace convrec {

// Provenance attached to every artifact. Holds no timestamps so that a re-run
// with the same inputs and config serializes identically.
struct RunManifest {
    struct Input {
        std::string path;
        std::string hash;  // git blob SHA-1; directories hash their sorted files
    };

    std::string subcommand;
    nlohmann::json config = nlohmann::json::object();
    std::vector<Input> inputs;
    std::vector<std::string> outputs;
    std::uint64_t seed = 0;

    void add_input(const std::filesystem::path& path);
    void add_output(const std::filesystem::path& path) { outputs.push_back(path.string()); }

    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
};

// Hash of a file, or of a directory as "name hash" lines over its regular files.
std::string content_hash(const std::filesystem::path& path);

// Writes `<artifact>.manifest.json` next to an artifact that has no header of its own.
std::filesystem::path write_manifest_sidecar(const std::filesystem::path& artifact, const RunManifest& m);

}  // namespace convrec
