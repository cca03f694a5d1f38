#include "convrec/manifest.hpp"

#include <algorithm>

#include "convrec/common.hpp"
#include "convrec/io.hpp"

namespace convrec {

namespace fs = std::filesystem;

std::string content_hash(const fs::path& path) {
    if (fs::is_directory(path)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(path)) {
            if (e.is_regular_file()) files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        std::string listing;
        for (const auto& f : files) listing += f.filename().string() + " " + io::git_blob_hash_file(f) + "\n";
        return io::git_blob_hash(listing);
    }
    if (!fs::exists(path)) throw NotFound("cannot hash missing input " + path.string());
    return io::git_blob_hash_file(path);
}

void RunManifest::add_input(const fs::path& path) { inputs.push_back({path.string(), content_hash(path)}); }

nlohmann::json RunManifest::to_json() const {
    nlohmann::json in = nlohmann::json::array();
    for (const auto& i : inputs) in.push_back({{"path", i.path}, {"hash", i.hash}});
    return {{"subcommand", subcommand}, {"config", config}, {"inputs", in}, {"outputs", outputs}, {"seed", seed}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
    RunManifest m;
    try {
        m.subcommand = j.at("subcommand").get<std::string>();
        m.config = j.at("config");
        for (const auto& i : j.at("inputs")) m.inputs.push_back({i.at("path").get<std::string>(), i.at("hash").get<std::string>()});
        m.outputs = j.at("outputs").get<std::vector<std::string>>();
        m.seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("malformed manifest: ") + e.what());
    }
    return m;
}

fs::path write_manifest_sidecar(const fs::path& artifact, const RunManifest& m) {
    fs::path side = artifact;
    side += ".manifest.json";
    io::write_file(side, m.to_json().dump(2) + "\n");
    return side;
}

}  // namespace convrec
