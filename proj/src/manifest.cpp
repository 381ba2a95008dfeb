#include "zsce/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace zsce {

uint64_t file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot digest " + path);
    uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0)
        h = fnv1a(buf, static_cast<size_t>(in.gcount()), h);
    return h;
}

RunManifest::RunManifest(std::string command) {
    doc_["format"] = "manifest_v1";
    doc_["tool"] = kToolVersion;
    doc_["command"] = std::move(command);
    doc_["seeds"] = Json::object();
    doc_["configs"] = Json::object();
    doc_["artifacts"] = Json::array();
}

void RunManifest::add_seed(const std::string& name, uint64_t seed) { doc_["seeds"][name] = seed; }

void RunManifest::add_config(const std::string& name, const Json& config) {
    doc_["configs"][name] = hex_digest(fnv1a(config.dump()));
}

void RunManifest::set_cost_weights(const Json& weights) { doc_["cost_weights"] = weights; }

void RunManifest::add_note(const std::string& key, const std::string& value) { doc_[key] = value; }

void RunManifest::add_artifact(const std::string& path) {
    doc_["artifacts"].push_back(
        {{"path", std::filesystem::path(path).filename().string()},
         {"bytes", std::filesystem::file_size(path)},
         {"digest", hex_digest(file_digest(path))}});
}

void RunManifest::write(const std::string& path) const { write_json_file(path, doc_); }

} // namespace zsce
