#pragma once

#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "zsce/util.hpp"

namespace zsce {

using Json = nlohmann::json;

inline Json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    Json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw IoError("bad json in " + path + ": " + e.what());
    }
    return j;
}

inline void write_json_file(const std::string& path, const Json& j, int indent = 2) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(indent) << '\n';
}

/// Config files reject unknown keys so typos in experiment setups fail loudly.
inline void require_keys(const Json& j, const std::set<std::string>& allowed, const std::string& what) {
    if (!j.is_object()) throw ConfigError(what + " must be a json object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError(what + ": unknown key '" + it.key() + "'");
}

inline void require_version(const Json& j, const std::string& version, const std::string& what) {
    if (!j.contains("version") || j["version"] != version)
        throw ConfigError(what + ": expected version '" + version + "'");
}

} // namespace zsce
