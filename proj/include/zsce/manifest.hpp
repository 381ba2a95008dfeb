#pragma once

#include <string>
#include <vector>

#include "zsce/json_util.hpp"

namespace zsce {

constexpr const char* kToolVersion = "zsce 1.0.0";

/// Run manifest: tool version, seeds, config digests, cost weights and the
/// output inventory with content digests. Written once before long stages and
/// finalized with the inventory when the command completes; contains no
/// timestamps so reruns are byte-identical.
class RunManifest {
public:
    explicit RunManifest(std::string command);

    void add_seed(const std::string& name, uint64_t seed);
    void add_config(const std::string& name, const Json& config);
    void set_cost_weights(const Json& weights);
    void add_note(const std::string& key, const std::string& value);

    /// Registers an output file and digests its current content.
    void add_artifact(const std::string& path);

    void write(const std::string& path) const;

private:
    Json doc_;
};

uint64_t file_digest(const std::string& path);

} // namespace zsce
