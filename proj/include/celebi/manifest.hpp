#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace celebi {

// Written atomically (temp file + rename) before and after every run, so a
// crash leaves either the previous or the new manifest, never a torn one.
struct RunManifest {
    std::string config_hash;
    std::string code_version;
    std::string topsim_method = "spearman";
    std::string created_at;
    std::string updated_at;
    std::map<std::string, std::string> seed_status;  // seed -> pending|running|done|failed:...
    std::vector<std::string> outputs;

    void save(const std::string& path) const;
    static RunManifest load(const std::string& path);
    static bool exists(const std::string& path);
};

std::string current_timestamp();

inline constexpr const char* kCodeVersion = "0.1.0";

}  // namespace celebi
