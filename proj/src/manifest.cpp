#include "celebi/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "celebi/errors.hpp"

namespace celebi {

std::string current_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void RunManifest::save(const std::string& path) const {
    nlohmann::json j;
    j["config_hash"] = config_hash;
    j["code_version"] = code_version;
    j["topsim_method"] = topsim_method;
    j["created_at"] = created_at;
    j["updated_at"] = updated_at;
    j["seed_status"] = seed_status;
    j["outputs"] = outputs;

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        check(out.good(), "RunManifest::save: cannot open '" + tmp + "'");
        out << j.dump(2) << "\n";
        check(out.good(), "RunManifest::save: write failed");
    }
    std::filesystem::rename(tmp, path);
}

RunManifest RunManifest::load(const std::string& path) {
    std::ifstream in(path);
    check(in.good(), "RunManifest::load: cannot open '" + path + "'");
    nlohmann::json j;
    in >> j;
    RunManifest m;
    m.config_hash = j.value("config_hash", "");
    m.code_version = j.value("code_version", "");
    m.topsim_method = j.value("topsim_method", "spearman");
    m.created_at = j.value("created_at", "");
    m.updated_at = j.value("updated_at", "");
    if (j.contains("seed_status")) m.seed_status = j["seed_status"].get<std::map<std::string, std::string>>();
    if (j.contains("outputs")) m.outputs = j["outputs"].get<std::vector<std::string>>();
    return m;
}

bool RunManifest::exists(const std::string& path) { return std::filesystem::exists(path); }

}  // namespace celebi
