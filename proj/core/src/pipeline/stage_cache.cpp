#include "smokesplat/pipeline/stage_cache.hpp"

#include "smokesplat/hash.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <unistd.h>

namespace smokesplat::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;

StageCache::StageCache(fs::path root) : root_(std::move(root)) {}

std::string StageCache::make_key(const std::string& stage, const std::string& params,
                                 const std::map<std::string, std::string>& input_hashes) {
    // Length-prefix every field so concatenations cannot collide.
    Sha256 h;
    auto field = [&](const std::string& s) { h.update(std::to_string(s.size())).update(":").update(s); };
    field(stage);
    field(params);
    for (const auto& [name, hash] : input_hashes) {
        field(name);
        field(hash);
    }
    return h.hex_digest();
}

fs::path StageCache::dir_for(const std::string& stage, const std::string& key) const {
    return root_ / (stage + "-" + key.substr(0, 16));
}

std::map<std::string, std::string> hash_tree(const fs::path& dir, const std::vector<std::string>& exclude) {
    std::map<std::string, std::string> out;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string rel = fs::relative(entry.path(), dir).generic_string();
        if (std::find(exclude.begin(), exclude.end(), rel) != exclude.end()) continue;
        out[rel] = sha256_file(entry.path());
    }
    return out;
}

std::optional<StageEntry> StageCache::lookup(const std::string& stage, const std::string& key) const {
    const fs::path dir = dir_for(stage, key);
    if (!fs::exists(dir)) return std::nullopt;
    const fs::path record_path = dir / kStageRecordFile;
    std::ifstream in(record_path);
    if (!in) throw CacheCorruption(dir, "missing stage record");
    json record;
    try {
        in >> record;
    } catch (const json::exception& e) {
        throw CacheCorruption(dir, std::string("unreadable stage record: ") + e.what());
    }

    StageEntry entry{stage, key, dir, {}};
    try {
        if (record.at("stage").get<std::string>() != stage || record.at("key").get<std::string>() != key) {
            throw CacheCorruption(dir, "stage record belongs to a different key");
        }
        entry.files = record.at("files").get<std::map<std::string, std::string>>();
    } catch (const json::exception& e) {
        throw CacheCorruption(dir, std::string("malformed stage record: ") + e.what());
    }
    for (const auto& [rel, hash] : entry.files) {
        const fs::path p = dir / rel;
        if (!fs::is_regular_file(p)) throw CacheCorruption(dir, "missing file " + rel);
        if (sha256_file(p) != hash) throw CacheCorruption(dir, "hash mismatch for " + rel);
    }
    return entry;
}

StageEntry StageCache::commit(const std::string& stage, const std::string& key,
                              const std::function<void(const fs::path&)>& produce) const {
    fs::create_directories(root_);
    const fs::path final_dir = dir_for(stage, key);
    const fs::path scratch =
        root_ / (".tmp-" + stage + "-" + key.substr(0, 16) + "-" + std::to_string(::getpid()));
    fs::remove_all(scratch);
    fs::create_directories(scratch);
    try {
        produce(scratch);
        StageEntry entry{stage, key, final_dir, hash_tree(scratch)};
        const json record{{"stage", stage}, {"key", key}, {"files", entry.files}};
        std::ofstream(scratch / kStageRecordFile) << record.dump(2) << '\n';
        if (fs::exists(final_dir)) fs::remove_all(final_dir);
        fs::rename(scratch, final_dir);
        return entry;
    } catch (...) {
        std::error_code ec;
        fs::remove_all(scratch, ec);
        throw;
    }
}

}  // namespace smokesplat::pipeline
