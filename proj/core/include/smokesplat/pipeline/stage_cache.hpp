#pragma once

#include "smokesplat/error.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace smokesplat::pipeline {

/// A cached stage output no longer matches its recorded hashes (CLI exit code 4).
class CacheCorruption : public Error {
public:
    CacheCorruption(const std::filesystem::path& where, const std::string& detail)
        : Error("cache corruption at " + where.string() + ": " + detail), where_(where) {}
    const std::filesystem::path& where() const noexcept { return where_; }

private:
    std::filesystem::path where_;
};

/// One committed stage output: its directory and the hash of every file in
/// it, keyed by path relative to the directory.
struct StageEntry {
    std::string stage;
    std::string key;
    std::filesystem::path dir;
    std::map<std::string, std::string> files;

    std::filesystem::path file(const std::string& relative) const { return dir / relative; }
};

/// Content-addressed store of stage outputs under `<root>/<stage>-<key16>/`.
///
/// The key hashes the stage name, its canonical parameters and its input
/// content hashes, so any change upstream produces a new entry. Entries are
/// written into a scratch directory and renamed into place, so readers never
/// see a partial entry.
class StageCache {
public:
    explicit StageCache(std::filesystem::path root);

    const std::filesystem::path& root() const noexcept { return root_; }

    static std::string make_key(const std::string& stage, const std::string& params,
                                const std::map<std::string, std::string>& input_hashes);

    std::filesystem::path dir_for(const std::string& stage, const std::string& key) const;

    /// The entry for (stage, key) if present. Every listed file is re-hashed;
    /// a missing file, a hash mismatch or an unreadable record throws
    /// CacheCorruption.
    std::optional<StageEntry> lookup(const std::string& stage, const std::string& key) const;

    /// Runs `produce` on an empty scratch directory, hashes what it wrote and
    /// publishes it as the entry for (stage, key).
    StageEntry commit(const std::string& stage, const std::string& key,
                      const std::function<void(const std::filesystem::path&)>& produce) const;

private:
    std::filesystem::path root_;
};

inline constexpr const char* kStageRecordFile = "stage.json";

/// sha256 of every regular file under `dir` (recursively), keyed by relative
/// path with '/' separators; `exclude` names are skipped at the top level.
std::map<std::string, std::string> hash_tree(const std::filesystem::path& dir,
                                             const std::vector<std::string>& exclude = {});

}  // namespace smokesplat::pipeline
