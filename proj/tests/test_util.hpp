#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>

#include "emoeval/corpus.hpp"

namespace testutil {

/// Self-deleting scratch directory for pipeline tests.
class TempDir {
public:
    TempDir() {
        std::random_device rd;
        for (int attempt = 0; attempt < 16; ++attempt) {
            std::filesystem::path candidate =
                std::filesystem::temp_directory_path() /
                ("emoeval-test-" + std::to_string(rd()));
            std::error_code ec;
            if (std::filesystem::create_directory(candidate, ec)) {
                path_ = candidate;
                return;
            }
        }
        throw std::runtime_error("TempDir: could not create scratch directory");
    }

    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }

    [[nodiscard]] const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline std::filesystem::path data_dir() {
    const char* dir = std::getenv("EMOEVAL_DATA");
    if (dir == nullptr)
        throw std::runtime_error("EMOEVAL_DATA must point at the repository data/ directory");
    return dir;
}

inline std::filesystem::path configs_dir() {
    const char* dir = std::getenv("EMOEVAL_CONFIGS");
    if (dir == nullptr)
        throw std::runtime_error("EMOEVAL_CONFIGS must point at the repository configs/ directory");
    return dir;
}

/// The bundled corpus schedules events for the 40-turn horizon; short smoke
/// runs need the trigger turns squeezed into their horizon first.
inline std::vector<emoeval::CorpusEntry> scaled_corpus(int turns, std::size_t max_entries = 0) {
    std::vector<emoeval::CorpusEntry> entries =
        emoeval::load_corpus(data_dir() / "sample_corpus.json");
    if (max_entries != 0 && entries.size() > max_entries) entries.resize(max_entries);
    for (emoeval::CorpusEntry& entry : entries)
        for (emoeval::DisturbanceEvent& event : entry.events)
            event.trigger_turn = std::max(1, std::min(event.trigger_turn, turns));
    return entries;
}

inline std::string scaled_corpus_json(int turns, std::size_t max_entries = 0) {
    return emoeval::serialize_corpus(scaled_corpus(turns, max_entries));
}

}  // namespace testutil
