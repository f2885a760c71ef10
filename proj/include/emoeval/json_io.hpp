#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emoeval/dialogue.hpp"
#include "emoeval/strategy.hpp"

namespace emoeval {

class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Per-turn estimation record kept for audit next to the final score.
struct SequenceEntry {
    int turn = 0;
    double score = 0.5;
    std::vector<double> samples;        // hypothesized previous-turn emotions, signed scale
    std::vector<double> probabilities;  // per-sample conditional probabilities
};

/// One scored dialogue: the estimated emotion sequence plus the settings that
/// produced it.
struct EmotionSequence {
    std::string env_id;
    std::string model;
    Strategy strategy = Strategy::CogChg;
    Language language = Language::EN;
    std::uint64_t seed = 0;
    int sample_count = 8;
    double temperature = 10.0;
    int n_events = 0;
    double initial_score = 0.1;
    std::vector<SequenceEntry> turns;

    [[nodiscard]] std::vector<double> scores() const {
        std::vector<double> all;
        all.reserve(turns.size() + 1);
        all.push_back(initial_score);
        for (const SequenceEntry& entry : turns) all.push_back(entry.score);
        return all;
    }
};

/// Per-dialogue metric record, one JSON line each.
struct DialogueMetrics {
    std::string env_id;
    std::string model;
    Strategy strategy = Strategy::CogChg;
    Language language = Language::EN;
    double bel = 0.0;
    double etv_empirical = 0.0;
    double etv_matrix = 0.0;
    double ecp_cx = 0.0;
    double ecp_cy = 0.0;
    int n_turns = 0;
    int n_events = 0;
    std::vector<double> scores;  // s_0..s_T, kept for trajectory curves
};

namespace detail {

inline Strategy strategy_from_json(const nlohmann::json& j, const std::string& context) {
    const auto parsed = parse_strategy(j.get<std::string>());
    if (!parsed) throw SchemaError(context + ": unknown strategy '" + j.get<std::string>() + "'");
    return *parsed;
}

inline Language language_from_json(const nlohmann::json& j, const std::string& context) {
    const auto parsed = parse_language(j.get<std::string>());
    if (!parsed) throw SchemaError(context + ": unknown language '" + j.get<std::string>() + "'");
    return *parsed;
}

template <typename T>
T field(const nlohmann::json& j, const char* name, const std::string& context) {
    if (!j.contains(name)) throw SchemaError(context + ": missing field '" + name + "'");
    try {
        return j[name].get<T>();
    } catch (const nlohmann::json::exception&) {
        throw SchemaError(context + ": field '" + name + "' has the wrong type");
    }
}

}  // namespace detail

inline nlohmann::json transcript_to_json(const Transcript& transcript) {
    nlohmann::json j;
    j["env_id"] = transcript.env_id;
    j["model_ids"] = {{"user", transcript.user_model}, {"agent", transcript.agent_model}};
    j["seed"] = transcript.seed;
    j["language"] = std::string(language_tag(transcript.language));
    j["strategy"] = std::string(strategy_tag(transcript.strategy));
    j["turns"] = nlohmann::json::array();
    for (const DialogueTurn& turn : transcript.turns)
        j["turns"].push_back({{"i", turn.index},
                              {"q", turn.user_utterance},
                              {"a", turn.agent_reply},
                              {"events_visible", turn.events_visible}});
    j["event_log"] = nlohmann::json::object();
    for (const auto& [id, turn] : transcript.event_log) j["event_log"][id] = turn;
    j["complete"] = transcript.complete;
    return j;
}

inline Transcript transcript_from_json(const nlohmann::json& j, const std::string& context) {
    Transcript transcript;
    transcript.env_id = detail::field<std::string>(j, "env_id", context);
    if (!j.contains("model_ids")) throw SchemaError(context + ": missing field 'model_ids'");
    transcript.user_model = detail::field<std::string>(j["model_ids"], "user", context);
    transcript.agent_model = detail::field<std::string>(j["model_ids"], "agent", context);
    transcript.seed = detail::field<std::uint64_t>(j, "seed", context);
    transcript.language =
        detail::language_from_json(j.contains("language") ? j["language"] : "EN", context);
    transcript.strategy =
        detail::strategy_from_json(j.contains("strategy") ? j["strategy"] : "CogChg", context);
    if (!j.contains("turns") || !j["turns"].is_array())
        throw SchemaError(context + ": missing field 'turns'");
    for (const nlohmann::json& turn_json : j["turns"]) {
        DialogueTurn turn;
        turn.index = detail::field<int>(turn_json, "i", context);
        turn.user_utterance = detail::field<std::string>(turn_json, "q", context);
        turn.agent_reply = detail::field<std::string>(turn_json, "a", context);
        turn.events_visible =
            detail::field<std::vector<std::string>>(turn_json, "events_visible", context);
        transcript.turns.push_back(std::move(turn));
    }
    if (j.contains("event_log"))
        for (const auto& [id, turn] : j["event_log"].items())
            transcript.event_log.emplace(id, turn.get<int>());
    transcript.complete = detail::field<bool>(j, "complete", context);
    transcript.validate();
    return transcript;
}

inline nlohmann::json sequence_to_json(const EmotionSequence& sequence) {
    nlohmann::json j;
    j["env_id"] = sequence.env_id;
    j["model"] = sequence.model;
    j["strategy"] = std::string(strategy_tag(sequence.strategy));
    j["language"] = std::string(language_tag(sequence.language));
    j["seed"] = sequence.seed;
    j["sample_count"] = sequence.sample_count;
    j["temperature"] = sequence.temperature;
    j["n_events"] = sequence.n_events;
    j["s0"] = sequence.initial_score;
    j["turns"] = nlohmann::json::array();
    for (const SequenceEntry& entry : sequence.turns)
        j["turns"].push_back({{"turn", entry.turn},
                              {"score", entry.score},
                              {"samples", entry.samples},
                              {"probabilities", entry.probabilities}});
    return j;
}

inline EmotionSequence sequence_from_json(const nlohmann::json& j, const std::string& context) {
    EmotionSequence sequence;
    sequence.env_id = detail::field<std::string>(j, "env_id", context);
    sequence.model = detail::field<std::string>(j, "model", context);
    sequence.strategy = detail::strategy_from_json(
        j.contains("strategy") ? j["strategy"] : "CogChg", context);
    sequence.language = detail::language_from_json(
        j.contains("language") ? j["language"] : "EN", context);
    sequence.seed = detail::field<std::uint64_t>(j, "seed", context);
    sequence.sample_count = detail::field<int>(j, "sample_count", context);
    sequence.temperature = detail::field<double>(j, "temperature", context);
    sequence.n_events = detail::field<int>(j, "n_events", context);
    sequence.initial_score = detail::field<double>(j, "s0", context);
    if (!j.contains("turns") || !j["turns"].is_array())
        throw SchemaError(context + ": missing field 'turns'");
    for (const nlohmann::json& entry_json : j["turns"]) {
        SequenceEntry entry;
        entry.turn = detail::field<int>(entry_json, "turn", context);
        entry.score = detail::field<double>(entry_json, "score", context);
        entry.samples = detail::field<std::vector<double>>(entry_json, "samples", context);
        entry.probabilities =
            detail::field<std::vector<double>>(entry_json, "probabilities", context);
        sequence.turns.push_back(std::move(entry));
    }
    return sequence;
}

inline nlohmann::json metrics_to_json(const DialogueMetrics& m) {
    nlohmann::json j;
    j["env_id"] = m.env_id;
    j["model"] = m.model;
    j["strategy"] = std::string(strategy_tag(m.strategy));
    j["language"] = std::string(language_tag(m.language));
    j["bel"] = m.bel;
    j["etv_empirical"] = m.etv_empirical;
    j["etv_matrix"] = m.etv_matrix;
    j["ecp"] = {{"cx", m.ecp_cx}, {"cy", m.ecp_cy}};
    j["n_turns"] = m.n_turns;
    j["n_events"] = m.n_events;
    j["scores"] = m.scores;
    return j;
}

inline DialogueMetrics metrics_from_json(const nlohmann::json& j, const std::string& context) {
    DialogueMetrics m;
    m.env_id = detail::field<std::string>(j, "env_id", context);
    m.model = detail::field<std::string>(j, "model", context);
    m.strategy = detail::strategy_from_json(j.contains("strategy") ? j["strategy"] : "CogChg",
                                            context);
    m.language = detail::language_from_json(j.contains("language") ? j["language"] : "EN",
                                            context);
    m.bel = detail::field<double>(j, "bel", context);
    m.etv_empirical = detail::field<double>(j, "etv_empirical", context);
    m.etv_matrix = detail::field<double>(j, "etv_matrix", context);
    if (!j.contains("ecp")) throw SchemaError(context + ": missing field 'ecp'");
    m.ecp_cx = detail::field<double>(j["ecp"], "cx", context);
    m.ecp_cy = detail::field<double>(j["ecp"], "cy", context);
    m.n_turns = detail::field<int>(j, "n_turns", context);
    m.n_events = detail::field<int>(j, "n_events", context);
    m.scores = detail::field<std::vector<double>>(j, "scores", context);
    return m;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file '" + path.string() + "'");
    out << text;
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read file '" + path.string() + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

}  // namespace emoeval
