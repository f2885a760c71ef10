#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "emoeval/dialogue.hpp"
#include "emoeval/rng.hpp"
#include "emoeval/strategy.hpp"

namespace emoeval {

enum class Domain { ProfessionalSocial, IntimateRelationships, PersonalGrowth, LifeCircumstances };

inline constexpr std::array<Domain, 4> kAllDomains = {
    Domain::ProfessionalSocial, Domain::IntimateRelationships, Domain::PersonalGrowth,
    Domain::LifeCircumstances};

inline std::string_view domain_tag(Domain d) {
    switch (d) {
        case Domain::ProfessionalSocial: return "professional_social";
        case Domain::IntimateRelationships: return "intimate_relationships";
        case Domain::PersonalGrowth: return "personal_growth";
        case Domain::LifeCircumstances: return "life_circumstances";
    }
    throw std::logic_error("domain_tag: unknown domain");
}

inline std::optional<Domain> parse_domain(std::string_view tag) {
    for (Domain d : kAllDomains)
        if (domain_tag(d) == tag) return d;
    return std::nullopt;
}

struct SubcategoryInfo {
    Domain domain;
    std::string_view tag;
    std::string_view description;
};

/// The fourteen distress subcategories, grouped under their four domains. The
/// description doubles as the shared background text of an environment built
/// from that subcategory.
inline const std::array<SubcategoryInfo, 14>& subcategory_table() {
    static const std::array<SubcategoryInfo, 14> table = {{
        {Domain::ProfessionalSocial, "occupational_stress",
         "Work has been relentless lately: long hours, stacked deadlines, and no recovery time "
         "are wearing the user down."},
        {Domain::ProfessionalSocial, "interpersonal_conflict",
         "A clash with people around the user keeps flaring up, souring the workplace or their "
         "wider circle."},
        {Domain::ProfessionalSocial, "career_development_insecurity",
         "The user keeps second-guessing where their career is heading and whether their "
         "position will still exist next year."},
        {Domain::ProfessionalSocial, "social_comparison_identity",
         "Watching peers pull ahead has the user measuring themselves against others and "
         "doubting who they are."},
        {Domain::IntimateRelationships, "romantic_relationships",
         "A romantic bond is faltering: the user is wrestling with heartbreak or with doubts "
         "about staying."},
        {Domain::IntimateRelationships, "family_kinship",
         "Home is no refuge right now; friction with parents or relatives follows the user into "
         "every evening."},
        {Domain::IntimateRelationships, "friendships",
         "A friendship the user counted on has gone cold or complicated, and they do not know "
         "how to read it."},
        {Domain::PersonalGrowth, "academic_developmental_stress",
         "Exams, rankings, and expectations about the future keep the user studying past "
         "exhaustion."},
        {Domain::PersonalGrowth, "self_perception_self_worth",
         "The user's inner critic is loud: confidence is scarce and their sense of their own "
         "value keeps slipping."},
        {Domain::PersonalGrowth, "psychosomatic_health",
         "The body is keeping score: sleepless nights, heaviness, and aches with no clear "
         "medical cause."},
        {Domain::PersonalGrowth, "existential_meaning_crisis",
         "The user has lost the thread of why any of it matters and is searching for a "
         "direction that feels like theirs."},
        {Domain::LifeCircumstances, "economic_subsistence_pressure",
         "Money runs out before the month does, and the user carries the constant arithmetic "
         "of getting by."},
        {Domain::LifeCircumstances, "major_negative_life_events",
         "Something irreversible has happened, a death, an accident, a serious loss, and the "
         "user is living in its wake."},
        {Domain::LifeCircumstances, "environmental_social_factors",
         "The world around the user feels hostile or unsteady: displacement, unfair treatment, "
         "or upheaval they cannot control."},
    }};
    return table;
}

inline const SubcategoryInfo* find_subcategory(std::string_view tag) {
    for (const SubcategoryInfo& info : subcategory_table())
        if (info.tag == tag) return &info;
    return nullptr;
}

/// One distress scenario: a domain plus one of its subcategories.
struct Scenario {
    Domain domain = Domain::ProfessionalSocial;
    std::string subcategory;

    [[nodiscard]] std::string description() const {
        const SubcategoryInfo* info = find_subcategory(subcategory);
        return info == nullptr ? std::string() : std::string(info->description);
    }
};

/// One evaluation context: scenario, strategy constraint, personas,
/// disturbance events and a sampling weight.
struct CorpusEntry {
    std::string id;
    Scenario scenario;
    Strategy strategy = Strategy::CogChg;
    Language language = Language::EN;
    std::string user_persona;
    std::string agent_constraint;
    std::vector<DisturbanceEvent> events;
    double weight = 1.0;
};

class CorpusError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Structural checks on one entry against the dialogue horizon. Returns the
/// list of violations; empty means the entry is acceptable.
inline std::vector<std::string> validate_entry(const CorpusEntry& entry, int horizon_turns) {
    std::vector<std::string> violations;
    if (entry.id.empty()) violations.push_back("id must be non-empty");
    const SubcategoryInfo* info = find_subcategory(entry.scenario.subcategory);
    if (info == nullptr)
        violations.push_back("unknown subcategory '" + entry.scenario.subcategory + "'");
    else if (info->domain != entry.scenario.domain)
        violations.push_back("subcategory '" + entry.scenario.subcategory +
                             "' does not belong to domain '" +
                             std::string(domain_tag(entry.scenario.domain)) + "'");
    if (entry.user_persona.empty()) violations.push_back("user_persona must be non-empty");
    if (entry.agent_constraint.empty()) violations.push_back("agent_constraint must be non-empty");
    const std::size_t n_events = entry.events.size();
    if (n_events != 0 && n_events != 1 && n_events != 3)
        violations.push_back("event count must be 0, 1, or 3");
    for (const DisturbanceEvent& event : entry.events) {
        if (event.id.empty()) violations.push_back("event id must be non-empty");
        if (event.content.empty())
            violations.push_back("event '" + event.id + "' content must be non-empty");
        if (event.trigger_turn < 1)
            violations.push_back("event '" + event.id + "' trigger turn must be >= 1");
        else if (event.trigger_turn > horizon_turns)
            violations.push_back("event '" + event.id + "' trigger exceeds horizon " +
                                 std::to_string(horizon_turns));
    }
    if (!(entry.weight > 0.0)) violations.push_back("weight must be > 0");
    return violations;
}

namespace detail {

inline std::string require_string(const nlohmann::json& record, const char* field,
                                  const std::string& entry_id) {
    if (!record.contains(field) || !record[field].is_string())
        throw CorpusError("corpus entry '" + entry_id + "': field '" + field +
                          "' missing or not a string");
    return record[field].get<std::string>();
}

}  // namespace detail

inline std::vector<CorpusEntry> parse_corpus(const std::string& json_text,
                                             int horizon_turns = 40) {
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw CorpusError(std::string("corpus is not valid JSON: ") + e.what());
    }
    if (!root.is_array()) throw CorpusError("corpus must be a JSON array of entries");

    std::vector<CorpusEntry> entries;
    std::vector<std::string> seen_ids;
    for (const nlohmann::json& record : root) {
        if (!record.is_object()) throw CorpusError("corpus entry must be a JSON object");
        const std::string id =
            record.contains("id") && record["id"].is_string() ? record["id"].get<std::string>()
                                                              : std::string();
        if (id.empty()) throw CorpusError("corpus entry: field 'id' missing or not a string");
        if (std::find(seen_ids.begin(), seen_ids.end(), id) != seen_ids.end())
            throw CorpusError("duplicate corpus entry id '" + id + "'");
        seen_ids.push_back(id);

        CorpusEntry entry;
        entry.id = id;
        const std::string domain_text = detail::require_string(record, "domain", id);
        const std::optional<Domain> domain = parse_domain(domain_text);
        if (!domain)
            throw CorpusError("corpus entry '" + id + "': field 'domain' has unknown value '" +
                              domain_text + "'");
        entry.scenario.domain = *domain;
        entry.scenario.subcategory = detail::require_string(record, "subcategory", id);
        const std::string strategy_text = detail::require_string(record, "strategy", id);
        const std::optional<Strategy> strategy = parse_strategy(strategy_text);
        if (!strategy)
            throw CorpusError("corpus entry '" + id + "': field 'strategy' has unknown value '" +
                              strategy_text + "'");
        entry.strategy = *strategy;
        const std::string language_text = detail::require_string(record, "language", id);
        const std::optional<Language> language = parse_language(language_text);
        if (!language)
            throw CorpusError("corpus entry '" + id + "': field 'language' has unknown value '" +
                              language_text + "'");
        entry.language = *language;
        entry.user_persona = detail::require_string(record, "user_persona", id);
        entry.agent_constraint = detail::require_string(record, "agent_constraint", id);
        if (!record.contains("events") || !record["events"].is_array())
            throw CorpusError("corpus entry '" + id + "': field 'events' missing or not an array");
        for (const nlohmann::json& event_record : record["events"]) {
            DisturbanceEvent event;
            event.id = detail::require_string(event_record, "id", id);
            event.content = detail::require_string(event_record, "content", id);
            if (!event_record.contains("trigger_turn") ||
                !event_record["trigger_turn"].is_number_integer())
                throw CorpusError("corpus entry '" + id +
                                  "': field 'trigger_turn' missing or not an integer");
            event.trigger_turn = event_record["trigger_turn"].get<int>();
            entry.events.push_back(std::move(event));
        }
        if (!record.contains("weight") || !record["weight"].is_number())
            throw CorpusError("corpus entry '" + id + "': field 'weight' missing or not a number");
        entry.weight = record["weight"].get<double>();

        const std::vector<std::string> violations = validate_entry(entry, horizon_turns);
        if (!violations.empty()) {
            std::ostringstream message;
            message << "corpus entry '" << id << "' invalid:";
            for (const std::string& v : violations) message << ' ' << v << ';';
            throw CorpusError(message.str());
        }
        entries.push_back(std::move(entry));
    }
    return entries;
}

inline std::string serialize_corpus(const std::vector<CorpusEntry>& entries) {
    nlohmann::json root = nlohmann::json::array();
    for (const CorpusEntry& entry : entries) {
        nlohmann::json record;
        record["id"] = entry.id;
        record["domain"] = std::string(domain_tag(entry.scenario.domain));
        record["subcategory"] = entry.scenario.subcategory;
        record["strategy"] = std::string(strategy_tag(entry.strategy));
        record["language"] = std::string(language_tag(entry.language));
        record["user_persona"] = entry.user_persona;
        record["agent_constraint"] = entry.agent_constraint;
        record["events"] = nlohmann::json::array();
        for (const DisturbanceEvent& event : entry.events)
            record["events"].push_back({{"id", event.id},
                                        {"content", event.content},
                                        {"trigger_turn", event.trigger_turn}});
        record["weight"] = entry.weight;
        root.push_back(std::move(record));
    }
    return root.dump(2) + "\n";
}

inline std::vector<CorpusEntry> load_corpus(const std::filesystem::path& path,
                                            int horizon_turns = 40) {
    std::ifstream in(path);
    if (!in) throw CorpusError("cannot open corpus file '" + path.string() + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_corpus(buffer.str(), horizon_turns);
}

/// Weighted sampling without replacement via sequential roulette draws:
/// single-draw frequencies follow the normalized weights exactly, and the
/// result is a permutation when n equals the corpus size.
inline std::vector<CorpusEntry> sample_entries(const std::vector<CorpusEntry>& corpus, int n,
                                               Rng& rng) {
    if (n < 0 || static_cast<std::size_t>(n) > corpus.size())
        throw std::invalid_argument("sample_entries: n must lie in 0..|corpus|");
    std::vector<std::size_t> remaining(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) remaining[i] = i;

    std::vector<CorpusEntry> selection;
    selection.reserve(static_cast<std::size_t>(n));
    for (int draw = 0; draw < n; ++draw) {
        double total = 0.0;
        for (std::size_t idx : remaining) total += corpus[idx].weight;
        const double pick = rng.uniform01() * total;
        double cumulative = 0.0;
        std::size_t chosen = remaining.size() - 1;
        for (std::size_t pos = 0; pos < remaining.size(); ++pos) {
            cumulative += corpus[remaining[pos]].weight;
            if (pick < cumulative) {
                chosen = pos;
                break;
            }
        }
        selection.push_back(corpus[remaining[chosen]]);
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(chosen));
    }
    return selection;
}

/// Builds the dialogue environment for one corpus entry. The background is
/// the subcategory description; the agent persona is the entry's constraint
/// text (the strategy instruction block is appended at render time).
inline Environment make_environment(const CorpusEntry& entry) {
    Environment env;
    env.id = entry.id;
    env.background = entry.scenario.description();
    env.user_persona = entry.user_persona;
    env.agent_persona = entry.agent_constraint;
    env.strategy = entry.strategy;
    env.language = entry.language;
    env.validate();
    return env;
}

}  // namespace emoeval
