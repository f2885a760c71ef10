#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace emoeval {

/// The six emotion-regulation strategies an agent can be constrained to.
enum class Strategy { SitSel, SitMod, AttDep, CogChg, ResMod, ERFlex };

inline constexpr std::array<Strategy, 6> kAllStrategies = {
    Strategy::SitSel, Strategy::SitMod, Strategy::AttDep,
    Strategy::CogChg, Strategy::ResMod, Strategy::ERFlex};

inline std::string_view strategy_tag(Strategy s) {
    switch (s) {
        case Strategy::SitSel: return "SitSel";
        case Strategy::SitMod: return "SitMod";
        case Strategy::AttDep: return "AttDep";
        case Strategy::CogChg: return "CogChg";
        case Strategy::ResMod: return "ResMod";
        case Strategy::ERFlex: return "ERFlex";
    }
    throw std::logic_error("strategy_tag: unknown strategy");
}

inline std::optional<Strategy> parse_strategy(std::string_view tag) {
    for (Strategy s : kAllStrategies)
        if (strategy_tag(s) == tag) return s;
    return std::nullopt;
}

/// Instruction block appended to the agent's system context. The texts pin
/// the behavioural constraint per strategy; scoring prompts never see them.
inline std::string_view strategy_instruction(Strategy s) {
    switch (s) {
        case Strategy::SitSel:
            return "Strategy constraint (Situation Selection): help the user notice which "
                   "situations trigger their distress and guide them toward choosing or "
                   "seeking out environments and company that support their wellbeing.";
        case Strategy::SitMod:
            return "Strategy constraint (Situation Modification): guide the user to make "
                   "small, concrete changes to their external or interpersonal circumstances "
                   "so the situation itself carries less negative weight.";
        case Strategy::AttDep:
            return "Strategy constraint (Attentional Deployment): gently redirect the user's "
                   "attention away from rumination and toward neutral or positive aspects of "
                   "their present situation.";
        case Strategy::CogChg:
            return "Strategy constraint (Cognitive Change): help the user spot distorted "
                   "appraisals and offer constructive reinterpretations, so the meaning they "
                   "assign to events, rather than the events themselves, shifts.";
        case Strategy::ResMod:
            return "Strategy constraint (Response Modulation): recommend concrete actions "
                   "the user can take to manage how their emotional response expresses "
                   "itself, such as breathing, movement, or writing.";
        case Strategy::ERFlex:
            return "Strategy constraint (Emotion Regulation Flexibility): adapt your "
                   "regulation approach to the user's current state and context instead of "
                   "holding to a single technique.";
    }
    throw std::logic_error("strategy_instruction: unknown strategy");
}

enum class Language { EN, ZH };

inline std::string_view language_tag(Language lang) {
    switch (lang) {
        case Language::EN: return "EN";
        case Language::ZH: return "ZH";
    }
    throw std::logic_error("language_tag: unknown language");
}

inline std::optional<Language> parse_language(std::string_view tag) {
    if (tag == "EN") return Language::EN;
    if (tag == "ZH") return Language::ZH;
    return std::nullopt;
}

}  // namespace emoeval
