#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "emoeval/rng.hpp"
#include "emoeval/strategy.hpp"

namespace emoeval {

struct ChatMessage {
    std::string role;  // "system" | "user" | "assistant"
    std::string content;

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

/// Error contract of a chat backend: thrown once retries are exhausted or a
/// request is permanently rejected.
class ClientError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Produces one reply for a role-tagged message list. Implementations must be
/// safe to share across concurrently running dialogues.
class ChatClient {
public:
    virtual ~ChatClient() = default;
    virtual std::string chat(const std::vector<ChatMessage>& messages) = 0;
};

/// Shared setting one dialogue runs in: background, both personas, the
/// regulation strategy constraining the agent, and the language.
struct Environment {
    std::string id;
    std::string background;
    std::string user_persona;
    std::string agent_persona;
    Strategy strategy = Strategy::CogChg;
    Language language = Language::EN;

    void validate() const {
        if (id.empty()) throw std::invalid_argument("Environment: id must be non-empty");
        if (background.empty() || user_persona.empty() || agent_persona.empty())
            throw std::invalid_argument("Environment '" + id + "': all texts must be non-empty");
    }
};

/// Scripted negative occurrence revealed to the user simulator after the
/// agent's reply at trigger_turn.
struct DisturbanceEvent {
    std::string id;
    std::string content;
    int trigger_turn = 1;

    friend bool operator==(const DisturbanceEvent&, const DisturbanceEvent&) = default;
};

struct DialogueTurn {
    int index = 0;
    std::string user_utterance;
    std::string agent_reply;
    std::vector<std::string> events_visible;  // event ids observed by end of this turn
};

/// Full record of one dialogue run.
struct Transcript {
    std::string env_id;
    std::string user_model;
    std::string agent_model;
    std::uint64_t seed = 0;
    Language language = Language::EN;
    Strategy strategy = Strategy::CogChg;
    std::vector<DialogueTurn> turns;
    std::map<std::string, int> event_log;  // event id -> turn at which it triggered
    bool complete = true;

    void validate() const {
        for (std::size_t i = 0; i < turns.size(); ++i) {
            const DialogueTurn& turn = turns[i];
            if (turn.index != static_cast<int>(i) + 1)
                throw std::invalid_argument("Transcript '" + env_id +
                                            "': turn indices must be contiguous from 1");
            if (turn.user_utterance.empty() || turn.agent_reply.empty())
                throw std::invalid_argument("Transcript '" + env_id + "': empty utterance at turn " +
                                            std::to_string(turn.index));
            if (i > 0) {
                const auto& prev = turns[i - 1].events_visible;
                if (turn.events_visible.size() < prev.size() ||
                    !std::equal(prev.begin(), prev.end(), turn.events_visible.begin()))
                    throw std::invalid_argument("Transcript '" + env_id +
                                                "': observed events must grow monotonically");
            }
        }
        for (const auto& [id, turn] : event_log)
            if (turn < 1 || turn > static_cast<int>(turns.size()))
                throw std::invalid_argument("Transcript '" + env_id + "': event '" + id +
                                            "' logged outside the run");
    }
};

/// Alternative to authored trigger turns: reassigns every event to a distinct
/// seeded-random turn in 1..horizon, ascending in corpus order, for runs
/// where events should be interleaved at random.
inline std::vector<DisturbanceEvent> randomize_event_schedule(std::vector<DisturbanceEvent> events,
                                                              int horizon, Rng& rng) {
    if (horizon < 1) throw std::invalid_argument("randomize_event_schedule: horizon must be >= 1");
    if (events.size() > static_cast<std::size_t>(horizon))
        throw std::invalid_argument("randomize_event_schedule: more events than turns");
    std::vector<int> turns(static_cast<std::size_t>(horizon));
    for (int t = 0; t < horizon; ++t) turns[static_cast<std::size_t>(t)] = t + 1;
    // partial Fisher-Yates draw without replacement
    std::vector<int> chosen;
    chosen.reserve(events.size());
    for (std::size_t k = 0; k < events.size(); ++k) {
        const std::size_t pick = k + static_cast<std::size_t>(rng.next_u64() % (turns.size() - k));
        std::swap(turns[k], turns[pick]);
        chosen.push_back(turns[k]);
    }
    std::sort(chosen.begin(), chosen.end());
    for (std::size_t k = 0; k < events.size(); ++k) events[k].trigger_turn = chosen[k];
    return events;
}

/// O_i = O_{i-1} plus every event whose trigger turn is i, in corpus order.
/// Idempotent for repeated calls at the same turn.
inline std::vector<std::string> trigger_events(const std::vector<DisturbanceEvent>& events,
                                               int turn,
                                               const std::vector<std::string>& observed) {
    std::vector<std::string> next = observed;
    for (const DisturbanceEvent& event : events) {
        if (event.trigger_turn != turn) continue;
        if (std::find(next.begin(), next.end(), event.id) == next.end())
            next.push_back(event.id);
    }
    return next;
}

namespace detail {

inline const DisturbanceEvent& event_by_id(const std::vector<DisturbanceEvent>& events,
                                           const std::string& id) {
    for (const DisturbanceEvent& event : events)
        if (event.id == id) return event;
    throw std::invalid_argument("unknown disturbance event id '" + id + "'");
}

inline std::string language_line(Language lang) {
    return lang == Language::ZH ? "The conversation is held in Chinese."
                                : "The conversation is held in English.";
}

}  // namespace detail

/// Context for the user simulator producing the next utterance. The simulator
/// speaks as the user, so its own past utterances arrive as assistant turns
/// and the agent's replies as user turns. Each observed disturbance event is
/// injected as one out-of-band system notice directly after the turn at which
/// it triggered; the dialogue history itself stays utterances-only.
inline std::vector<ChatMessage> render_user_context(const Environment& env,
                                                    std::span<const DialogueTurn> history,
                                                    const std::vector<DisturbanceEvent>& events) {
    std::vector<ChatMessage> messages;
    messages.push_back(
        {"system", "You are role-playing the user in an emotional-support conversation. Stay in "
                   "character and answer with the user's next message only.\n\nPersona: " +
                       env.user_persona + "\n\nBackground: " + env.background + "\n\n" +
                       detail::language_line(env.language)});
    std::size_t seen = 0;
    for (const DialogueTurn& turn : history) {
        messages.push_back({"assistant", turn.user_utterance});
        messages.push_back({"user", turn.agent_reply});
        for (std::size_t k = seen; k < turn.events_visible.size(); ++k) {
            const DisturbanceEvent& event = detail::event_by_id(events, turn.events_visible[k]);
            messages.push_back(
                {"system", "Something just happened to you: " + event.content +
                               " React to it in your next message."});
        }
        seen = turn.events_visible.size();
    }
    return messages;
}

/// Context for the model under test. Carries persona, strategy constraint,
/// background and the utterance history; disturbance events are never
/// included, the agent must infer them from the user's behaviour.
inline std::vector<ChatMessage> render_agent_context(const Environment& env,
                                                     std::span<const DialogueTurn> history,
                                                     const std::string& user_utterance) {
    std::vector<ChatMessage> messages;
    messages.push_back(
        {"system", env.agent_persona + "\n\n" + std::string(strategy_instruction(env.strategy)) +
                       "\n\nBackground: " + env.background + "\n\n" +
                       detail::language_line(env.language)});
    for (const DialogueTurn& turn : history) {
        messages.push_back({"user", turn.user_utterance});
        messages.push_back({"assistant", turn.agent_reply});
    }
    messages.push_back({"user", user_utterance});
    return messages;
}

struct DialogueRunConfig {
    int turns = 40;
    std::uint64_t seed = 0;
    std::string user_model = "user-sim";
    std::string agent_model = "agent";
};

/// Runs the interaction loop for T turns: the user simulator produces q_i
/// from the history, background and the events observed so far; the agent
/// replies from the history and q_i without event access; events scheduled at
/// turn i become visible after the agent's reply. A client failure aborts the
/// run and the partial transcript comes back flagged incomplete.
inline Transcript run_dialogue(const Environment& env,
                               const std::vector<DisturbanceEvent>& events, ChatClient& user,
                               ChatClient& agent, const DialogueRunConfig& config) {
    env.validate();
    if (config.turns < 1) throw std::invalid_argument("run_dialogue: turns must be >= 1");
    for (const DisturbanceEvent& event : events) {
        if (event.content.empty())
            throw std::invalid_argument("run_dialogue: event '" + event.id + "' has empty content");
        if (event.trigger_turn < 1 || event.trigger_turn > config.turns)
            throw std::invalid_argument("run_dialogue: event '" + event.id +
                                        "' triggers outside 1.." + std::to_string(config.turns));
    }

    Transcript transcript;
    transcript.env_id = env.id;
    transcript.user_model = config.user_model;
    transcript.agent_model = config.agent_model;
    transcript.seed = config.seed;
    transcript.language = env.language;
    transcript.strategy = env.strategy;

    std::vector<std::string> observed;
    for (int i = 1; i <= config.turns; ++i) {
        DialogueTurn turn;
        turn.index = i;
        try {
            turn.user_utterance = user.chat(render_user_context(env, transcript.turns, events));
            turn.agent_reply =
                agent.chat(render_agent_context(env, transcript.turns, turn.user_utterance));
        } catch (const ClientError&) {
            transcript.complete = false;
            return transcript;
        }
        observed = trigger_events(events, i, observed);
        turn.events_visible = observed;
        transcript.turns.push_back(std::move(turn));
        for (const DisturbanceEvent& event : events)
            if (event.trigger_turn == i) transcript.event_log.emplace(event.id, i);
    }
    transcript.validate();
    return transcript;
}

}  // namespace emoeval
