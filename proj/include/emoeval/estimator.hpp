#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "emoeval/dialogue.hpp"
#include "emoeval/emotion.hpp"
#include "emoeval/rng.hpp"
#include "emoeval/scorer.hpp"

namespace emoeval {

/// Turn-indexed normal prior the hypothesized previous-turn emotion is drawn
/// from: the mean decays exponentially toward neutral while the variance
/// grows toward a ceiling as certainty about the user's state fades. The mean
/// lives on the signed scale but is not range-limited (the normal prior is
/// unbounded); draws are clamped into [-1, 1] at sampling time.
struct PriorSchedule {
    double initial_mean = -0.8;  // mu_0, typically negative
    double decay_rate = 0.075;   // k, per turn
    double var_initial = 0.01;
    double var_final = 0.09;
    double growth_rate = 0.075;  // r, per turn

    void validate() const {
        if (!std::isfinite(initial_mean))
            throw std::invalid_argument("PriorSchedule: initial mean must be finite");
        if (!(decay_rate > 0.0)) throw std::invalid_argument("PriorSchedule: decay rate must be > 0");
        if (!(growth_rate > 0.0))
            throw std::invalid_argument("PriorSchedule: growth rate must be > 0");
        if (!(var_initial > 0.0))
            throw std::invalid_argument("PriorSchedule: initial variance must be > 0");
        if (var_final < var_initial)
            throw std::invalid_argument("PriorSchedule: final variance must be >= initial");
    }

    /// mu_0 clamped onto the signed scale, e.g. for deriving s_0.
    [[nodiscard]] SignedEmotion clamped_mean() const {
        return SignedEmotion(std::min(std::max(initial_mean, -1.0), 1.0));
    }
};

/// Rates tied to the horizon so the mean reaches ~5% of mu_0 and the variance
/// ~95% of its ceiling by the final turn, whatever the horizon.
inline PriorSchedule default_schedule(int horizon_turns = 40) {
    if (horizon_turns < 1) throw std::invalid_argument("default_schedule: horizon must be >= 1");
    PriorSchedule schedule;
    schedule.decay_rate = 3.0 / horizon_turns;
    schedule.growth_rate = 3.0 / horizon_turns;
    return schedule;
}

/// mu_t = mu_0 * exp(-k (t - 1)).
inline double prior_mean(const PriorSchedule& schedule, int turn) {
    schedule.validate();
    if (turn < 1) throw std::invalid_argument("prior_mean: turn must be >= 1");
    return schedule.initial_mean * std::exp(-schedule.decay_rate * (turn - 1));
}

/// sigma^2_t = sigma^2_final - (sigma^2_final - sigma^2_initial) exp(-r (t-1)),
/// evaluated as a convex combination so t = 1 yields the initial variance
/// exactly.
inline double prior_variance(const PriorSchedule& schedule, int turn) {
    schedule.validate();
    if (turn < 1) throw std::invalid_argument("prior_variance: turn must be >= 1");
    const double decay = std::exp(-schedule.growth_rate * (turn - 1));
    return schedule.var_initial * decay + schedule.var_final * (1.0 - decay);
}

struct EstimatorConfig {
    int sample_count = 8;       // K
    double temperature = 10.0;  // tau
    std::uint64_t master_seed = 0;

    void validate() const {
        if (sample_count < 1)
            throw std::invalid_argument("EstimatorConfig: sample count must be >= 1");
        if (!(temperature > 0.0))
            throw std::invalid_argument("EstimatorConfig: temperature must be > 0");
    }
};

struct LogitPair {
    double positive = 0.0;
    double negative = 0.0;
};

/// P = exp(l_pos / tau) / (exp(l_pos / tau) + exp(l_neg / tau)), shifted by
/// the larger logit so it cannot overflow. Strictly in (0, 1) for finite
/// inputs.
inline double softmax_pair(LogitPair logits, double temperature) {
    if (!(temperature > 0.0)) throw std::invalid_argument("softmax_pair: temperature must be > 0");
    if (!std::isfinite(logits.positive) || !std::isfinite(logits.negative))
        throw std::invalid_argument("softmax_pair: logits must be finite");
    const double hi = std::max(logits.positive, logits.negative);
    const double pos = std::exp((logits.positive - hi) / temperature);
    const double neg = std::exp((logits.negative - hi) / temperature);
    return pos / (pos + neg);
}

/// K independent draws from Normal(mu_t, sigma^2_t), clamped to the signed
/// range so every hypothesis maps to a descriptor.
inline std::vector<SignedEmotion> sample_priors(const PriorSchedule& schedule, int turn,
                                                const EstimatorConfig& config, Rng& rng) {
    config.validate();
    const double mean = prior_mean(schedule, turn);
    const double stddev = std::sqrt(prior_variance(schedule, turn));
    std::vector<SignedEmotion> samples;
    samples.reserve(static_cast<std::size_t>(config.sample_count));
    for (int k = 0; k < config.sample_count; ++k) {
        const double draw = rng.normal(mean, stddev);
        samples.emplace_back(std::min(std::max(draw, -1.0), 1.0));
    }
    return samples;
}

/// Evaluation prompt for one hypothesis: rendered history, the hypothesized
/// previous-turn emotion, the user's current utterance, and the judging
/// instruction. Byte-identical for identical inputs.
inline std::string build_score_prompt(std::span<const DialogueTurn> history,
                                      const std::string& user_utterance,
                                      const EmotionDescriptor& hypothesis) {
    if (user_utterance.empty())
        throw std::invalid_argument("build_score_prompt: utterance must be non-empty");
    for (const DialogueTurn& turn : history)
        if (turn.user_utterance.empty() || turn.agent_reply.empty())
            throw std::invalid_argument("build_score_prompt: history turn " +
                                        std::to_string(turn.index) + " has empty text");
    std::string prompt = "The following is an emotional-support conversation.\n\n";
    for (const DialogueTurn& turn : history) {
        prompt += "User: " + turn.user_utterance + "\n";
        prompt += "Assistant: " + turn.agent_reply + "\n";
    }
    prompt += "\nIn the previous turn the user felt " + hypothesis.text + ".\n";
    prompt += "User: " + user_utterance + "\n";
    prompt += "\nJudge the emotional state the user expresses in their latest message.";
    return prompt;
}

/// A scorer call failed while estimating one turn; computing the trajectory
/// aborts with this diagnostic.
class EstimationError : public std::runtime_error {
public:
    EstimationError(int turn, const std::string& reason)
        : std::runtime_error("emotion estimation failed at turn " + std::to_string(turn) + ": " +
                             reason),
          turn_(turn) {}

    [[nodiscard]] int turn() const noexcept { return turn_; }

private:
    int turn_;
};

/// Estimate with its full audit trail: the sampled hypotheses and the
/// per-sample conditional probabilities whose arithmetic mean is the score.
struct TurnEstimate {
    EmotionScore score{0.5};
    std::vector<double> probabilities;
    std::vector<SignedEmotion> samples;
};

/// Intervention-style estimate of the user's emotion after turn `turn`:
/// the previous-turn state is sampled from the prior schedule instead of
/// being observed, each sample conditions a scoring prompt through its
/// descriptor, and the temperature softmax of the resulting logit pair is
/// averaged over the K samples. The per-turn seed is derived from the master
/// seed, the environment id and the turn index, so turns are independent and
/// may be estimated concurrently in any order.
inline TurnEstimate estimate_turn(const Transcript& transcript, int turn,
                                  const PriorSchedule& schedule, const EstimatorConfig& config,
                                  AssertionScorer& scorer) {
    config.validate();
    if (turn < 1 || turn > static_cast<int>(transcript.turns.size()))
        throw std::invalid_argument("estimate_turn: turn out of range");
    const std::span<const DialogueTurn> history(transcript.turns.data(),
                                                static_cast<std::size_t>(turn - 1));
    const std::string& utterance =
        transcript.turns[static_cast<std::size_t>(turn - 1)].user_utterance;

    Rng rng(derive_seed(config.master_seed, transcript.env_id, static_cast<std::uint64_t>(turn)));
    TurnEstimate estimate;
    estimate.samples = sample_priors(schedule, turn, config, rng);
    estimate.probabilities.reserve(estimate.samples.size());

    double sum = 0.0;
    for (const SignedEmotion& sample : estimate.samples) {
        const EmotionDescriptor hypothesis = descriptor(signed_to_score(sample));
        const std::string prompt = build_score_prompt(history, utterance, hypothesis);
        LogitPair logits;
        try {
            logits.positive = scorer.score(prompt, kPositiveAssertion);
            logits.negative = scorer.score(prompt, kNegativeAssertion);
        } catch (const std::exception& e) {
            throw EstimationError(turn, e.what());
        }
        const double p = softmax_pair(logits, config.temperature);
        estimate.probabilities.push_back(p);
        sum += p;
    }
    estimate.score = EmotionScore(sum / static_cast<double>(estimate.samples.size()));
    return estimate;
}

/// Per-turn emotion estimates for a whole transcript. s_0 defaults to the
/// initial prior mean mapped onto the reporting scale.
inline EmotionTrajectory estimate_trajectory(const Transcript& transcript,
                                             const PriorSchedule& schedule,
                                             const EstimatorConfig& config,
                                             AssertionScorer& scorer,
                                             std::optional<EmotionScore> initial_score = {}) {
    if (transcript.turns.empty())
        throw std::invalid_argument("estimate_trajectory: transcript has no turns");
    std::vector<EmotionScore> scores;
    scores.reserve(transcript.turns.size() + 1);
    scores.push_back(initial_score.value_or(signed_to_score(schedule.clamped_mean())));
    for (int t = 1; t <= static_cast<int>(transcript.turns.size()); ++t)
        scores.push_back(estimate_turn(transcript, t, schedule, config, scorer).score);
    return EmotionTrajectory(std::move(scores));
}

}  // namespace emoeval
