#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace emoeval {

/// Emotion value on the reporting scale: 0 most negative, 1 most positive,
/// 0.5 neutral. All metrics operate on this scale.
class EmotionScore {
public:
    explicit EmotionScore(double value) : value_(value) {
        if (!std::isfinite(value))
            throw std::invalid_argument("EmotionScore: value must be finite");
        if (value < 0.0 || value > 1.0)
            throw std::invalid_argument("EmotionScore: value must lie in [0, 1], got " +
                                        std::to_string(value));
    }

    [[nodiscard]] double value() const noexcept { return value_; }

    friend bool operator==(EmotionScore a, EmotionScore b) noexcept = default;

private:
    double value_;
};

/// Emotion value on the signed scale [-1, 1], 0 neutral. Only the prior
/// sampler works on this scale; everything else reports on [0, 1].
class SignedEmotion {
public:
    explicit SignedEmotion(double value) : value_(value) {
        if (!std::isfinite(value))
            throw std::invalid_argument("SignedEmotion: value must be finite");
        if (value < -1.0 || value > 1.0)
            throw std::invalid_argument("SignedEmotion: value must lie in [-1, 1], got " +
                                        std::to_string(value));
    }

    [[nodiscard]] double value() const noexcept { return value_; }

    friend bool operator==(SignedEmotion a, SignedEmotion b) noexcept = default;

private:
    double value_;
};

inline SignedEmotion score_to_signed(EmotionScore v) {
    return SignedEmotion(2.0 * v.value() - 1.0);
}

inline EmotionScore signed_to_score(SignedEmotion s) {
    return EmotionScore((s.value() + 1.0) / 2.0);
}

/// Ordered discrete emotional state space over [0, 1]. State 1 is the most
/// negative. Uniform spaces carve [0, 1] into equal half-open bins with the
/// top edge closed and use bin midpoints as representative values; explicit
/// spaces carry arbitrary strictly increasing representatives (a single-state
/// space is legal there, which the degenerate-chain and per-observation
/// constructions rely on).
class StateSpace {
public:
    static StateSpace uniform(int n_bins) {
        if (n_bins < 2)
            throw std::invalid_argument("StateSpace::uniform: need at least 2 bins");
        std::vector<double> reps(static_cast<std::size_t>(n_bins));
        for (int i = 0; i < n_bins; ++i)
            reps[static_cast<std::size_t>(i)] = (i + 0.5) / n_bins;
        StateSpace space(std::move(reps));
        space.uniform_ = true;
        return space;
    }

    explicit StateSpace(std::vector<double> representatives)
        : representatives_(std::move(representatives)) {
        if (representatives_.empty())
            throw std::invalid_argument("StateSpace: need at least one state");
        double prev = -1.0;
        for (double r : representatives_) {
            if (!std::isfinite(r) || r < 0.0 || r > 1.0)
                throw std::invalid_argument("StateSpace: representatives must lie in [0, 1]");
            if (r <= prev)
                throw std::invalid_argument(
                    "StateSpace: representatives must be strictly increasing");
            prev = r;
        }
    }

    [[nodiscard]] int size() const noexcept { return static_cast<int>(representatives_.size()); }

    [[nodiscard]] bool is_uniform() const noexcept { return uniform_; }

    /// Representative emotion value of a state, 1-based.
    [[nodiscard]] double representative(int state) const {
        check_state(state);
        return representatives_[static_cast<std::size_t>(state - 1)];
    }

    /// State index in 1..N of the bin containing v. Uniform spaces use the
    /// exact bin arithmetic so v = 1.0 lands in bin N; explicit spaces use
    /// half-open boundaries halfway between neighbouring representatives.
    [[nodiscard]] int discretize(EmotionScore v) const {
        const int n = size();
        if (uniform_) {
            const int bin = static_cast<int>(std::floor(v.value() * n));
            return std::min(bin, n - 1) + 1;
        }
        for (int i = 1; i < n; ++i) {
            const double boundary = 0.5 * (representatives_[static_cast<std::size_t>(i - 1)] +
                                           representatives_[static_cast<std::size_t>(i)]);
            if (v.value() < boundary) return i;
        }
        return n;
    }

private:
    void check_state(int state) const {
        if (state < 1 || state > size())
            throw std::out_of_range("StateSpace: state index out of range");
    }

    std::vector<double> representatives_;
    bool uniform_ = false;
};

/// Per-turn emotion scores (s_0, ..., s_T). A trajectory records at least one
/// transition, so construction demands two or more scores.
class EmotionTrajectory {
public:
    explicit EmotionTrajectory(std::vector<EmotionScore> scores) : scores_(std::move(scores)) {
        if (scores_.size() < 2)
            throw std::invalid_argument(
                "EmotionTrajectory: need at least s_0 and s_1 (one transition)");
    }

    static EmotionTrajectory from_values(const std::vector<double>& values) {
        std::vector<EmotionScore> scores;
        scores.reserve(values.size());
        for (double v : values) scores.emplace_back(v);
        return EmotionTrajectory(std::move(scores));
    }

    /// Number of transitions T; the sequence holds T + 1 scores.
    [[nodiscard]] int turns() const noexcept { return static_cast<int>(scores_.size()) - 1; }

    [[nodiscard]] const std::vector<EmotionScore>& scores() const noexcept { return scores_; }

    /// s_t, t in 0..T.
    [[nodiscard]] EmotionScore at(int t) const {
        if (t < 0 || t > turns())
            throw std::out_of_range("EmotionTrajectory: turn index out of range");
        return scores_[static_cast<std::size_t>(t)];
    }

private:
    std::vector<EmotionScore> scores_;
};

/// Natural-language emotion phrase used to condition scoring prompts.
struct EmotionDescriptor {
    std::string text;
    int bucket = 0;  // 1..5, 1 most negative

    friend bool operator==(const EmotionDescriptor&, const EmotionDescriptor&) = default;
};

/// Maps a score to one of five fixed phrases over equal-width buckets
/// ([0,0.2) very negative ... [0.8,1] very positive).
inline EmotionDescriptor descriptor(EmotionScore v) {
    static const std::string phrases[5] = {
        "a very negative emotion", "a somewhat negative emotion", "a neutral emotion",
        "a somewhat positive emotion", "a very positive emotion"};
    const int bucket = std::min(static_cast<int>(std::floor(v.value() * 5.0)), 4) + 1;
    return EmotionDescriptor{phrases[bucket - 1], bucket};
}

}  // namespace emoeval
