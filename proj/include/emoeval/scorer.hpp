#pragma once

#include <string>

namespace emoeval {

/// Fixed assertion texts scored against an evaluation prompt. Keeping them
/// constant makes scorer outputs reproducible across runs.
inline const std::string kPositiveAssertion = "The user currently feels positive.";
inline const std::string kNegativeAssertion = "The user currently feels negative.";

/// Scores a (prompt, assertion) pair with a scalar logit. Raw logits, not
/// probabilities: the temperature softmax belongs to the estimator.
/// Implementations must tolerate concurrent calls.
class AssertionScorer {
public:
    virtual ~AssertionScorer() = default;
    virtual double score(const std::string& prompt, const std::string& assertion) = 0;
};

}  // namespace emoeval
