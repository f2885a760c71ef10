#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "emoeval/clients.hpp"
#include "emoeval/dialogue.hpp"
#include "emoeval/estimator.hpp"
#include "emoeval/rng.hpp"
#include "oracles.hpp"

using namespace emoeval;

namespace {

Transcript make_transcript(int turns, const std::string& env_id = "env-test") {
    Transcript transcript;
    transcript.env_id = env_id;
    transcript.user_model = "user-sim";
    transcript.agent_model = "agent";
    for (int i = 1; i <= turns; ++i) {
        DialogueTurn turn;
        turn.index = i;
        turn.user_utterance = "user line " + std::to_string(i);
        turn.agent_reply = "agent line " + std::to_string(i);
        transcript.turns.push_back(std::move(turn));
    }
    return transcript;
}

class ThrowingScorer : public AssertionScorer {
public:
    double score(const std::string&, const std::string&) override {
        throw TransportError("scorer endpoint unreachable");
    }
};

}  // namespace

TEST_CASE("prior mean decays exponentially from mu_0") {
    PriorSchedule schedule;
    schedule.initial_mean = -0.8;
    schedule.decay_rate = 0.1;

    CHECK(prior_mean(schedule, 1) == -0.8);
    CHECK(prior_mean(schedule, 11) == Catch::Approx(-0.8 * std::exp(-1.0)).margin(1e-15));

    PriorSchedule near_constant = schedule;
    near_constant.decay_rate = 1e-15;
    for (int t : {1, 10, 40})
        CHECK(prior_mean(near_constant, t) == Catch::Approx(-0.8).margin(1e-12));

    CHECK_THROWS_AS(prior_mean(schedule, 0), std::invalid_argument);
    CHECK_THROWS_AS(prior_mean(schedule, -3), std::invalid_argument);
}

TEST_CASE("prior variance grows toward its ceiling") {
    PriorSchedule schedule;
    schedule.var_initial = 0.01;
    schedule.var_final = 0.09;
    schedule.growth_rate = 0.2;

    CHECK(prior_variance(schedule, 1) == 0.01);  // exact, not just close
    CHECK(prior_variance(schedule, 11) ==
          Catch::Approx(0.09 - 0.08 * std::exp(-2.0)).margin(1e-15));
    CHECK(prior_variance(schedule, 100000) == Catch::Approx(0.09).margin(1e-15));

    CHECK_THROWS_AS(prior_variance(schedule, 0), std::invalid_argument);
}

TEST_CASE("schedule parameters are validated") {
    PriorSchedule schedule;
    schedule.decay_rate = 0.0;
    CHECK_THROWS_AS(prior_mean(schedule, 1), std::invalid_argument);
    schedule = PriorSchedule{};
    schedule.var_initial = 0.0;
    CHECK_THROWS_AS(prior_variance(schedule, 1), std::invalid_argument);
    schedule = PriorSchedule{};
    schedule.var_final = 0.001;  // below initial
    CHECK_THROWS_AS(prior_variance(schedule, 1), std::invalid_argument);
    schedule = PriorSchedule{};
    schedule.initial_mean = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(prior_mean(schedule, 1), std::invalid_argument);
}

TEST_CASE("default schedule converges on any horizon") {
    for (int horizon : {10, 20, 40}) {
        const PriorSchedule schedule = default_schedule(horizon);
        CHECK(prior_mean(schedule, 1) == -0.8);
        CHECK(std::abs(prior_mean(schedule, horizon + 1)) <
              0.06 * std::abs(schedule.initial_mean));
        CHECK(prior_variance(schedule, horizon + 1) > 0.94 * schedule.var_final);
        // mean shrinks monotonically, variance never decreases
        for (int t = 2; t <= horizon; ++t) {
            CHECK(std::abs(prior_mean(schedule, t)) < std::abs(prior_mean(schedule, t - 1)));
            CHECK(prior_variance(schedule, t) >= prior_variance(schedule, t - 1));
            CHECK(prior_variance(schedule, t) <= schedule.var_final);
        }
    }
}

TEST_CASE("prior samples are deterministic and clamped") {
    PriorSchedule schedule;
    EstimatorConfig config;
    config.sample_count = 16;

    Rng rng_a(777);
    Rng rng_b(777);
    const std::vector<SignedEmotion> first = sample_priors(schedule, 5, config, rng_a);
    const std::vector<SignedEmotion> second = sample_priors(schedule, 5, config, rng_b);
    REQUIRE(first.size() == 16);
    CHECK(first == second);

    // vanishing variance collapses every draw onto the mean
    PriorSchedule tight;
    tight.var_initial = 1e-18;
    tight.var_final = 1e-18;
    Rng rng_c(3);
    for (const SignedEmotion& sample : sample_priors(tight, 1, config, rng_c))
        CHECK(sample.value() == Catch::Approx(-0.8).margin(1e-6));

    // extreme mean: clamping dominates and every sample sits at the floor
    PriorSchedule extreme;
    extreme.initial_mean = -5.0;
    Rng rng_d(9);
    for (const SignedEmotion& sample : sample_priors(extreme, 1, config, rng_d))
        CHECK(sample.value() == -1.0);
}

TEST_CASE("pair softmax on the named logit pairs") {
    CHECK(softmax_pair({3.25, 3.25}, 10.0) == 0.5);
    CHECK(softmax_pair({1.0, 0.0}, 10.0) ==
          Catch::Approx(oracle::logistic(1.0, 10.0)).margin(1e-15));
    CHECK(oracle::logistic(1.0, 10.0) == Catch::Approx(0.524979).margin(1e-6));
    CHECK(softmax_pair({std::log(3.0), 0.0}, 1.0) == Catch::Approx(0.75).margin(1e-12));

    CHECK_THROWS_AS(softmax_pair({std::numeric_limits<double>::infinity(), 0.0}, 10.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(softmax_pair({0.0, std::numeric_limits<double>::quiet_NaN()}, 10.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(softmax_pair({1.0, 0.0}, 0.0), std::invalid_argument);
}

TEST_CASE("pair softmax is monotone, complementary and overflow-safe") {
    double previous = 0.0;
    for (double gap = -40.0; gap <= 40.0; gap += 0.5) {
        const double p = softmax_pair({gap, 0.0}, 10.0);
        CHECK(p > previous);
        CHECK(p > 0.0);
        CHECK(p < 1.0);
        CHECK(std::abs(p + softmax_pair({0.0, gap}, 10.0) - 1.0) <= 1e-12);
        previous = p;
    }
    // huge logits must not overflow thanks to the max-shift
    CHECK(softmax_pair({5000.0, 4990.0}, 10.0) ==
          Catch::Approx(oracle::logistic(10.0, 10.0)).margin(1e-12));
}

TEST_CASE("pair softmax is near-linear at high temperature") {
    for (double gap = -2.0; gap <= 2.0; gap += 0.01) {
        const double p = softmax_pair({gap, 0.0}, 10.0);
        CHECK(std::abs(p - (0.5 + gap / 40.0)) <= 1e-3);
    }
}

TEST_CASE("score prompt is deterministic and carries the hypothesis once") {
    const Transcript transcript = make_transcript(3);
    const std::span<const DialogueTurn> history(transcript.turns.data(), 2);
    const EmotionDescriptor hypothesis = descriptor(EmotionScore(0.5));

    const std::string once = build_score_prompt(history, "how do I go on?", hypothesis);
    const std::string twice = build_score_prompt(history, "how do I go on?", hypothesis);
    CHECK(once == twice);

    std::size_t occurrences = 0;
    std::size_t pos = 0;
    while ((pos = once.find(hypothesis.text, pos)) != std::string::npos) {
        ++occurrences;
        pos += hypothesis.text.size();
    }
    CHECK(occurrences == 1);
    CHECK(once.find("user line 1") != std::string::npos);
    CHECK(once.find("agent line 2") != std::string::npos);
    CHECK(once.find("user line 3") == std::string::npos);  // current turn comes from q_t only
}

TEST_CASE("score prompt with empty history has no turn markers before q_1") {
    const std::string prompt =
        build_score_prompt({}, "first message", descriptor(EmotionScore(0.3)));
    const std::size_t q1 = prompt.find("first message");
    REQUIRE(q1 != std::string::npos);
    const std::size_t first_user = prompt.find("User:");
    const std::size_t first_assistant = prompt.find("Assistant:");
    CHECK(first_assistant == std::string::npos);
    CHECK(first_user < q1);
    CHECK(prompt.find("User:", first_user + 1) == std::string::npos);

    CHECK_THROWS_AS(build_score_prompt({}, "", descriptor(EmotionScore(0.3))),
                    std::invalid_argument);
}

TEST_CASE("constant scorer pins the estimate at one half") {
    const Transcript transcript = make_transcript(4);
    PriorSchedule schedule;
    ConstantScorer scorer(3.7);
    for (int K : {1, 8, 64}) {
        for (std::uint64_t seed : {0ULL, 1ULL, 99ULL}) {
            EstimatorConfig config;
            config.sample_count = K;
            config.master_seed = seed;
            const TurnEstimate estimate = estimate_turn(transcript, 2, schedule, config, scorer);
            CHECK(estimate.score.value() == 0.5);
            REQUIRE(estimate.probabilities.size() == static_cast<std::size_t>(K));
            REQUIRE(estimate.samples.size() == static_cast<std::size_t>(K));
        }
    }
}

TEST_CASE("hypothesis-independent scorer collapses to one softmax value") {
    const Transcript transcript = make_transcript(3);
    PriorSchedule schedule;
    SyntheticScorer scorer(0.8, 10.0);  // logits (+6, -6) whatever the prompt

    const double expected = oracle::logistic(12.0, 10.0);
    std::vector<double> estimates;
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        EstimatorConfig config;
        config.master_seed = seed;
        const TurnEstimate estimate = estimate_turn(transcript, 1, schedule, config, scorer);
        CHECK(estimate.score.value() == Catch::Approx(expected).margin(1e-12));
        estimates.push_back(estimate.score.value());
    }
    CHECK(oracle::stddev(estimates) == 0.0);
}

TEST_CASE("turn estimates stay strictly inside (0, 1) and average their samples") {
    const Transcript transcript = make_transcript(6);
    PriorSchedule schedule;
    EstimatorConfig config;
    DescriptorSensitiveScorer scorer(4.0, 2.0);
    for (int t = 1; t <= 6; ++t) {
        const TurnEstimate estimate = estimate_turn(transcript, t, schedule, config, scorer);
        double sum = 0.0;
        for (double p : estimate.probabilities) {
            CHECK(p > 0.0);
            CHECK(p < 1.0);
            sum += p;
        }
        CHECK(estimate.score.value() > 0.0);
        CHECK(estimate.score.value() < 1.0);
        CHECK(std::abs(estimate.score.value() - sum / estimate.probabilities.size()) <= 1e-12);
    }
}

TEST_CASE("more samples shrink the seed-to-seed spread") {
    const Transcript transcript = make_transcript(2);
    // wide prior so the sampled hypotheses spread across descriptor buckets
    PriorSchedule schedule;
    schedule.initial_mean = -0.2;
    schedule.var_initial = 0.25;
    schedule.var_final = 0.25;
    DescriptorSensitiveScorer scorer(4.0, 0.0);

    auto spread = [&](int sample_count) {
        std::vector<double> estimates;
        for (std::uint64_t seed = 0; seed < 50; ++seed) {
            EstimatorConfig config;
            config.sample_count = sample_count;
            config.master_seed = seed;
            estimates.push_back(
                estimate_turn(transcript, 1, schedule, config, scorer).score.value());
        }
        return oracle::stddev(estimates);
    };

    const double coarse = spread(8);
    const double fine = spread(64);
    REQUIRE(coarse > 0.0);
    const double ratio = fine / coarse;
    CHECK(ratio < 1.0);
    CHECK(ratio >= 0.18);
    CHECK(ratio <= 0.71);
}

TEST_CASE("trajectory estimation is seeded, sized T+1 and order-independent") {
    const Transcript transcript = make_transcript(5);
    PriorSchedule schedule;
    EstimatorConfig config;
    config.master_seed = 42;
    DescriptorSensitiveScorer scorer(4.0, 1.0);

    const EmotionTrajectory first = estimate_trajectory(transcript, schedule, config, scorer);
    const EmotionTrajectory second = estimate_trajectory(transcript, schedule, config, scorer);
    REQUIRE(first.turns() == 5);
    CHECK(first.scores() == second.scores());
    CHECK(first.at(0).value() == signed_to_score(schedule.clamped_mean()).value());

    // per-turn seeds are derived, so estimating a turn in isolation matches
    const TurnEstimate lone = estimate_turn(transcript, 3, schedule, config, scorer);
    CHECK(lone.score.value() == first.at(3).value());

    // constant scorer, single turn
    ConstantScorer constant(0.0);
    const Transcript tiny = make_transcript(1);
    const EmotionTrajectory flat = estimate_trajectory(tiny, schedule, config, constant);
    REQUIRE(flat.turns() == 1);
    CHECK(flat.at(1).value() == 0.5);
}

TEST_CASE("a 40-turn transcript produces 41 scores") {
    const Transcript transcript = make_transcript(40);
    PriorSchedule schedule = default_schedule(40);
    EstimatorConfig config;
    ConstantScorer scorer(1.0);
    const EmotionTrajectory trajectory = estimate_trajectory(transcript, schedule, config, scorer);
    CHECK(trajectory.scores().size() == 41);
}

TEST_CASE("scorer failures surface as estimation errors with the turn") {
    const Transcript transcript = make_transcript(3);
    PriorSchedule schedule;
    EstimatorConfig config;
    ThrowingScorer scorer;
    try {
        estimate_turn(transcript, 2, schedule, config, scorer);
        FAIL("expected EstimationError");
    } catch (const EstimationError& e) {
        CHECK(e.turn() == 2);
        CHECK(std::string(e.what()).find("turn 2") != std::string::npos);
    }
    CHECK_THROWS_AS(estimate_trajectory(transcript, schedule, config, scorer), EstimationError);
}
