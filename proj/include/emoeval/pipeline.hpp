#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "emoeval/clients.hpp"
#include "emoeval/config.hpp"
#include "emoeval/corpus.hpp"
#include "emoeval/dialogue.hpp"
#include "emoeval/estimator.hpp"
#include "emoeval/json_io.hpp"
#include "emoeval/markov.hpp"
#include "emoeval/report.hpp"

namespace emoeval {

/// Input that makes a whole stage unable to run (missing files, empty
/// directories, bad configuration).
class PipelineError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct StageSummary {
    int total = 0;
    int completed = 0;
    std::vector<std::string> failures;  // per-item diagnostics
    std::vector<std::string> skipped;   // items excluded by policy, not failed

    [[nodiscard]] bool ok() const { return failures.empty(); }
};

namespace detail {

/// Runs tasks 0..n-1 over at most `parallelism` workers. Each task's
/// exception is captured as a per-task failure message.
inline std::vector<std::string> run_parallel(std::size_t n_tasks, int parallelism,
                                             const std::function<void(std::size_t)>& task) {
    if (parallelism < 1) throw std::invalid_argument("parallelism must be >= 1");
    std::vector<std::string> failures(n_tasks);
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t index = next.fetch_add(1);
            if (index >= n_tasks) return;
            try {
                task(index);
            } catch (const std::exception& e) {
                failures[index] = e.what();
            }
        }
    };
    const std::size_t n_workers =
        std::min<std::size_t>(static_cast<std::size_t>(parallelism), std::max<std::size_t>(n_tasks, 1));
    std::vector<std::thread> workers;
    workers.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) workers.emplace_back(worker);
    for (std::thread& t : workers) t.join();
    std::vector<std::string> nonempty;
    for (std::size_t i = 0; i < n_tasks; ++i)
        if (!failures[i].empty()) nonempty.push_back("task " + std::to_string(i) + ": " + failures[i]);
    return nonempty;
}

/// Regular files under `dir` with the given extension, sorted by path so
/// directory iteration order never leaks into outputs.
inline std::vector<std::filesystem::path> sorted_files(const std::filesystem::path& dir,
                                                       const std::string& extension) {
    if (!std::filesystem::is_directory(dir))
        throw PipelineError("directory '" + dir.string() + "' does not exist");
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == extension)
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    return files;
}

inline std::vector<std::string> read_playlist(const std::filesystem::path& path) {
    std::istringstream in(read_text_file(path));
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    if (lines.empty()) throw PipelineError("playlist '" + path.string() + "' is empty");
    return lines;
}

inline ClientConfig http_client_config(const KeyValueConfig& config, const std::string& prefix) {
    ClientConfig cc;
    cc.endpoint = config.require(prefix + ".endpoint");
    cc.model = config.get(prefix + ".model", "default");
    cc.token_env = config.get(prefix + ".token_env");
    cc.timeout_seconds = config.get_double(prefix + ".timeout", 30.0);
    cc.max_retries = static_cast<int>(config.get_int(prefix + ".retries", 3));
    cc.max_tokens = static_cast<int>(config.get_int(prefix + ".max_tokens", 512));
    cc.temperature = config.get_double(prefix + ".temperature", 1.0);
    cc.initial_backoff_seconds = config.get_double(prefix + ".backoff", 0.5);
    cc.max_inflight = static_cast<int>(config.get_int(prefix + ".max_inflight", 8));
    cc.debug_log_path = config.get(prefix + ".debug_log");
    cc.validate();
    return cc;
}

}  // namespace detail

using ChatClientFactory = std::function<std::unique_ptr<ChatClient>()>;

/// Builds a fresh chat client per dialogue for the configured backend:
/// "template" (deterministic rule double, the default), "scripted" (playlist
/// file, one reply per line) or "http".
inline ChatClientFactory chat_client_factory(const KeyValueConfig& config,
                                             const std::string& prefix) {
    const std::string backend = config.get(prefix + ".backend", "template");
    if (backend == "template") {
        const std::string voice = config.get(prefix + ".model", prefix);
        return [voice]() { return std::make_unique<TemplateChatClient>(voice); };
    }
    if (backend == "scripted") {
        const auto playlist = detail::read_playlist(config.require(prefix + ".playlist"));
        return [playlist]() { return std::make_unique<ScriptedChatClient>(playlist); };
    }
    if (backend == "http") {
        const ClientConfig cc = detail::http_client_config(config, prefix);
        return [cc]() { return std::make_unique<HttpChatClient>(cc); };
    }
    throw PipelineError("unknown chat backend '" + backend + "' for '" + prefix + "'");
}

/// Builds the configured scorer: "synthetic" (hidden-truth rule),
/// "constant", "descriptor" (hypothesis-sensitive rule) or "http".
inline std::unique_ptr<AssertionScorer> make_scorer(const KeyValueConfig& config) {
    const std::string backend = config.get("scorer.backend", "constant");
    if (backend == "synthetic")
        return std::make_unique<SyntheticScorer>(config.get_double("scorer.truth", 0.8),
                                                 config.get_double("scorer.scale", 10.0));
    if (backend == "constant")
        return std::make_unique<ConstantScorer>(config.get_double("scorer.logit", 0.0));
    if (backend == "descriptor")
        return std::make_unique<DescriptorSensitiveScorer>(
            config.get_double("scorer.scale", 2.0), config.get_double("scorer.jitter", 0.0));
    if (backend == "http")
        return std::make_unique<HttpScorer>(detail::http_client_config(config, "scorer"));
    throw PipelineError("unknown scorer backend '" + backend + "'");
}

/// Prior schedule from config; decay and growth rates default to 3/T for the
/// given horizon.
inline PriorSchedule make_schedule(const KeyValueConfig& config, int horizon_turns) {
    PriorSchedule schedule = default_schedule(horizon_turns);
    schedule.initial_mean = config.get_double("schedule.mu0", -0.8);
    schedule.decay_rate = config.get_double("schedule.decay_rate", schedule.decay_rate);
    schedule.var_initial = config.get_double("schedule.var_initial", schedule.var_initial);
    schedule.var_final = config.get_double("schedule.var_final", schedule.var_final);
    schedule.growth_rate = config.get_double("schedule.growth_rate", schedule.growth_rate);
    schedule.validate();
    return schedule;
}

struct SimulateOptions {
    std::filesystem::path corpus_path;
    std::filesystem::path out_dir;
    int turns = 40;
    std::uint64_t seed = 0;
    int parallelism = 1;
    std::optional<int> sample_n;  // weighted sample instead of the whole corpus
    bool random_events = false;   // seeded random schedule instead of authored turns
};

/// Runs one dialogue per corpus entry and persists each transcript under
/// {out_dir}/{agent model}/{env id}.json. Incomplete runs are written too but
/// reported as failures.
inline StageSummary run_simulate(const KeyValueConfig& config, const SimulateOptions& options) {
    std::vector<CorpusEntry> entries = load_corpus(options.corpus_path, options.turns);
    if (entries.empty()) throw PipelineError("corpus '" + options.corpus_path.string() + "' is empty");
    if (options.sample_n) {
        Rng rng(derive_seed(options.seed, "corpus-sample"));
        entries = sample_entries(entries, *options.sample_n, rng);
    }

    const ChatClientFactory user_factory = chat_client_factory(config, "user");
    const ChatClientFactory agent_factory = chat_client_factory(config, "agent");
    const std::string user_model = config.get("user.model", "user-sim");
    const std::string agent_model = config.get("agent.model", "agent");

    StageSummary summary;
    summary.total = static_cast<int>(entries.size());
    std::mutex summary_mutex;

    std::vector<std::string> task_failures = detail::run_parallel(
        entries.size(), options.parallelism, [&](std::size_t index) {
            const CorpusEntry& entry = entries[index];
            const Environment env = make_environment(entry);
            DialogueRunConfig run_config;
            run_config.turns = options.turns;
            run_config.seed = derive_seed(options.seed, entry.id);
            run_config.user_model = user_model;
            run_config.agent_model = agent_model;

            std::vector<DisturbanceEvent> events = entry.events;
            if (options.random_events) {
                Rng rng(derive_seed(options.seed, entry.id + "/events"));
                events = randomize_event_schedule(std::move(events), options.turns, rng);
            }

            const std::unique_ptr<ChatClient> user_client = user_factory();
            const std::unique_ptr<ChatClient> agent_client = agent_factory();
            const Transcript transcript =
                run_dialogue(env, events, *user_client, *agent_client, run_config);

            const std::filesystem::path path =
                options.out_dir / agent_model / (entry.id + ".json");
            write_text_file(path, transcript_to_json(transcript).dump(2) + "\n");

            std::lock_guard<std::mutex> lock(summary_mutex);
            if (transcript.complete)
                ++summary.completed;
            else
                summary.failures.push_back("dialogue '" + entry.id + "' incomplete");
        });
    for (std::string& f : task_failures) summary.failures.push_back(std::move(f));
    return summary;
}

struct ScoreOptions {
    std::filesystem::path transcript_dir;
    std::filesystem::path out_dir;
    std::optional<int> sample_count;     // K, default 8
    std::optional<double> temperature;   // tau, default 10
    std::uint64_t seed = 0;
    int parallelism = 1;
};

/// Scores every complete transcript into an emotion-sequence file. Incomplete
/// transcripts are skipped by policy; estimation failures skip the file and
/// land in the summary.
inline StageSummary run_score(const KeyValueConfig& config, const ScoreOptions& options) {
    const std::vector<std::filesystem::path> files =
        detail::sorted_files(options.transcript_dir, ".json");
    if (files.empty())
        throw PipelineError("no transcripts found under '" + options.transcript_dir.string() + "'");

    EstimatorConfig estimator_config;
    estimator_config.sample_count = options.sample_count.value_or(
        static_cast<int>(config.get_int("estimator.samples", 8)));
    estimator_config.temperature =
        options.temperature.value_or(config.get_double("estimator.temperature", 10.0));
    estimator_config.master_seed = options.seed;
    estimator_config.validate();

    const std::unique_ptr<AssertionScorer> scorer = make_scorer(config);

    StageSummary summary;
    summary.total = static_cast<int>(files.size());
    std::mutex summary_mutex;

    std::vector<std::string> task_failures = detail::run_parallel(
        files.size(), options.parallelism, [&](std::size_t index) {
            const std::filesystem::path& path = files[index];
            const Transcript transcript = transcript_from_json(
                nlohmann::json::parse(read_text_file(path)), path.string());
            if (!transcript.complete) {
                std::lock_guard<std::mutex> lock(summary_mutex);
                summary.skipped.push_back("transcript '" + transcript.env_id + "' incomplete");
                return;
            }
            const int horizon = static_cast<int>(transcript.turns.size());
            const PriorSchedule schedule = make_schedule(config, horizon);

            EmotionSequence sequence;
            sequence.env_id = transcript.env_id;
            sequence.model = transcript.agent_model;
            sequence.strategy = transcript.strategy;
            sequence.language = transcript.language;
            sequence.seed = estimator_config.master_seed;
            sequence.sample_count = estimator_config.sample_count;
            sequence.temperature = estimator_config.temperature;
            sequence.n_events = static_cast<int>(transcript.event_log.size());
            const double configured_s0 = config.get_double(
                "schedule.initial_score", signed_to_score(schedule.clamped_mean()).value());
            sequence.initial_score = EmotionScore(configured_s0).value();

            try {
                for (int t = 1; t <= horizon; ++t) {
                    const TurnEstimate estimate =
                        estimate_turn(transcript, t, schedule, estimator_config, *scorer);
                    SequenceEntry entry;
                    entry.turn = t;
                    entry.score = estimate.score.value();
                    for (const SignedEmotion& s : estimate.samples)
                        entry.samples.push_back(s.value());
                    entry.probabilities = estimate.probabilities;
                    sequence.turns.push_back(std::move(entry));
                }
            } catch (const EstimationError& e) {
                throw std::runtime_error("sequence '" + transcript.env_id + "' skipped: " +
                                         e.what());
            }

            const std::filesystem::path out_path =
                options.out_dir / sequence.model / (sequence.env_id + ".json");
            write_text_file(out_path, sequence_to_json(sequence).dump(2) + "\n");

            std::lock_guard<std::mutex> lock(summary_mutex);
            ++summary.completed;
        });
    for (std::string& f : task_failures) summary.failures.push_back(std::move(f));
    return summary;
}

struct MetricsOptions {
    std::filesystem::path sequence_dir;
    std::filesystem::path out_dir;
    int bins = 5;  // N
};

/// Computes the per-dialogue metric records into metrics.jsonl. Sequences
/// shorter than two scores are skipped with a diagnostic.
inline StageSummary run_metrics(const MetricsOptions& options) {
    const std::vector<std::filesystem::path> files =
        detail::sorted_files(options.sequence_dir, ".json");
    if (files.empty())
        throw PipelineError("no emotion sequences found under '" + options.sequence_dir.string() +
                            "'");
    const StateSpace space = StateSpace::uniform(options.bins);

    StageSummary summary;
    summary.total = static_cast<int>(files.size());
    std::string lines;
    for (const std::filesystem::path& path : files) {
        try {
            const EmotionSequence sequence = sequence_from_json(
                nlohmann::json::parse(read_text_file(path)), path.string());
            const std::vector<double> raw_scores = sequence.scores();
            if (raw_scores.size() < 2) {
                summary.skipped.push_back("sequence '" + sequence.env_id +
                                          "' too short for metrics (needs s_0 and s_1)");
                continue;
            }
            const EmotionTrajectory trajectory = EmotionTrajectory::from_values(raw_scores);
            const TransitionCounts counts = count_transitions(trajectory, space);
            const TransitionMatrix matrix = mle_normalize(counts);
            const SourceDistribution source = source_distribution(counts);
            const Centroid centroid = ecp_matrix(matrix, source, space);

            DialogueMetrics m;
            m.env_id = sequence.env_id;
            m.model = sequence.model;
            m.strategy = sequence.strategy;
            m.language = sequence.language;
            m.bel = bel(trajectory).value();
            m.etv_empirical = etv_empirical(trajectory);
            m.etv_matrix = etv_matrix(matrix, space, EtvWeight::matrix_form());
            m.ecp_cx = centroid.x.value();
            m.ecp_cy = centroid.y.value();
            m.n_turns = trajectory.turns();
            m.n_events = sequence.n_events;
            m.scores = raw_scores;
            lines += metrics_to_json(m).dump() + "\n";
            ++summary.completed;
        } catch (const std::exception& e) {
            summary.failures.push_back("sequence file '" + path.string() + "': " + e.what());
        }
    }
    write_text_file(options.out_dir / "metrics.jsonl", lines);
    return summary;
}

struct ReportOptions {
    std::filesystem::path metrics_dir;
    std::filesystem::path out_dir;
};

/// Renders the aggregate table, the centroid scatter data, the per-condition
/// trajectory curves and the per-condition breakdown from the metric records.
inline StageSummary run_report(const ReportOptions& options) {
    const std::vector<std::filesystem::path> files =
        detail::sorted_files(options.metrics_dir, ".jsonl");
    std::vector<DialogueMetrics> metrics;
    for (const std::filesystem::path& path : files) {
        std::istringstream in(read_text_file(path));
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            metrics.push_back(metrics_from_json(nlohmann::json::parse(line), path.string()));
        }
    }
    if (metrics.empty())
        throw PipelineError("no metric records under '" + options.metrics_dir.string() + "'");

    std::sort(metrics.begin(), metrics.end(), [](const DialogueMetrics& a, const DialogueMetrics& b) {
        return std::tie(a.model, a.language, a.env_id) < std::tie(b.model, b.language, b.env_id);
    });

    const std::vector<AggregateRow> rows = aggregate(metrics);
    write_text_file(options.out_dir / "aggregate.csv", render_aggregate_csv(rows));
    write_text_file(options.out_dir / "aggregate.jsonl", render_aggregate_jsonl(rows));
    write_text_file(options.out_dir / "centroids.csv", render_centroids_csv(metrics));
    write_text_file(options.out_dir / "by_events.csv", render_by_events_csv(metrics));
    for (const TrajectoryCurve& curve : trajectory_curves(metrics))
        write_text_file(options.out_dir /
                            ("trajectory_events_" + std::to_string(curve.event_count) + ".csv"),
                        render_trajectory_csv(curve));

    StageSummary summary;
    summary.total = static_cast<int>(metrics.size());
    summary.completed = summary.total;
    return summary;
}

}  // namespace emoeval
