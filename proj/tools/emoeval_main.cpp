// Command-line front end for the dialogue-evaluation pipeline:
//   simulate -> score -> metrics -> report, plus corpus validation.
// Exit codes: 0 success, 1 partial failure, 2 invalid input.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "emoeval/config.hpp"
#include "emoeval/corpus.hpp"
#include "emoeval/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitInvalid = 2;

void print_summary(const std::string& stage, const emoeval::StageSummary& summary) {
    std::cout << stage << ": " << summary.completed << "/" << summary.total << " completed";
    if (!summary.skipped.empty()) std::cout << ", " << summary.skipped.size() << " skipped";
    std::cout << "\n";
    for (const std::string& skip : summary.skipped) std::cout << "  skipped: " << skip << "\n";
    for (const std::string& failure : summary.failures)
        std::cout << "  failed: " << failure << "\n";
}

int exit_code(const emoeval::StageSummary& summary) {
    return summary.ok() ? kExitOk : kExitPartial;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Trajectory-based evaluation of emotional support dialogue"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand name

    std::uint64_t seed = 0;
    int parallelism = 1;
    std::string out_dir = "out";
    app.add_option("--seed", seed, "Master seed for all derived randomness")->capture_default_str();
    app.add_option("--parallelism", parallelism, "Maximum concurrent dialogues")
        ->capture_default_str();
    app.add_option("--out-dir", out_dir, "Output directory of the invoked stage")
        ->capture_default_str();

    std::string corpus_path;
    std::string config_path;
    int turns = 40;
    std::optional<int> sample_n;
    bool random_events = false;
    CLI::App* simulate = app.add_subcommand("simulate", "Run disturbance-perturbed dialogues");
    simulate->add_option("--corpus", corpus_path, "Corpus JSON file")->required();
    simulate->add_option("--config", config_path, "Key-value run configuration")->required();
    simulate->add_option("--turns", turns, "Dialogue horizon T")->capture_default_str();
    simulate->add_option("--sample", sample_n, "Weighted sample size instead of the whole corpus");
    simulate->add_flag("--random-events", random_events,
                       "Reassign event trigger turns to a seeded random schedule");

    std::string transcript_dir;
    std::optional<int> sample_count;
    std::optional<double> temperature;
    CLI::App* score = app.add_subcommand("score", "Estimate per-turn emotion sequences");
    score->add_option("--transcripts", transcript_dir, "Directory of transcript files")->required();
    score->add_option("--config", config_path, "Key-value run configuration")->required();
    score->add_option("--samples", sample_count, "Monte Carlo sample count K (default 8)");
    score->add_option("--temperature", temperature, "Softmax temperature tau (default 10)");

    std::string sequence_dir;
    int bins = 5;
    CLI::App* metrics = app.add_subcommand("metrics", "Compute per-dialogue trajectory metrics");
    metrics->add_option("--sequences", sequence_dir, "Directory of emotion-sequence files")
        ->required();
    metrics->add_option("--bins", bins, "Number of emotional states N")->capture_default_str();

    std::string metrics_dir;
    CLI::App* report = app.add_subcommand("report", "Aggregate metric records into tables");
    report->add_option("--metrics", metrics_dir, "Directory holding metrics.jsonl")->required();

    std::string validate_path;
    int validate_turns = 40;
    CLI::App* validate = app.add_subcommand("validate-corpus", "Check a corpus file");
    validate->add_option("corpus", validate_path, "Corpus JSON file")->required();
    validate->add_option("--turns", validate_turns, "Dialogue horizon T")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) {
            emoeval::SimulateOptions options;
            options.corpus_path = corpus_path;
            options.out_dir = out_dir;
            options.turns = turns;
            options.seed = seed;
            options.parallelism = parallelism;
            options.sample_n = sample_n;
            options.random_events = random_events;
            const emoeval::StageSummary summary =
                emoeval::run_simulate(emoeval::KeyValueConfig::load(config_path), options);
            print_summary("simulate", summary);
            return exit_code(summary);
        }
        if (score->parsed()) {
            emoeval::ScoreOptions options;
            options.transcript_dir = transcript_dir;
            options.out_dir = out_dir;
            options.sample_count = sample_count;
            options.temperature = temperature;
            options.seed = seed;
            options.parallelism = parallelism;
            const emoeval::StageSummary summary =
                emoeval::run_score(emoeval::KeyValueConfig::load(config_path), options);
            print_summary("score", summary);
            return exit_code(summary);
        }
        if (metrics->parsed()) {
            emoeval::MetricsOptions options;
            options.sequence_dir = sequence_dir;
            options.out_dir = out_dir;
            options.bins = bins;
            const emoeval::StageSummary summary = emoeval::run_metrics(options);
            print_summary("metrics", summary);
            return exit_code(summary);
        }
        if (report->parsed()) {
            emoeval::ReportOptions options;
            options.metrics_dir = metrics_dir;
            options.out_dir = out_dir;
            const emoeval::StageSummary summary = emoeval::run_report(options);
            print_summary("report", summary);
            return exit_code(summary);
        }
        if (validate->parsed()) {
            const std::vector<emoeval::CorpusEntry> entries =
                emoeval::load_corpus(validate_path, validate_turns);
            std::cout << "corpus ok: " << entries.size() << " entries\n";
            return kExitOk;
        }
    } catch (const emoeval::CorpusError& e) {
        std::cerr << "invalid corpus: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const emoeval::ConfigError& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const emoeval::PipelineError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kExitInvalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInvalid;
    }
    return kExitInvalid;
}
