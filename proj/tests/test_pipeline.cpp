#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emoeval/config.hpp"
#include "emoeval/json_io.hpp"
#include "emoeval/pipeline.hpp"
#include "emoeval/report.hpp"
#include "test_util.hpp"

using namespace emoeval;
namespace fs = std::filesystem;

namespace {

KeyValueConfig offline_config() {
    return KeyValueConfig::load(testutil::configs_dir() / "offline_run.cfg");
}

/// simulate -> score -> metrics -> report into `root`, returning the report dir.
fs::path run_all(const KeyValueConfig& config, const fs::path& corpus, const fs::path& root,
                 int turns, int parallelism, std::uint64_t seed) {
    SimulateOptions simulate;
    simulate.corpus_path = corpus;
    simulate.out_dir = root / "transcripts";
    simulate.turns = turns;
    simulate.seed = seed;
    simulate.parallelism = parallelism;
    REQUIRE(run_simulate(config, simulate).ok());

    ScoreOptions score;
    score.transcript_dir = root / "transcripts";
    score.out_dir = root / "sequences";
    score.seed = seed;
    score.parallelism = parallelism;
    REQUIRE(run_score(config, score).ok());

    MetricsOptions metrics;
    metrics.sequence_dir = root / "sequences";
    metrics.out_dir = root / "metrics";
    REQUIRE(run_metrics(metrics).ok());

    ReportOptions report;
    report.metrics_dir = root / "metrics";
    report.out_dir = root / "report";
    REQUIRE(run_report(report).ok());
    return root / "report";
}

std::string slurp_dir(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir))
        if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::string all;
    for (const fs::path& file : files) {
        all += fs::relative(file, dir).string() + "\n";
        all += read_text_file(file);
        all += "\n";
    }
    return all;
}

}  // namespace

TEST_CASE("key-value config parsing") {
    const KeyValueConfig config = KeyValueConfig::parse(
        "# comment\n"
        "scorer.backend = synthetic\n"
        "scorer.truth=0.8\n"
        "  estimator.samples =  8 \n"
        "\n");
    CHECK(config.get("scorer.backend") == "synthetic");
    CHECK(config.get_double("scorer.truth", 0.0) == 0.8);
    CHECK(config.get_int("estimator.samples", 0) == 8);
    CHECK(config.get("missing", "fallback") == "fallback");
    CHECK_THROWS_AS(config.require("missing"), ConfigError);
    CHECK_THROWS_AS(config.get_double("scorer.backend", 0.0), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::parse("just a line without equals"), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::load("/nonexistent/path.cfg"), ConfigError);
}

TEST_CASE("simulate writes one transcript per entry") {
    testutil::TempDir scratch;
    const fs::path corpus = scratch.path() / "corpus.json";
    write_text_file(corpus, testutil::scaled_corpus_json(6, 3));

    SimulateOptions options;
    options.corpus_path = corpus;
    options.out_dir = scratch.path() / "transcripts";
    options.turns = 6;
    options.seed = 21;
    const StageSummary summary = run_simulate(offline_config(), options);
    CHECK(summary.ok());
    CHECK(summary.total == 3);
    CHECK(summary.completed == 3);

    const std::vector<fs::path> files =
        detail::sorted_files(options.out_dir, ".json");
    REQUIRE(files.size() == 3);
    for (const fs::path& file : files) {
        const Transcript transcript =
            transcript_from_json(nlohmann::json::parse(read_text_file(file)), file.string());
        CHECK(transcript.complete);
        CHECK(transcript.turns.size() == 6);
        CHECK(transcript.agent_model == "support-agent");
        // file layout is {model}/{env_id}.json
        CHECK(file.parent_path().filename() == "support-agent");
        CHECK(file.stem().string() == transcript.env_id);
    }
}

TEST_CASE("simulate file contents are identical across parallelism settings") {
    testutil::TempDir scratch;
    const fs::path corpus = scratch.path() / "corpus.json";
    write_text_file(corpus, testutil::scaled_corpus_json(5));

    SimulateOptions options;
    options.corpus_path = corpus;
    options.turns = 5;
    options.seed = 9;

    options.out_dir = scratch.path() / "serial";
    options.parallelism = 1;
    REQUIRE(run_simulate(offline_config(), options).ok());

    options.out_dir = scratch.path() / "wide";
    options.parallelism = 4;
    REQUIRE(run_simulate(offline_config(), options).ok());

    CHECK(slurp_dir(scratch.path() / "serial") == slurp_dir(scratch.path() / "wide"));
}

TEST_CASE("a drying playlist yields an incomplete transcript and partial failure") {
    testutil::TempDir scratch;
    const fs::path corpus = scratch.path() / "corpus.json";
    write_text_file(corpus, testutil::scaled_corpus_json(12, 3));
    std::string playlist_text;
    for (int i = 0; i < 9; ++i) playlist_text += "reply " + std::to_string(i + 1) + "\n";
    const fs::path playlist = scratch.path() / "playlist.txt";
    write_text_file(playlist, playlist_text);

    const KeyValueConfig config = KeyValueConfig::parse(
        "user.backend = scripted\n"
        "user.playlist = " + playlist.string() + "\n"
        "agent.backend = template\n"
        "scorer.backend = constant\n");

    SimulateOptions options;
    options.corpus_path = corpus;
    options.out_dir = scratch.path() / "transcripts";
    options.turns = 12;  // playlist dries up at turn 10
    options.seed = 0;
    const StageSummary summary = run_simulate(config, options);
    CHECK_FALSE(summary.ok());
    CHECK(summary.completed == 0);
    CHECK(summary.failures.size() == 3);

    // incomplete transcripts are persisted but skipped by the scoring stage
    ScoreOptions score;
    score.transcript_dir = options.out_dir;
    score.out_dir = scratch.path() / "sequences";
    const StageSummary score_summary = run_score(config, score);
    CHECK(score_summary.ok());
    CHECK(score_summary.completed == 0);
    CHECK(score_summary.skipped.size() == 3);
}

TEST_CASE("score defaults K to 8 and tau to 10 and records them") {
    testutil::TempDir scratch;
    const fs::path corpus = scratch.path() / "corpus.json";
    write_text_file(corpus, testutil::scaled_corpus_json(4, 3));

    const KeyValueConfig config = KeyValueConfig::parse(
        "user.backend = template\nagent.backend = template\nscorer.backend = constant\n");

    SimulateOptions simulate;
    simulate.corpus_path = corpus;
    simulate.out_dir = scratch.path() / "transcripts";
    simulate.turns = 4;
    REQUIRE(run_simulate(config, simulate).ok());

    ScoreOptions score;  // no K, no tau anywhere
    score.transcript_dir = simulate.out_dir;
    score.out_dir = scratch.path() / "sequences";
    REQUIRE(run_score(config, score).ok());

    for (const fs::path& file : detail::sorted_files(score.out_dir, ".json")) {
        const EmotionSequence sequence =
            sequence_from_json(nlohmann::json::parse(read_text_file(file)), file.string());
        CHECK(sequence.sample_count == 8);
        CHECK(sequence.temperature == 10.0);
        REQUIRE(sequence.turns.size() == 4);
        for (const SequenceEntry& entry : sequence.turns) {
            CHECK(entry.score == 0.5);  // constant scorer
            CHECK(entry.samples.size() == 8);
            CHECK(entry.probabilities.size() == 8);
        }
    }
}

TEST_CASE("metrics on a hand-built sequence reproduce the closed forms") {
    testutil::TempDir scratch;
    EmotionSequence sequence;
    sequence.env_id = "env-hand";
    sequence.model = "agent";
    sequence.initial_score = 0.2;
    sequence.turns = {{1, 0.6, {}, {}}, {2, 0.6, {}, {}}};
    write_text_file(scratch.path() / "sequences" / "agent" / "env-hand.json",
                    sequence_to_json(sequence).dump(2) + "\n");

    MetricsOptions options;
    options.sequence_dir = scratch.path() / "sequences";
    options.out_dir = scratch.path() / "metrics";
    const StageSummary summary = run_metrics(options);
    CHECK(summary.ok());
    CHECK(summary.completed == 1);

    const std::string lines = read_text_file(options.out_dir / "metrics.jsonl");
    const DialogueMetrics m = metrics_from_json(nlohmann::json::parse(lines), "metrics");
    CHECK(m.bel == Catch::Approx(0.6).margin(1e-12));
    CHECK(m.etv_empirical == Catch::Approx(0.16).margin(1e-12));
    CHECK(m.n_turns == 2);
    CHECK(m.scores == std::vector<double>{0.2, 0.6, 0.6});
}

TEST_CASE("metrics on a constant sequence are degenerate") {
    testutil::TempDir scratch;
    EmotionSequence sequence;
    sequence.env_id = "env-flat";
    sequence.model = "agent";
    sequence.initial_score = 0.5;
    sequence.turns = {{1, 0.5, {}, {}}, {2, 0.5, {}, {}}, {3, 0.5, {}, {}}};
    write_text_file(scratch.path() / "sequences" / "agent" / "env-flat.json",
                    sequence_to_json(sequence).dump(2) + "\n");

    MetricsOptions options;
    options.sequence_dir = scratch.path() / "sequences";
    options.out_dir = scratch.path() / "metrics";
    REQUIRE(run_metrics(options).ok());

    const DialogueMetrics m = metrics_from_json(
        nlohmann::json::parse(read_text_file(options.out_dir / "metrics.jsonl")), "metrics");
    CHECK(m.bel == 0.5);
    CHECK(m.etv_empirical == 0.0);
    CHECK(m.etv_matrix == 0.0);
    CHECK(m.ecp_cx == 0.5);
    CHECK(m.ecp_cy == 0.5);
}

TEST_CASE("too-short sequences are skipped with a diagnostic") {
    testutil::TempDir scratch;
    EmotionSequence sequence;
    sequence.env_id = "env-stub";
    sequence.model = "agent";
    sequence.turns = {};  // only s_0 exists
    write_text_file(scratch.path() / "sequences" / "agent" / "env-stub.json",
                    sequence_to_json(sequence).dump(2) + "\n");

    MetricsOptions options;
    options.sequence_dir = scratch.path() / "sequences";
    options.out_dir = scratch.path() / "metrics";
    const StageSummary summary = run_metrics(options);
    CHECK(summary.completed == 0);
    REQUIRE(summary.skipped.size() == 1);
    CHECK(summary.skipped[0].find("env-stub") != std::string::npos);
}

TEST_CASE("metric records count matches sequence count") {
    testutil::TempDir scratch;
    for (int i = 0; i < 4; ++i) {
        EmotionSequence sequence;
        sequence.env_id = "env-" + std::to_string(i);
        sequence.model = "agent";
        sequence.initial_score = 0.25;
        sequence.turns = {{1, 0.4 + 0.1 * i, {}, {}}, {2, 0.3, {}, {}}};
        write_text_file(scratch.path() / "sequences" / "agent" / (sequence.env_id + ".json"),
                        sequence_to_json(sequence).dump(2) + "\n");
    }
    MetricsOptions options;
    options.sequence_dir = scratch.path() / "sequences";
    options.out_dir = scratch.path() / "metrics";
    CHECK(run_metrics(options).completed == 4);

    int lines = 0;
    std::istringstream in(read_text_file(options.out_dir / "metrics.jsonl"));
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) ++lines;
    CHECK(lines == 4);
}

TEST_CASE("report renders the expected files and shapes") {
    testutil::TempDir scratch;
    const fs::path corpus = scratch.path() / "corpus.json";
    write_text_file(corpus, testutil::scaled_corpus_json(8));
    const fs::path report_dir = run_all(offline_config(), corpus, scratch.path(),
                                        /*turns=*/8, /*parallelism=*/2, /*seed=*/5);

    CHECK(fs::exists(report_dir / "aggregate.csv"));
    CHECK(fs::exists(report_dir / "aggregate.jsonl"));
    CHECK(fs::exists(report_dir / "centroids.csv"));
    CHECK(fs::exists(report_dir / "by_events.csv"));
    CHECK(fs::exists(report_dir / "trajectory_events_0.csv"));
    CHECK(fs::exists(report_dir / "trajectory_events_1.csv"));
    CHECK(fs::exists(report_dir / "trajectory_events_3.csv"));

    const std::string csv = read_text_file(report_dir / "aggregate.csv");
    CHECK(csv.rfind("model,language,metric,Overall,CogChg,SitMod,AttDep,ERFlex,SitSel,ResMod\n",
                    0) == 0);
    // one table block per language
    CHECK(csv.find("support-agent,EN,bel,") != std::string::npos);
    CHECK(csv.find("support-agent,ZH,bel,") != std::string::npos);
    CHECK(csv.find("support-agent,EN,etv,") != std::string::npos);

    // trajectory files carry one row per turn
    const std::string curve = read_text_file(report_dir / "trajectory_events_0.csv");
    int rows = -1;  // header
    std::istringstream in(curve);
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) ++rows;
    CHECK(rows == 8);
}

TEST_CASE("overall equals the dialogue-weighted mean of strategy strata") {
    std::vector<DialogueMetrics> metrics;
    auto add = [&](Strategy strategy, double bel_value, double etv_value) {
        DialogueMetrics m;
        m.env_id = "env-" + std::to_string(metrics.size());
        m.model = "agent";
        m.language = Language::EN;
        m.strategy = strategy;
        m.bel = bel_value;
        m.etv_empirical = etv_value;
        m.ecp_cx = bel_value;
        m.ecp_cy = etv_value;
        m.n_turns = 2;
        m.scores = {0.5, bel_value, bel_value};
        metrics.push_back(m);
    };
    add(Strategy::CogChg, 0.40, 0.10);
    add(Strategy::CogChg, 0.60, 0.20);
    add(Strategy::SitSel, 0.20, -0.10);

    const std::vector<AggregateRow> rows = aggregate(metrics);
    double overall_bel = 0.0;
    double weighted = 0.0;
    int total = 0;
    for (const AggregateRow& row : rows) {
        if (row.stratum == "Overall") {
            overall_bel = row.bel;
        } else {
            weighted += row.bel * row.n_dialogues;
            total += row.n_dialogues;
        }
    }
    REQUIRE(total == 3);
    CHECK(overall_bel == Catch::Approx(weighted / total).margin(1e-12));
    CHECK(overall_bel == Catch::Approx((0.4 + 0.6 + 0.2) / 3.0).margin(1e-12));

    // single-stratum degenerate case: Overall equals the lone dialogue
    const std::vector<AggregateRow> lone = aggregate({metrics[2]});
    REQUIRE(lone.size() == 2);
    CHECK(lone[0].stratum == "Overall");
    CHECK(lone[0].bel == 0.2);
    CHECK(lone[1].stratum == "SitSel");
    CHECK(lone[1].bel == 0.2);
}

TEST_CASE("table cells format x100 with two decimals") {
    CHECK(format_x100(0.49) == "49.00");
    CHECK(format_x100(0.5) == "50.00");
    CHECK(format_x100(0.12345) == "12.35");
    CHECK(format_x100(-0.16) == "-16.00");
}

TEST_CASE("centroid scatter rows are cy minus cx") {
    DialogueMetrics m;
    m.env_id = "env-c";
    m.model = "agent";
    m.ecp_cx = 0.40;
    m.ecp_cy = 0.55;
    m.scores = {0.5, 0.4};
    m.n_turns = 1;
    const std::string csv = render_centroids_csv({m});
    CHECK(csv.rfind("model,cx,cy_minus_cx\n", 0) == 0);
    CHECK(csv.find("agent,0.4") != std::string::npos);
    const double expected = 0.55 - 0.40;
    CHECK(csv.find(format_raw(expected)) != std::string::npos);
}

TEST_CASE("report outputs are re-parseable by their consumers") {
    testutil::TempDir scratch;
    const fs::path corpus = scratch.path() / "corpus.json";
    write_text_file(corpus, testutil::scaled_corpus_json(4));
    const fs::path report_dir = run_all(offline_config(), corpus, scratch.path(),
                                        /*turns=*/4, /*parallelism=*/1, /*seed=*/3);

    // aggregate.jsonl parses back into rows matching the CSV
    std::istringstream in(read_text_file(report_dir / "aggregate.jsonl"));
    int parsed = 0;
    for (std::string line; std::getline(in, line);) {
        if (line.empty()) continue;
        const nlohmann::json j = nlohmann::json::parse(line);
        CHECK(j.contains("model"));
        CHECK(j.contains("strategy"));
        CHECK(j.contains("bel"));
        CHECK(j.contains("n_dialogues"));
        ++parsed;
    }
    CHECK(parsed > 0);

    // each csv has a header and consistent column counts
    for (const char* name : {"aggregate.csv", "centroids.csv", "by_events.csv"}) {
        std::istringstream csv_in(read_text_file(report_dir / name));
        std::string header;
        REQUIRE(std::getline(csv_in, header));
        const auto commas = std::count(header.begin(), header.end(), ',');
        for (std::string line; std::getline(csv_in, line);) {
            if (line.empty()) continue;
            CHECK(std::count(line.begin(), line.end(), ',') == commas);
        }
    }
}

TEST_CASE("serialized scores keep full precision") {
    EmotionSequence sequence;
    sequence.env_id = "env-precise";
    sequence.model = "agent";
    sequence.initial_score = 0.12345678901234567;
    sequence.turns = {{1, 0.98765432109876543, {-0.80000000000000004}, {0.52497918747894001}}};

    const nlohmann::json j = sequence_to_json(sequence);
    const EmotionSequence reloaded = sequence_from_json(
        nlohmann::json::parse(j.dump()), "precision");
    CHECK(reloaded.initial_score == sequence.initial_score);
    CHECK(reloaded.turns[0].score == sequence.turns[0].score);
    CHECK(reloaded.turns[0].samples == sequence.turns[0].samples);
    CHECK(reloaded.turns[0].probabilities == sequence.turns[0].probabilities);
}

TEST_CASE("a failing scorer marks files skipped in the score summary") {
    testutil::TempDir scratch;
    const fs::path corpus = scratch.path() / "corpus.json";
    write_text_file(corpus, testutil::scaled_corpus_json(3, 2));

    const KeyValueConfig plain = KeyValueConfig::parse(
        "user.backend = template\nagent.backend = template\nscorer.backend = constant\n");
    SimulateOptions simulate;
    simulate.corpus_path = corpus;
    simulate.out_dir = scratch.path() / "transcripts";
    simulate.turns = 3;
    REQUIRE(run_simulate(plain, simulate).ok());

    // scorer endpoint that does not exist, no retries: every file fails
    const KeyValueConfig dead = KeyValueConfig::parse(
        "scorer.backend = http\n"
        "scorer.endpoint = http://127.0.0.1:9\n"
        "scorer.retries = 0\n"
        "scorer.timeout = 0.2\n");
    ScoreOptions score;
    score.transcript_dir = simulate.out_dir;
    score.out_dir = scratch.path() / "sequences";
    const StageSummary summary = run_score(dead, score);
    CHECK_FALSE(summary.ok());
    CHECK(summary.completed == 0);
    CHECK(summary.failures.size() == 2);
    for (const std::string& failure : summary.failures)
        CHECK(failure.find("estimation failed at turn") != std::string::npos);
}

TEST_CASE("empty inputs are stage-level errors") {
    testutil::TempDir scratch;
    fs::create_directories(scratch.path() / "empty");
    ScoreOptions score;
    score.transcript_dir = scratch.path() / "empty";
    score.out_dir = scratch.path() / "out";
    CHECK_THROWS_AS(run_score(offline_config(), score), PipelineError);

    MetricsOptions metrics;
    metrics.sequence_dir = scratch.path() / "empty";
    metrics.out_dir = scratch.path() / "out";
    CHECK_THROWS_AS(run_metrics(metrics), PipelineError);

    ReportOptions report;
    report.metrics_dir = scratch.path() / "empty";
    report.out_dir = scratch.path() / "out";
    CHECK_THROWS_AS(run_report(report), PipelineError);

    ReportOptions missing;
    missing.metrics_dir = scratch.path() / "never-created";
    missing.out_dir = scratch.path() / "out";
    CHECK_THROWS_AS(run_report(missing), PipelineError);
}

TEST_CASE("unknown backends are configuration errors") {
    CHECK_THROWS_AS(chat_client_factory(KeyValueConfig::parse("user.backend = carrier-pigeon\n"),
                                        "user"),
                    PipelineError);
    CHECK_THROWS_AS(make_scorer(KeyValueConfig::parse("scorer.backend = tarot\n")),
                    PipelineError);
}
