#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "emoeval/json_io.hpp"
#include "emoeval/strategy.hpp"

namespace emoeval {

/// Strategy column order of the aggregate table.
inline constexpr std::array<Strategy, 6> kReportStrategyOrder = {
    Strategy::CogChg, Strategy::SitMod, Strategy::AttDep,
    Strategy::ERFlex, Strategy::SitSel, Strategy::ResMod};

/// Table cell: metric scaled by 100 with two decimals, e.g. 0.49 -> "49.00".
inline std::string format_x100(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "%.2f", value * 100.0);
    return buffer;
}

/// Full-precision cell for plot-data files.
inline std::string format_raw(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "%.17g", value);
    return buffer;
}

/// Mean metrics of one stratum. "Overall" strata average every dialogue of
/// the (model, language) pair; strategy strata average their dialogues only.
struct AggregateRow {
    std::string model;
    Language language = Language::EN;
    std::string stratum;  // "Overall" or a strategy tag
    double bel = 0.0;
    double etv = 0.0;  // empirical form, the canonical reporting form
    double ecp_cx = 0.0;
    double ecp_cy = 0.0;
    int n_dialogues = 0;
};

namespace detail {

struct MeanAccumulator {
    double bel = 0.0;
    double etv = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    int count = 0;

    void add(const DialogueMetrics& m) {
        bel += m.bel;
        etv += m.etv_empirical;
        cx += m.ecp_cx;
        cy += m.ecp_cy;
        ++count;
    }

    [[nodiscard]] AggregateRow row(const std::string& model, Language language,
                                   const std::string& stratum) const {
        AggregateRow r;
        r.model = model;
        r.language = language;
        r.stratum = stratum;
        r.bel = bel / count;
        r.etv = etv / count;
        r.ecp_cx = cx / count;
        r.ecp_cy = cy / count;
        r.n_dialogues = count;
        return r;
    }
};

}  // namespace detail

inline std::vector<AggregateRow> aggregate(const std::vector<DialogueMetrics>& metrics) {
    std::map<std::pair<std::string, Language>, detail::MeanAccumulator> overall;
    std::map<std::tuple<std::string, Language, Strategy>, detail::MeanAccumulator> per_strategy;
    for (const DialogueMetrics& m : metrics) {
        overall[{m.model, m.language}].add(m);
        per_strategy[{m.model, m.language, m.strategy}].add(m);
    }
    std::vector<AggregateRow> rows;
    for (const auto& [key, acc] : overall) {
        rows.push_back(acc.row(key.first, key.second, "Overall"));
        for (Strategy s : kReportStrategyOrder) {
            const auto it = per_strategy.find({key.first, key.second, s});
            if (it != per_strategy.end())
                rows.push_back(it->second.row(key.first, key.second,
                                              std::string(strategy_tag(s))));
        }
    }
    return rows;
}

/// Table-1-shaped CSV: one row per (model, language, metric) with an Overall
/// column followed by the six strategy columns; cells are x100 two-decimal,
/// blank where a stratum has no dialogues.
inline std::string render_aggregate_csv(const std::vector<AggregateRow>& rows) {
    std::string csv = "model,language,metric,Overall";
    for (Strategy s : kReportStrategyOrder) csv += "," + std::string(strategy_tag(s));
    csv += "\n";

    std::map<std::pair<std::string, Language>, std::map<std::string, AggregateRow>> grouped;
    for (const AggregateRow& row : rows) grouped[{row.model, row.language}][row.stratum] = row;

    static const std::array<std::pair<const char*, double AggregateRow::*>, 4> metrics = {{
        {"bel", &AggregateRow::bel},
        {"etv", &AggregateRow::etv},
        {"ecp_cx", &AggregateRow::ecp_cx},
        {"ecp_cy", &AggregateRow::ecp_cy},
    }};

    for (const auto& [key, strata] : grouped) {
        for (const auto& [metric_name, member] : metrics) {
            csv += key.first + "," + std::string(language_tag(key.second)) + "," + metric_name;
            const auto overall = strata.find("Overall");
            csv += ",";
            if (overall != strata.end()) csv += format_x100(overall->second.*member);
            for (Strategy s : kReportStrategyOrder) {
                const auto it = strata.find(std::string(strategy_tag(s)));
                csv += ",";
                if (it != strata.end()) csv += format_x100(it->second.*member);
            }
            csv += "\n";
        }
    }
    return csv;
}

inline std::string render_aggregate_jsonl(const std::vector<AggregateRow>& rows) {
    std::string out;
    for (const AggregateRow& row : rows) {
        nlohmann::json j;
        j["model"] = row.model;
        j["language"] = std::string(language_tag(row.language));
        j["strategy"] = row.stratum;
        j["bel"] = row.bel;
        j["etv"] = row.etv;
        j["ecp"] = {{"cx", row.ecp_cx}, {"cy", row.ecp_cy}};
        j["n_dialogues"] = row.n_dialogues;
        out += j.dump() + "\n";
    }
    return out;
}

/// Centroid scatter data, one row per model: mean C_x against C_y - C_x.
inline std::string render_centroids_csv(const std::vector<DialogueMetrics>& metrics) {
    std::map<std::string, std::pair<detail::MeanAccumulator, int>> by_model;
    for (const DialogueMetrics& m : metrics) by_model[m.model].first.add(m);
    std::string csv = "model,cx,cy_minus_cx\n";
    for (const auto& [model, acc] : by_model) {
        const double cx = acc.first.cx / acc.first.count;
        const double cy = acc.first.cy / acc.first.count;
        csv += model + "," + format_raw(cx) + "," + format_raw(cy - cx) + "\n";
    }
    return csv;
}

/// Mean per-turn score under one disturbance condition.
struct TrajectoryCurve {
    int event_count = 0;
    std::vector<double> mean_scores;  // index t-1 holds the mean of s_t, t = 1..T
    std::vector<int> counts;
};

inline std::vector<TrajectoryCurve> trajectory_curves(
    const std::vector<DialogueMetrics>& metrics) {
    std::map<int, std::pair<std::vector<double>, std::vector<int>>> sums;
    for (const DialogueMetrics& m : metrics) {
        auto& [sum, count] = sums[m.n_events];
        for (std::size_t t = 1; t < m.scores.size(); ++t) {
            if (sum.size() < t) {
                sum.resize(t, 0.0);
                count.resize(t, 0);
            }
            sum[t - 1] += m.scores[t];
            ++count[t - 1];
        }
    }
    std::vector<TrajectoryCurve> curves;
    for (const auto& [event_count, data] : sums) {
        TrajectoryCurve curve;
        curve.event_count = event_count;
        for (std::size_t t = 0; t < data.first.size(); ++t) {
            if (data.second[t] == 0) break;  // report leading turns with observations only
            curve.mean_scores.push_back(data.first[t] / data.second[t]);
            curve.counts.push_back(data.second[t]);
        }
        curves.push_back(std::move(curve));
    }
    return curves;
}

inline std::string render_trajectory_csv(const TrajectoryCurve& curve) {
    std::string csv = "turn,mean_score,n_dialogues\n";
    for (std::size_t t = 0; t < curve.mean_scores.size(); ++t)
        csv += std::to_string(t + 1) + "," + format_raw(curve.mean_scores[t]) + "," +
               std::to_string(curve.counts[t]) + "\n";
    return csv;
}

/// Per-condition breakdown of the aggregate means, raw values.
inline std::string render_by_events_csv(const std::vector<DialogueMetrics>& metrics) {
    std::map<std::tuple<std::string, Language, int>, detail::MeanAccumulator> groups;
    for (const DialogueMetrics& m : metrics) groups[{m.model, m.language, m.n_events}].add(m);
    std::string csv = "model,language,events,bel,etv,ecp_cx,ecp_cy,n_dialogues\n";
    for (const auto& [key, acc] : groups) {
        csv += std::get<0>(key) + "," + std::string(language_tag(std::get<1>(key))) + "," +
               std::to_string(std::get<2>(key)) + "," + format_raw(acc.bel / acc.count) + "," +
               format_raw(acc.etv / acc.count) + "," + format_raw(acc.cx / acc.count) + "," +
               format_raw(acc.cy / acc.count) + "," + std::to_string(acc.count) + "\n";
    }
    return csv;
}

}  // namespace emoeval
