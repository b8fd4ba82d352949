#include "amtalign/eval.hpp"

#include "amtalign/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace amtalign {

void MatchConfig::validate() const {
    if (!(onset_tolerance_ms > 0.0) || !std::isfinite(onset_tolerance_ms)) {
        throw ConfigError("onset tolerance must be > 0 ms");
    }
}

bool onsets_within(double a, double b, double tolerance_s) noexcept {
    const double distance = std::round(std::abs(a - b) * 1e7) / 1e7;
    return distance <= tolerance_s;
}

std::vector<NoteMatch> match_notes(const NoteList& ref, const NoteList& est, const MatchConfig& cfg) {
    cfg.validate();
    const double tol = cfg.onset_tolerance_ms / 1000.0;

    // Per pitch, both sides in index order are in onset order. Every ref's
    // candidate ests then form a contiguous run whose ends move forward with
    // the ref, and the two-pointer sweep below is a maximum matching.
    std::array<std::vector<std::size_t>, 128> ref_by_pitch;
    std::array<std::vector<std::size_t>, 128> est_by_pitch;
    for (std::size_t i = 0; i < ref.size(); ++i) ref_by_pitch[static_cast<std::size_t>(ref[i].pitch)].push_back(i);
    for (std::size_t j = 0; j < est.size(); ++j) est_by_pitch[static_cast<std::size_t>(est[j].pitch)].push_back(j);

    std::vector<NoteMatch> matches;
    for (std::size_t p = 0; p < 128; ++p) {
        const auto& rs = ref_by_pitch[p];
        const auto& es = est_by_pitch[p];
        std::size_t i = 0;
        std::size_t j = 0;
        while (i < rs.size() && j < es.size()) {
            const double r = ref[rs[i]].onset;
            const double e = est[es[j]].onset;
            if (onsets_within(r, e, tol)) {
                matches.emplace_back(rs[i], es[j]);
                ++i;
                ++j;
            } else if (e < r) {
                ++j;
            } else {
                ++i;
            }
        }
    }
    std::sort(matches.begin(), matches.end());
    return matches;
}

EvalReport evaluate(const NoteList& ref, const NoteList& est, const MatchConfig& cfg) {
    EvalReport r;
    r.matches = match_notes(ref, est, cfg);
    r.n_ref = ref.size();
    r.n_est = est.size();
    r.tolerance_ms = cfg.onset_tolerance_ms;
    const auto m = static_cast<double>(r.matches.size());
    const bool both_empty = r.n_ref == 0 && r.n_est == 0;
    r.precision = r.n_est == 0 ? (both_empty ? 1.0 : 0.0) : m / static_cast<double>(r.n_est);
    r.recall = r.n_ref == 0 ? (both_empty ? 1.0 : 0.0) : m / static_cast<double>(r.n_ref);
    const double sum = r.precision + r.recall;
    r.f_measure = sum > 0.0 ? 2.0 * r.precision * r.recall / sum : 0.0;
    return r;
}

std::string format_percent(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", 100.0 * fraction);
    return buf;
}

std::string to_text(const EvalReport& report) {
    std::ostringstream out;
    out << "precision: " << format_percent(report.precision) << '\n'
        << "recall: " << format_percent(report.recall) << '\n'
        << "f_measure: " << format_percent(report.f_measure) << '\n'
        << "n_ref: " << report.n_ref << '\n'
        << "n_est: " << report.n_est << '\n'
        << "tolerance_ms: " << report.tolerance_ms << '\n';
    return out.str();
}

std::string to_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    j["precision"] = report.precision;
    j["recall"] = report.recall;
    j["f_measure"] = report.f_measure;
    j["n_ref"] = report.n_ref;
    j["n_est"] = report.n_est;
    j["tolerance_ms"] = report.tolerance_ms;
    return j.dump();
}

EvalReport report_from_json(const std::string& text) {
    try {
        auto j = nlohmann::json::parse(text);
        EvalReport r;
        r.precision = j.at("precision").get<double>();
        r.recall = j.at("recall").get<double>();
        r.f_measure = j.at("f_measure").get<double>();
        r.n_ref = j.at("n_ref").get<std::size_t>();
        r.n_est = j.at("n_est").get<std::size_t>();
        r.tolerance_ms = j.at("tolerance_ms").get<double>();
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad evaluation report: ") + e.what(), std::string("report"));
    }
}

CorpusAggregate aggregate(const std::vector<EvalReport>& reports) {
    CorpusAggregate agg;
    agg.pieces = reports.size();
    for (const auto& r : reports) {
        agg.mean_per_piece.precision += r.precision;
        agg.mean_per_piece.recall += r.recall;
        agg.mean_per_piece.f_measure += r.f_measure;
        agg.n_ref += r.n_ref;
        agg.n_est += r.n_est;
        agg.n_matched += r.matches.size();
    }
    if (!reports.empty()) {
        const auto n = static_cast<double>(reports.size());
        agg.mean_per_piece.precision /= n;
        agg.mean_per_piece.recall /= n;
        agg.mean_per_piece.f_measure /= n;
    }
    const auto m = static_cast<double>(agg.n_matched);
    const bool both_empty = agg.n_ref == 0 && agg.n_est == 0;
    agg.pooled.precision = agg.n_est ? m / static_cast<double>(agg.n_est) : (both_empty ? 1.0 : 0.0);
    agg.pooled.recall = agg.n_ref ? m / static_cast<double>(agg.n_ref) : (both_empty ? 1.0 : 0.0);
    const double sum = agg.pooled.precision + agg.pooled.recall;
    agg.pooled.f_measure = sum > 0.0 ? 2.0 * agg.pooled.precision * agg.pooled.recall / sum : 0.0;
    return agg;
}

}  // namespace amtalign
