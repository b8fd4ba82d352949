#pragma once

#include "amtalign/midi_io.hpp"

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace amtalign {

struct MatchConfig {
    double onset_tolerance_ms = 50.0;

    void validate() const;
};

using NoteMatch = std::pair<std::size_t, std::size_t>;  // (ref index, est index)

/// True when |a - b| <= tolerance after rounding the distance to 7 decimals,
/// the same comparison mir_eval performs.
bool onsets_within(double a, double b, double tolerance_s) noexcept;

/// Maximum-cardinality matching between equal-pitch notes whose onsets lie
/// within the tolerance. Among maximum matchings returns the one that is
/// lexicographically smallest when listed by ref index. Sorted by ref index.
std::vector<NoteMatch> match_notes(const NoteList& ref, const NoteList& est, const MatchConfig& cfg);

struct EvalReport {
    double precision = 0.0;
    double recall = 0.0;
    double f_measure = 0.0;
    std::vector<NoteMatch> matches;
    std::size_t n_ref = 0;
    std::size_t n_est = 0;
    double tolerance_ms = 50.0;
};

EvalReport evaluate(const NoteList& ref, const NoteList& est, const MatchConfig& cfg);

/// "precision: 80.0\n..." with percentages at one decimal place.
std::string to_text(const EvalReport& report);
/// JSON object with exactly: precision, recall, f_measure, n_ref, n_est, tolerance_ms.
std::string to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& json);

/// Percentage with one decimal, e.g. 0.9812 -> "98.1".
std::string format_percent(double fraction);

struct CorpusScore {
    double precision = 0.0;
    double recall = 0.0;
    double f_measure = 0.0;
};

/// Per-piece mean (macro) and pooled micro-average over the same reports.
struct CorpusAggregate {
    CorpusScore mean_per_piece;
    CorpusScore pooled;
    std::size_t pieces = 0;
    std::size_t n_ref = 0;
    std::size_t n_est = 0;
    std::size_t n_matched = 0;
};

CorpusAggregate aggregate(const std::vector<EvalReport>& reports);

}  // namespace amtalign
