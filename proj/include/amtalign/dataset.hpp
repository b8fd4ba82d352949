#pragma once

#include "amtalign/activations.hpp"
#include "amtalign/align.hpp"
#include "amtalign/eval.hpp"
#include "amtalign/fine_align.hpp"
#include "amtalign/midi_io.hpp"
#include "amtalign/pianoroll.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace amtalign {

struct ManifestEntry {
    std::string id;
    std::string score_path;
    std::string activation_path;
    double duration = 0.0;
    /// Optional known-aligned MIDI. When absent, validation derives it by
    /// aligning the score to the recorded activations.
    std::optional<std::string> truth_path;
};

struct Corpus {
    std::vector<ManifestEntry> pieces;

    /// Throws ArgumentError on duplicate ids.
    void validate() const;
    std::vector<std::string> ids() const;
};

/// Tab-separated lines `id score activations duration [truth]`. Blank lines,
/// `#` comments and a leading `id` header row are skipped. Relative paths are
/// resolved against `base_dir`.
Corpus parse_manifest(const std::string& text, const std::string& base_dir = "");
Corpus read_manifest(const std::string& path);
std::string format_manifest(const Corpus& corpus);

struct SplitSpec {
    double train = 0.8;
    double valid = 0.1;
    double test = 0.1;
    std::uint64_t seed = 0;

    void validate() const;
};

struct Split {
    std::vector<std::string> train;
    std::vector<std::string> valid;
    std::vector<std::string> test;
};

/// valid and test take round(n * ratio) pieces, train the remainder. Each
/// list is returned sorted. Throws ArgumentError for fewer than 3 pieces.
Split split_pieces(const Corpus& corpus, const SplitSpec& spec);
Split split_pieces(std::vector<std::string> ids, const SplitSpec& spec);

struct WindowSpec {
    double length_s = 10.0;
    double hop_s = 1.0;

    void validate() const;
};

struct NoteWindow {
    double start = 0.0;
    NoteList notes;  // re-timed relative to `start`, offsets clipped to the window
};

/// Windows start at k * hop_s while start < duration; a note belongs to the
/// window containing its onset.
std::vector<NoteWindow> window_notes(const NoteList& notes, double duration, const WindowSpec& spec);

struct ToleranceComparison {
    double tolerance_ms = 0.0;
    EvalReport coarse;
    EvalReport fine;
};

struct RoundTripResult {
    std::vector<ToleranceComparison> rows;
    NoteList performed_truth;  // the simulator's jittered onsets: the reference
    TwoStageAlignment alignment;
};

/// Renders activations from `aligned_truth`, aligns the original `score`
/// against them (coarse, then fine) and scores both stages against the
/// performed truth at every tolerance. Throws ArgumentError when score and
/// truth have different pitch multisets.
RoundTripResult roundtrip_validate(const NoteList& score, const NoteList& aligned_truth, const SimConfig& sim_cfg,
                                   const AlignConfig& align_cfg, const FineConfig& fine_cfg,
                                   const RollConfig& roll_cfg, const std::vector<double>& tolerances_ms);

struct RoundTripCase {
    std::string id;
    NoteList score;
    NoteList aligned_truth;
    std::uint64_t seed = 0;
};

struct PieceValidation {
    std::string id;
    std::vector<ToleranceComparison> rows;
};

/// Runs every case (in parallel when jobs > 1) and returns the per-piece
/// results ordered by id. Each case uses its own seed.
std::vector<PieceValidation> validate_corpus(const std::vector<RoundTripCase>& cases, const SimConfig& sim_cfg,
                                             const AlignConfig& align_cfg, const FineConfig& fine_cfg,
                                             const RollConfig& roll_cfg, const std::vector<double>& tolerances_ms,
                                             int jobs = 1);

struct ValidationTableRow {
    double tolerance_ms;
    CorpusAggregate coarse;
    CorpusAggregate fine;
};

std::vector<ValidationTableRow> summarize(const std::vector<PieceValidation>& pieces);

/// Two-column coarse/fine table, pooled and per-piece mean rows.
std::string format_validation_table(const std::vector<ValidationTableRow>& rows);

/// Stateless seed mixing (splitmix64) for per-piece streams.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

}  // namespace amtalign
