#pragma once

#include "amtalign/activations.hpp"
#include "amtalign/matrix.hpp"
#include "amtalign/midi_io.hpp"
#include "amtalign/pianoroll.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace amtalign {

struct AlignConfig {
    /// Sakoe-Chiba radius in audio frames around the line joining the two
    /// corners of the cost matrix. Unset: no band below kAutoBandFrames,
    /// otherwise 10% of the longer sequence.
    std::optional<std::size_t> band_radius_frames;
    double cost_epsilon = 1e-6;

    static constexpr std::size_t kAutoBandFrames = 10000;

    std::optional<std::size_t> resolve_band(std::size_t score_frames, std::size_t audio_frames) const;
    void validate() const;
};

/// Inclusive column range stored for each row of a (possibly banded) matrix.
struct ColumnRange {
    std::size_t lo;
    std::size_t hi;
    std::size_t size() const noexcept { return hi - lo + 1; }
};

class BandLayout {
public:
    BandLayout() = default;
    static BandLayout dense(std::size_t rows, std::size_t cols);
    /// Throws ConfigError if some row ends up with no columns.
    static BandLayout sakoe_chiba(std::size_t rows, std::size_t cols, std::size_t radius);

    /// Row-wise intersection; throws ConfigError if a row becomes empty.
    BandLayout intersect(const BandLayout& other) const;

    std::size_t rows() const noexcept { return ranges_.size(); }
    std::size_t cols() const noexcept { return cols_; }
    const ColumnRange& range(std::size_t row) const { return ranges_[row]; }
    bool contains(std::size_t row, std::size_t col) const {
        return row < ranges_.size() && col >= ranges_[row].lo && col <= ranges_[row].hi;
    }
    /// Offset of row `row`'s first stored cell in row-major band storage.
    std::size_t row_start(std::size_t row) const { return starts_[row]; }
    std::size_t cell_count() const noexcept { return starts_.empty() ? 0 : starts_.back(); }
    bool is_dense() const noexcept;

private:
    BandLayout(std::size_t cols, std::vector<ColumnRange> ranges);

    std::size_t cols_ = 0;
    std::vector<ColumnRange> ranges_;
    std::vector<std::size_t> starts_;  // rows + 1 entries
};

/// Score-frames x audio-frames cost, stored only inside its band.
class CostMatrix {
public:
    CostMatrix() = default;
    explicit CostMatrix(BandLayout layout);
    static CostMatrix from_dense(const Matrix<double>& dense);

    std::size_t rows() const noexcept { return layout_.rows(); }
    std::size_t cols() const noexcept { return layout_.cols(); }
    const BandLayout& layout() const noexcept { return layout_; }

    /// Stored cells of `row`, starting at column layout().range(row).lo.
    std::span<float> row(std::size_t r) {
        return {values_.data() + layout_.row_start(r), layout_.range(r).size()};
    }
    std::span<const float> row(std::size_t r) const {
        return {values_.data() + layout_.row_start(r), layout_.range(r).size()};
    }
    float at(std::size_t r, std::size_t c) const { return row(r)[c - layout_.range(r).lo]; }

private:
    BandLayout layout_;
    std::vector<float> values_;
};

/// 1 - (r.v) / (|r||v| + eps) with r = [sounding; w * onset] taken from the
/// roll and v = [frame_act; w * onset_act], w the roll's onset weight.
/// Throws ConfigError when fps or pitch range differ.
CostMatrix cost_matrix(const PianoRoll& roll, const ActivationSet& act, double cost_epsilon = 1e-6);
CostMatrix cost_matrix(const PianoRoll& roll, const ActivationSet& act, const BandLayout& layout,
                       double cost_epsilon = 1e-6);

struct PathStep {
    std::size_t score;
    std::size_t audio;
    friend bool operator==(const PathStep&, const PathStep&) = default;
};

struct AlignmentPath {
    std::vector<PathStep> steps;
    double total_cost = 0.0;
};

/// True when the path starts at (0,0), ends at (rows-1, cols-1) and moves by
/// (1,0), (0,1) or (1,1).
bool is_valid_path(const AlignmentPath& path, std::size_t rows, std::size_t cols);

/// Minimum-cost monotone path with unweighted steps {(1,1), (1,0), (0,1)};
/// ties prefer the diagonal, then (1,0). An explicit band radius in `cfg` is
/// intersected with the matrix's own layout; the automatic radius applies
/// only to dense matrices. Throws ConfigError when no path fits the band.
AlignmentPath dtw(const CostMatrix& cost, const AlignConfig& cfg = {});

struct SingularRun {
    enum class Kind {
        score_collapse,  // several score frames onto one audio frame
        audio_collapse,  // several audio frames onto one score frame
    } kind;
    std::size_t first_step;  // index into AlignmentPath::steps
    std::size_t length;      // number of path pairs in the run
    PathStep start;
    PathStep end;
};

/// Maximal runs of at least max(k, 2) consecutive path pairs that share one
/// coordinate. Diagnostic only.
std::vector<SingularRun> detect_singular_points(const AlignmentPath& path, std::size_t min_length = 5);

struct TimeKnot {
    double score_time;
    double audio_time;
    friend bool operator==(const TimeKnot&, const TimeKnot&) = default;
};

/// Piecewise-linear monotone score-time -> audio-time map.
class TimeMap {
public:
    TimeMap() = default;
    /// Throws ArgumentError unless score times strictly increase and audio
    /// times never decrease.
    explicit TimeMap(std::vector<TimeKnot> knots);

    const std::vector<TimeKnot>& knots() const noexcept { return knots_; }
    bool empty() const noexcept { return knots_.empty(); }
    bool covers(double score_time) const noexcept;
    /// Linear interpolation; clamps outside the knot range.
    double operator()(double score_time) const;

    /// One "score_time audio_time" pair per line.
    std::string to_text() const;
    static TimeMap from_text(const std::string& text);

private:
    std::vector<TimeKnot> knots_;
};

/// One knot per score frame at frame centres, audio time from the median of
/// the audio frames paired with it, made monotone by a running maximum, plus
/// anchor knots at both sequence edges.
TimeMap path_to_timemap(const AlignmentPath& path, int fps);

struct WarpResult {
    NoteList notes;
    std::size_t clamped = 0;  // notes with a time outside the map's range
};

inline constexpr double kMinNoteDuration = 0.010;

/// Maps onsets and offsets through `map`; durations below 10 ms are
/// extended to 10 ms.
WarpResult warp_notes(const NoteList& notes, const TimeMap& map);

/// The activation grid expressed as a roll configuration.
RollConfig grid_of(const ActivationSet& act, double onset_weight = RollConfig{}.onset_weight);

struct CoarseAlignment {
    AlignmentPath path;
    TimeMap map;
    NoteList notes;
    std::size_t clamped = 0;
    std::size_t score_frames = 0;
    std::size_t audio_frames = 0;
};

/// rasterize -> cost_matrix -> dtw -> path_to_timemap -> warp_notes.
CoarseAlignment coarse_align(const NoteList& score, const ActivationSet& act, const AlignConfig& cfg,
                             const RollConfig& roll_cfg);

}  // namespace amtalign
