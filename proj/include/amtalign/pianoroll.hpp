#pragma once

#include "amtalign/matrix.hpp"
#include "amtalign/midi_io.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace amtalign {

struct RollConfig {
    int fps = 100;
    int pitch_offset = 21;
    int n_pitches = 88;
    double onset_weight = 2.0;

    /// Throws ConfigError when a field violates its range.
    void validate() const;
    bool contains_pitch(int pitch) const noexcept {
        return pitch >= pitch_offset && pitch < pitch_offset + n_pitches;
    }
};

/// Inclusive frame range a note occupies on a grid whose frame f covers
/// [f/fps, (f+1)/fps). Never empty: a note shorter than a frame still
/// occupies the frame holding its onset.
struct FrameSpan {
    std::int64_t first;
    std::int64_t last;
};
FrameSpan frame_span(double onset, double offset, int fps);

/// ceil(duration * fps), robust to representation error in the product.
std::size_t frame_count(double duration, int fps);

struct ClippedNote {
    std::size_t index;  // position in the input NoteList
    int pitch;
    enum class Reason { pitch_out_of_range, starts_after_end } reason;
};

struct PianoRoll {
    /// [n_frames x n_pitches]; 0 silent, 1 sounding, onset_weight at the frame
    /// holding a note's onset.
    Matrix<float> frames;
    /// 1 where a note's onset falls; kept separately so onset frames stay
    /// identifiable when onset_weight is 1.
    Matrix<std::uint8_t> onsets;
    RollConfig config;
    double duration = 0.0;
    std::vector<ClippedNote> clipped;

    std::size_t n_frames() const noexcept { return frames.rows(); }
};

/// Duration defaults to the latest note offset.
PianoRoll rasterize(const NoteList& notes, const RollConfig& config,
                    std::optional<double> duration = std::nullopt);

}  // namespace amtalign
