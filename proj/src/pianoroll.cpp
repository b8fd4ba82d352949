#include "amtalign/pianoroll.hpp"

#include "amtalign/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace amtalign {

namespace {
// Slack for products like 0.03 * 100 that land a hair above an integer.
constexpr double kGridSlack = 1e-9;
}  // namespace

void RollConfig::validate() const {
    if (fps <= 0) throw ConfigError("fps must be positive, got " + std::to_string(fps));
    if (pitch_offset < 0 || n_pitches <= 0 || pitch_offset + n_pitches > 128) {
        throw ConfigError("pitch range [" + std::to_string(pitch_offset) + ", " +
                          std::to_string(pitch_offset + n_pitches) + ") must lie within 0..128");
    }
    if (!(onset_weight >= 1.0) || !std::isfinite(onset_weight)) {
        throw ConfigError("onset_weight must be a finite value >= 1");
    }
}

FrameSpan frame_span(double onset, double offset, int fps) {
    auto first = static_cast<std::int64_t>(std::floor(onset * fps + kGridSlack));
    auto last = static_cast<std::int64_t>(std::ceil(offset * fps - kGridSlack)) - 1;
    return {first, std::max(first, last)};
}

std::size_t frame_count(double duration, int fps) {
    if (duration <= 0.0) return 0;
    return static_cast<std::size_t>(std::ceil(duration * fps - kGridSlack));
}

PianoRoll rasterize(const NoteList& notes, const RollConfig& config, std::optional<double> duration) {
    config.validate();
    PianoRoll roll;
    roll.config = config;
    roll.duration = duration.value_or(notes.end_time());
    if (roll.duration < 0.0 || !std::isfinite(roll.duration)) throw ArgumentError("roll duration must be >= 0");

    const std::size_t n_frames = frame_count(roll.duration, config.fps);
    const auto n_pitches = static_cast<std::size_t>(config.n_pitches);
    roll.frames = Matrix<float>(n_frames, n_pitches, 0.0f);
    roll.onsets = Matrix<std::uint8_t>(n_frames, n_pitches, 0);

    const auto weight = static_cast<float>(config.onset_weight);
    for (std::size_t i = 0; i < notes.size(); ++i) {
        const auto& n = notes[i];
        if (!config.contains_pitch(n.pitch)) {
            roll.clipped.push_back({i, n.pitch, ClippedNote::Reason::pitch_out_of_range});
            continue;
        }
        auto span = frame_span(std::max(0.0, n.onset), n.offset, config.fps);
        if (span.first >= static_cast<std::int64_t>(n_frames)) {
            roll.clipped.push_back({i, n.pitch, ClippedNote::Reason::starts_after_end});
            continue;
        }
        const auto col = static_cast<std::size_t>(n.pitch - config.pitch_offset);
        const auto last = std::min<std::int64_t>(span.last, static_cast<std::int64_t>(n_frames) - 1);
        for (auto f = span.first; f <= last; ++f) {
            auto& cell = roll.frames(static_cast<std::size_t>(f), col);
            cell = std::max(cell, 1.0f);
        }
        const auto onset_frame = static_cast<std::size_t>(span.first);
        roll.frames(onset_frame, col) = weight;
        roll.onsets(onset_frame, col) = 1;
    }
    return roll;
}

}  // namespace amtalign
