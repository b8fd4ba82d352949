#include "amtalign/fine_align.hpp"

#include "amtalign/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <optional>

namespace amtalign {

void FineConfig::validate() const {
    if (!(window_ms > 0.0) || !std::isfinite(window_ms)) throw ConfigError("window_ms must be > 0");
    if (!(min_peak >= 0.0 && min_peak <= 1.0)) throw ConfigError("min_peak must be in [0, 1]");
}

std::size_t SnapResult::flagged_count() const {
    return static_cast<std::size_t>(std::count(flagged.begin(), flagged.end(), true));
}

SnapResult snap_onsets(const NoteList& notes, const ActivationSet& act, const FineConfig& cfg) {
    cfg.validate();
    const auto n_frames = static_cast<std::int64_t>(act.n_frames());
    const double window = cfg.window_ms / 1000.0;
    const double fps = act.fps;

    std::vector<NoteEvent> out(notes.begin(), notes.end());
    std::vector<bool> flagged(notes.size(), false);

    for (std::size_t i = 0; i < out.size(); ++i) {
        auto& n = out[i];
        if (!act.contains_pitch(n.pitch)) {
            throw RangeError("note " + std::to_string(i) + " has pitch " + std::to_string(n.pitch) +
                             " outside the activation range");
        }
        const auto col = static_cast<std::size_t>(n.pitch - act.pitch_offset);
        auto lo = static_cast<std::int64_t>(std::ceil((n.onset - window) * fps - 1e-9));
        auto hi = static_cast<std::int64_t>(std::floor((n.onset + window) * fps + 1e-9));
        lo = std::max<std::int64_t>(lo, 0);
        hi = std::min<std::int64_t>(hi, n_frames - 1);

        std::optional<std::int64_t> best;
        float best_value = -1.0f;
        for (auto f = lo; f <= hi; ++f) {
            const float v = act.onset_act(static_cast<std::size_t>(f), col);
            if (v > best_value) {
                best_value = v;
                best = f;
            }
        }
        if (!best || best_value < cfg.min_peak) {
            flagged[i] = true;
            continue;
        }

        double position = static_cast<double>(*best);
        if (cfg.parabolic_refine && *best > 0 && *best < n_frames - 1) {
            const double left = act.onset_act(static_cast<std::size_t>(*best - 1), col);
            const double right = act.onset_act(static_cast<std::size_t>(*best + 1), col);
            const double centre = best_value;
            const double curvature = left - 2.0 * centre + right;
            if (curvature < 0.0) {
                position += std::clamp(0.5 * (left - right) / curvature, -0.5, 0.5);
            }
        }
        n.onset = position / fps;
    }

    // Per-pitch chronological order, in the coarse order of the input.
    std::array<std::optional<double>, 128> last{};
    for (auto& n : out) {
        auto& prev = last[static_cast<std::size_t>(n.pitch)];
        if (prev && n.onset < *prev) n.onset = *prev;
        prev = n.onset;
        n.offset = std::max(n.offset, n.onset + kMinNoteDuration);
    }

    std::vector<std::size_t> order(out.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (out[a].onset != out[b].onset) return out[a].onset < out[b].onset;
        return out[a].pitch < out[b].pitch;
    });
    SnapResult result;
    std::vector<NoteEvent> sorted;
    sorted.reserve(out.size());
    result.flagged.reserve(out.size());
    for (std::size_t idx : order) {
        sorted.push_back(out[idx]);
        result.flagged.push_back(flagged[idx]);
    }
    result.notes = NoteList(std::move(sorted));
    return result;
}

TwoStageAlignment two_stage_align(const NoteList& score, const ActivationSet& act, const AlignConfig& align_cfg,
                                  const FineConfig& fine_cfg, const RollConfig& roll_cfg) {
    TwoStageAlignment result;
    result.coarse = coarse_align(score, act, align_cfg, roll_cfg);
    result.fine = snap_onsets(result.coarse.notes, act, fine_cfg);
    return result;
}

}  // namespace amtalign
