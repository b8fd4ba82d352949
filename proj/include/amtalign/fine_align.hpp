#pragma once

#include "amtalign/activations.hpp"
#include "amtalign/align.hpp"
#include "amtalign/midi_io.hpp"

#include <vector>

namespace amtalign {

struct FineConfig {
    double window_ms = 50.0;  // half-width of the onset search window
    double min_peak = 0.1;
    bool parabolic_refine = true;

    void validate() const;
};

struct SnapResult {
    NoteList notes;
    /// Parallel to `notes`: true where no peak reached min_peak and the
    /// coarse onset was kept.
    std::vector<bool> flagged;

    std::size_t flagged_count() const;
};

/// Moves each onset to the strongest onset activation of its pitch within
/// +-window_ms (earliest frame on ties), optionally refined to sub-frame
/// precision by a parabola through the peak and its neighbours. Afterwards
/// onsets of the same pitch are made non-decreasing. Throws RangeError for a
/// pitch outside the activation range.
SnapResult snap_onsets(const NoteList& notes, const ActivationSet& act, const FineConfig& cfg);

struct TwoStageAlignment {
    CoarseAlignment coarse;
    SnapResult fine;
};

TwoStageAlignment two_stage_align(const NoteList& score, const ActivationSet& act, const AlignConfig& align_cfg,
                                  const FineConfig& fine_cfg, const RollConfig& roll_cfg);

}  // namespace amtalign
