#pragma once

// Cost-matrix kernels. The serial version is the straightforward dense
// reference; the parallel one exploits score sparsity and splits rows over
// OpenMP threads. Both produce bit-identical cells.

#include "amtalign/activations.hpp"
#include "amtalign/align.hpp"
#include "amtalign/pianoroll.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace amtalign::kernels {

/// Score frame vectors [sounding; w * onset], 2 * n_pitches wide.
struct ScoreFeatures {
    Matrix<float> dense;
    std::vector<std::vector<std::pair<std::uint32_t, float>>> nonzeros;
    std::vector<double> norms;
};

/// Activation frame vectors [frame_act; w * onset_act].
struct AudioFeatures {
    Matrix<float> dense;
    std::vector<double> norms;
};

ScoreFeatures score_features(const PianoRoll& roll);
AudioFeatures audio_features(const ActivationSet& act, double onset_weight);

void cost_serial(const ScoreFeatures& score, const AudioFeatures& audio, double eps, CostMatrix& out);
void cost_parallel(const ScoreFeatures& score, const AudioFeatures& audio, double eps, CostMatrix& out);

}  // namespace amtalign::kernels
