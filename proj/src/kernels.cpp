#include "amtalign/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace amtalign::kernels {

namespace {

inline float cell_cost(double dot, double score_norm, double audio_norm, double eps) {
    const double c = 1.0 - dot / (score_norm * audio_norm + eps);
    return static_cast<float>(std::max(0.0, c));
}

double norm_of(std::span<const float> v) {
    double s = 0.0;
    for (float x : v) s += static_cast<double>(x) * x;
    return std::sqrt(s);
}

}  // namespace

ScoreFeatures score_features(const PianoRoll& roll) {
    const std::size_t frames = roll.n_frames();
    const std::size_t pitches = roll.frames.cols();
    const auto w = static_cast<float>(roll.config.onset_weight);
    ScoreFeatures out;
    out.dense = Matrix<float>(frames, 2 * pitches, 0.0f);
    out.nonzeros.resize(frames);
    out.norms.resize(frames);
    for (std::size_t f = 0; f < frames; ++f) {
        auto v = out.dense.row(f);
        for (std::size_t p = 0; p < pitches; ++p) {
            if (roll.frames(f, p) > 0.0f) v[p] = 1.0f;
            if (roll.onsets(f, p)) v[pitches + p] = w;
        }
        for (std::size_t k = 0; k < v.size(); ++k) {
            if (v[k] != 0.0f) out.nonzeros[f].emplace_back(static_cast<std::uint32_t>(k), v[k]);
        }
        out.norms[f] = norm_of(v);
    }
    return out;
}

AudioFeatures audio_features(const ActivationSet& act, double onset_weight) {
    const std::size_t frames = act.n_frames();
    const std::size_t pitches = act.n_pitches();
    const auto w = static_cast<float>(onset_weight);
    AudioFeatures out;
    out.dense = Matrix<float>(frames, 2 * pitches, 0.0f);
    out.norms.resize(frames);
    for (std::size_t f = 0; f < frames; ++f) {
        auto v = out.dense.row(f);
        auto fa = act.frame_act.row(f);
        auto oa = act.onset_act.row(f);
        for (std::size_t p = 0; p < pitches; ++p) {
            v[p] = fa[p];
            v[pitches + p] = w * oa[p];
        }
        out.norms[f] = norm_of(v);
    }
    return out;
}

void cost_serial(const ScoreFeatures& score, const AudioFeatures& audio, double eps, CostMatrix& out) {
    const auto& layout = out.layout();
    for (std::size_t s = 0; s < layout.rows(); ++s) {
        auto r = score.dense.row(s);
        auto row = out.row(s);
        const auto range = layout.range(s);
        for (std::size_t a = range.lo; a <= range.hi; ++a) {
            auto v = audio.dense.row(a);
            double dot = 0.0;
            for (std::size_t k = 0; k < r.size(); ++k) dot += static_cast<double>(r[k]) * v[k];
            row[a - range.lo] = cell_cost(dot, score.norms[s], audio.norms[a], eps);
        }
    }
}

void cost_parallel(const ScoreFeatures& score, const AudioFeatures& audio, double eps, CostMatrix& out) {
    const auto& layout = out.layout();
    const auto rows = static_cast<std::int64_t>(layout.rows());
#pragma omp parallel for schedule(dynamic, 16)
    for (std::int64_t si = 0; si < rows; ++si) {
        const auto s = static_cast<std::size_t>(si);
        const auto& nz = score.nonzeros[s];
        auto row = out.row(s);
        const auto range = layout.range(s);
        if (nz.empty()) {
            std::fill(row.begin(), row.end(), cell_cost(0.0, score.norms[s], 0.0, eps));
            continue;
        }
        for (std::size_t a = range.lo; a <= range.hi; ++a) {
            const float* v = audio.dense.row(a).data();
            double dot = 0.0;
            for (const auto& [k, val] : nz) dot += static_cast<double>(val) * v[k];
            row[a - range.lo] = cell_cost(dot, score.norms[s], audio.norms[a], eps);
        }
    }
}

}  // namespace amtalign::kernels
