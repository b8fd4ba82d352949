#pragma once

#include "amtalign/matrix.hpp"
#include "amtalign/midi_io.hpp"
#include "amtalign/pianoroll.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace amtalign {

/// Frame and onset posteriorgrams of a transcription model. Frame f is
/// sampled at time f / fps.
struct ActivationSet {
    Matrix<float> frame_act;
    Matrix<float> onset_act;
    int fps = 100;
    int pitch_offset = 21;

    std::size_t n_frames() const noexcept { return frame_act.rows(); }
    std::size_t n_pitches() const noexcept { return frame_act.cols(); }
    bool contains_pitch(int pitch) const noexcept {
        return pitch >= pitch_offset && pitch < pitch_offset + static_cast<int>(n_pitches());
    }

    /// Throws FormatError/RangeError when shapes differ or a value leaves [0, 1].
    void validate() const;

    friend bool operator==(const ActivationSet&, const ActivationSet&) = default;
};

ActivationSet make_empty_activations(std::size_t n_frames, const RollConfig& grid);

/// ACTB container: "ACTB", u32 version=1, fps, pitch_offset, n_pitches,
/// n_frames, then frame_act and onset_act as row-major little-endian float32.
std::vector<std::uint8_t> write_activations(const ActivationSet& act);
ActivationSet read_activations(std::span<const std::uint8_t> bytes);

/// Comma-separated, one frame per row, one pitch per column.
ActivationSet read_activations_csv(const std::string& frame_csv, const std::string& onset_csv, int fps,
                                   int pitch_offset);

ActivationSet read_activation_file(const std::string& path);
void write_activation_file(const std::string& path, const ActivationSet& act);

struct SimConfig {
    double onset_jitter_ms = 20.0;
    double onset_pulse_sigma_frames = 2.0;
    double noise_amplitude = 0.05;
    double deletion_prob = 0.0;
    double spurious_rate = 0.0;  // spurious onsets per second
    std::uint64_t seed = 0;

    void validate() const;
};

/// What the simulator did to one input note.
struct SimulatedNote {
    double onset = 0.0;  // jittered onset actually rendered
    bool deleted = false;
    bool out_of_range = false;
};

struct Simulation {
    ActivationSet activations;
    std::vector<SimulatedNote> notes;  // parallel to the input NoteList

    /// The input notes at their jittered onsets, deleted ones included: the
    /// performance the activations were rendered from.
    NoteList performed_truth(const NoteList& input) const;
};

/// Max-blends a unit-peak Gaussian pulse centred at `time` into a pitch column
/// of onset_act.
void add_onset_pulse(ActivationSet& act, int pitch, double time, double sigma_frames, float peak = 1.0f);

Simulation simulate(const NoteList& truth, double duration, const SimConfig& cfg, const RollConfig& grid);

inline ActivationSet simulate_activations(const NoteList& truth, double duration, const SimConfig& cfg,
                                          const RollConfig& grid) {
    return simulate(truth, duration, cfg, grid).activations;
}

}  // namespace amtalign
