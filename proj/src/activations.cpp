#include "amtalign/activations.hpp"

#include "amtalign/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

namespace amtalign {

namespace {

constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 24;

void put_le32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_le32(std::span<const std::uint8_t> bytes, std::size_t pos) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | bytes[pos + static_cast<std::size_t>(i)];
    return v;
}

void check_range(const Matrix<float>& m, const char* name) {
    for (std::size_t f = 0; f < m.rows(); ++f) {
        auto row = m.row(f);
        for (std::size_t p = 0; p < row.size(); ++p) {
            float v = row[p];
            if (!(v >= 0.0f && v <= 1.0f)) {
                std::ostringstream msg;
                msg << name << "[frame " << f << "][pitch index " << p << "] = " << v << " is outside [0, 1]";
                throw RangeError(msg.str());
            }
        }
    }
}

Matrix<float> parse_csv_matrix(const std::string& text, const char* name) {
    std::vector<std::vector<float>> rows;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::vector<float> row;
        std::istringstream cells(line);
        std::string cell;
        while (std::getline(cells, cell, ',')) {
            char* end = nullptr;
            float v = std::strtof(cell.c_str(), &end);
            if (end == cell.c_str() || std::string_view(end).find_first_not_of(" \t") != std::string_view::npos) {
                throw FormatError("bad number '" + cell + "' on line " + std::to_string(line_no), name);
            }
            row.push_back(v);
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw FormatError("ragged row on line " + std::to_string(line_no), name);
        }
        rows.push_back(std::move(row));
    }
    Matrix<float> m(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t f = 0; f < rows.size(); ++f) std::copy(rows[f].begin(), rows[f].end(), m.row(f).begin());
    return m;
}

}  // namespace

void ActivationSet::validate() const {
    if (frame_act.rows() != onset_act.rows() || frame_act.cols() != onset_act.cols()) {
        throw FormatError("frame_act and onset_act shapes differ", "onset_act");
    }
    if (fps <= 0) throw FormatError("fps must be positive", "fps");
    if (pitch_offset < 0 || pitch_offset + static_cast<long>(n_pitches()) > 128) {
        throw FormatError("pitch range leaves 0..127", "pitch_offset");
    }
    check_range(frame_act, "frame_act");
    check_range(onset_act, "onset_act");
}

ActivationSet make_empty_activations(std::size_t n_frames, const RollConfig& grid) {
    grid.validate();
    ActivationSet act;
    act.frame_act = Matrix<float>(n_frames, static_cast<std::size_t>(grid.n_pitches), 0.0f);
    act.onset_act = Matrix<float>(n_frames, static_cast<std::size_t>(grid.n_pitches), 0.0f);
    act.fps = grid.fps;
    act.pitch_offset = grid.pitch_offset;
    return act;
}

std::vector<std::uint8_t> write_activations(const ActivationSet& act) {
    act.validate();
    std::vector<std::uint8_t> out;
    out.reserve(kHeaderBytes + 8 * act.frame_act.data().size());
    for (char c : {'A', 'C', 'T', 'B'}) out.push_back(static_cast<std::uint8_t>(c));
    put_le32(out, kVersion);
    put_le32(out, static_cast<std::uint32_t>(act.fps));
    put_le32(out, static_cast<std::uint32_t>(act.pitch_offset));
    put_le32(out, static_cast<std::uint32_t>(act.n_pitches()));
    put_le32(out, static_cast<std::uint32_t>(act.n_frames()));
    for (const auto* m : {&act.frame_act, &act.onset_act}) {
        for (float v : m->data()) put_le32(out, std::bit_cast<std::uint32_t>(v));
    }
    return out;
}

ActivationSet read_activations(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "ACTB", 4) != 0) {
        throw FormatError("bad magic, expected \"ACTB\"", "magic");
    }
    if (bytes.size() < kHeaderBytes) throw FormatError("truncated header", "header");
    const std::uint32_t version = get_le32(bytes, 4);
    if (version != kVersion) throw FormatError("unsupported version " + std::to_string(version), "version");
    const std::uint32_t fps = get_le32(bytes, 8);
    const std::uint32_t pitch_offset = get_le32(bytes, 12);
    const std::uint32_t n_pitches = get_le32(bytes, 16);
    const std::uint32_t n_frames = get_le32(bytes, 20);
    if (fps == 0 || fps > 100000) throw FormatError("fps out of range", "fps");
    if (n_pitches == 0 || pitch_offset > 127 || pitch_offset + n_pitches > 128) {
        throw FormatError("pitch range leaves 0..127", "n_pitches");
    }
    const std::uint64_t cells = std::uint64_t{n_frames} * n_pitches;
    const std::uint64_t available = (bytes.size() - kHeaderBytes) / 4;
    if (available < cells) throw FormatError("truncated payload", "frame_act");
    if (available < 2 * cells) throw FormatError("truncated payload", "onset_act");
    if (bytes.size() != kHeaderBytes + 8 * cells) throw FormatError("trailing bytes after payload", "onset_act");

    ActivationSet act;
    act.fps = static_cast<int>(fps);
    act.pitch_offset = static_cast<int>(pitch_offset);
    act.frame_act = Matrix<float>(n_frames, n_pitches);
    act.onset_act = Matrix<float>(n_frames, n_pitches);
    std::size_t pos = kHeaderBytes;
    for (auto* m : {&act.frame_act, &act.onset_act}) {
        for (float& v : m->data()) {
            v = std::bit_cast<float>(get_le32(bytes, pos));
            pos += 4;
        }
    }
    act.validate();
    return act;
}

ActivationSet read_activations_csv(const std::string& frame_csv, const std::string& onset_csv, int fps,
                                   int pitch_offset) {
    ActivationSet act;
    act.frame_act = parse_csv_matrix(frame_csv, "frame_act");
    act.onset_act = parse_csv_matrix(onset_csv, "onset_act");
    act.fps = fps;
    act.pitch_offset = pitch_offset;
    act.validate();
    return act;
}

ActivationSet read_activation_file(const std::string& path) {
    try {
        return read_activations(read_file_bytes(path));
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what(), e.field());
    } catch (const RangeError& e) {
        throw RangeError(path + ": " + e.what());
    }
}

void write_activation_file(const std::string& path, const ActivationSet& act) {
    write_file_bytes(path, write_activations(act));
}

void SimConfig::validate() const {
    auto check = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(what);
    };
    check(onset_jitter_ms >= 0.0 && std::isfinite(onset_jitter_ms), "onset_jitter_ms must be >= 0");
    check(onset_pulse_sigma_frames >= 0.0 && std::isfinite(onset_pulse_sigma_frames),
          "onset_pulse_sigma_frames must be >= 0");
    check(noise_amplitude >= 0.0 && noise_amplitude < 1.0, "noise_amplitude must be in [0, 1)");
    check(deletion_prob >= 0.0 && deletion_prob <= 1.0, "deletion_prob must be in [0, 1]");
    check(spurious_rate >= 0.0 && std::isfinite(spurious_rate), "spurious_rate must be >= 0");
}

NoteList Simulation::performed_truth(const NoteList& input) const {
    std::vector<NoteEvent> out;
    for (std::size_t i = 0; i < input.size() && i < notes.size(); ++i) {
        NoteEvent n = input[i];
        n.onset = notes[i].onset;
        n.offset = std::max(n.offset, n.onset + 0.001);
        out.push_back(n);
    }
    return NoteList(std::move(out));
}

void add_onset_pulse(ActivationSet& act, int pitch, double time, double sigma_frames, float peak) {
    if (!act.contains_pitch(pitch) || act.n_frames() == 0) return;
    const auto col = static_cast<std::size_t>(pitch - act.pitch_offset);
    const double center = time * act.fps;
    const auto last_frame = static_cast<std::int64_t>(act.n_frames()) - 1;
    if (sigma_frames <= 0.0) {
        auto f = std::clamp<std::int64_t>(std::llround(center), 0, last_frame);
        auto& cell = act.onset_act(static_cast<std::size_t>(f), col);
        cell = std::max(cell, peak);
        return;
    }
    const double reach = 4.0 * sigma_frames;
    auto lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(center - reach)));
    auto hi = std::min<std::int64_t>(last_frame, static_cast<std::int64_t>(std::ceil(center + reach)));
    for (auto f = lo; f <= hi; ++f) {
        const double z = (static_cast<double>(f) - center) / sigma_frames;
        const auto v = static_cast<float>(peak * std::exp(-0.5 * z * z));
        auto& cell = act.onset_act(static_cast<std::size_t>(f), col);
        cell = std::max(cell, v);
    }
}

Simulation simulate(const NoteList& truth, double duration, const SimConfig& cfg, const RollConfig& grid) {
    cfg.validate();
    grid.validate();
    const std::size_t n_frames = std::max<std::size_t>(1, frame_count(duration, grid.fps));

    Simulation sim;
    sim.activations = make_empty_activations(n_frames, grid);
    sim.notes.resize(truth.size());
    auto& act = sim.activations;
    const auto last_frame = static_cast<std::int64_t>(n_frames) - 1;

    // Notes and noise draw from separate streams so that changing one
    // parameter does not reshuffle the other.
    std::seed_seq note_seed{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32), 1u};
    std::seed_seq noise_seed{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32), 2u};
    std::mt19937_64 note_rng(note_seed);
    std::mt19937_64 noise_rng(noise_seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> jitter(0.0, cfg.onset_jitter_ms / 1000.0);

    auto fill_frames = [&](int pitch, double onset, double offset, float level) {
        const auto col = static_cast<std::size_t>(pitch - grid.pitch_offset);
        auto span = frame_span(onset, offset, grid.fps);
        auto first = std::clamp<std::int64_t>(span.first, 0, last_frame);
        auto last = std::clamp<std::int64_t>(span.last, 0, last_frame);
        for (auto f = first; f <= last; ++f) {
            auto& cell = act.frame_act(static_cast<std::size_t>(f), col);
            cell = std::max(cell, level);
        }
    };

    for (std::size_t i = 0; i < truth.size(); ++i) {
        const auto& n = truth[i];
        const bool deleted = unit(note_rng) < cfg.deletion_prob;
        const double shift = cfg.onset_jitter_ms > 0.0 ? jitter(note_rng) : 0.0;
        auto& rec = sim.notes[i];
        rec.onset = std::max(0.0, n.onset + shift);
        rec.deleted = deleted;
        if (!grid.contains_pitch(n.pitch)) {
            rec.out_of_range = true;
            continue;
        }
        if (deleted) continue;
        fill_frames(n.pitch, rec.onset, std::max(n.offset, rec.onset), 1.0f);
        add_onset_pulse(act, n.pitch, rec.onset, cfg.onset_pulse_sigma_frames);
    }

    if (cfg.spurious_rate > 0.0 && duration > 0.0) {
        std::poisson_distribution<int> count_dist(cfg.spurious_rate * duration);
        std::uniform_int_distribution<int> pitch_dist(grid.pitch_offset, grid.pitch_offset + grid.n_pitches - 1);
        std::uniform_real_distribution<double> level_dist(0.3, 1.0);
        const int count = count_dist(note_rng);
        for (int k = 0; k < count; ++k) {
            const double t = unit(note_rng) * duration;
            const int pitch = pitch_dist(note_rng);
            const auto level = static_cast<float>(level_dist(note_rng));
            fill_frames(pitch, t, t + 0.05, level);
            add_onset_pulse(act, pitch, t, cfg.onset_pulse_sigma_frames, level);
        }
    }

    if (cfg.noise_amplitude > 0.0) {
        std::uniform_real_distribution<float> noise(0.0f, static_cast<float>(cfg.noise_amplitude));
        for (auto* m : {&act.frame_act, &act.onset_act}) {
            for (float& v : m->data()) v = std::clamp(v + noise(noise_rng), 0.0f, 1.0f);
        }
    }
    return sim;
}

}  // namespace amtalign
