// amtalign: score-to-activation alignment, evaluation and corpus tools.

#include "amtalign/activations.hpp"
#include "amtalign/align.hpp"
#include "amtalign/dataset.hpp"
#include "amtalign/error.hpp"
#include "amtalign/eval.hpp"
#include "amtalign/fine_align.hpp"
#include "amtalign/midi_io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace amtalign;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitBelowThreshold = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

NoteList load_notes(const std::string& path) {
    try {
        auto parsed = read_midi_file(path);
        for (const auto& w : parsed.warnings) std::cerr << "amtalign: warning: " << path << ": " << w << '\n';
        return std::move(parsed.notes);
    } catch (const FormatError& e) {
        throw FormatError(path + ": " + e.what(), e.offset());
    }
}

void save_notes(const std::string& path, const NoteList& notes, std::uint16_t division) {
    write_file_bytes(path, write_midi(notes, division));
}

void save_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw IoError("error while writing '" + path + "'");
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
}

// Flags shared by several subcommands.
struct SimFlags {
    SimConfig cfg;
    void add(CLI::App* app) {
        app->add_option("--jitter-ms", cfg.onset_jitter_ms, "Onset jitter standard deviation (ms)")
            ->capture_default_str()
            ->check(CLI::NonNegativeNumber);
        app->add_option("--pulse-sigma", cfg.onset_pulse_sigma_frames, "Onset pulse width (frames)")
            ->capture_default_str()
            ->check(CLI::NonNegativeNumber);
        app->add_option("--noise", cfg.noise_amplitude, "Uniform noise ceiling in [0, 1)")->capture_default_str();
        app->add_option("--deletion", cfg.deletion_prob, "Probability a note leaves no activation")
            ->capture_default_str()
            ->check(CLI::Range(0.0, 1.0));
        app->add_option("--spurious-rate", cfg.spurious_rate, "Spurious onsets per second")
            ->capture_default_str()
            ->check(CLI::NonNegativeNumber);
    }
};

struct AlignFlags {
    AlignConfig align;
    FineConfig fine;
    double onset_weight = RollConfig{}.onset_weight;
    std::size_t band = 0;

    void add(CLI::App* app) {
        app->add_option("--band", band, "Sakoe-Chiba radius in frames (0: automatic)")->capture_default_str();
        app->add_option("--onset-weight", onset_weight, "Weight of onset frames in the cost")
            ->capture_default_str()
            ->check(CLI::Range(1.0, 1e6));
        app->add_option("--window-ms", fine.window_ms, "Onset search half-width (ms)")
            ->capture_default_str()
            ->check(CLI::PositiveNumber);
        app->add_option("--min-peak", fine.min_peak, "Minimum onset activation accepted")
            ->capture_default_str()
            ->check(CLI::Range(0.0, 1.0));
        app->add_flag("--no-parabolic", [this](std::int64_t) { fine.parabolic_refine = false; },
                      "Disable sub-frame peak refinement");
    }
    void finish() {
        if (band > 0) align.band_radius_frames = band;
        align.validate();
        fine.validate();
    }
};

struct GridFlags {
    RollConfig roll;
    void add(CLI::App* app) {
        app->add_option("--fps", roll.fps, "Frames per second")->capture_default_str()->check(CLI::PositiveNumber);
        app->add_option("--pitch-offset", roll.pitch_offset, "Lowest MIDI pitch")->capture_default_str();
        app->add_option("--n-pitches", roll.n_pitches, "Number of pitches")->capture_default_str();
    }
};

std::vector<double> parse_list(const std::string& text, const char* what) {
    std::vector<double> out;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw UsageError(std::string("bad value '") + item + "' in " + what);
        }
    }
    if (out.empty()) throw UsageError(std::string(what) + " is empty");
    return out;
}

// --- align -------------------------------------------------------------------

struct AlignCmd {
    std::string score, activations, output, timemap, singular;
    bool coarse_only = false;
    std::size_t singular_k = 5;
    std::uint16_t division = 480;
    AlignFlags flags;

    void add(CLI::App& root) {
        auto* app = root.add_subcommand("align", "Align a score to transcription activations");
        app->add_option("score", score, "Score MIDI file")->required();
        app->add_option("activations", activations, "Activation container (.actb)")->required();
        app->add_option("-o,--output", output, "Aligned MIDI output")->required();
        app->add_flag("--coarse-only", coarse_only, "Stop after the DTW stage");
        app->add_option("--emit-timemap", timemap, "Write the score->audio time map here");
        app->add_option("--singular-report", singular, "Write singular-point runs here");
        app->add_option("--singular-k", singular_k, "Minimum run length for singular points")
            ->capture_default_str()
            ->check(CLI::PositiveNumber);
        app->add_option("--division", division, "Ticks per quarter in the output")
            ->capture_default_str()
            ->check(CLI::Range(1, 32767));
        flags.add(app);
        app->callback([this] { run(); });
    }

    void run() {
        flags.finish();
        const NoteList notes = load_notes(score);
        const ActivationSet act = read_activation_file(activations);
        const RollConfig grid = grid_of(act, flags.onset_weight);

        NoteList result;
        CoarseAlignment coarse;
        std::size_t flagged = 0;
        if (coarse_only) {
            coarse = coarse_align(notes, act, flags.align, grid);
            result = coarse.notes;
        } else {
            auto two = two_stage_align(notes, act, flags.align, flags.fine, grid);
            coarse = std::move(two.coarse);
            result = std::move(two.fine.notes);
            flagged = two.fine.flagged_count();
        }
        save_notes(output, result, division);
        if (!timemap.empty()) save_text(timemap, coarse.map.to_text());

        auto runs = detect_singular_points(coarse.path, singular_k);
        if (!singular.empty()) {
            std::ostringstream out;
            out << "kind\tfirst_step\tlength\tscore_start_s\tscore_end_s\taudio_start_s\taudio_end_s\n";
            const double f = 1.0 / act.fps;
            for (const auto& r : runs) {
                out << (r.kind == SingularRun::Kind::score_collapse ? "score_collapse" : "audio_collapse") << '\t'
                    << r.first_step << '\t' << r.length << '\t' << r.start.score * f << '\t' << r.end.score * f
                    << '\t' << r.start.audio * f << '\t' << r.end.audio * f << '\n';
            }
            save_text(singular, out.str());
        }
        std::cout << "aligned " << result.size() << " notes (" << coarse.score_frames << " score x "
                  << coarse.audio_frames << " audio frames, path cost " << std::fixed << std::setprecision(3)
                  << coarse.path.total_cost << ")\n";
        std::cout << "singular runs: " << runs.size() << ", clamped: " << coarse.clamped;
        if (!coarse_only) std::cout << ", unsnapped onsets: " << flagged;
        std::cout << '\n';
    }
};

// --- evaluate ----------------------------------------------------------------

struct EvaluateCmd {
    std::string ref, est, report;
    double tolerance_ms = 50.0;
    bool remove_overlaps = false;
    bool json = false;
    std::optional<double> fail_below;
    int* exit_code = nullptr;

    void add(CLI::App& root, int& code) {
        exit_code = &code;
        auto* app = root.add_subcommand("evaluate", "Onset-only precision, recall and F-measure");
        app->add_option("reference", ref, "Reference MIDI")->required();
        app->add_option("estimate", est, "Estimated MIDI")->required();
        app->add_option("--tolerance-ms", tolerance_ms, "Onset tolerance (ms)")
            ->capture_default_str()
            ->check(CLI::PositiveNumber);
        app->add_flag("--remove-overlaps", remove_overlaps, "Drop estimate notes covered by a same-pitch note");
        app->add_flag("--json", json, "Print the structured report instead of text");
        app->add_option("--report", report, "Also write the structured report to a file");
        app->add_option("--fail-below", fail_below, "Exit 1 when F-measure (percent) is below this")
            ->check(CLI::Range(0.0, 100.0));
        app->callback([this] { run(); });
    }

    void run() {
        MatchConfig mc{tolerance_ms};
        mc.validate();
        const NoteList r = load_notes(ref);
        NoteList e = load_notes(est);
        if (remove_overlaps) e = remove_overlapping_notes(e);
        const auto result = evaluate(r, e, mc);
        std::cout << (json ? to_json(result) + "\n" : to_text(result));
        if (!report.empty()) save_text(report, to_json(result) + "\n");
        if (fail_below && 100.0 * result.f_measure < *fail_below) *exit_code = kExitBelowThreshold;
    }
};

// --- validate ----------------------------------------------------------------

struct ValidateCmd {
    std::string manifest, tolerances = "50,25";
    std::uint64_t seed = 0;
    int jobs = 1;
    bool per_piece = false;
    std::optional<double> fail_below;
    SimFlags sim;
    AlignFlags flags;
    int* exit_code = nullptr;

    void add(CLI::App& root, int& code) {
        exit_code = &code;
        auto* app = root.add_subcommand("validate", "Round-trip validation over a corpus manifest");
        app->add_option("manifest", manifest, "Manifest: id, score, activations, duration [, truth]")->required();
        app->add_option("--tolerances", tolerances, "Comma-separated onset tolerances (ms)")->capture_default_str();
        app->add_option("--seed", seed, "Base random seed")->capture_default_str();
        app->add_option("--jobs", jobs, "Pieces processed in parallel")->capture_default_str()->check(CLI::PositiveNumber);
        app->add_flag("--per-piece", per_piece, "Also print one line per piece");
        app->add_option("--fail-below", fail_below, "Exit 1 when any pooled fine F1 (percent) is below this")
            ->check(CLI::Range(0.0, 100.0));
        sim.add(app);
        flags.add(app);
        app->callback([this] { run(); });
    }

    void run() {
        flags.finish();
        sim.cfg.validate();
        const auto tols = parse_list(tolerances, "--tolerances");
        for (double t : tols) MatchConfig{t}.validate();

        Corpus corpus = read_manifest(manifest);
        if (corpus.pieces.empty()) throw UsageError("manifest '" + manifest + "' lists no pieces");
        std::sort(corpus.pieces.begin(), corpus.pieces.end(),
                  [](const ManifestEntry& a, const ManifestEntry& b) { return a.id < b.id; });

        std::vector<RoundTripCase> cases;
        for (std::size_t i = 0; i < corpus.pieces.size(); ++i) {
            const auto& p = corpus.pieces[i];
            RoundTripCase c;
            c.id = p.id;
            c.score = load_notes(p.score_path);
            if (p.truth_path) {
                c.aligned_truth = load_notes(*p.truth_path);
            } else {
                // No known alignment: take the two-stage result on the recorded activations as truth.
                const auto act = read_activation_file(p.activation_path);
                c.aligned_truth = two_stage_align(c.score, act, flags.align, flags.fine,
                                                  grid_of(act, flags.onset_weight)).fine.notes;
            }
            c.seed = derive_seed(seed, i);
            cases.push_back(std::move(c));
        }

        RollConfig grid;
        grid.onset_weight = flags.onset_weight;
        auto results = validate_corpus(cases, sim.cfg, flags.align, flags.fine, grid, tols, jobs);
        if (per_piece) {
            for (const auto& piece : results) {
                std::cout << piece.id;
                for (const auto& row : piece.rows) {
                    std::cout << "  @" << row.tolerance_ms << "ms coarse " << format_percent(row.coarse.f_measure)
                              << "% fine " << format_percent(row.fine.f_measure) << '%';
                }
                std::cout << '\n';
            }
            std::cout << '\n';
        }
        const auto rows = summarize(results);
        std::cout << format_validation_table(rows);
        if (fail_below) {
            for (const auto& r : rows) {
                if (100.0 * r.fine.pooled.f_measure < *fail_below) *exit_code = kExitBelowThreshold;
            }
        }
    }
};

// --- simulate ----------------------------------------------------------------

struct SimulateCmd {
    std::string truth, output, truth_out;
    std::optional<double> duration;
    std::uint64_t seed = 0;
    std::uint16_t division = 480;
    SimFlags sim;
    GridFlags grid;

    void add(CLI::App& root) {
        auto* app = root.add_subcommand("simulate", "Render activations from a known-aligned MIDI");
        app->add_option("truth", truth, "Aligned MIDI")->required();
        app->add_option("-o,--output", output, "Activation container to write")->required();
        app->add_option("--truth-out", truth_out, "Write the jittered performance MIDI here");
        app->add_option("--duration", duration, "Length in seconds (default: last offset)")
            ->check(CLI::PositiveNumber);
        app->add_option("--seed", seed, "Random seed")->capture_default_str();
        app->add_option("--division", division, "Ticks per quarter for --truth-out")
            ->capture_default_str()
            ->check(CLI::Range(1, 32767));
        sim.add(app);
        grid.add(app);
        app->callback([this] { run(); });
    }

    void run() {
        sim.cfg.seed = seed;
        sim.cfg.validate();
        grid.roll.validate();
        const NoteList notes = load_notes(truth);
        const auto result = simulate(notes, duration.value_or(notes.end_time()), sim.cfg, grid.roll);
        write_activation_file(output, result.activations);
        if (!truth_out.empty()) save_notes(truth_out, result.performed_truth(notes), division);
        std::cout << "wrote " << result.activations.n_frames() << " frames x " << result.activations.n_pitches()
                  << " pitches to " << output << '\n';
    }
};

// --- split -------------------------------------------------------------------

struct SplitCmd {
    std::string manifest, out_dir = ".", ratios = "0.8,0.1,0.1";
    std::uint64_t seed = 0;

    void add(CLI::App& root) {
        auto* app = root.add_subcommand("split", "Piece-level train/valid/test split");
        app->add_option("manifest", manifest, "Corpus manifest")->required();
        app->add_option("-o,--output-dir", out_dir, "Directory for train.txt, valid.txt, test.txt")
            ->capture_default_str();
        app->add_option("--ratios", ratios, "train,valid,test")->capture_default_str();
        app->add_option("--seed", seed, "Random seed")->capture_default_str();
        app->callback([this] { run(); });
    }

    void run() {
        const auto r = parse_list(ratios, "--ratios");
        if (r.size() != 3) throw UsageError("--ratios needs three values");
        SplitSpec spec{r[0], r[1], r[2], seed};
        spec.validate();
        const Split split = split_pieces(read_manifest(manifest), spec);
        ensure_dir(out_dir);
        auto write = [&](const char* name, const std::vector<std::string>& ids) {
            std::string text;
            for (const auto& id : ids) text += id + '\n';
            save_text((fs::path(out_dir) / name).string(), text);
        };
        write("train.txt", split.train);
        write("valid.txt", split.valid);
        write("test.txt", split.test);
        std::cout << "train " << split.train.size() << ", valid " << split.valid.size() << ", test "
                  << split.test.size() << '\n';
    }
};

// --- window ------------------------------------------------------------------

struct WindowCmd {
    std::string notes_path, out_dir, id;
    std::optional<double> duration;
    WindowSpec spec;
    std::uint16_t division = 480;

    void add(CLI::App& root) {
        auto* app = root.add_subcommand("window", "Cut a MIDI file into overlapping training windows");
        app->add_option("notes", notes_path, "MIDI file")->required();
        app->add_option("-o,--output-dir", out_dir, "Directory for window files and index.tsv")->required();
        app->add_option("--length", spec.length_s, "Window length (s)")->capture_default_str()->check(CLI::PositiveNumber);
        app->add_option("--hop", spec.hop_s, "Hop between window starts (s)")
            ->capture_default_str()
            ->check(CLI::PositiveNumber);
        app->add_option("--duration", duration, "Piece length in seconds (default: last offset)")
            ->check(CLI::PositiveNumber);
        app->add_option("--id", id, "Piece id (default: file stem)");
        app->add_option("--division", division, "Ticks per quarter in the output")
            ->capture_default_str()
            ->check(CLI::Range(1, 32767));
        app->callback([this] { run(); });
    }

    void run() {
        spec.validate();
        const NoteList notes = load_notes(notes_path);
        const std::string piece = id.empty() ? fs::path(notes_path).stem().string() : id;
        const auto windows = window_notes(notes, duration.value_or(notes.end_time()), spec);
        ensure_dir(out_dir);
        std::ostringstream index;
        index << std::setprecision(17) << "id\tstart\tfile\tnotes\n";
        for (std::size_t k = 0; k < windows.size(); ++k) {
            char name[64];
            std::snprintf(name, sizeof name, "_w%04zu.mid", k);
            const std::string file = piece + name;
            save_notes((fs::path(out_dir) / file).string(), windows[k].notes, division);
            index << piece << '\t' << windows[k].start << '\t' << file << '\t' << windows[k].notes.size() << '\n';
        }
        save_text((fs::path(out_dir) / "index.tsv").string(), index.str());
        std::cout << "wrote " << windows.size() << " windows to " << out_dir << '\n';
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Align scores to transcription activations, validate alignments and score transcriptions"};
    app.require_subcommand(1);
    int code = kExitOk;

    AlignCmd align;
    EvaluateCmd evaluate_cmd;
    ValidateCmd validate;
    SimulateCmd simulate_cmd;
    SplitCmd split;
    WindowCmd window;
    align.add(app);
    evaluate_cmd.add(app, code);
    validate.add(app, code);
    simulate_cmd.add(app);
    split.add(app);
    window.add(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "amtalign: error: " << e.what() << '\n';
        return kExitUsage;
    }
    return code;
}
