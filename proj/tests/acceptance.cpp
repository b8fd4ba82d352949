// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "amtalign/dataset.hpp"
#include "amtalign/eval.hpp"
#include "amtalign/midi_io.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

#include <omp.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

using namespace amtalign;

namespace {

// Pinned thresholds.
constexpr double kOracleBudgetS = 10.0;
constexpr double kCorpusBudgetS = 120.0;
constexpr double kFine50Min = 95.0;
constexpr double kFine25Min = 90.0;
constexpr double kCoarseGapMin = 20.0;  // points by which fine@25 must exceed coarse@25
constexpr double kLargeBudgetS = 60.0;
constexpr double kLargeMemoryBytes = 2.0 * 1024 * 1024 * 1024;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass;
    std::string detail;
};

int failures = 0;

void report(int id, const char* title, const Outcome& o) {
    std::printf("%s criterion %d: %s -- %s\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Outcome dtw_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(20240601);
    std::uniform_int_distribution<std::size_t> dim(1, 8);
    std::uniform_real_distribution<double> value(0.0, 1.0);
    int mismatches = 0, invalid = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const auto rows = dim(rng), cols = dim(rng);
        Matrix<double> m(rows, cols);
        for (double& v : m.data()) v = value(rng);
        const auto cost = CostMatrix::from_dense(m);
        const auto path = dtw(cost);
        mismatches += path.total_cost != oracle::dtw_min_cost(cost);
        invalid += !is_valid_path(path, rows, cols);
    }
    const double elapsed = seconds_since(t0);
    return {mismatches == 0 && invalid == 0 && elapsed < kOracleBudgetS,
            fmt("500 matrices, %d cost mismatches, %d invalid paths, %.2f s", mismatches, invalid, elapsed)};
}

NoteList small_list(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> count(0, 6), pitch(60, 62), slot(0, 12);
    std::vector<NoteEvent> v;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
        const double t = slot(rng) * 0.025;
        v.push_back({pitch(rng), t, t + 0.2, 80});
    }
    return NoteList(std::move(v));
}

Outcome matching_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(777);
    int mismatches = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const auto ref = small_list(rng);
        const auto est = small_list(rng);
        const auto m = match_notes(ref, est, MatchConfig{50.0});
        mismatches += m.size() != oracle::best_matching(ref, est, 0.05).max_cardinality;
    }
    const double elapsed = seconds_since(t0);
    return {mismatches == 0 && elapsed < kOracleBudgetS,
            fmt("500 pairs, %d cardinality mismatches, %.2f s", mismatches, elapsed)};
}

Outcome corpus_accuracy() {
    const auto t0 = Clock::now();
    constexpr int kPieces = 10, kSeeds = 5;
    constexpr double kPieceSeconds = 60.0;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> warp(0.8, 1.25);
    std::vector<RoundTripCase> cases;
    double shortest = 1e9;
    for (int p = 0; p < kPieces; ++p) {
        const auto score = synth::guitar_piece(1000 + static_cast<std::uint64_t>(p), kPieceSeconds + 1.0);
        const auto truth = synth::scale_time(score, warp(rng));
        shortest = std::min(shortest, score.end_time());
        for (int s = 0; s < kSeeds; ++s) {
            cases.push_back({fmt("piece%02d_seed%d", p, s), score, truth,
                             derive_seed(static_cast<std::uint64_t>(p), static_cast<std::uint64_t>(s))});
        }
    }
    SimConfig sim;  // defaults: 20 ms jitter, 0.05 noise
    const auto results = validate_corpus(cases, sim, AlignConfig{}, FineConfig{}, RollConfig{}, {50.0, 25.0},
                                         omp_get_max_threads());
    const auto rows = summarize(results);
    const double c50 = 100 * rows[0].coarse.pooled.f_measure, f50 = 100 * rows[0].fine.pooled.f_measure;
    const double c25 = 100 * rows[1].coarse.pooled.f_measure, f25 = 100 * rows[1].fine.pooled.f_measure;
    const double elapsed = seconds_since(t0);
    const bool ok = f50 >= kFine50Min && f25 >= kFine25Min && c25 <= f25 - kCoarseGapMin && elapsed < kCorpusBudgetS &&
                    shortest >= kPieceSeconds;
    return {ok, fmt("%d pieces x %d seeds (shortest %.1f s), pooled F1 coarse %.1f/%.1f, fine %.1f/%.1f at 50/25 ms "
                    "(mean-per-piece fine@25 %.1f, coarse@25 %.1f), %.1f s",
                    kPieces, kSeeds, shortest, c50, c25, f50, f25, 100 * rows[1].fine.mean_per_piece.f_measure,
                    100 * rows[1].coarse.mean_per_piece.f_measure, elapsed)};
}

Outcome perfect_recovery() {
    SimConfig sim;
    sim.onset_jitter_ms = 0.0;
    sim.noise_amplitude = 0.0;
    int runs = 0, imperfect = 0;
    for (int p = 0; p < 8; ++p) {
        const auto score = synth::guitar_piece(2000 + static_cast<std::uint64_t>(p), 30.0);
        for (int s = 0; s < 3; ++s) {
            sim.seed = derive_seed(99, static_cast<std::uint64_t>(p * 3 + s));
            const auto rt = roundtrip_validate(score, score, sim, AlignConfig{}, FineConfig{}, RollConfig{}, {25.0, 50.0});
            for (const auto& row : rt.rows) imperfect += row.fine.f_measure != 1.0;
            ++runs;
        }
    }
    return {imperfect == 0, fmt("%d runs, %d tolerance cells below 100%%", runs, imperfect)};
}

Outcome midi_roundtrip() {
    std::mt19937_64 rng(5150);
    std::uniform_int_distribution<std::size_t> count(0, 60);
    const double tps = 2.0 * 480;  // ticks per second at the written tempo
    int bad_lists = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto notes = synth::random_notes(rng, count(rng), 60.0, 0, 127);
        const auto back = parse_midi(write_midi(notes, 480)).notes;
        using Key = std::tuple<int, int, double, double>;
        std::vector<Key> a, b;
        for (const auto& n : notes) a.emplace_back(n.pitch, n.velocity, n.onset, n.offset);
        for (const auto& n : back) b.emplace_back(n.pitch, n.velocity, n.onset, n.offset);
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        bool ok = a.size() == b.size();
        for (std::size_t i = 0; ok && i < a.size(); ++i) {
            ok = std::get<0>(a[i]) == std::get<0>(b[i]) && std::get<1>(a[i]) == std::get<1>(b[i]);
            const double err = std::max(std::abs(std::get<2>(a[i]) - std::get<2>(b[i])),
                                        std::abs(std::get<3>(a[i]) - std::get<3>(b[i])));
            worst = std::max(worst, err);
            ok = ok && err <= 0.5 / tps + 1e-12;
        }
        bad_lists += !ok;
    }
    return {bad_lists == 0, fmt("1000 lists, %d failing, worst timing error %.3f of a tick", bad_lists, worst * tps)};
}

Outcome eval_invariants() {
    std::mt19937_64 rng(31337);
    int swap = 0, transpose = 0, shift = 0, monotone = 0;
    auto shifted = [](const NoteList& x, double dt) {
        std::vector<NoteEvent> v(x.begin(), x.end());
        for (auto& n : v) n.onset += dt, n.offset += dt;
        return NoteList(std::move(v));
    };
    std::uniform_int_distribution<int> k_dist(-2, 2);
    for (int trial = 0; trial < 200; ++trial) {
        const auto a = synth::random_notes(rng, 30, 6.0, 40, 90);
        // Estimates jittered from the reference plus extras, so the match count is non-trivial.
        std::vector<NoteEvent> v(a.begin(), a.end());
        std::normal_distribution<double> jit(0.0, 0.03);
        for (auto& n : v) n.onset = std::max(0.0, n.onset + jit(rng)), n.offset = n.onset + 0.3;
        v.resize(v.size() * 3 / 4);
        const auto extra = synth::random_notes(rng, 8, 6.0, 40, 90);
        v.insert(v.end(), extra.begin(), extra.end());
        const NoteList b(std::move(v));

        const MatchConfig mc{50.0};
        const auto ab = evaluate(a, b, mc);
        const auto ba = evaluate(b, a, mc);
        swap += !(ab.precision == ba.recall && ab.recall == ba.precision);
        const int k = k_dist(rng);
        const auto t = evaluate(transpose_notes(a, k), transpose_notes(b, k), mc);
        transpose += !(t.precision == ab.precision && t.recall == ab.recall);
        const auto s = evaluate(shifted(a, 4.25), shifted(b, 4.25), mc);
        shift += !(s.precision == ab.precision && s.recall == ab.recall);
        monotone += evaluate(a, b, MatchConfig{25.0}).f_measure > ab.f_measure;
    }
    return {swap + transpose + shift + monotone == 0,
            fmt("200 pairs, violations: swap %d, transposition %d, time shift %d, tolerance %d", swap, transpose, shift,
                monotone)};
}

Outcome counts() {
    std::vector<std::string> ids;
    for (int i = 0; i < 79; ++i) ids.push_back(fmt("piece%03d", i));
    Corpus corpus;
    for (const auto& id : ids) corpus.pieces.push_back({id, id + ".mid", id + ".actb", 60.0, {}});
    const auto s1 = split_pieces(corpus, SplitSpec{});
    const auto s2 = split_pieces(corpus, SplitSpec{});
    const bool split_ok = s1.train.size() == 63 && s1.valid.size() == 8 && s1.test.size() == 8 &&
                          s1.train == s2.train && s1.valid == s2.valid && s1.test == s2.test;

    const auto piece = synth::guitar_piece(3, 30.0);
    const auto w1 = window_notes(piece, 30.0, WindowSpec{});
    const auto w2 = window_notes(piece, 30.0, WindowSpec{});
    bool same = w1.size() == w2.size();
    for (std::size_t i = 0; same && i < w1.size(); ++i) same = w1[i].start == w2[i].start && w1[i].notes == w2[i].notes;
    const bool window_ok = w1.size() == 30 && same;
    return {split_ok && window_ok, fmt("split {%zu, %zu, %zu}, %zu windows, repeat runs %s", s1.train.size(),
                                       s1.valid.size(), s1.test.size(), w1.size(),
                                       (split_ok && same) ? "identical" : "differ")};
}

// A 4-minute piece whose truth spans exactly 24000 frames on both axes.
Outcome large_alignment() {
    int fds[2];
    if (pipe(fds) != 0) return {false, "pipe failed"};
    const auto t0 = Clock::now();
    const pid_t pid = fork();
    if (pid == 0) {
        close(fds[0]);
        auto base = synth::guitar_piece(4242, 239.0);
        std::vector<NoteEvent> v(base.begin(), base.end());
        v.push_back({45, 239.5, 240.0, 80});
        const NoteList score(std::move(v));
        SimConfig sim;
        sim.seed = 8;
        const auto act = simulate_activations(score, 240.0, sim, RollConfig{});
        const auto aligned = two_stage_align(score, act, AlignConfig{}, FineConfig{}, RollConfig{});
        const double f1 = evaluate(score, aligned.fine.notes, MatchConfig{50.0}).f_measure;
        char msg[256];
        const int len = std::snprintf(msg, sizeof msg, "%zu %zu %d %.4f", aligned.coarse.score_frames,
                                      aligned.coarse.audio_frames,
                                      is_valid_path(aligned.coarse.path, aligned.coarse.score_frames,
                                                    aligned.coarse.audio_frames) ? 1 : 0, f1);
        if (write(fds[1], msg, static_cast<std::size_t>(len)) != len) _exit(3);
        _exit(0);
    }
    close(fds[1]);
    char buf[256] = {};
    const auto got = read(fds[0], buf, sizeof buf - 1);
    close(fds[0]);
    int status = 0;
    waitpid(pid, &status, 0);
    const double elapsed = seconds_since(t0);
    rusage usage{};
    getrusage(RUSAGE_CHILDREN, &usage);
    const double peak = static_cast<double>(usage.ru_maxrss) * 1024.0;

    std::size_t S = 0, A = 0;
    int valid = 0;
    double f1 = 0.0;
    const bool parsed = got > 0 && std::sscanf(buf, "%zu %zu %d %lf", &S, &A, &valid, &f1) == 4;
    const bool ok = WIFEXITED(status) && WEXITSTATUS(status) == 0 && parsed && S == 24000 && A == 24000 && valid &&
                    elapsed < kLargeBudgetS && peak < kLargeMemoryBytes;
    return {ok, fmt("%zu x %zu frames, band radius %zu, %.1f s, peak RSS %.0f MB, fine F1@50 %.1f%%", S, A,
                    AlignConfig{}.resolve_band(S, A).value_or(0), elapsed, peak / (1024.0 * 1024.0), 100 * f1)};
}

}  // namespace

int main() {
    // Run the memory-bound case first, in its own process, so its peak RSS is measured in isolation.
    report(8, "24000 x 24000 banded alignment under 60 s and 2 GB", large_alignment());
    report(1, "DTW equals exhaustive path enumeration", dtw_oracle());
    report(2, "matching cardinality equals brute force", matching_oracle());
    report(3, "coarse vs fine ordering on warped, jittered synthetic pieces", corpus_accuracy());
    report(4, "perfect recovery without jitter or noise", perfect_recovery());
    report(5, "MIDI write/parse round trip", midi_roundtrip());
    report(6, "evaluation invariants", eval_invariants());
    report(7, "split and window counts", counts());
    std::printf("%s: %d of 8 criteria failed\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
