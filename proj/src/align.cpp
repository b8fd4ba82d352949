#include "amtalign/align.hpp"

#include "amtalign/error.hpp"
#include "amtalign/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <sstream>

namespace amtalign {

std::optional<std::size_t> AlignConfig::resolve_band(std::size_t score_frames, std::size_t audio_frames) const {
    if (band_radius_frames) return band_radius_frames;
    const std::size_t longest = std::max(score_frames, audio_frames);
    if (longest < kAutoBandFrames) return std::nullopt;
    return (longest + 9) / 10;
}

void AlignConfig::validate() const {
    if (!(cost_epsilon > 0.0) || !std::isfinite(cost_epsilon)) throw ConfigError("cost_epsilon must be > 0");
}

// ---------------------------------------------------------------------------
// Band layout

BandLayout::BandLayout(std::size_t cols, std::vector<ColumnRange> ranges)
    : cols_(cols), ranges_(std::move(ranges)) {
    starts_.resize(ranges_.size() + 1, 0);
    for (std::size_t r = 0; r < ranges_.size(); ++r) starts_[r + 1] = starts_[r] + ranges_[r].size();
}

BandLayout BandLayout::dense(std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0) throw ArgumentError("cost matrix must be non-empty");
    return BandLayout(cols, std::vector<ColumnRange>(rows, ColumnRange{0, cols - 1}));
}

BandLayout BandLayout::sakoe_chiba(std::size_t rows, std::size_t cols, std::size_t radius) {
    if (rows == 0 || cols == 0) throw ArgumentError("cost matrix must be non-empty");
    std::vector<ColumnRange> ranges(rows);
    const double slope = rows > 1 ? static_cast<double>(cols - 1) / static_cast<double>(rows - 1) : 0.0;
    const auto r = static_cast<double>(radius);
    for (std::size_t s = 0; s < rows; ++s) {
        const double centre = rows > 1 ? slope * static_cast<double>(s) : 0.0;
        const double lo = std::max(0.0, std::ceil(centre - r - 1e-9));
        const double hi = std::min(static_cast<double>(cols - 1), std::floor(centre + r + 1e-9));
        if (lo > hi) throw ConfigError("band radius " + std::to_string(radius) + " leaves row " + std::to_string(s) +
                                       " empty");
        ranges[s] = {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
    }
    if (rows == 1) ranges[0] = {0, cols - 1};
    ranges.back().hi = cols - 1;
    ranges.front().lo = 0;
    return BandLayout(cols, std::move(ranges));
}

BandLayout BandLayout::intersect(const BandLayout& other) const {
    if (other.rows() != rows() || other.cols() != cols()) throw ConfigError("band shapes differ");
    std::vector<ColumnRange> ranges(rows());
    for (std::size_t s = 0; s < rows(); ++s) {
        std::size_t lo = std::max(ranges_[s].lo, other.ranges_[s].lo);
        std::size_t hi = std::min(ranges_[s].hi, other.ranges_[s].hi);
        if (lo > hi) throw ConfigError("band intersection leaves row " + std::to_string(s) + " empty");
        ranges[s] = {lo, hi};
    }
    return BandLayout(cols_, std::move(ranges));
}

bool BandLayout::is_dense() const noexcept {
    return std::all_of(ranges_.begin(), ranges_.end(),
                       [&](const ColumnRange& r) { return r.lo == 0 && r.hi + 1 == cols_; });
}

CostMatrix::CostMatrix(BandLayout layout) : layout_(std::move(layout)), values_(layout_.cell_count(), 0.0f) {}

CostMatrix CostMatrix::from_dense(const Matrix<double>& dense) {
    CostMatrix m(BandLayout::dense(dense.rows(), dense.cols()));
    for (std::size_t r = 0; r < dense.rows(); ++r) {
        auto src = dense.row(r);
        std::transform(src.begin(), src.end(), m.row(r).begin(), [](double v) { return static_cast<float>(v); });
    }
    return m;
}

// ---------------------------------------------------------------------------
// Cost

CostMatrix cost_matrix(const PianoRoll& roll, const ActivationSet& act, double cost_epsilon) {
    return cost_matrix(roll, act, BandLayout::dense(roll.n_frames(), act.n_frames()), cost_epsilon);
}

CostMatrix cost_matrix(const PianoRoll& roll, const ActivationSet& act, const BandLayout& layout,
                       double cost_epsilon) {
    if (roll.config.fps != act.fps) {
        throw ConfigError("grid mismatch: roll at " + std::to_string(roll.config.fps) + " fps, activations at " +
                          std::to_string(act.fps) + " fps");
    }
    if (roll.config.pitch_offset != act.pitch_offset ||
        static_cast<std::size_t>(roll.config.n_pitches) != act.n_pitches()) {
        throw ConfigError("grid mismatch: roll and activations cover different pitch ranges");
    }
    if (layout.rows() != roll.n_frames() || layout.cols() != act.n_frames()) {
        throw ConfigError("band layout does not match the roll/activation frame counts");
    }
    CostMatrix out(layout);
    kernels::cost_parallel(kernels::score_features(roll), kernels::audio_features(act, roll.config.onset_weight),
                           cost_epsilon, out);
    return out;
}

// ---------------------------------------------------------------------------
// DTW

bool is_valid_path(const AlignmentPath& path, std::size_t rows, std::size_t cols) {
    const auto& st = path.steps;
    if (st.empty() || rows == 0 || cols == 0) return false;
    if (st.front() != PathStep{0, 0} || st.back() != PathStep{rows - 1, cols - 1}) return false;
    for (std::size_t i = 1; i < st.size(); ++i) {
        const auto ds = st[i].score - st[i - 1].score;
        const auto da = st[i].audio - st[i - 1].audio;
        if (st[i].score < st[i - 1].score || st[i].audio < st[i - 1].audio) return false;
        if (ds > 1 || da > 1 || (ds == 0 && da == 0)) return false;
    }
    return true;
}

namespace {

enum Move : std::uint8_t { kDiag = 0, kUp = 1, kLeft = 2 };

class PackedMoves {
public:
    explicit PackedMoves(std::size_t n) : bits_((n + 3) / 4, 0) {}
    void set(std::size_t i, Move m) {
        bits_[i >> 2] = static_cast<std::uint8_t>(bits_[i >> 2] | (m << ((i & 3) * 2)));
    }
    Move get(std::size_t i) const { return static_cast<Move>((bits_[i >> 2] >> ((i & 3) * 2)) & 3); }

private:
    std::vector<std::uint8_t> bits_;
};

}  // namespace

AlignmentPath dtw(const CostMatrix& cost, const AlignConfig& cfg) {
    const std::size_t S = cost.rows();
    const std::size_t A = cost.cols();
    if (S == 0 || A == 0) throw ArgumentError("dtw needs a non-empty cost matrix");
    cfg.validate();

    // An explicit radius always applies; the automatic one only when the
    // matrix does not already carry a band.
    BandLayout layout = cost.layout();
    std::optional<std::size_t> radius = cfg.band_radius_frames;
    if (!radius && layout.is_dense()) radius = cfg.resolve_band(S, A);
    if (radius) layout = layout.intersect(BandLayout::sakoe_chiba(S, A, *radius));

    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> prev(A, kInf);
    std::vector<double> cur(A, kInf);
    PackedMoves moves(layout.cell_count());

    ColumnRange prev_range{0, 0};
    for (std::size_t s = 0; s < S; ++s) {
        const auto range = layout.range(s);
        const auto cost_row = cost.row(s);
        const auto cost_lo = cost.layout().range(s).lo;
        const std::size_t base = layout.row_start(s);
        for (std::size_t a = range.lo; a <= range.hi; ++a) {
            const double c = cost_row[a - cost_lo];
            if (s == 0 && a == 0) {
                cur[a] = c;
                continue;
            }
            const double diag = (s > 0 && a > 0) ? prev[a - 1] : kInf;
            const double up = s > 0 ? prev[a] : kInf;
            const double left = a > range.lo ? cur[a - 1] : kInf;
            Move m;
            double best;
            if (diag <= up && diag <= left) {
                m = kDiag;
                best = diag;
            } else if (up <= left) {
                m = kUp;
                best = up;
            } else {
                m = kLeft;
                best = left;
            }
            cur[a] = best + c;
            moves.set(base + (a - range.lo), m);
        }
        // Retire the row before last and roll buffers.
        if (s > 0) std::fill(prev.begin() + static_cast<std::ptrdiff_t>(prev_range.lo),
                             prev.begin() + static_cast<std::ptrdiff_t>(prev_range.hi + 1), kInf);
        std::swap(prev, cur);
        prev_range = range;
    }

    AlignmentPath path;
    path.total_cost = prev[A - 1];
    if (!std::isfinite(path.total_cost)) throw ConfigError("band admits no monotone path through the cost matrix");

    std::size_t s = S - 1;
    std::size_t a = A - 1;
    path.steps.push_back({s, a});
    while (s > 0 || a > 0) {
        const auto range = layout.range(s);
        switch (moves.get(layout.row_start(s) + (a - range.lo))) {
            case kDiag: --s; --a; break;
            case kUp: --s; break;
            case kLeft: --a; break;
        }
        path.steps.push_back({s, a});
    }
    std::reverse(path.steps.begin(), path.steps.end());
    return path;
}

// ---------------------------------------------------------------------------
// Path diagnostics and time map

std::vector<SingularRun> detect_singular_points(const AlignmentPath& path, std::size_t min_length) {
    std::vector<SingularRun> runs;
    const auto& st = path.steps;
    const std::size_t need = std::max<std::size_t>(min_length, 2);

    auto scan = [&](SingularRun::Kind kind, auto key) {
        std::size_t i = 0;
        while (i < st.size()) {
            std::size_t j = i + 1;
            while (j < st.size() && key(st[j]) == key(st[i])) ++j;
            if (j - i >= need) runs.push_back({kind, i, j - i, st[i], st[j - 1]});
            i = j;
        }
    };
    scan(SingularRun::Kind::score_collapse, [](const PathStep& p) { return p.audio; });
    scan(SingularRun::Kind::audio_collapse, [](const PathStep& p) { return p.score; });
    std::stable_sort(runs.begin(), runs.end(),
                     [](const SingularRun& x, const SingularRun& y) { return x.first_step < y.first_step; });
    return runs;
}

TimeMap::TimeMap(std::vector<TimeKnot> knots) : knots_(std::move(knots)) {
    for (std::size_t i = 1; i < knots_.size(); ++i) {
        if (!(knots_[i].score_time > knots_[i - 1].score_time)) {
            throw ArgumentError("time map score times must strictly increase (knot " + std::to_string(i) + ")");
        }
        if (knots_[i].audio_time < knots_[i - 1].audio_time) {
            throw ArgumentError("time map audio times must not decrease (knot " + std::to_string(i) + ")");
        }
    }
}

bool TimeMap::covers(double score_time) const noexcept {
    return !knots_.empty() && score_time >= knots_.front().score_time && score_time <= knots_.back().score_time;
}

double TimeMap::operator()(double t) const {
    if (knots_.empty()) return t;
    if (t <= knots_.front().score_time) return knots_.front().audio_time;
    if (t >= knots_.back().score_time) return knots_.back().audio_time;
    auto it = std::upper_bound(knots_.begin(), knots_.end(), t,
                               [](double v, const TimeKnot& k) { return v < k.score_time; });
    const auto& hi = *it;
    const auto& lo = *(it - 1);
    const double u = (t - lo.score_time) / (hi.score_time - lo.score_time);
    return lo.audio_time + u * (hi.audio_time - lo.audio_time);
}

std::string TimeMap::to_text() const {
    std::ostringstream out;
    out << std::setprecision(17);
    for (const auto& k : knots_) out << k.score_time << ' ' << k.audio_time << '\n';
    return out.str();
}

TimeMap TimeMap::from_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::vector<TimeKnot> knots;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
        std::istringstream fields(line);
        TimeKnot k{};
        if (!(fields >> k.score_time >> k.audio_time)) {
            throw FormatError("expected two numbers on line " + std::to_string(line_no), std::string("timemap"));
        }
        knots.push_back(k);
    }
    return TimeMap(std::move(knots));
}

TimeMap path_to_timemap(const AlignmentPath& path, int fps) {
    if (fps <= 0) throw ConfigError("fps must be positive");
    const auto& st = path.steps;
    if (st.empty()) return {};
    const double frame = 1.0 / fps;

    std::vector<TimeKnot> knots;
    knots.push_back({0.0, 0.0});
    std::size_t i = 0;
    std::vector<std::size_t> audio;
    while (i < st.size()) {
        audio.clear();
        std::size_t j = i;
        while (j < st.size() && st[j].score == st[i].score) audio.push_back(st[j++].audio);
        // Path audio frames are non-decreasing, so `audio` is already sorted.
        const std::size_t n = audio.size();
        const double median = n % 2 ? static_cast<double>(audio[n / 2])
                                    : 0.5 * static_cast<double>(audio[n / 2 - 1] + audio[n / 2]);
        knots.push_back({(static_cast<double>(st[i].score) + 0.5) * frame, (median + 0.5) * frame});
        i = j;
    }
    knots.push_back({static_cast<double>(st.back().score + 1) * frame, static_cast<double>(st.back().audio + 1) * frame});

    std::vector<TimeKnot> out;
    out.reserve(knots.size());
    double running = 0.0;
    for (auto k : knots) {
        running = std::max(running, k.audio_time);
        k.audio_time = running;
        if (!out.empty() && k.score_time <= out.back().score_time) continue;
        out.push_back(k);
    }
    return TimeMap(std::move(out));
}

WarpResult warp_notes(const NoteList& notes, const TimeMap& map) {
    WarpResult result;
    std::vector<NoteEvent> out;
    out.reserve(notes.size());
    for (const auto& n : notes) {
        if (!map.covers(n.onset) || !map.covers(n.offset)) ++result.clamped;
        NoteEvent w = n;
        w.onset = map(n.onset);
        w.offset = map(n.offset);
        if (w.offset - w.onset < kMinNoteDuration) w.offset = w.onset + kMinNoteDuration;
        out.push_back(w);
    }
    result.notes = NoteList(std::move(out));
    return result;
}

RollConfig grid_of(const ActivationSet& act, double onset_weight) {
    RollConfig cfg;
    cfg.fps = act.fps;
    cfg.pitch_offset = act.pitch_offset;
    cfg.n_pitches = static_cast<int>(act.n_pitches());
    cfg.onset_weight = onset_weight;
    return cfg;
}

CoarseAlignment coarse_align(const NoteList& score, const ActivationSet& act, const AlignConfig& cfg,
                             const RollConfig& roll_cfg) {
    cfg.validate();
    PianoRoll roll = rasterize(score, roll_cfg);
    if (roll.n_frames() == 0 || act.n_frames() == 0) throw ArgumentError("cannot align an empty score or activation set");

    const std::size_t S = roll.n_frames();
    const std::size_t A = act.n_frames();
    BandLayout layout = BandLayout::dense(S, A);
    if (auto radius = cfg.resolve_band(S, A)) layout = BandLayout::sakoe_chiba(S, A, *radius);

    CoarseAlignment out;
    out.score_frames = S;
    out.audio_frames = A;
    {
        CostMatrix cost = cost_matrix(roll, act, layout, cfg.cost_epsilon);
        AlignConfig inner = cfg;
        inner.band_radius_frames.reset();
        out.path = dtw(cost, inner);
    }
    out.map = path_to_timemap(out.path, act.fps);
    auto warped = warp_notes(score, out.map);
    out.notes = std::move(warped.notes);
    out.clamped = warped.clamped;
    return out;
}

}  // namespace amtalign
