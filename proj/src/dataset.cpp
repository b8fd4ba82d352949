#include "amtalign/dataset.hpp"

#include "amtalign/error.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace amtalign {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    if (line.find('\t') != std::string::npos) {
        std::istringstream in(line);
        std::string f;
        while (std::getline(in, f, '\t')) fields.push_back(f);
    } else {
        std::istringstream in(line);
        std::string f;
        while (in >> f) fields.push_back(f);
    }
    for (auto& f : fields) {
        const auto b = f.find_first_not_of(" \r");
        const auto e = f.find_last_not_of(" \r");
        f = b == std::string::npos ? std::string{} : f.substr(b, e - b + 1);
    }
    return fields;
}

std::string resolve(const std::string& path, const std::string& base_dir) {
    if (base_dir.empty() || fs::path(path).is_absolute()) return path;
    return (fs::path(base_dir) / path).lexically_normal().string();
}

std::multiset<int> pitch_multiset(const NoteList& notes) {
    std::multiset<int> s;
    for (const auto& n : notes) s.insert(n.pitch);
    return s;
}

}  // namespace

void Corpus::validate() const {
    std::set<std::string> seen;
    for (const auto& p : pieces) {
        if (p.id.empty()) throw ArgumentError("corpus piece with empty id");
        if (!seen.insert(p.id).second) throw ArgumentError("duplicate piece id '" + p.id + "'");
    }
}

std::vector<std::string> Corpus::ids() const {
    std::vector<std::string> out;
    out.reserve(pieces.size());
    for (const auto& p : pieces) out.push_back(p.id);
    return out;
}

Corpus parse_manifest(const std::string& text, const std::string& base_dir) {
    Corpus corpus;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (line[line.find_first_not_of(" \t")] == '#') continue;
        auto fields = split_fields(line);
        if (corpus.pieces.empty() && !fields.empty() && fields[0] == "id") continue;
        if (fields.size() < 4 || fields.size() > 5) {
            throw FormatError("manifest line " + std::to_string(line_no) + " needs 4 or 5 fields, found " +
                                  std::to_string(fields.size()),
                              std::string("manifest"));
        }
        ManifestEntry e;
        e.id = fields[0];
        e.score_path = resolve(fields[1], base_dir);
        e.activation_path = resolve(fields[2], base_dir);
        try {
            std::size_t used = 0;
            e.duration = std::stod(fields[3], &used);
            if (used != fields[3].size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw FormatError("manifest line " + std::to_string(line_no) + ": bad duration '" + fields[3] + "'",
                              std::string("duration"));
        }
        if (!(e.duration > 0.0) || !std::isfinite(e.duration)) {
            throw FormatError("manifest line " + std::to_string(line_no) + ": duration must be positive",
                              std::string("duration"));
        }
        if (fields.size() == 5 && !fields[4].empty() && fields[4] != "-") e.truth_path = resolve(fields[4], base_dir);
        corpus.pieces.push_back(std::move(e));
    }
    corpus.validate();
    return corpus;
}

Corpus read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_manifest(buf.str(), fs::path(path).parent_path().string());
}

std::string format_manifest(const Corpus& corpus) {
    std::ostringstream out;
    out << std::setprecision(17);
    out << "id\tscore\tactivations\tduration\ttruth\n";
    for (const auto& p : corpus.pieces) {
        out << p.id << '\t' << p.score_path << '\t' << p.activation_path << '\t' << p.duration << '\t'
            << p.truth_path.value_or("-") << '\n';
    }
    return out.str();
}

void SplitSpec::validate() const {
    if (!(train > 0.0 && valid > 0.0 && test > 0.0)) throw ConfigError("split ratios must be positive");
    if (std::abs(train + valid + test - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
}

Split split_pieces(const Corpus& corpus, const SplitSpec& spec) {
    corpus.validate();
    return split_pieces(corpus.ids(), spec);
}

Split split_pieces(std::vector<std::string> ids, const SplitSpec& spec) {
    spec.validate();
    if (ids.size() < 3) throw ArgumentError("splitting needs at least 3 pieces, got " + std::to_string(ids.size()));
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw ArgumentError("duplicate piece ids");

    const auto n = static_cast<double>(ids.size());
    const auto n_valid = static_cast<std::size_t>(std::llround(n * spec.valid));
    const auto n_test = static_cast<std::size_t>(std::llround(n * spec.test));
    if (n_valid + n_test > ids.size()) throw ArgumentError("split ratios leave no room for training pieces");

    std::mt19937_64 rng(spec.seed);
    std::shuffle(ids.begin(), ids.end(), rng);

    Split out;
    const auto test_end = ids.begin() + static_cast<std::ptrdiff_t>(n_test);
    const auto valid_end = test_end + static_cast<std::ptrdiff_t>(n_valid);
    out.test.assign(ids.begin(), test_end);
    out.valid.assign(test_end, valid_end);
    out.train.assign(valid_end, ids.end());
    for (auto* v : {&out.train, &out.valid, &out.test}) std::sort(v->begin(), v->end());
    return out;
}

void WindowSpec::validate() const {
    if (!(hop_s > 0.0) || !(hop_s <= length_s) || !std::isfinite(length_s)) {
        throw ConfigError("window spec needs 0 < hop_s <= length_s");
    }
}

std::vector<NoteWindow> window_notes(const NoteList& notes, double duration, const WindowSpec& spec) {
    spec.validate();
    std::vector<NoteWindow> windows;
    for (std::size_t k = 0;; ++k) {
        const double start = static_cast<double>(k) * spec.hop_s;
        if (!(start < duration)) break;
        const double end = start + spec.length_s;
        auto first = std::lower_bound(notes.begin(), notes.end(), start,
                                      [](const NoteEvent& n, double t) { return n.onset < t; });
        std::vector<NoteEvent> inside;
        for (auto it = first; it != notes.end() && it->onset < end; ++it) {
            NoteEvent n = *it;
            n.onset -= start;
            n.offset = std::min(n.offset, end) - start;
            inside.push_back(n);
        }
        windows.push_back({start, NoteList(std::move(inside))});
    }
    return windows;
}

RoundTripResult roundtrip_validate(const NoteList& score, const NoteList& aligned_truth, const SimConfig& sim_cfg,
                                   const AlignConfig& align_cfg, const FineConfig& fine_cfg,
                                   const RollConfig& roll_cfg, const std::vector<double>& tolerances_ms) {
    if (pitch_multiset(score) != pitch_multiset(aligned_truth)) {
        throw ArgumentError("score and aligned truth must contain the same pitch multiset");
    }
    Simulation sim = simulate(aligned_truth, aligned_truth.end_time(), sim_cfg, roll_cfg);

    RoundTripResult result;
    result.performed_truth = sim.performed_truth(aligned_truth);
    result.alignment = two_stage_align(score, sim.activations, align_cfg, fine_cfg, roll_cfg);
    for (double tol : tolerances_ms) {
        MatchConfig mc{tol};
        result.rows.push_back({tol, evaluate(result.performed_truth, result.alignment.coarse.notes, mc),
                               evaluate(result.performed_truth, result.alignment.fine.notes, mc)});
    }
    return result;
}

std::vector<PieceValidation> validate_corpus(const std::vector<RoundTripCase>& cases, const SimConfig& sim_cfg,
                                             const AlignConfig& align_cfg, const FineConfig& fine_cfg,
                                             const RollConfig& roll_cfg, const std::vector<double>& tolerances_ms,
                                             int jobs) {
    std::vector<PieceValidation> out(cases.size());
    std::vector<std::string> errors(cases.size());
    const auto n = static_cast<std::int64_t>(cases.size());
#pragma omp parallel for schedule(dynamic, 1) num_threads(std::max(1, jobs)) if (jobs > 1)
    for (std::int64_t i = 0; i < n; ++i) {
        const auto& c = cases[static_cast<std::size_t>(i)];
        try {
            SimConfig cfg = sim_cfg;
            cfg.seed = c.seed;
            auto rt = roundtrip_validate(c.score, c.aligned_truth, cfg, align_cfg, fine_cfg, roll_cfg, tolerances_ms);
            out[static_cast<std::size_t>(i)] = {c.id, std::move(rt.rows)};
        } catch (const std::exception& e) {
            errors[static_cast<std::size_t>(i)] = c.id + ": " + e.what();
        }
    }
    for (const auto& e : errors) {
        if (!e.empty()) throw ArgumentError(e);
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const PieceValidation& a, const PieceValidation& b) { return a.id < b.id; });
    return out;
}

std::vector<ValidationTableRow> summarize(const std::vector<PieceValidation>& pieces) {
    std::map<double, std::pair<std::vector<EvalReport>, std::vector<EvalReport>>> by_tol;
    std::vector<double> order;
    for (const auto& p : pieces) {
        for (const auto& row : p.rows) {
            auto [it, inserted] = by_tol.try_emplace(row.tolerance_ms);
            if (inserted) order.push_back(row.tolerance_ms);
            it->second.first.push_back(row.coarse);
            it->second.second.push_back(row.fine);
        }
    }
    std::vector<ValidationTableRow> rows;
    for (double tol : order) {
        const auto& [coarse, fine] = by_tol.at(tol);
        rows.push_back({tol, aggregate(coarse), aggregate(fine)});
    }
    return rows;
}

std::string format_validation_table(const std::vector<ValidationTableRow>& rows) {
    std::ostringstream out;
    auto tol_label = [](double tol) {
        std::ostringstream s;
        s << tol << "ms";
        return s.str();
    };
    auto section = [&](const char* title, auto pick) {
        out << title << '\n';
        out << std::left << std::setw(11) << "Threshold" << "| " << std::setw(19) << "Coarse (DTW-only)" << "| Fine\n";
        for (const auto& r : rows) {
            out << std::left << std::setw(11) << tol_label(r.tolerance_ms) << "| " << std::setw(19)
                << (format_percent(pick(r.coarse).f_measure) + "%") << "| " << format_percent(pick(r.fine).f_measure)
                << "%\n";
        }
    };
    const std::size_t pieces = rows.empty() ? 0 : rows.front().fine.pieces;
    out << "Onset-only F1 over " << pieces << " piece(s)\n\n";
    section("Pooled (micro-average)", [](const CorpusAggregate& a) { return a.pooled; });
    out << '\n';
    section("Mean per piece", [](const CorpusAggregate& a) { return a.mean_per_piece; });
    return out.str();
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace amtalign
