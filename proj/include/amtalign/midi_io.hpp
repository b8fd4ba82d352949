#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace amtalign {

struct NoteEvent {
    int pitch = 60;       // MIDI note number, 0..127
    double onset = 0.0;   // seconds
    double offset = 0.0;  // seconds, > onset
    int velocity = 80;    // 1..127

    double duration() const noexcept { return offset - onset; }
    friend bool operator==(const NoteEvent&, const NoteEvent&) = default;
};

/// Notes kept sorted ascending by (onset, pitch). The sort is stable, so
/// notes with equal keys keep the order they were supplied in.
class NoteList {
public:
    using value_type = NoteEvent;
    using const_iterator = std::vector<NoteEvent>::const_iterator;

    NoteList() = default;
    explicit NoteList(std::vector<NoteEvent> notes);
    NoteList(std::initializer_list<NoteEvent> notes)
        : NoteList(std::vector<NoteEvent>(notes)) {}

    std::size_t size() const noexcept { return notes_.size(); }
    bool empty() const noexcept { return notes_.empty(); }
    const NoteEvent& operator[](std::size_t i) const { return notes_[i]; }
    const_iterator begin() const noexcept { return notes_.begin(); }
    const_iterator end() const noexcept { return notes_.end(); }
    std::span<const NoteEvent> view() const noexcept { return notes_; }

    /// Latest offset, or 0 for an empty list.
    double end_time() const noexcept;

    friend bool operator==(const NoteList&, const NoteList&) = default;

private:
    std::vector<NoteEvent> notes_;
};

/// True when `notes` is ordered by (onset, pitch).
bool is_sorted_by_onset(std::span<const NoteEvent> notes);

struct TempoChange {
    std::uint32_t tick = 0;
    std::uint32_t us_per_quarter = 500000;
    friend bool operator==(const TempoChange&, const TempoChange&) = default;
};

class TempoMap {
public:
    static constexpr std::uint32_t kDefaultTempo = 500000;

    /// `changes` is sorted, deduplicated (last one at a tick wins) and given
    /// a tick-0 entry at the default tempo when missing.
    TempoMap(std::uint16_t division, std::vector<TempoChange> changes);

    std::uint16_t division() const noexcept { return division_; }
    const std::vector<TempoChange>& changes() const noexcept { return changes_; }

    double seconds_at(std::uint64_t tick) const;

private:
    std::uint16_t division_;
    std::vector<TempoChange> changes_;
    std::vector<double> change_seconds_;
};

struct ParsedMidi {
    NoteList notes;
    TempoMap tempo{480, {}};
    /// Set when a note-on had no matching note-off and was closed at the end
    /// of its track.
    bool dangling_notes = false;
    std::vector<std::string> warnings;
};

/// Parses an SMF type 0 or 1 file. All tracks are merged; channel 10 is
/// skipped. Throws FormatError with the failing byte offset.
ParsedMidi parse_midi(std::span<const std::uint8_t> bytes);

/// Single-track type-0 file at 500000 us/quarter. Notes of the same pitch
/// that overlap are spread over separate channels so they re-pair exactly.
std::vector<std::uint8_t> write_midi(const NoteList& notes, std::uint16_t division = 480);

/// Throws RangeError naming the first note whose shifted pitch leaves 0..127.
NoteList transpose_notes(const NoteList& notes, int semitones);

/// Drops every note completely covered by another note of the same pitch.
/// Of two identical notes the earlier-listed one survives.
NoteList remove_overlapping_notes(const NoteList& notes);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes);

inline ParsedMidi read_midi_file(const std::string& path) {
    return parse_midi(read_file_bytes(path));
}

}  // namespace amtalign
