#include "amtalign/midi_io.hpp"

#include "amtalign/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <optional>

namespace amtalign {

namespace {

bool onset_less(const NoteEvent& a, const NoteEvent& b) {
    if (a.onset != b.onset) return a.onset < b.onset;
    return a.pitch < b.pitch;
}

class ByteReader {
public:
    ByteReader(std::span<const std::uint8_t> bytes, std::size_t begin, std::size_t end)
        : bytes_(bytes), pos_(begin), end_(end) {}

    std::size_t pos() const noexcept { return pos_; }
    bool done() const noexcept { return pos_ >= end_; }

    std::uint8_t u8() {
        need(1);
        return bytes_[pos_++];
    }
    std::uint8_t peek() {
        need(1);
        return bytes_[pos_];
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>((bytes_[pos_] << 8) | bytes_[pos_ + 1]);
        pos_ += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = (v << 8) | bytes_[pos_ + i];
        pos_ += 4;
        return v;
    }
    std::uint32_t varlen() {
        std::size_t start = pos_;
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            std::uint8_t b = u8();
            v = (v << 7) | (b & 0x7F);
            if ((b & 0x80) == 0) return v;
        }
        throw FormatError("variable-length quantity longer than 4 bytes", start);
    }
    void skip(std::size_t n) {
        need(n);
        pos_ += n;
    }
    std::span<const std::uint8_t> take(std::size_t n) {
        need(n);
        auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

private:
    void need(std::size_t n) const {
        if (end_ - pos_ < n || pos_ > end_) throw FormatError("unexpected end of chunk", pos_);
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_;
    std::size_t end_;
};

struct TickNote {
    std::uint64_t on;
    std::uint64_t off;
    int pitch;
    int velocity;
};

struct TrackResult {
    std::vector<TickNote> notes;
    std::vector<TempoChange> tempos;
    std::size_t dangling = 0;
    std::size_t zero_length = 0;
};

constexpr int kPercussionChannel = 9;

TrackResult parse_track(std::span<const std::uint8_t> bytes, std::size_t begin, std::size_t end) {
    ByteReader in(bytes, begin, end);
    TrackResult out;

    struct Sounding {
        std::uint64_t on;
        int velocity;
    };
    std::array<std::array<std::optional<Sounding>, 128>, 16> sounding{};

    auto close = [&](int channel, int pitch, std::uint64_t tick) {
        auto& slot = sounding[channel][pitch];
        if (!slot) return;
        if (tick > slot->on) {
            out.notes.push_back({slot->on, tick, pitch, slot->velocity});
        } else {
            ++out.zero_length;
        }
        slot.reset();
    };

    std::uint64_t tick = 0;
    std::uint8_t running = 0;
    while (!in.done()) {
        tick += in.varlen();
        std::size_t status_pos = in.pos();
        std::uint8_t status = in.peek();
        if (status & 0x80) {
            in.u8();
        } else if (running == 0) {
            throw FormatError("data byte without running status", status_pos);
        } else {
            status = running;
        }

        if (status == 0xFF) {
            running = 0;
            std::uint8_t type = in.u8();
            std::uint32_t len = in.varlen();
            std::size_t data_pos = in.pos();
            auto data = in.take(len);
            if (type == 0x51) {
                if (len != 3) throw FormatError("tempo meta event must have length 3", data_pos);
                std::uint32_t us = (std::uint32_t{data[0]} << 16) | (std::uint32_t{data[1]} << 8) | data[2];
                if (us == 0) throw FormatError("tempo of zero microseconds per quarter", data_pos);
                if (tick > 0xFFFFFFFFu) throw FormatError("tempo change tick overflows", data_pos);
                out.tempos.push_back({static_cast<std::uint32_t>(tick), us});
            } else if (type == 0x2F) {
                break;
            }
            continue;
        }
        if (status == 0xF0 || status == 0xF7) {
            running = 0;
            in.skip(in.varlen());
            continue;
        }
        if (status >= 0xF0) throw FormatError("unsupported system message in track", status_pos);

        running = status;
        const int kind = status & 0xF0;
        const int channel = status & 0x0F;
        const bool two_data = kind != 0xC0 && kind != 0xD0;
        std::size_t data_pos = in.pos();
        std::uint8_t d1 = in.u8();
        std::uint8_t d2 = two_data ? in.u8() : 0;
        if ((d1 | d2) & 0x80) throw FormatError("data byte has high bit set", data_pos);
        if (channel == kPercussionChannel) continue;

        if (kind == 0x90 && d2 > 0) {
            close(channel, d1, tick);
            sounding[channel][d1] = Sounding{tick, d2};
        } else if (kind == 0x80 || kind == 0x90) {
            close(channel, d1, tick);
        }
    }

    for (int c = 0; c < 16; ++c) {
        for (int p = 0; p < 128; ++p) {
            if (sounding[c][p]) {
                ++out.dangling;
                close(c, p, tick);
            }
        }
    }
    return out;
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>((v >> shift) & 0xFF));
}

void put_varlen(std::vector<std::uint8_t>& out, std::uint32_t v) {
    std::array<std::uint8_t, 5> buf{};
    int n = 0;
    buf[n++] = v & 0x7F;
    while (v >>= 7) buf[n++] = static_cast<std::uint8_t>((v & 0x7F) | 0x80);
    while (n > 0) out.push_back(buf[--n]);
}

}  // namespace

NoteList::NoteList(std::vector<NoteEvent> notes) : notes_(std::move(notes)) {
    std::stable_sort(notes_.begin(), notes_.end(), onset_less);
}

double NoteList::end_time() const noexcept {
    double t = 0.0;
    for (const auto& n : notes_) t = std::max(t, n.offset);
    return t;
}

bool is_sorted_by_onset(std::span<const NoteEvent> notes) {
    return std::is_sorted(notes.begin(), notes.end(), onset_less);
}

TempoMap::TempoMap(std::uint16_t division, std::vector<TempoChange> changes) : division_(division) {
    if (division == 0) throw ArgumentError("MIDI division must be positive");
    std::stable_sort(changes.begin(), changes.end(),
                     [](const TempoChange& a, const TempoChange& b) { return a.tick < b.tick; });
    for (const auto& c : changes) {
        if (!changes_.empty() && changes_.back().tick == c.tick) {
            changes_.back() = c;
        } else {
            changes_.push_back(c);
        }
    }
    if (changes_.empty() || changes_.front().tick != 0) {
        changes_.insert(changes_.begin(), TempoChange{0, kDefaultTempo});
    }
    change_seconds_.resize(changes_.size(), 0.0);
    for (std::size_t i = 1; i < changes_.size(); ++i) {
        const auto& prev = changes_[i - 1];
        change_seconds_[i] = change_seconds_[i - 1] + static_cast<double>(changes_[i].tick - prev.tick) *
                                                          prev.us_per_quarter / (1e6 * division_);
    }
}

double TempoMap::seconds_at(std::uint64_t tick) const {
    auto it = std::upper_bound(changes_.begin(), changes_.end(), tick,
                               [](std::uint64_t t, const TempoChange& c) { return t < c.tick; });
    std::size_t i = static_cast<std::size_t>(std::distance(changes_.begin(), it)) - 1;
    return change_seconds_[i] +
           static_cast<double>(tick - changes_[i].tick) * changes_[i].us_per_quarter / (1e6 * division_);
}

ParsedMidi parse_midi(std::span<const std::uint8_t> bytes) {
    ByteReader header(bytes, 0, bytes.size());
    if (bytes.size() < 14) throw FormatError("file too short for an MThd header", bytes.size());
    auto magic = header.take(4);
    if (!std::equal(magic.begin(), magic.end(), "MThd")) throw FormatError("missing MThd magic", 0);
    std::uint32_t header_len = header.u32();
    if (header_len < 6) throw FormatError("MThd length below 6", 4);
    if (header_len > bytes.size() - 8) throw FormatError("MThd length exceeds file size", 4);
    std::uint16_t format = header.u16();
    std::uint16_t n_tracks = header.u16();
    std::uint16_t division = header.u16();
    if (format > 1) throw FormatError("only SMF type 0 and 1 are supported", 8);
    if (format == 0 && n_tracks != 1) throw FormatError("type-0 file must have exactly one track", 10);
    if (division & 0x8000) throw FormatError("SMPTE time division is not supported", 12);
    if (division == 0) throw FormatError("division of zero ticks per quarter", 12);

    std::size_t pos = 8 + header_len;
    std::vector<TickNote> tick_notes;
    std::vector<TempoChange> tempos;
    std::size_t dangling = 0;
    std::size_t zero_length = 0;
    std::size_t tracks_seen = 0;
    while (pos < bytes.size() && tracks_seen < n_tracks) {
        if (bytes.size() - pos < 8) throw FormatError("truncated chunk header", pos);
        ByteReader chunk(bytes, pos, bytes.size());
        auto id = chunk.take(4);
        std::uint32_t len = chunk.u32();
        std::size_t body = pos + 8;
        if (len > bytes.size() - body) throw FormatError("chunk length exceeds file size", pos + 4);
        if (std::equal(id.begin(), id.end(), "MTrk")) {
            TrackResult tr = parse_track(bytes, body, body + len);
            tick_notes.insert(tick_notes.end(), tr.notes.begin(), tr.notes.end());
            tempos.insert(tempos.end(), tr.tempos.begin(), tr.tempos.end());
            dangling += tr.dangling;
            zero_length += tr.zero_length;
            ++tracks_seen;
        }
        pos = body + len;
    }
    if (tracks_seen < n_tracks) throw FormatError("file ends before all declared tracks", pos);

    ParsedMidi result;
    result.tempo = TempoMap(division, std::move(tempos));
    std::vector<NoteEvent> notes;
    notes.reserve(tick_notes.size());
    for (const auto& tn : tick_notes) {
        notes.push_back({tn.pitch, result.tempo.seconds_at(tn.on), result.tempo.seconds_at(tn.off), tn.velocity});
    }
    result.notes = NoteList(std::move(notes));
    result.dangling_notes = dangling > 0;
    if (dangling > 0) {
        result.warnings.push_back(std::to_string(dangling) + " note-on event(s) without note-off closed at track end");
    }
    if (zero_length > 0) {
        result.warnings.push_back(std::to_string(zero_length) + " zero-length note(s) dropped");
    }
    return result;
}

std::vector<std::uint8_t> write_midi(const NoteList& notes, std::uint16_t division) {
    if (division == 0 || division > 0x7FFF) throw ArgumentError("division must be in 1..32767");
    const double ticks_per_second = 1e6 / TempoMap::kDefaultTempo * division;

    struct Event {
        std::uint64_t tick;
        int order;  // note-off sorts before note-on at the same tick
        int channel;
        int pitch;
        int velocity;
    };
    std::vector<Event> events;
    events.reserve(notes.size() * 2);

    // last_off[pitch][channel]: tick after which the channel is free for that pitch
    std::vector<std::array<std::uint64_t, 16>> last_off(128);
    for (auto& a : last_off) a.fill(0);

    for (const auto& n : notes) {
        if (n.pitch < 0 || n.pitch > 127) throw RangeError("pitch " + std::to_string(n.pitch) + " outside 0..127");
        auto on = static_cast<std::uint64_t>(std::llround(std::max(0.0, n.onset) * ticks_per_second));
        auto off = static_cast<std::uint64_t>(std::llround(std::max(0.0, n.offset) * ticks_per_second));
        off = std::max(off, on + 1);
        int channel = 0;
        for (int c = 0; c < 16; ++c) {
            if (c == kPercussionChannel) continue;
            if (last_off[n.pitch][c] <= on) {
                channel = c;
                break;
            }
        }
        last_off[n.pitch][channel] = std::max(last_off[n.pitch][channel], off);
        int vel = std::clamp(n.velocity, 1, 127);
        events.push_back({on, 1, channel, n.pitch, vel});
        events.push_back({off, 0, channel, n.pitch, 0});
    }
    std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
        if (a.tick != b.tick) return a.tick < b.tick;
        return a.order < b.order;
    });

    std::vector<std::uint8_t> track;
    track.reserve(events.size() * 5 + 16);
    put_varlen(track, 0);
    track.insert(track.end(), {0xFF, 0x51, 0x03});
    track.push_back((TempoMap::kDefaultTempo >> 16) & 0xFF);
    track.push_back((TempoMap::kDefaultTempo >> 8) & 0xFF);
    track.push_back(TempoMap::kDefaultTempo & 0xFF);

    std::uint64_t prev = 0;
    for (const auto& e : events) {
        put_varlen(track, static_cast<std::uint32_t>(e.tick - prev));
        prev = e.tick;
        if (e.order == 1) {
            track.push_back(static_cast<std::uint8_t>(0x90 | e.channel));
            track.push_back(static_cast<std::uint8_t>(e.pitch));
            track.push_back(static_cast<std::uint8_t>(e.velocity));
        } else {
            track.push_back(static_cast<std::uint8_t>(0x80 | e.channel));
            track.push_back(static_cast<std::uint8_t>(e.pitch));
            track.push_back(64);
        }
    }
    put_varlen(track, 0);
    track.insert(track.end(), {0xFF, 0x2F, 0x00});

    std::vector<std::uint8_t> out;
    out.reserve(track.size() + 22);
    out.insert(out.end(), {'M', 'T', 'h', 'd'});
    put_u32(out, 6);
    put_u16(out, 0);
    put_u16(out, 1);
    put_u16(out, division);
    out.insert(out.end(), {'M', 'T', 'r', 'k'});
    put_u32(out, static_cast<std::uint32_t>(track.size()));
    out.insert(out.end(), track.begin(), track.end());
    return out;
}

NoteList transpose_notes(const NoteList& notes, int semitones) {
    std::vector<NoteEvent> out(notes.begin(), notes.end());
    for (std::size_t i = 0; i < out.size(); ++i) {
        int p = out[i].pitch + semitones;
        if (p < 0 || p > 127) {
            throw RangeError("transposing note " + std::to_string(i) + " (pitch " + std::to_string(out[i].pitch) +
                             " at " + std::to_string(out[i].onset) + " s) by " + std::to_string(semitones) +
                             " leaves the MIDI range");
        }
        out[i].pitch = p;
    }
    return NoteList(std::move(out));
}

NoteList remove_overlapping_notes(const NoteList& notes) {
    // Within a pitch, order by onset ascending, offset descending, list index
    // ascending. A note is covered iff some earlier note in that order reaches
    // at least as far.
    std::vector<std::size_t> order(notes.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& x = notes[a];
        const auto& y = notes[b];
        if (x.pitch != y.pitch) return x.pitch < y.pitch;
        if (x.onset != y.onset) return x.onset < y.onset;
        if (x.offset != y.offset) return x.offset > y.offset;
        return a < b;
    });

    std::vector<bool> keep(notes.size(), true);
    int pitch = -1;
    double reach = 0.0;
    for (std::size_t idx : order) {
        const auto& n = notes[idx];
        if (n.pitch != pitch) {
            pitch = n.pitch;
            reach = n.offset;
            continue;
        }
        if (reach >= n.offset) {
            keep[idx] = false;
        } else {
            reach = n.offset;
        }
    }

    std::vector<NoteEvent> out;
    out.reserve(notes.size());
    for (std::size_t i = 0; i < notes.size(); ++i) {
        if (keep[i]) out.push_back(notes[i]);
    }
    return NoteList(std::move(out));
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("error while reading '" + path + "'");
    return bytes;
}

void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("error while writing '" + path + "'");
}

}  // namespace amtalign
