#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include "eqstream/errors.hpp"
#include "eqstream/events.hpp"

namespace eqstream {

enum class EventFormat { text, binary };

inline EventFormat parse_event_format(const std::string& s) {
    if (s == "text") return EventFormat::text;
    if (s == "binary") return EventFormat::binary;
    throw ConfigError("unknown event format '" + s + "' (expected text|binary)");
}

namespace detail {

constexpr char kEventMagic[4] = {'E', 'V', 'S', '1'};
constexpr std::uint16_t kEventVersion = 1;
constexpr std::size_t kRecordBytes = 13;
constexpr const char* kTextHeader = "t_us,x,y,p";

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint16_t get_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline std::uint64_t get_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

}  // namespace detail

inline void write_events_binary(const EventStream& stream, const std::string& path) {
    std::vector<std::uint8_t> buf;
    buf.reserve(16 + detail::kRecordBytes * stream.events.size());
    buf.insert(buf.end(), detail::kEventMagic, detail::kEventMagic + 4);
    detail::put_u16(buf, detail::kEventVersion);
    detail::put_u16(buf, stream.geometry.width);
    detail::put_u16(buf, stream.geometry.height);
    detail::put_u64(buf, stream.events.size());
    for (const Event& e : stream.events) {
        detail::put_u64(buf, e.t);
        detail::put_u16(buf, e.x);
        detail::put_u16(buf, e.y);
        buf.push_back(static_cast<std::uint8_t>(e.p));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size()));
    if (!out) throw ParseError("write failed: " + path);
}

inline EventStream read_events_binary(const std::string& path,
                                      std::optional<SensorGeometry> expected = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open: " + path);
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
    if (buf.size() < 18) {
        throw ParseError(path + ": truncated header at byte offset " +
                         std::to_string(buf.size()));
    }
    if (!std::equal(detail::kEventMagic, detail::kEventMagic + 4, buf.begin())) {
        throw ParseError(path + ": bad magic at byte offset 0");
    }
    const std::uint16_t version = detail::get_u16(buf.data() + 4);
    if (version != detail::kEventVersion) {
        throw ParseError(path + ": unsupported version " + std::to_string(version) +
                         " at byte offset 4");
    }
    EventStream stream;
    stream.geometry.width = detail::get_u16(buf.data() + 6);
    stream.geometry.height = detail::get_u16(buf.data() + 8);
    const std::uint64_t count = detail::get_u64(buf.data() + 10);
    const std::size_t need = 18 + count * detail::kRecordBytes;
    if (buf.size() != need) {
        throw ParseError(path + ": expected " + std::to_string(need) + " bytes, got " +
                         std::to_string(buf.size()));
    }
    if (expected && !(*expected == stream.geometry)) {
        throw ValidationError(path + ": geometry mismatch");
    }
    stream.events.resize(count);
    std::uint64_t prev_t = 0;
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint8_t* rec = buf.data() + 18 + i * detail::kRecordBytes;
        Event& e = stream.events[i];
        e.t = detail::get_u64(rec);
        e.x = detail::get_u16(rec + 8);
        e.y = detail::get_u16(rec + 10);
        e.p = static_cast<std::int8_t>(rec[12]);
        const std::string at = " at byte offset " + std::to_string(18 + i * detail::kRecordBytes);
        if (e.p != 1 && e.p != -1) {
            throw ParseError(path + ": invalid polarity " + std::to_string(int(e.p)) + at);
        }
        if (i > 0 && e.t < prev_t) {
            throw ParseError(path + ": timestamps not sorted" + at);
        }
        if (e.x >= stream.geometry.width || e.y >= stream.geometry.height) {
            throw ValidationError(path + ": event out of geometry bounds" + at);
        }
        prev_t = e.t;
    }
    return stream;
}

inline void write_events_text(const EventStream& stream, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot open for writing: " + path);
    out << detail::kTextHeader << '\n';
    char line[64];
    for (const Event& e : stream.events) {
        std::snprintf(line, sizeof(line), "%llu,%u,%u,%d",
                      static_cast<unsigned long long>(e.t), unsigned(e.x), unsigned(e.y),
                      int(e.p));
        out << line << '\n';
    }
    if (!out) throw ParseError("write failed: " + path);
}

/// Text carries no geometry; it is inferred as (max_x+1, max_y+1) unless
/// an expected geometry is supplied. Binary is the geometry-authoritative
/// format.
inline EventStream read_events_text(const std::string& path,
                                    std::optional<SensorGeometry> expected = {}) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError(path + ": missing '" + detail::kTextHeader + "' header at line 1");
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != detail::kTextHeader) {
        throw ParseError(path + ": missing '" + detail::kTextHeader + "' header at line 1");
    }
    EventStream stream;
    if (expected) stream.geometry = *expected;
    std::uint64_t max_x = 0, max_y = 0;
    std::uint64_t prev_t = 0;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        unsigned long long t;
        unsigned x, y;
        int p;
        char tail;
        const int got = std::sscanf(line.c_str(), "%llu,%u,%u,%d%c", &t, &x, &y, &p, &tail);
        if (got != 4 && !(got == 5 && (tail == '\r'))) {
            throw ParseError(path + ": malformed record at line " + std::to_string(lineno));
        }
        if (p != 1 && p != -1) {
            throw ParseError(path + ": invalid polarity " + std::to_string(p) + " at line " +
                             std::to_string(lineno));
        }
        if (x > 0xffff || y > 0xffff) {
            throw ParseError(path + ": coordinate out of range at line " + std::to_string(lineno));
        }
        if (!stream.events.empty() && t < prev_t) {
            throw ParseError(path + ": timestamps not sorted at line " + std::to_string(lineno));
        }
        Event e;
        e.t = t;
        e.x = static_cast<std::uint16_t>(x);
        e.y = static_cast<std::uint16_t>(y);
        e.p = static_cast<std::int8_t>(p);
        if (expected && (e.x >= expected->width || e.y >= expected->height)) {
            throw ValidationError(path + ": event out of geometry bounds at line " +
                                  std::to_string(lineno));
        }
        if (x > max_x) max_x = x;
        if (y > max_y) max_y = y;
        stream.events.push_back(e);
        prev_t = t;
    }
    if (!expected) {
        stream.geometry.width = stream.events.empty() ? 0 : static_cast<std::uint16_t>(max_x + 1);
        stream.geometry.height = stream.events.empty() ? 0 : static_cast<std::uint16_t>(max_y + 1);
    }
    return stream;
}

inline void write_events(const EventStream& stream, const std::string& path,
                         EventFormat format) {
    if (format == EventFormat::binary) {
        write_events_binary(stream, path);
    } else {
        write_events_text(stream, path);
    }
}

inline EventStream read_events(const std::string& path, EventFormat format,
                               std::optional<SensorGeometry> expected = {}) {
    return format == EventFormat::binary ? read_events_binary(path, expected)
                                         : read_events_text(path, expected);
}

/// Sniffs the EVS1 magic to pick the reader; CLI inputs use this.
inline EventStream read_events_auto(const std::string& path,
                                    std::optional<SensorGeometry> expected = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open: " + path);
    char magic[4] = {0, 0, 0, 0};
    in.read(magic, 4);
    in.close();
    const bool binary = std::equal(detail::kEventMagic, detail::kEventMagic + 4, magic);
    return read_events(path, binary ? EventFormat::binary : EventFormat::text, expected);
}

}  // namespace eqstream
