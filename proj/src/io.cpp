#include "physflow/io.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace physflow {

namespace {

using namespace std::chrono;

int parse_int(std::string_view text, std::size_t pos, std::size_t len, std::string_view whole) {
    int v = 0;
    const char* first = text.data() + pos;
    const auto [ptr, ec] = std::from_chars(first, first + len, v);
    if (ec != std::errc() || ptr != first + len) {
        throw ValidationError("timestamp", "cannot parse '" + std::string(whole) + "'");
    }
    return v;
}

double parse_double(std::string_view text, const char* field) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
        throw ValidationError(field, "not a number: '" + std::string(text) + "'");
    }
    return v;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

struct Row {
    Timestamp t = 0;
    DetectorRecord record;
    std::size_t line = 0;
};

} // namespace

std::string format_timestamp(Timestamp t) {
    const sys_seconds tp{seconds{t}};
    const auto day = floor<days>(tp);
    const year_month_day ymd{day};
    const hh_mm_ss<seconds> hms{tp - day};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                  static_cast<int>(hms.seconds().count()));
    return buf;
}

Timestamp parse_timestamp(std::string_view text) {
    std::string_view s = text;
    if (!s.empty() && s.back() == 'Z') s.remove_suffix(1);
    if (s.size() != 19 || s[4] != '-' || s[7] != '-' || s[10] != 'T' || s[13] != ':' || s[16] != ':') {
        throw ValidationError("timestamp", "expected YYYY-MM-DDTHH:MM:SSZ, got '" + std::string(text) + "'");
    }
    const int y = parse_int(s, 0, 4, text);
    const int mo = parse_int(s, 5, 2, text);
    const int d = parse_int(s, 8, 2, text);
    const int h = parse_int(s, 11, 2, text);
    const int mi = parse_int(s, 14, 2, text);
    const int sec = parse_int(s, 17, 2, text);
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || sec > 59) {
        throw ValidationError("timestamp", "out-of-range date or time '" + std::string(text) + "'");
    }
    const auto tp = sys_days{ymd} + hours{h} + minutes{mi} + seconds{sec};
    return tp.time_since_epoch().count();
}

std::string format_number(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc()) throw DataError("cannot format number");
    return std::string(buf, ptr);
}

void write_detector_csv(std::ostream& out, std::span<const DetectorSeries> series) {
    out << kDetectorCsvHeader << '\n';
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.records.size(); ++i) {
            const auto& r = s.records[i];
            out << format_timestamp(s.time_at(i)) << ',' << s.station_id << ',' << format_number(r.flow) << ','
                << format_number(r.occupancy) << ',' << format_number(r.speed) << '\n';
        }
    }
    if (!out) throw DataError("failed writing detector CSV");
}

void write_detector_csv(const std::filesystem::path& path, std::span<const DetectorSeries> series) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    write_detector_csv(out, series);
}

IngestResult ingest_detector_csv(std::istream& in, const IngestOptions& options, const std::string& source) {
    if (options.interval <= 0) throw ValidationError("interval", "must be positive");
    auto fail = [&](std::size_t line, const std::string& what) -> DataError {
        return DataError(source + ":" + std::to_string(line) + ": " + what);
    };

    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw fail(1, "empty file, expected header");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kDetectorCsvHeader) throw fail(1, "header must be '" + std::string(kDetectorCsvHeader) + "'");

    std::vector<std::string> order;
    std::map<std::string, std::vector<Row>> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split(line);
        if (f.size() != 5) throw fail(line_no, "expected 5 fields, got " + std::to_string(f.size()));
        Row row;
        row.line = line_no;
        try {
            row.t = parse_timestamp(f[0]);
            row.record.flow = parse_double(f[2], "flow_veh_per_5min");
            row.record.occupancy = parse_double(f[3], "occupancy");
            row.record.speed = parse_double(f[4], "speed_mph");
        } catch (const ValidationError& e) {
            throw fail(line_no, e.what());
        }
        if (f[1].empty()) throw fail(line_no, "empty station_id");
        if (row.record.flow < 0.0) throw fail(line_no, "negative flow");
        if (row.record.speed < 0.0) throw fail(line_no, "negative speed");
        if (row.record.occupancy < 0.0 || row.record.occupancy > 1.0) throw fail(line_no, "occupancy outside [0,1]");
        const std::string id(f[1]);
        auto [it, inserted] = rows.try_emplace(id);
        if (inserted) order.push_back(id);
        it->second.push_back(row);
    }

    IngestResult result;
    for (const auto& id : order) {
        auto& r = rows[id];
        if (!std::is_sorted(r.begin(), r.end(), [](const Row& a, const Row& b) { return a.t < b.t; })) {
            std::stable_sort(r.begin(), r.end(), [](const Row& a, const Row& b) { return a.t < b.t; });
            result.warnings.push_back(source + ": station " + id + ": rows not in time order, re-sorted");
        }
        DetectorSeries s;
        s.station_id = id;
        s.t0 = r.front().t;
        s.dt = options.interval;
        s.records.push_back(r.front().record);
        for (std::size_t i = 1; i < r.size(); ++i) {
            const Timestamp gap = r[i].t - r[i - 1].t;
            if (gap == 0) throw fail(r[i].line, "duplicate timestamp for station " + id);
            if (gap % options.interval != 0) {
                throw fail(r[i].line, "timestamp off the " + std::to_string(options.interval) + " s grid");
            }
            const auto missing = static_cast<std::size_t>(gap / options.interval - 1);
            if (missing > options.max_gap_fill) {
                throw fail(r[i].line, std::to_string(missing) + " consecutive missing intervals before this row "
                                          "for station " + id + " (gap fill allows " +
                                          std::to_string(options.max_gap_fill) + ")");
            }
            if (missing > 0) {
                const auto& a = r[i - 1].record;
                const auto& b = r[i].record;
                for (std::size_t m = 1; m <= missing; ++m) {
                    const double w = static_cast<double>(m) / static_cast<double>(missing + 1);
                    s.records.push_back({a.flow + w * (b.flow - a.flow), a.occupancy + w * (b.occupancy - a.occupancy),
                                         a.speed + w * (b.speed - a.speed)});
                }
                result.warnings.push_back(source + ":" + std::to_string(r[i].line) + ": station " + id + ": filled " +
                                          std::to_string(missing) + " missing interval(s)");
            }
            s.records.push_back(r[i].record);
        }
        result.series.push_back(std::move(s));
    }
    return result;
}

IngestResult ingest_detector_csv(const std::filesystem::path& path, const IngestOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    return ingest_detector_csv(in, options, path.string());
}

} // namespace physflow
