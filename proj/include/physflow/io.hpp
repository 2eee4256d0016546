#ifndef PHYSFLOW_IO_HPP
#define PHYSFLOW_IO_HPP

#include "physflow/core.hpp"

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace physflow {

/// Exact header line of the detector CSV format.
inline constexpr std::string_view kDetectorCsvHeader = "timestamp,station_id,flow_veh_per_5min,occupancy,speed_mph";

/// "YYYY-MM-DDTHH:MM:SSZ" for seconds since the Unix epoch.
std::string format_timestamp(Timestamp t);
/// Accepts "YYYY-MM-DDTHH:MM:SS" with an optional trailing "Z"; always UTC.
Timestamp parse_timestamp(std::string_view text);

/// Shortest decimal text that reads back to the same double.
std::string format_number(double v);

/// Writes all series, station by station in the given order, LF line endings.
void write_detector_csv(std::ostream& out, std::span<const DetectorSeries> series);
void write_detector_csv(const std::filesystem::path& path, std::span<const DetectorSeries> series);

struct IngestOptions {
    int interval = kIntervalSeconds; // expected record spacing, s
    std::size_t max_gap_fill = 2;    // longest run of missing intervals filled linearly; 0 rejects any gap
};

struct IngestResult {
    std::vector<DetectorSeries> series; // in order of first appearance
    std::vector<std::string> warnings;
};

/**
 * Parses the detector CSV format. Rows may come in any order; out-of-order
 * stations are re-sorted with a warning. Gaps up to `max_gap_fill`
 * intervals are filled by linear interpolation (with a warning), longer gaps
 * and malformed rows are errors naming the line.
 */
IngestResult ingest_detector_csv(std::istream& in, const IngestOptions& options = {},
                                 const std::string& source = "<stream>");
IngestResult ingest_detector_csv(const std::filesystem::path& path, const IngestOptions& options = {});

} // namespace physflow

#endif
