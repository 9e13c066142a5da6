#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mgs::core {

struct TraceRow {
  int64_t ts = 0;  // unix seconds
  double pv_kw = 0.0;
  double wt_kw = 0.0;
  double load_kw = 0.0;
};

// Hourly (or dt-spaced) exogenous series of available PV/wind power and total
// active load.
struct ExogenousTrace {
  std::vector<TraceRow> rows;
  double dt_hours = 1.0;

  size_t size() const { return rows.size(); }
  const TraceRow& row(size_t i) const { return rows[i]; }
  // Row access clamped to the valid range; used for history padding and the
  // terminal-state read.
  const TraceRow& row_clamped(long i) const;
  // Hour of day of row i, derived from its timestamp.
  double hour_of(size_t i) const;
  int days() const { return static_cast<int>(rows.size() * dt_hours / 24.0); }

  void validate() const;  // throws IngestError
};

// Reads a CSV trace: header line, then rows "timestamp,pv_kw,wt_kw,load_kw"
// with ISO-8601 timestamps. Rejects negative powers, non-monotone or
// irregular timestamps.
ExogenousTrace load_traces(const std::string& path, double dt_hours);

void save_traces(const ExogenousTrace& trace, const std::string& path);

int64_t parse_iso8601(const std::string& s);        // throws IngestError
std::string format_iso8601(int64_t unix_seconds);

}  // namespace mgs::core
