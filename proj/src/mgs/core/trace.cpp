#include "mgs/core/trace.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mgs/core/types.hpp"

namespace mgs::core {

namespace {

bool is_leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

const int kDaysPerMonth[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};

int64_t days_from_civil(int y, int m, int d) {
  // days since 1970-01-01
  int64_t days = 0;
  for (int yy = 1970; yy < y; ++yy) days += is_leap(yy) ? 366 : 365;
  for (int mm = 1; mm < m; ++mm) {
    days += kDaysPerMonth[mm - 1];
    if (mm == 2 && is_leap(y)) days += 1;
  }
  return days + (d - 1);
}

}  // namespace

int64_t parse_iso8601(const std::string& s) {
  int y, mo, d, h, mi, se;
  if (std::sscanf(s.c_str(), "%d-%d-%dT%d:%d:%d", &y, &mo, &d, &h, &mi, &se) != 6)
    throw IngestError("bad timestamp '" + s + "' (expected YYYY-MM-DDTHH:MM:SS)");
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 || mi < 0 || mi > 59 ||
      se < 0 || se > 60)
    throw IngestError("timestamp field out of range in '" + s + "'");
  return days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + se;
}

std::string format_iso8601(int64_t unix_seconds) {
  int64_t days = unix_seconds / 86400;
  int64_t rem = unix_seconds % 86400;
  if (rem < 0) {
    rem += 86400;
    days -= 1;
  }
  int y = 1970;
  while (true) {
    int64_t in_year = is_leap(y) ? 366 : 365;
    if (days < in_year) break;
    days -= in_year;
    ++y;
  }
  int m = 1;
  while (true) {
    int dim = kDaysPerMonth[m - 1] + ((m == 2 && is_leap(y)) ? 1 : 0);
    if (days < dim) break;
    days -= dim;
    ++m;
  }
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d", y, m,
                static_cast<int>(days) + 1, static_cast<int>(rem / 3600),
                static_cast<int>((rem % 3600) / 60), static_cast<int>(rem % 60));
  return buf;
}

const TraceRow& ExogenousTrace::row_clamped(long i) const {
  if (i < 0) i = 0;
  if (i >= static_cast<long>(rows.size())) i = static_cast<long>(rows.size()) - 1;
  return rows[static_cast<size_t>(i)];
}

double ExogenousTrace::hour_of(size_t i) const {
  return static_cast<double>((rows[i].ts % 86400 + 86400) % 86400) / 3600.0;
}

void ExogenousTrace::validate() const {
  if (rows.empty()) throw IngestError("trace is empty");
  if (dt_hours <= 0.0) throw IngestError("dt must be positive");
  const int64_t step = static_cast<int64_t>(std::llround(dt_hours * 3600.0));
  for (size_t i = 0; i < rows.size(); ++i) {
    const TraceRow& r = rows[i];
    if (r.pv_kw < 0.0 || r.wt_kw < 0.0 || r.load_kw < 0.0)
      throw IngestError("negative power at row " + std::to_string(i));
    if (i > 0) {
      int64_t gap = r.ts - rows[i - 1].ts;
      if (gap <= 0)
        throw IngestError("non-monotone timestamps at row " + std::to_string(i));
      if (gap != step)
        throw IngestError("timestamp gap at row " + std::to_string(i) + " (" +
                          std::to_string(gap) + " s, expected " +
                          std::to_string(step) + " s)");
    }
  }
}

ExogenousTrace load_traces(const std::string& path, double dt_hours) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open '" + path + "'");
  ExogenousTrace trace;
  trace.dt_hours = dt_hours;
  std::string line;
  bool first = true;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (first) {  // header
      first = false;
      continue;
    }
    std::stringstream ss(line);
    std::string ts, pv, wt, load;
    if (!std::getline(ss, ts, ',') || !std::getline(ss, pv, ',') ||
        !std::getline(ss, wt, ',') || !std::getline(ss, load, ','))
      throw IngestError("line " + std::to_string(lineno) + ": expected 4 fields");
    TraceRow row;
    row.ts = parse_iso8601(ts);
    try {
      row.pv_kw = std::stod(pv);
      row.wt_kw = std::stod(wt);
      row.load_kw = std::stod(load);
    } catch (const std::exception&) {
      throw IngestError("line " + std::to_string(lineno) + ": unparsable number");
    }
    trace.rows.push_back(row);
  }
  trace.validate();
  return trace;
}

void save_traces(const ExogenousTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IngestError("cannot write '" + path + "'");
  out << "timestamp,pv_kw,wt_kw,load_kw\n";
  char buf[160];
  for (const TraceRow& r : trace.rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g\n",
                  format_iso8601(r.ts).c_str(), r.pv_kw, r.wt_kw, r.load_kw);
    out << buf;
  }
}

}  // namespace mgs::core
