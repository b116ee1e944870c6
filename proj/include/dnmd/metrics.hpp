#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dnmd {

/// Shortest decimal form that round-trips the exact double.
inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) throw std::runtime_error("format_double failed");
  return std::string(buf.data(), ptr);
}

struct MetricsRow {
  std::string run_id;
  std::uint64_t seed = 0;
  std::string mode;
  double p = 0.0;
  std::string env;
  std::int64_t step = 0;
  std::int64_t episodes_done = 0;
  double mean_return = 0.0;
  double catches = 0.0;
  double loss = 0.0;
  double eps = 0.0;
  double wallclock_s = 0.0;  // written as 0 so identical runs stay byte-identical
};

inline constexpr const char* kMetricsHeader =
    "run_id,seed,mode,p,env,step,episodes_done,mean_return,catches,loss,eps,wallclock_s";

/// CSV emitter: header first, one row per append, stable formatting.
class MetricsWriter {
 public:
  explicit MetricsWriter(std::ostream& out) : out_(out) { out_ << kMetricsHeader << '\n'; }

  void append(const MetricsRow& r) {
    out_ << r.run_id << ',' << r.seed << ',' << r.mode << ',' << format_double(r.p) << ','
         << r.env << ',' << r.step << ',' << r.episodes_done << ','
         << format_double(r.mean_return) << ',' << format_double(r.catches) << ','
         << format_double(r.loss) << ',' << format_double(r.eps) << ','
         << format_double(r.wallclock_s) << '\n';
  }

 private:
  std::ostream& out_;
};

/// Parses a metrics CSV produced by MetricsWriter (no quoting; fields never
/// contain commas).
inline std::vector<MetricsRow> read_metrics(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("metrics: empty stream");
  if (line != kMetricsHeader) throw std::runtime_error("metrics: bad header: " + line);

  const auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
      const auto pos = s.find(',', start);
      if (pos == std::string::npos) {
        out.push_back(s.substr(start));
        break;
      }
      out.push_back(s.substr(start, pos - start));
      start = pos + 1;
    }
    return out;
  };
  const auto to_d = [](const std::string& s) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
      throw std::runtime_error("metrics: bad number: " + s);
    return v;
  };

  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split(line);
    if (f.size() != 12) throw std::runtime_error("metrics: bad row: " + line);
    MetricsRow r;
    r.run_id = f[0];
    r.seed = static_cast<std::uint64_t>(std::stoull(f[1]));
    r.mode = f[2];
    r.p = to_d(f[3]);
    r.env = f[4];
    r.step = static_cast<std::int64_t>(std::stoll(f[5]));
    r.episodes_done = static_cast<std::int64_t>(std::stoll(f[6]));
    r.mean_return = to_d(f[7]);
    r.catches = to_d(f[8]);
    r.loss = to_d(f[9]);
    r.eps = to_d(f[10]);
    r.wallclock_s = to_d(f[11]);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace dnmd
