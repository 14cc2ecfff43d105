#include "hqm/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <string_view>

#include "hqm/error.hpp"

namespace hqm {
namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    fields.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

class CsvReader {
 public:
  CsvReader(const std::filesystem::path& path, std::string_view header, std::size_t columns)
      : source_(path.string()), in_(path, std::ios::binary), columns_(columns) {
    if (!in_) throw ParseError(source_, 0, "cannot open file");
    std::string line;
    if (!next(line)) throw ParseError(source_, 1, "missing header");
    if (line != header) throw ParseError(source_, 1, "expected header '" + std::string(header) + "'");
  }

  /// Next data row split into fields, or false at end of file.
  bool row(std::vector<std::string_view>& fields) {
    if (!next(buffer_)) return false;
    fields = split(buffer_);
    if (fields.size() != columns_)
      fail("expected " + std::to_string(columns_) + " fields, found " + std::to_string(fields.size()));
    return true;
  }

  double number(std::string_view field, const char* name) {
    double value = 0.0;
    const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || end != field.data() + field.size() || !std::isfinite(value))
      fail(std::string("malformed ") + name + " '" + std::string(field) + "'");
    return value;
  }

  double non_negative(std::string_view field, const char* name) {
    const double value = number(field, name);
    if (value < 0.0) fail(std::string("negative ") + name);
    return value;
  }

  long integer(std::string_view field, const char* name) {
    long value = 0;
    const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || end != field.data() + field.size())
      fail(std::string("malformed ") + name + " '" + std::string(field) + "'");
    return value;
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(source_, line_, what); }

 private:
  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++line_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  }

  std::string source_;
  std::ifstream in_;
  std::size_t columns_;
  std::size_t line_ = 0;
  std::string buffer_;
};

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out.flush()) throw Error("failed writing " + path.string());
}

}  // namespace

std::string format_number(double value) {
  if (value == 0.0) return "0";
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw Error("number formatting failed");
  return std::string(buf, end);
}

void write_counts_csv(const ObservationSeries& observed, const DemandSeries& demand, const std::filesystem::path& path) {
  require_aligned(demand, observed);
  std::string text = std::string(kCountsHeader) + "\n";
  for (std::size_t t = 0; t < observed.size(); ++t) {
    const auto tick = t + 1;
    text += std::to_string(tick) + ',' + format_number(static_cast<double>(tick) * demand.tick_seconds) + ',' +
            format_number(observed.m[t]) + ',' + format_number(observed.n[t]) + ',' +
            format_number(demand.inflows[t].a) + ',' + std::to_string(demand.inflows[t].b) + '\n';
  }
  write_text(path, text);
}

CountsTable load_counts_table(const std::filesystem::path& path, std::string* notice, int platoon_size) {
  if (platoon_size < 1) throw ParameterError("platoon size must be >= 1");
  CsvReader csv(path, kCountsHeader, 6);
  CountsTable table;
  table.demand.platoon_size = platoon_size;
  std::vector<std::string_view> f;
  long previous = 0;
  while (csv.row(f)) {
    const long tick = csv.integer(f[0], "tick");
    if (tick <= previous) csv.fail("tick " + std::to_string(tick) + " is not increasing");
    if (tick != previous + 1) csv.fail("missing tick " + std::to_string(previous + 1));
    previous = tick;
    const double seconds = csv.non_negative(f[1], "t_seconds");
    const double dt = seconds / static_cast<double>(tick);
    if (tick == 1) {
      if (!(dt > 0.0)) csv.fail("t_seconds must be positive");
      table.demand.tick_seconds = dt;
    } else if (std::abs(dt - table.demand.tick_seconds) > 1e-9 * table.demand.tick_seconds) {
      csv.fail("t_seconds is not a whole multiple of the tick length");
    }
    table.observed.m.push_back(csv.non_negative(f[2], "m"));
    table.observed.n.push_back(csv.non_negative(f[3], "n"));
    const double a = csv.non_negative(f[4], "a");
    const long b = csv.integer(f[5], "b");
    if (b < 0) csv.fail("negative b");
    if (b % table.demand.platoon_size != 0) csv.fail("b is not a whole number of platoons");
    table.demand.inflows.push_back({a, static_cast<int>(b)});
  }
  if (table.observed.size() == 0 && notice) *notice = path.string() + ": header only, no ticks";
  return table;
}

ObservationSeries load_counts_csv(const std::filesystem::path& path, std::string* notice) {
  return load_counts_table(path, notice).observed;
}

ObservationSeries as_observations(const Trajectory<double>& trajectory) {
  ObservationSeries out;
  out.m.assign(trajectory.m_hat.begin(), trajectory.m_hat.end());
  out.n.assign(trajectory.n_hat.begin(), trajectory.n_hat.end());
  return out;
}

void write_theta_csv(const TrainingHistory& history, const std::filesystem::path& path) {
  std::string text = std::string(kThetaHeader) + "\n";
  for (const auto& e : history.entries) {
    text += std::to_string(e.tick) + ',' + std::to_string(e.theta.traverse_ticks) + ',' +
            format_number(e.theta.priority) + ',' + format_number(e.theta.capacity_vph) + ',' +
            format_number(e.theta.condensation) + ',' + format_number(e.cost) + '\n';
  }
  write_text(path, text);
}

std::vector<ThetaRow> load_theta_csv(const std::filesystem::path& path) {
  CsvReader csv(path, kThetaHeader, 6);
  std::vector<ThetaRow> rows;
  std::vector<std::string_view> f;
  while (csv.row(f)) {
    ThetaRow r;
    const long tick = csv.integer(f[0], "tick");
    if (tick < 1 || (!rows.empty() && static_cast<std::size_t>(tick) <= rows.back().tick))
      csv.fail("tick " + std::to_string(tick) + " is not increasing");
    r.tick = static_cast<std::size_t>(tick);
    const long T = csv.integer(f[1], "T_ticks");
    if (T < 1) csv.fail("T_ticks must be >= 1");
    r.theta.traverse_ticks = static_cast<int>(T);
    r.theta.priority = csv.non_negative(f[2], "rho");
    r.theta.capacity_vph = csv.non_negative(f[3], "F_vph");
    r.theta.condensation = csv.non_negative(f[4], "gamma");
    r.cost = csv.non_negative(f[5], "J");
    rows.push_back(r);
  }
  return rows;
}

void write_sweep_csv(const SweepResult& result, const std::filesystem::path& path) {
  std::string text = std::string(kSweepHeader) + "\n";
  for (const auto& r : result.rows)
    text += format_number(r.delta_s) + ',' + format_number(r.avg_delay_s) + ',' + std::to_string(r.n_vehicles) + '\n';
  write_text(path, text);
}

std::vector<SweepRow> load_sweep_csv(const std::filesystem::path& path) {
  CsvReader csv(path, kSweepHeader, 3);
  std::vector<SweepRow> rows;
  std::vector<std::string_view> f;
  while (csv.row(f)) {
    SweepRow r;
    r.delta_s = csv.non_negative(f[0], "delta_s");
    if (!rows.empty() && !(r.delta_s > rows.back().delta_s)) csv.fail("delta_s is not increasing");
    r.avg_delay_s = csv.number(f[1], "avg_delay_s");
    const long n = csv.integer(f[2], "n_vehicles");
    if (n < 0) csv.fail("negative n_vehicles");
    r.n_vehicles = static_cast<std::size_t>(n);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace hqm
