#include "parity/panel.hpp"

#include "parity/csv.hpp"
#include "parity/error.hpp"
#include "parity/log.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace parity {

namespace csv {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    std::size_t next = line.find(sep, pos);
    if (next == std::string_view::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, next - pos));
    pos = next + 1;
  }
}

std::string format(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view text, double& out) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return false;
  auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc() && res.ptr == text.data() + text.size() && std::isfinite(out);
}

bool parse_int(std::string_view text, long long& out) {
  text = trim(text);
  if (text.empty()) return false;
  auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

}  // namespace csv

Date parse_date(std::string_view text) {
  text = csv::trim(text);
  long long y = 0, m = 0, d = 0;
  if (text.size() != 10 || text[4] != '-' || text[7] != '-' || !csv::parse_int(text.substr(0, 4), y) ||
      !csv::parse_int(text.substr(5, 2), m) || !csv::parse_int(text.substr(8, 2), d)) {
    throw Error(ErrorKind::Parse, "invalid date '" + std::string(text) + "' (expected YYYY-MM-DD)");
  }
  std::chrono::year_month_day ymd{std::chrono::year{static_cast<int>(y)},
                                  std::chrono::month{static_cast<unsigned>(m)},
                                  std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw Error(ErrorKind::Parse, "invalid calendar date '" + std::string(text) + "'");
  return Date{ymd};
}

std::string format_date(Date date) {
  std::chrono::year_month_day ymd{date};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string_view group_name(Group g) noexcept {
  constexpr std::array<std::string_view, kGroupCount> names = {"Asian", "Black", "Hispanic", "White"};
  return names[static_cast<std::size_t>(g)];
}

std::string_view group_column(Group g) noexcept {
  constexpr std::array<std::string_view, kGroupCount> names = {"asian", "black", "hispanic", "white"};
  return names[static_cast<std::size_t>(g)];
}

std::optional<Group> parse_group(std::string_view name) noexcept {
  for (Group g : kGroups) {
    if (name == group_name(g) || name == group_column(g)) return g;
  }
  return std::nullopt;
}

Group dominant_group(const DemoFractions& fractions) noexcept {
  std::size_t best = 0;
  for (std::size_t g = 1; g < kGroupCount; ++g) {
    if (fractions[g] > fractions[best]) best = g;
  }
  return kGroups[best];
}

void validate(const UnitRecord& unit) {
  if (unit.population < 1) {
    throw Error(ErrorKind::Range, "unit '" + unit.unit_id + "': population must be >= 1");
  }
  double sum = 0.0;
  for (Group g : kGroups) {
    double f = unit.demo_fractions[static_cast<std::size_t>(g)];
    if (!(f >= 0.0 && f <= 1.0)) {
      throw Error(ErrorKind::Range, "unit '" + unit.unit_id + "': frac_" + std::string(group_column(g)) +
                                        " = " + csv::format(f) + " outside [0,1]");
    }
    sum += f;
  }
  if (sum > 1.0 + 1e-6) {
    throw Error(ErrorKind::Range,
                "unit '" + unit.unit_id + "': demographic fractions sum to " + csv::format(sum) + " > 1");
  }
}

std::optional<std::size_t> GroupedPanel::find(std::string_view unit_id) const {
  for (std::size_t i = 0; i < units.size(); ++i) {
    if (units[i].unit_id == unit_id) return i;
  }
  return std::nullopt;
}

std::vector<double> rolling_average(std::span<const double> raw, std::size_t window) {
  if (raw.empty()) throw Error(ErrorKind::EmptyInput, "rolling_average: empty input");
  if (window == 0) throw Error(ErrorKind::Domain, "rolling_average: window must be >= 1");
  std::vector<double> out(raw.size());
  for (std::size_t t = 0; t < raw.size(); ++t) {
    std::size_t lo = t + 1 >= window ? t + 1 - window : 0;
    double sum = 0.0;
    for (std::size_t i = lo; i <= t; ++i) sum += raw[i];
    out[t] = sum / static_cast<double>(t - lo + 1);
  }
  return out;
}

namespace {

struct CsvReader {
  std::filesystem::path path;
  std::ifstream in;
  std::size_t line_no = 0;

  explicit CsvReader(const std::filesystem::path& p) : path(p), in(p) {
    if (!in) throw Error(ErrorKind::Io, "cannot open " + p.string());
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorKind::Parse, path.string() + ":" + std::to_string(line_no) + ": " + what);
  }

  void expect_header(std::string_view expected) {
    std::string line;
    if (!std::getline(in, line)) {
      line_no = 1;
      fail("missing header");
    }
    line_no = 1;
    if (csv::trim(line) != expected) fail("expected header '" + std::string(expected) + "'");
  }

  // Returns false at end of file; skips blank lines.
  bool next(std::vector<std::string_view>& fields, std::string& storage, std::size_t columns) {
    while (std::getline(in, storage)) {
      ++line_no;
      if (csv::trim(storage).empty()) continue;
      fields = csv::split(csv::trim(storage));
      if (fields.size() != columns) {
        fail("expected " + std::to_string(columns) + " columns, got " + std::to_string(fields.size()));
      }
      for (auto& f : fields) f = csv::trim(f);
      return true;
    }
    return false;
  }

  double number(std::string_view text, std::string_view column) const {
    double v = 0.0;
    if (!csv::parse_double(text, v)) fail("non-numeric " + std::string(column) + " '" + std::string(text) + "'");
    return v;
  }

  Date date(std::string_view text) const {
    try {
      return parse_date(text);
    } catch (const Error& e) {
      fail(e.what());
    }
  }
};

using DatedValues = std::map<Date, double>;

// Reads unit_id,date,value rows grouped by unit, keeping first-appearance order.
void read_dated(CsvReader& reader, std::string_view value_column, bool non_negative,
                std::vector<std::string>& order, std::unordered_map<std::string, DatedValues>& values) {
  std::vector<std::string_view> fields;
  std::string storage;
  while (reader.next(fields, storage, 3)) {
    if (fields[0].empty()) reader.fail("empty unit_id");
    std::string unit(fields[0]);
    Date d = reader.date(fields[1]);
    double v = reader.number(fields[2], value_column);
    if (non_negative && v < 0.0) reader.fail("negative " + std::string(value_column));
    auto [it, inserted] = values.try_emplace(unit);
    if (inserted) order.push_back(unit);
    if (!it->second.emplace(d, v).second) reader.fail("duplicate date " + format_date(d) + " for unit " + unit);
  }
}

void check_contiguous(const std::string& unit, const DatedValues& series, const std::filesystem::path& file) {
  Date prev{};
  bool first = true;
  for (const auto& [d, v] : series) {
    if (!first && d != prev + std::chrono::days{1}) {
      throw Error(ErrorKind::Gap, file.string() + ": unit '" + unit + "' has a date gap between " +
                                      format_date(prev) + " and " + format_date(d));
    }
    prev = d;
    first = false;
  }
}

}  // namespace

GroupedPanel ingest_panel(const PanelFiles& files) {
  std::unordered_map<std::string, UnitRecord> demographics;
  {
    CsvReader reader(files.demographics);
    reader.expect_header("unit_id,population,frac_asian,frac_black,frac_hispanic,frac_white");
    std::vector<std::string_view> fields;
    std::string storage;
    while (reader.next(fields, storage, 6)) {
      UnitRecord rec;
      rec.unit_id = std::string(fields[0]);
      if (rec.unit_id.empty()) reader.fail("empty unit_id");
      long long pop = 0;
      if (!csv::parse_int(fields[1], pop)) reader.fail("non-integer population '" + std::string(fields[1]) + "'");
      rec.population = pop;
      for (std::size_t g = 0; g < kGroupCount; ++g) rec.demo_fractions[g] = reader.number(fields[2 + g], "fraction");
      try {
        validate(rec);
      } catch (const Error& e) {
        throw Error(ErrorKind::Range,
                    files.demographics.string() + ":" + std::to_string(reader.line_no) + ": " + e.what());
      }
      if (!demographics.emplace(rec.unit_id, rec).second) reader.fail("duplicate unit_id " + rec.unit_id);
    }
  }

  std::vector<std::string> order;
  std::unordered_map<std::string, DatedValues> cases;
  {
    CsvReader reader(files.cases);
    reader.expect_header("unit_id,date,cases");
    read_dated(reader, "cases", true, order, cases);
  }
  if (order.empty()) throw Error(ErrorKind::EmptyInput, files.cases.string() + ": no case rows");

  std::vector<std::string> mob_order;
  std::unordered_map<std::string, DatedValues> mobility;
  if (files.mobility) {
    CsvReader reader(*files.mobility);
    reader.expect_header("unit_id,date,inflow");
    read_dated(reader, "inflow", false, mob_order, mobility);
  }

  GroupedPanel panel;
  for (const auto& unit : order) {
    auto demo = demographics.find(unit);
    if (demo == demographics.end()) {
      throw Error(ErrorKind::Referential,
                  "unit '" + unit + "' in " + files.cases.string() + " has no row in " + files.demographics.string());
    }
    const DatedValues& rows = cases.at(unit);
    check_contiguous(unit, rows, files.cases);

    PanelSeries s;
    s.unit_id = unit;
    s.start = rows.begin()->first;
    s.target_raw.reserve(rows.size());
    for (const auto& [d, v] : rows) s.target_raw.push_back(v);
    s.target_smoothed = rolling_average(s.target_raw);

    if (auto mob = mobility.find(unit); mob != mobility.end()) {
      std::vector<double> exog;
      exog.reserve(rows.size());
      for (const auto& [d, v] : rows) {
        auto it = mob->second.find(d);
        if (it == mob->second.end()) {
          throw Error(ErrorKind::Gap, files.mobility->string() + ": unit '" + unit + "' has no inflow for " +
                                          format_date(d));
        }
        exog.push_back(it->second);
      }
      s.exog = std::move(exog);
    }
    panel.units.push_back(demo->second);
    panel.series.push_back(std::move(s));
  }
  log::debug("ingested " + std::to_string(panel.size()) + " units");
  return panel;
}

void write_panel(const GroupedPanel& panel, const PanelFiles& files) {
  auto open = [](const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + p.string());
    return out;
  };
  {
    auto out = open(files.cases);
    out << "unit_id,date,cases\n";
    for (const auto& s : panel.series) {
      for (std::size_t i = 0; i < s.size(); ++i) {
        out << s.unit_id << ',' << format_date(s.date_at(i)) << ',' << csv::format(s.target_raw[i]) << '\n';
      }
    }
  }
  {
    auto out = open(files.demographics);
    out << "unit_id,population,frac_asian,frac_black,frac_hispanic,frac_white\n";
    for (const auto& u : panel.units) {
      out << u.unit_id << ',' << u.population;
      for (double f : u.demo_fractions) out << ',' << csv::format(f);
      out << '\n';
    }
  }
  bool any_exog = std::any_of(panel.series.begin(), panel.series.end(), [](const auto& s) { return s.exog.has_value(); });
  if (files.mobility && any_exog) {
    auto out = open(*files.mobility);
    out << "unit_id,date,inflow\n";
    for (const auto& s : panel.series) {
      if (!s.exog) continue;
      for (std::size_t i = 0; i < s.size(); ++i) {
        out << s.unit_id << ',' << format_date(s.date_at(i)) << ',' << csv::format((*s.exog)[i]) << '\n';
      }
    }
  }
}

WindowSplit make_windows(const GroupedPanel& panel, std::size_t encoder_len, std::size_t horizon, Date split_date) {
  if (encoder_len == 0 || horizon == 0) throw Error(ErrorKind::Config, "encoder_len and horizon must be >= 1");
  if (panel.size() == 0) throw Error(ErrorKind::EmptyInput, "make_windows: empty panel");

  Date first = panel.series.front().start;
  Date last = panel.series.front().last_date();
  for (const auto& s : panel.series) {
    first = std::min(first, s.start);
    last = std::max(last, s.last_date());
  }
  if (split_date <= first || split_date > last) {
    throw Error(ErrorKind::Range, "split date " + format_date(split_date) + " outside panel range " +
                                      format_date(first) + ".." + format_date(last));
  }

  const std::size_t span = encoder_len + horizon;
  WindowSplit out;
  for (std::size_t u = 0; u < panel.size(); ++u) {
    const PanelSeries& s = panel.series[u];
    const UnitRecord& rec = panel.units[u];
    const long long split_index = (split_date - s.start).count();
    const long long n = static_cast<long long>(s.size());
    // Training windows need start + span - 1 < split_index.
    if (split_index < static_cast<long long>(span) || n < static_cast<long long>(span)) {
      log::warn("unit '" + s.unit_id + "' too short for a training window (E=" + std::to_string(encoder_len) +
                ", H=" + std::to_string(horizon) + "); excluded");
      out.excluded_units.push_back(s.unit_id);
      continue;
    }
    auto make = [&](std::size_t start) {
      WindowSample w;
      w.unit_index = u;
      w.unit_id = s.unit_id;
      w.first_target_date = s.date_at(start + encoder_len);
      w.encoder_target.assign(s.target_smoothed.begin() + start, s.target_smoothed.begin() + start + encoder_len);
      if (s.exog) {
        w.exog_present = true;
        w.encoder_exog.assign(s.exog->begin() + start, s.exog->begin() + start + encoder_len);
      } else {
        w.encoder_exog.assign(encoder_len, 0.0);
      }
      w.horizon_targets.assign(s.target_smoothed.begin() + start + encoder_len,
                               s.target_smoothed.begin() + start + span);
      w.demo = rec.demo_fractions;
      w.population = rec.population;
      return w;
    };
    for (long long start = 0; start + static_cast<long long>(span) <= n; ++start) {
      const long long first_target = start + static_cast<long long>(encoder_len);
      const long long last_target = start + static_cast<long long>(span) - 1;
      if (last_target < split_index) {
        out.train.push_back(make(static_cast<std::size_t>(start)));
      } else if (first_target >= split_index) {
        out.test.push_back(make(static_cast<std::size_t>(start)));
      }
    }
  }
  if (out.train.empty()) throw Error(ErrorKind::EmptyInput, "make_windows: every unit was excluded");
  return out;
}

}  // namespace parity
