#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace parity {

using Date = std::chrono::sys_days;

/// Parses YYYY-MM-DD. Throws Error(Parse) on anything else.
Date parse_date(std::string_view text);
std::string format_date(Date d);

/// Demographic groups in their fixed column order. The order doubles as the
/// tie-break order for majority labels.
enum class Group : std::size_t { Asian = 0, Black = 1, Hispanic = 2, White = 3 };
inline constexpr std::size_t kGroupCount = 4;
inline constexpr std::array<Group, kGroupCount> kGroups = {Group::Asian, Group::Black,
                                                          Group::Hispanic, Group::White};

std::string_view group_name(Group g) noexcept;        // "Asian", ...
std::string_view group_column(Group g) noexcept;      // "asian", ...
std::optional<Group> parse_group(std::string_view name) noexcept;

using DemoFractions = std::array<double, kGroupCount>;

/// Arg-max of the fractions; ties go to the earliest group in kGroups order.
Group dominant_group(const DemoFractions& fractions) noexcept;

struct UnitRecord {
  std::string unit_id;
  std::int64_t population = 1;
  DemoFractions demo_fractions{};
};

/// Throws Error(Range) when population < 1, a fraction is outside [0,1] or the
/// fractions sum past 1 + 1e-6.
void validate(const UnitRecord& unit);

/// One unit's daily series. Dates are contiguous from `start`.
struct PanelSeries {
  std::string unit_id;
  Date start{};
  std::vector<double> target_raw;
  std::vector<double> target_smoothed;
  std::optional<std::vector<double>> exog;

  std::size_t size() const noexcept { return target_raw.size(); }
  Date date_at(std::size_t i) const { return start + std::chrono::days{static_cast<int>(i)}; }
  Date last_date() const { return date_at(size() - 1); }
};

/// Units and series aligned by index, in first-appearance order of cases.csv.
struct GroupedPanel {
  std::vector<UnitRecord> units;
  std::vector<PanelSeries> series;

  std::size_t size() const noexcept { return units.size(); }
  std::optional<std::size_t> find(std::string_view unit_id) const;
};

inline constexpr std::size_t kDefaultRollingWindow = 7;

/// output[t] = mean(raw[max(0, t - window + 1) .. t]); partial windows at the
/// start average over the days that exist.
std::vector<double> rolling_average(std::span<const double> raw,
                                    std::size_t window = kDefaultRollingWindow);

struct PanelFiles {
  std::filesystem::path cases;
  std::filesystem::path demographics;
  std::optional<std::filesystem::path> mobility;
};

/// Reads the three CSV schemas:
///   cases.csv         unit_id,date,cases
///   demographics.csv  unit_id,population,frac_asian,frac_black,frac_hispanic,frac_white
///   mobility.csv      unit_id,date,inflow
/// Rows may appear in any order. Every case unit needs a demographics row and
/// contiguous dates. Units without mobility rows get no exog.
GroupedPanel ingest_panel(const PanelFiles& files);

/// Writes the same three files (mobility only when some unit has exog).
/// Numbers use the shortest representation that round-trips (std::to_chars),
/// so ingest_panel(write_panel(p)) reproduces every value bit-exactly.
void write_panel(const GroupedPanel& panel, const PanelFiles& files);

struct WindowSample {
  std::size_t unit_index = 0;
  std::string unit_id;
  Date first_target_date{};
  std::vector<double> encoder_target;  // smoothed target, length E
  std::vector<double> encoder_exog;    // zeros when exog is absent
  bool exog_present = false;
  std::vector<double> horizon_targets;  // smoothed target, lookaheads 1..H
  DemoFractions demo{};
  std::int64_t population = 1;

  std::size_t encoder_len() const noexcept { return encoder_target.size(); }
  std::size_t horizon() const noexcept { return horizon_targets.size(); }
  static constexpr int lookahead(std::size_t h) noexcept { return static_cast<int>(h) + 1; }
};

struct WindowSplit {
  std::vector<WindowSample> train;
  std::vector<WindowSample> test;
  std::vector<std::string> excluded_units;
};

/// Slides a window one day at a time over each unit. A window goes to train
/// when its last target date is before `split_date`, to test when its first
/// target date is on or after it. Units without room for a single training
/// window are excluded with a warning; if every unit is excluded the call
/// throws Error(EmptyInput).
WindowSplit make_windows(const GroupedPanel& panel, std::size_t encoder_len,
                         std::size_t horizon, Date split_date);

}  // namespace parity
