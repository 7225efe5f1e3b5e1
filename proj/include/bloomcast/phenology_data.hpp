/**
 * @file
 * @brief Temperature and bloom-date ingestion plus the sliding-window sample construction.
 *
 * A sample is anchored on a day of a year that has a recorded bloom event. Its features are the
 * temperatures of the `window_len` days ending at (and including) the anchor, its label is the number
 * of days until the peak bloom, folded into the classes {0, ..., k} where 0 stands for "more than k days".
 */

#pragma once

#include "bloomcast/exceptions.hpp"  // bloomcast::data_format_exception, bloomcast::file_exception, ...

#include "fmt/format.h"  // fmt::format

#include <algorithm>     // std::sort, std::min_element, std::max_element
#include <array>         // std::array
#include <charconv>      // std::from_chars
#include <cmath>         // std::isfinite
#include <cstddef>       // std::size_t
#include <fstream>       // std::ifstream
#include <map>           // std::map
#include <optional>      // std::optional
#include <string>        // std::string, std::getline
#include <string_view>   // std::string_view
#include <system_error>  // std::errc
#include <tuple>         // std::tie
#include <utility>       // std::pair
#include <vector>        // std::vector

namespace bloomcast {

/// One day of temperature observations (°C) at one site.
struct daily_record {
    int year{};
    /// 1-based day of the year.
    int doy{};
    std::optional<double> tmax{};
    std::optional<double> tmin{};
    std::optional<double> tavg{};

    friend bool operator==(const daily_record &, const daily_record &) = default;
};

/// Peak bloom (full flowering) day of one year.
struct bloom_event {
    int year{};
    int bloom_doy{};

    friend bool operator==(const bloom_event &, const bloom_event &) = default;
};

/// How a window of daily values is turned into a feature vector.
enum class feature_mode {
    /// The daily values in chronological order.
    raw,
    /// [min, max, mean, population variance] of the daily averages.
    stats
};

/// Which daily values enter a raw window.
enum class feature_channels {
    /// One value per day: the average temperature.
    tavg,
    /// Two values per day: (tmin, tmax).
    extremes
};

struct window_sample {
    std::vector<double> features{};
    int label{};
    int year{};
    /// Last (most recent) day of the window.
    int anchor_doy{};

    friend bool operator==(const window_sample &, const window_sample &) = default;
};

/**
 * @brief A labeled set of window samples sharing one feature length.
 */
struct dataset {
    std::vector<window_sample> samples{};
    /// Horizon: labels are in {0, ..., k}.
    int k{};
    std::size_t feature_len{};
    std::map<int, std::size_t> class_counts{};
    /// Non-fatal issues encountered while building the set (e.g. bloom years without temperatures).
    std::vector<std::string> warnings{};

    [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }
    [[nodiscard]] int num_classes() const noexcept { return k + 1; }

    void recount() {
        class_counts.clear();
        for (const window_sample &s : samples) {
            ++class_counts[s.label];
        }
    }
};

/// Parameters of the window construction.
struct window_config {
    std::size_t window_len{ 10 };
    int k{ 10 };
    feature_mode mode{ feature_mode::raw };
    feature_channels channels{ feature_channels::tavg };

    [[nodiscard]] std::size_t feature_len() const noexcept {
        if (mode == feature_mode::stats) {
            return 4;
        }
        return channels == feature_channels::extremes ? 2 * window_len : window_len;
    }
};

[[nodiscard]] inline std::string_view to_string(const feature_mode mode) noexcept {
    return mode == feature_mode::raw ? "raw" : "stats";
}

[[nodiscard]] inline std::string_view to_string(const feature_channels channels) noexcept {
    return channels == feature_channels::tavg ? "tavg" : "extremes";
}

//*************************************************************************************************************************************//
//                                                           calendar                                                                  //
//*************************************************************************************************************************************//

[[nodiscard]] constexpr bool is_leap_year(const int year) noexcept {
    return (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
}

[[nodiscard]] constexpr int days_in_month(const int year, const int month) noexcept {
    constexpr std::array<int, 12> lengths{ 31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31 };
    if (month == 2 && is_leap_year(year)) {
        return 29;
    }
    return lengths[static_cast<std::size_t>(month - 1)];
}

[[nodiscard]] constexpr int days_in_year(const int year) noexcept {
    return is_leap_year(year) ? 366 : 365;
}

/**
 * @brief Convert a Gregorian calendar date to its 1-based day of the year.
 * @throws bloomcast::invalid_argument_exception if the date does not exist
 */
[[nodiscard]] inline int to_day_of_year(const int year, const int month, const int day) {
    if (month < 1 || month > 12 || day < 1 || day > days_in_month(year, month)) {
        throw invalid_argument_exception{ fmt::format("invalid calendar date {:04}-{:02}-{:02}", year, month, day) };
    }
    int doy = day;
    for (int m = 1; m < month; ++m) {
        doy += days_in_month(year, m);
    }
    return doy;
}

/**
 * @brief Inverse of to_day_of_year.
 * @return (month, day)
 */
[[nodiscard]] inline std::pair<int, int> from_day_of_year(const int year, int doy) {
    if (doy < 1 || doy > days_in_year(year)) {
        throw invalid_argument_exception{ fmt::format("day {} does not exist in year {}", doy, year) };
    }
    int month = 1;
    while (doy > days_in_month(year, month)) {
        doy -= days_in_month(year, month);
        ++month;
    }
    return { month, doy };
}

/// ISO-8601 representation of (year, doy).
[[nodiscard]] inline std::string format_date(const int year, const int doy) {
    const auto [month, day] = from_day_of_year(year, doy);
    return fmt::format("{:04}-{:02}-{:02}", year, month, day);
}

/**
 * @brief Parse an ISO-8601 `YYYY-MM-DD` date.
 * @return (year, doy), or std::nullopt if the text is not a valid date
 */
[[nodiscard]] inline std::optional<std::pair<int, int>> parse_iso_date(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
        return std::nullopt;
    }
    const auto parse_int = [](const std::string_view part) -> std::optional<int> {
        int value{};
        const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), value);
        if (ec != std::errc{} || ptr != part.data() + part.size()) {
            return std::nullopt;
        }
        return value;
    };
    const auto year = parse_int(text.substr(0, 4));
    const auto month = parse_int(text.substr(5, 2));
    const auto day = parse_int(text.substr(8, 2));
    if (!year || !month || !day || *month < 1 || *month > 12 || *day < 1 || *day > days_in_month(*year, *month)) {
        return std::nullopt;
    }
    return std::pair{ *year, to_day_of_year(*year, *month, *day) };
}

//*************************************************************************************************************************************//
//                                                           CSV ingestion                                                             //
//*************************************************************************************************************************************//

/// Column names of the temperature file.
struct temperature_schema {
    std::string date{ "date" };
    std::string tmax{ "tmax_c" };
    std::string tmin{ "tmin_c" };
    std::string tavg{ "tavg_c" };
};

namespace detail {

[[nodiscard]] inline std::string_view trim(std::string_view s) noexcept {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

[[nodiscard]] inline std::vector<std::string_view> split_csv_line(const std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            cells.push_back(trim(line.substr(start)));
            return cells;
        }
        cells.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
}

/// Empty or unparseable cells become std::nullopt.
[[nodiscard]] inline std::optional<double> parse_optional_double(const std::string_view cell) {
    if (cell.empty()) {
        return std::nullopt;
    }
    double value{};
    const char *begin = cell.data();
    if (*begin == '+') {
        ++begin;
    }
    const auto [ptr, ec] = std::from_chars(begin, cell.data() + cell.size(), value);
    if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

/// Reads all lines of a file, stripping a UTF-8 byte order mark and CR line endings.
[[nodiscard]] inline std::vector<std::string> read_lines(const std::string &path) {
    std::ifstream in{ path };
    if (!in) {
        throw file_exception{ fmt::format("couldn't open file '{}'", path) };
    }
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        lines.push_back(std::move(line));
    }
    if (!lines.empty() && lines.front().starts_with("\xEF\xBB\xBF")) {
        lines.front().erase(0, 3);
    }
    return lines;
}

[[nodiscard]] inline std::size_t find_column(const std::vector<std::string_view> &header, const std::string_view name, const std::string &path) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
        throw data_format_exception{ fmt::format("malformed header in '{}': missing column '{}'", path, name) };
    }
    return static_cast<std::size_t>(it - header.begin());
}

}  // namespace detail

/**
 * @brief Read a daily temperature file.
 *
 * Rows whose date cannot be parsed are skipped; unparseable temperature cells become missing values.
 * The result is sorted by (year, doy).
 *
 * @throws bloomcast::file_exception if the file can't be opened
 * @throws bloomcast::data_format_exception on a malformed header, duplicate dates, or tmax < tmin
 */
[[nodiscard]] inline std::vector<daily_record> parse_temperature_csv(const std::string &path, const temperature_schema &schema = {}) {
    const std::vector<std::string> lines = detail::read_lines(path);
    if (lines.empty()) {
        throw data_format_exception{ fmt::format("malformed header in '{}': file is empty", path) };
    }
    const std::vector<std::string_view> header = detail::split_csv_line(lines.front());
    const std::size_t date_col = detail::find_column(header, schema.date, path);
    const std::size_t tmax_col = detail::find_column(header, schema.tmax, path);
    const std::size_t tmin_col = detail::find_column(header, schema.tmin, path);
    const std::size_t tavg_col = detail::find_column(header, schema.tavg, path);

    std::vector<daily_record> records;
    for (std::size_t line_no = 1; line_no < lines.size(); ++line_no) {
        if (detail::trim(lines[line_no]).empty()) {
            continue;
        }
        const std::vector<std::string_view> cells = detail::split_csv_line(lines[line_no]);
        const auto cell = [&](const std::size_t col) { return col < cells.size() ? cells[col] : std::string_view{}; };
        const auto date = parse_iso_date(cell(date_col));
        if (!date) {
            continue;
        }
        daily_record rec{ date->first, date->second, detail::parse_optional_double(cell(tmax_col)), detail::parse_optional_double(cell(tmin_col)), detail::parse_optional_double(cell(tavg_col)) };
        if (rec.tmax && rec.tmin && *rec.tmax < *rec.tmin) {
            throw data_format_exception{ fmt::format("'{}' line {}: tmax {} is below tmin {}", path, line_no + 1, *rec.tmax, *rec.tmin) };
        }
        records.push_back(rec);
    }

    std::stable_sort(records.begin(), records.end(), [](const daily_record &lhs, const daily_record &rhs) {
        return std::tie(lhs.year, lhs.doy) < std::tie(rhs.year, rhs.doy);
    });
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (records[i - 1].year == records[i].year && records[i - 1].doy == records[i].doy) {
            throw data_format_exception{ fmt::format("'{}': duplicate rows for date {}", path, format_date(records[i].year, records[i].doy)) };
        }
    }
    return records;
}

/**
 * @brief Read a `year,bloom_date` file, sorted by year.
 * @throws bloomcast::data_format_exception on a malformed header, bad dates, mismatching years, or more than one event per year
 */
[[nodiscard]] inline std::vector<bloom_event> parse_bloom_csv(const std::string &path) {
    const std::vector<std::string> lines = detail::read_lines(path);
    if (lines.empty()) {
        throw data_format_exception{ fmt::format("malformed header in '{}': file is empty", path) };
    }
    const std::vector<std::string_view> header = detail::split_csv_line(lines.front());
    const std::size_t year_col = detail::find_column(header, "year", path);
    const std::size_t date_col = detail::find_column(header, "bloom_date", path);

    std::vector<bloom_event> events;
    for (std::size_t line_no = 1; line_no < lines.size(); ++line_no) {
        if (detail::trim(lines[line_no]).empty()) {
            continue;
        }
        const std::vector<std::string_view> cells = detail::split_csv_line(lines[line_no]);
        if (cells.size() <= std::max(year_col, date_col)) {
            throw data_format_exception{ fmt::format("'{}' line {}: too few columns", path, line_no + 1) };
        }
        int year{};
        const std::string_view year_cell = cells[year_col];
        const auto [ptr, ec] = std::from_chars(year_cell.data(), year_cell.data() + year_cell.size(), year);
        const auto date = parse_iso_date(cells[date_col]);
        if (ec != std::errc{} || ptr != year_cell.data() + year_cell.size() || !date) {
            throw data_format_exception{ fmt::format("'{}' line {}: can't parse '{}'", path, line_no + 1, lines[line_no]) };
        }
        if (date->first != year) {
            throw data_format_exception{ fmt::format("'{}' line {}: bloom date {} is not in year {}", path, line_no + 1, cells[date_col], year) };
        }
        events.push_back(bloom_event{ year, date->second });
    }
    std::stable_sort(events.begin(), events.end(), [](const bloom_event &lhs, const bloom_event &rhs) { return lhs.year < rhs.year; });
    for (std::size_t i = 1; i < events.size(); ++i) {
        if (events[i - 1].year == events[i].year) {
            throw data_format_exception{ fmt::format("'{}': more than one bloom event in year {}", path, events[i].year) };
        }
    }
    return events;
}

//*************************************************************************************************************************************//
//                                                    cleaning and labeling                                                            //
//*************************************************************************************************************************************//

/**
 * @brief Fill a missing daily average with the mean of the daily extremes.
 * @throws bloomcast::unimputable_record_exception if the average and at least one extreme are missing
 */
[[nodiscard]] inline daily_record impute_tavg(daily_record record) {
    if (record.tavg) {
        return record;
    }
    if (!record.tmax || !record.tmin) {
        throw unimputable_record_exception{ fmt::format("can't impute the average temperature of {}: {} missing",
                                                        format_date(record.year, record.doy),
                                                        record.tmax ? "tmin" : (record.tmin ? "tmax" : "tmax and tmin")) };
    }
    record.tavg = (*record.tmax + *record.tmin) / 2.0;
    return record;
}

/**
 * @brief Impute every record; unimputable records are dropped and later treated as missing days.
 * @return the number of dropped records
 */
inline std::size_t impute_all(std::vector<daily_record> &records) {
    std::vector<daily_record> kept;
    kept.reserve(records.size());
    for (const daily_record &rec : records) {
        try {
            kept.push_back(impute_tavg(rec));
        } catch (const unimputable_record_exception &) {
            // dropped: any window containing this day is skipped
        }
    }
    const std::size_t dropped = records.size() - kept.size();
    records = std::move(kept);
    return dropped;
}

/**
 * @brief Class of an anchor day: the days until bloom if within the horizon, 0 if further away.
 * @return std::nullopt for anchors on or after the bloom day
 */
[[nodiscard]] inline std::optional<int> label_for_anchor(const int anchor_doy, const int bloom_doy, const int k) {
    if (k < 1) {
        throw invalid_argument_exception{ fmt::format("the horizon k must be at least 1, but is {}", k) };
    }
    const int days_until_bloom = bloom_doy - anchor_doy;
    if (days_until_bloom <= 0) {
        return std::nullopt;
    }
    return days_until_bloom > k ? 0 : days_until_bloom;
}

/**
 * @brief [min, max, mean, population variance] of a window.
 */
[[nodiscard]] inline std::array<double, 4> stats_features(const std::vector<double> &window) {
    if (window.empty()) {
        throw invalid_argument_exception{ "can't compute statistics of an empty window" };
    }
    const auto [min_it, max_it] = std::minmax_element(window.begin(), window.end());
    double mean = 0.0;
    for (const double v : window) {
        mean += v;
    }
    mean /= static_cast<double>(window.size());
    double variance = 0.0;
    for (const double v : window) {
        variance += (v - mean) * (v - mean);
    }
    variance /= static_cast<double>(window.size());
    return { *min_it, *max_it, mean, variance };
}

/**
 * @brief Index over daily records for window lookups.
 */
class record_index {
  public:
    explicit record_index(const std::vector<daily_record> &records) {
        for (const daily_record &rec : records) {
            by_date_.emplace(std::pair{ rec.year, rec.doy }, &rec);
        }
    }

    [[nodiscard]] const daily_record *find(const int year, const int doy) const {
        const auto it = by_date_.find({ year, doy });
        return it == by_date_.end() ? nullptr : it->second;
    }

    [[nodiscard]] bool has_year(const int year) const {
        const auto it = by_date_.lower_bound({ year, 0 });
        return it != by_date_.end() && it->first.first == year;
    }

  private:
    std::map<std::pair<int, int>, const daily_record *> by_date_{};
};

/// Features of one window, or the days that are missing for it.
struct window_lookup {
    std::optional<std::vector<double>> features{};
    std::vector<std::string> missing_dates{};
};

/**
 * @brief Assemble the feature vector of the window ending at (year, anchor_doy).
 *
 * Windows never reach into the previous year. A day is missing if it has no record or lacks a value the
 * configured channels need.
 */
[[nodiscard]] inline window_lookup window_features(const record_index &index, const int year, const int anchor_doy, const window_config &config) {
    if (config.window_len == 0) {
        throw invalid_argument_exception{ "the window length must be at least 1" };
    }
    if (config.mode == feature_mode::stats && config.channels != feature_channels::tavg) {
        throw invalid_argument_exception{ "stats features are computed from the daily average only" };
    }
    window_lookup result;
    std::vector<double> values;
    values.reserve(config.feature_len());
    const int first_doy = anchor_doy - static_cast<int>(config.window_len) + 1;
    for (int doy = first_doy; doy <= anchor_doy; ++doy) {
        // days before January 1 come from the end of the previous year
        const int rec_year = doy >= 1 ? year : year - 1;
        const int rec_doy = doy >= 1 ? doy : doy + days_in_year(year - 1);
        const daily_record *rec = index.find(rec_year, rec_doy);
        const bool usable = rec != nullptr && (config.channels == feature_channels::tavg ? rec->tavg.has_value() : (rec->tmin.has_value() && rec->tmax.has_value()));
        if (!usable) {
            result.missing_dates.push_back(format_date(rec_year, rec_doy));
            continue;
        }
        if (config.channels == feature_channels::tavg) {
            values.push_back(*rec->tavg);
        } else {
            values.push_back(*rec->tmin);
            values.push_back(*rec->tmax);
        }
    }
    if (!result.missing_dates.empty()) {
        return result;
    }
    if (config.mode == feature_mode::stats) {
        const std::array<double, 4> stats = stats_features(values);
        values.assign(stats.begin(), stats.end());
    }
    result.features = std::move(values);
    return result;
}

/**
 * @brief Build the labeled sliding-window samples of all years with a bloom event.
 *
 * Samples are emitted year by year in ascending anchor order. Anchors on or after the bloom day and anchors
 * whose window misses a day are skipped. Bloom years without any temperature record produce a warning.
 */
[[nodiscard]] inline dataset build_windows(const std::vector<daily_record> &records, const std::vector<bloom_event> &events, const window_config &config) {
    if (config.window_len == 0) {
        throw invalid_argument_exception{ "the window length must be at least 1" };
    }
    if (config.k < 1) {
        throw invalid_argument_exception{ fmt::format("the horizon k must be at least 1, but is {}", config.k) };
    }
    dataset data;
    data.k = config.k;
    data.feature_len = config.feature_len();

    const record_index index{ records };
    for (const bloom_event &event : events) {
        if (!index.has_year(event.year)) {
            data.warnings.push_back(fmt::format("no temperature records for bloom year {}; year skipped", event.year));
            continue;
        }
        for (int anchor = static_cast<int>(config.window_len); anchor < event.bloom_doy; ++anchor) {
            const std::optional<int> label = label_for_anchor(anchor, event.bloom_doy, config.k);
            if (!label) {
                continue;
            }
            window_lookup lookup = window_features(index, event.year, anchor, config);
            if (!lookup.features) {
                continue;
            }
            data.samples.push_back(window_sample{ std::move(*lookup.features), *label, event.year, anchor });
        }
    }
    data.recount();
    return data;
}

/// Samples whose year lies in [first_year, last_year].
[[nodiscard]] inline dataset filter_years(const dataset &data, const int first_year, const int last_year) {
    dataset out;
    out.k = data.k;
    out.feature_len = data.feature_len;
    out.warnings = data.warnings;
    for (const window_sample &s : data.samples) {
        if (s.year >= first_year && s.year <= last_year) {
            out.samples.push_back(s);
        }
    }
    out.recount();
    return out;
}

}  // namespace bloomcast
