#include "bloomcast/detail/random.hpp"
#include "bloomcast/phenology_data.hpp"

#include "gtest/gtest.h"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <unistd.h>
#include <fstream>
#include <string>

namespace {

using namespace bloomcast;

class temp_file {
  public:
    explicit temp_file(const std::string &content) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() / ("bloomcast_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + ".csv");
        std::ofstream{ path_, std::ios::binary } << content;
    }
    ~temp_file() { std::filesystem::remove(path_); }
    [[nodiscard]] std::string path() const { return path_.string(); }

  private:
    std::filesystem::path path_;
};

// independent calendar oracle
int chrono_doy(const int y, const int m, const int d) {
    using namespace std::chrono;
    const sys_days date{ year{ y } / month{ static_cast<unsigned>(m) } / day{ static_cast<unsigned>(d) } };
    const sys_days jan1{ year{ y } / January / 1 };
    return static_cast<int>((date - jan1).count()) + 1;
}

TEST(Calendar, DayOfYearExamples) {
    EXPECT_EQ(to_day_of_year(1999, 1, 1), 1);
    EXPECT_EQ(to_day_of_year(2016, 1, 1), 1);
    EXPECT_EQ(to_day_of_year(2015, 12, 31), 365);
    EXPECT_EQ(to_day_of_year(2016, 3, 20), 80);
    EXPECT_EQ(to_day_of_year(2016, 12, 31), 366);
}

TEST(Calendar, InvalidDates) {
    EXPECT_THROW(std::ignore = to_day_of_year(2016, 2, 30), invalid_argument_exception);
    EXPECT_THROW(std::ignore = to_day_of_year(2015, 2, 29), invalid_argument_exception);
    EXPECT_THROW(std::ignore = to_day_of_year(1900, 2, 29), invalid_argument_exception);
    EXPECT_NO_THROW(std::ignore = to_day_of_year(2000, 2, 29));
    EXPECT_THROW(std::ignore = to_day_of_year(2016, 13, 1), invalid_argument_exception);
    EXPECT_THROW(std::ignore = to_day_of_year(2016, 4, 0), invalid_argument_exception);
}

TEST(Calendar, MatchesChronoAndRoundTrips) {
    for (int y = 1880; y <= 2100; ++y) {
        int previous = 0;
        for (int m = 1; m <= 12; ++m) {
            for (int d = 1; d <= days_in_month(y, m); ++d) {
                const int doy = to_day_of_year(y, m, d);
                ASSERT_EQ(doy, chrono_doy(y, m, d)) << y << '-' << m << '-' << d;
                ASSERT_EQ(doy, previous + 1);
                previous = doy;
                const auto [mm, dd] = from_day_of_year(y, doy);
                ASSERT_EQ(mm, m);
                ASSERT_EQ(dd, d);
            }
        }
        ASSERT_EQ(previous, days_in_year(y));
    }
}

TEST(Calendar, IsoParsing) {
    const auto d = parse_iso_date("2016-03-20");
    ASSERT_TRUE(d.has_value());
    EXPECT_EQ(d->first, 2016);
    EXPECT_EQ(d->second, 80);
    EXPECT_FALSE(parse_iso_date("2016-02-30").has_value());
    EXPECT_FALSE(parse_iso_date("03/20/2016").has_value());
    EXPECT_FALSE(parse_iso_date("2016-3-20").has_value());
    EXPECT_EQ(format_date(2016, 80), "2016-03-20");
}

TEST(TemperatureCsv, ParsesRowIntoRecord) {
    const temp_file f{ "date,tmax_c,tmin_c,tavg_c\n2016-03-20,12.0,4.0,8.1\n" };
    const auto records = parse_temperature_csv(f.path());
    ASSERT_EQ(records.size(), 1U);
    EXPECT_EQ(records[0], (daily_record{ 2016, 80, 12.0, 4.0, 8.1 }));
}

TEST(TemperatureCsv, EmptyBodyYieldsNoRecords) {
    const temp_file f{ "date,tmax_c,tmin_c,tavg_c\n" };
    EXPECT_TRUE(parse_temperature_csv(f.path()).empty());
}

TEST(TemperatureCsv, DuplicateDateIsRejected) {
    const temp_file f{ "date,tmax_c,tmin_c,tavg_c\n2016-03-20,12,4,8\n2016-03-20,13,5,9\n" };
    EXPECT_THROW(std::ignore = parse_temperature_csv(f.path()), data_format_exception);
}

TEST(TemperatureCsv, MissingFileAndBadHeader) {
    EXPECT_THROW(std::ignore = parse_temperature_csv("/nonexistent/bloomcast.csv"), file_exception);
    const temp_file f{ "day,tmax_c,tmin_c,tavg_c\n2016-03-20,12,4,8\n" };
    EXPECT_THROW(std::ignore = parse_temperature_csv(f.path()), data_format_exception);
}

TEST(TemperatureCsv, CrlfBomEmptyCellsAndSorting) {
    const temp_file f{ "\xEF\xBB\xBF" "date,tmax_c,tmin_c,tavg_c\r\n2016-03-21,12,4,\r\n2016-03-20,,4,n/a\r\n2015-12-31,1,-1,0\r\n" };
    const auto records = parse_temperature_csv(f.path());
    ASSERT_EQ(records.size(), 3U);
    EXPECT_EQ(records[0].year, 2015);
    EXPECT_EQ(records[1].doy, 80);
    EXPECT_FALSE(records[1].tmax.has_value());
    EXPECT_FALSE(records[1].tavg.has_value());
    EXPECT_EQ(records[1].tmin, 4.0);
    EXPECT_FALSE(records[2].tavg.has_value());
}

TEST(TemperatureCsv, ReorderedColumnsFollowSchema) {
    const temp_file f{ "tavg_c,date,tmin_c,tmax_c\n8.1,2016-03-20,4.0,12.0\n" };
    const auto records = parse_temperature_csv(f.path());
    ASSERT_EQ(records.size(), 1U);
    EXPECT_EQ(records[0], (daily_record{ 2016, 80, 12.0, 4.0, 8.1 }));
}

TEST(TemperatureCsv, ExtremesOutOfOrderAreRejected) {
    const temp_file f{ "date,tmax_c,tmin_c,tavg_c\n2016-03-20,2,4,3\n" };
    EXPECT_THROW(std::ignore = parse_temperature_csv(f.path()), data_format_exception);
}

TEST(BloomCsv, ParsesAndValidates) {
    const temp_file ok{ "year,bloom_date\n2016,2016-03-25\n2015,2015-04-01\n" };
    const auto events = parse_bloom_csv(ok.path());
    ASSERT_EQ(events.size(), 2U);
    EXPECT_EQ(events[0], (bloom_event{ 2015, 91 }));
    EXPECT_EQ(events[1], (bloom_event{ 2016, 85 }));

    const temp_file dup{ "year,bloom_date\n2016,2016-03-25\n2016,2016-03-26\n" };
    EXPECT_THROW(std::ignore = parse_bloom_csv(dup.path()), data_format_exception);
    const temp_file wrong_year{ "year,bloom_date\n2016,2015-03-25\n" };
    EXPECT_THROW(std::ignore = parse_bloom_csv(wrong_year.path()), data_format_exception);
}

TEST(Impute, FillsMeanOfExtremes) {
    const daily_record r = impute_tavg({ 2000, 10, 10.0, 2.0, std::nullopt });
    ASSERT_TRUE(r.tavg.has_value());
    EXPECT_DOUBLE_EQ(*r.tavg, 6.0);
}

TEST(Impute, KeepsPresentAverage) {
    const daily_record in{ 2000, 10, 10.0, 2.0, 7.3 };
    EXPECT_EQ(impute_tavg(in), in);
}

TEST(Impute, MissingExtremeIsAnError) {
    EXPECT_THROW(std::ignore = impute_tavg({ 2000, 10, std::nullopt, 2.0, std::nullopt }), unimputable_record_exception);
    EXPECT_THROW(std::ignore = impute_tavg({ 2000, 10, 3.0, std::nullopt, std::nullopt }), unimputable_record_exception);
}

TEST(Label, ClassScheme) {
    EXPECT_EQ(label_for_anchor(80, 85, 10), 5);
    EXPECT_EQ(label_for_anchor(60, 80, 10), 0);
    EXPECT_EQ(label_for_anchor(70, 80, 10), 10);
    EXPECT_EQ(label_for_anchor(79, 80, 10), 1);
    EXPECT_FALSE(label_for_anchor(80, 80, 10).has_value());
    EXPECT_FALSE(label_for_anchor(81, 80, 10).has_value());
    EXPECT_THROW(std::ignore = label_for_anchor(1, 5, 0), invalid_argument_exception);
}

TEST(Stats, Examples) {
    EXPECT_EQ(stats_features({ 5, 5, 5 }), (std::array<double, 4>{ 5, 5, 5, 0 }));
    const auto s = stats_features({ 1, 2, 3, 4, 5, 6, 7, 8, 9, 10 });
    EXPECT_DOUBLE_EQ(s[0], 1.0);
    EXPECT_DOUBLE_EQ(s[1], 10.0);
    EXPECT_DOUBLE_EQ(s[2], 5.5);
    EXPECT_DOUBLE_EQ(s[3], 8.25);
    EXPECT_THROW(std::ignore = stats_features({}), invalid_argument_exception);
}

std::vector<daily_record> days(const int year, const int first, const int last) {
    std::vector<daily_record> out;
    for (int d = first; d <= last; ++d) {
        out.push_back({ year, d, d + 1.0, d - 1.0, static_cast<double>(d) });
    }
    return out;
}

TEST(Windows, CountsAnchorsBeforeBloom) {
    const dataset data = build_windows(days(2001, 1, 100), { { 2001, 90 } }, window_config{ 10, 10, feature_mode::raw, feature_channels::tavg });
    // anchors 10..89; anchors on or after day 90 are excluded
    ASSERT_EQ(data.size(), 80U);
    EXPECT_EQ(data.samples.front().anchor_doy, 10);
    EXPECT_EQ(data.samples.back().anchor_doy, 89);
    EXPECT_EQ(data.class_counts.at(0), 70U);
    for (int c = 1; c <= 10; ++c) {
        EXPECT_EQ(data.class_counts.at(c), 1U);
    }
    // chronological raw window ending at the anchor
    EXPECT_EQ(data.samples.front().features, (std::vector<double>{ 1, 2, 3, 4, 5, 6, 7, 8, 9, 10 }));
    EXPECT_EQ(data.samples.back().label, 1);
}

TEST(Windows, MissingDaySkipsOverlappingAnchors) {
    auto records = days(2001, 1, 100);
    records.erase(records.begin() + 49);  // day 50
    const dataset data = build_windows(records, { { 2001, 90 } }, window_config{});
    EXPECT_EQ(data.size(), 70U);
    for (const window_sample &s : data.samples) {
        EXPECT_TRUE(s.anchor_doy < 50 || s.anchor_doy > 59) << s.anchor_doy;
    }
}

TEST(Windows, StatsAndExtremesModes) {
    const dataset stats = build_windows(days(2001, 1, 30), { { 2001, 25 } }, window_config{ 10, 10, feature_mode::stats, feature_channels::tavg });
    ASSERT_FALSE(stats.samples.empty());
    EXPECT_EQ(stats.feature_len, 4U);
    EXPECT_EQ(stats.samples.front().features, (std::vector<double>{ 1, 10, 5.5, 8.25 }));

    const dataset extremes = build_windows(days(2001, 1, 30), { { 2001, 25 } }, window_config{ 3, 10, feature_mode::raw, feature_channels::extremes });
    EXPECT_EQ(extremes.feature_len, 6U);
    EXPECT_EQ(extremes.samples.front().features, (std::vector<double>{ 0, 2, 1, 3, 2, 4 }));
}

TEST(Windows, LookupCrossesIntoPreviousYear) {
    std::vector<daily_record> records = days(2000, 360, 366);
    const std::vector<daily_record> jan = days(2001, 1, 5);
    records.insert(records.end(), jan.begin(), jan.end());
    const record_index index{ records };
    const window_lookup full = window_features(index, 2001, 3, window_config{ 5, 10, feature_mode::raw, feature_channels::tavg });
    ASSERT_TRUE(full.features.has_value());
    EXPECT_EQ(*full.features, (std::vector<double>{ 365, 366, 1, 2, 3 }));
    const window_lookup gap = window_features(index, 2001, 3, window_config{ 12, 10, feature_mode::raw, feature_channels::tavg });
    EXPECT_FALSE(gap.features.has_value());
    EXPECT_EQ(gap.missing_dates, (std::vector<std::string>{ "2000-12-23", "2000-12-24" }));
}

TEST(Windows, BloomYearWithoutRecordsWarns) {
    const dataset data = build_windows(days(2001, 1, 100), { { 2001, 90 }, { 2002, 95 } }, window_config{});
    EXPECT_EQ(data.size(), 80U);
    ASSERT_EQ(data.warnings.size(), 1U);
    EXPECT_NE(data.warnings.front().find("2002"), std::string::npos);
}

TEST(Windows, PropertiesOverRandomYears) {
    std::mt19937_64 rng{ 11 };
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<daily_record> records;
        std::vector<bloom_event> events;
        for (int y = 2000; y < 2003; ++y) {
            for (int d = 1; d <= 150; ++d) {
                if (bloomcast::detail::uniform01(rng) < 0.03) {
                    continue;
                }
                records.push_back({ y, d, std::nullopt, std::nullopt, bloomcast::detail::standard_normal(rng) });
            }
            events.push_back({ y, 60 + static_cast<int>(bloomcast::detail::uniform_index(rng, 60)) });
        }
        const window_config cfg{ 1 + bloomcast::detail::uniform_index(rng, 15), 1 + static_cast<int>(bloomcast::detail::uniform_index(rng, 20)), feature_mode::raw, feature_channels::tavg };
        const dataset a = build_windows(records, events, cfg);
        const dataset b = build_windows(records, events, cfg);
        ASSERT_EQ(a.samples, b.samples);
        std::map<std::pair<int, int>, int> per_year_label;
        std::size_t total = 0;
        for (const window_sample &s : a.samples) {
            ASSERT_GE(s.label, 0);
            ASSERT_LE(s.label, cfg.k);
            ASSERT_EQ(s.features.size(), a.feature_len);
            for (const double v : s.features) {
                ASSERT_TRUE(std::isfinite(v));
            }
            if (s.label > 0) {
                ASSERT_EQ((++per_year_label[std::pair{ s.year, s.label }]), 1);
            }
        }
        for (const auto &[label, count] : a.class_counts) {
            total += count;
        }
        ASSERT_EQ(total, a.size());
    }
}

}  // namespace
