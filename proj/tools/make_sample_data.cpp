/**
 * @file
 * @brief Generates the bundled synthetic site: daily temperatures and peak bloom dates.
 *
 * Temperatures follow a seasonal cycle plus a per-year anomaly and AR(1) day-to-day noise. The bloom day is
 * the first day on which the forcing accumulated since March 1 (degree days above 5 °C) reaches a fixed
 * requirement. A few average cells and whole days are left out so the cleaning path is exercised.
 *
 * usage: make_sample_data <output_dir> [first_year] [last_year] [seed]
 */

#include "bloomcast/detail/random.hpp"
#include "bloomcast/phenology_data.hpp"

#include "fmt/core.h"
#include "fmt/os.h"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

int main(int argc, char **argv) {
    if (argc < 2) {
        fmt::print(stderr, "usage: {} <output_dir> [first_year] [last_year] [seed]\n", argv[0]);
        return 2;
    }
    const std::filesystem::path dir{ argv[1] };
    const int first_year = argc > 2 ? std::stoi(argv[2]) : 1991;
    const int last_year = argc > 3 ? std::stoi(argv[3]) : 2020;
    const std::uint64_t seed = argc > 4 ? std::stoull(argv[4]) : 20240401;
    std::filesystem::create_directories(dir);

    constexpr double two_pi = 6.283185307179586476925;
    constexpr double base_temperature = 5.0;
    constexpr double forcing_requirement = 150.0;
    constexpr int forcing_start = 60;
    constexpr int last_doy = 181;

    auto temperature = fmt::output_file((dir / "temperature.csv").string());
    auto bloom = fmt::output_file((dir / "bloom.csv").string());
    temperature.print("date,tmax_c,tmin_c,tavg_c\n");
    bloom.print("year,bloom_date\n");

    std::mt19937_64 rng{ seed };
    for (int year = first_year; year <= last_year; ++year) {
        const double anomaly = 1.5 * bloomcast::detail::standard_normal(rng) + 0.03 * (year - first_year);
        double noise = 0.0;
        double forcing = 0.0;
        int bloom_doy = 0;
        for (int doy = 1; doy <= last_doy; ++doy) {
            noise = 0.7 * noise + 1.6 * bloomcast::detail::standard_normal(rng);
            const double tavg = 13.0 - 12.0 * std::cos(two_pi * (doy - 18) / 365.25) + anomaly + noise;
            const double range = 7.0 + 1.5 * bloomcast::detail::standard_normal(rng);
            const double tmax = tavg + std::abs(range) / 2.0;
            const double tmin = tavg - std::abs(range) / 2.0;
            if (doy >= forcing_start && bloom_doy == 0) {
                forcing += std::max(0.0, tavg - base_temperature);
                if (forcing >= forcing_requirement) {
                    bloom_doy = doy;
                }
            }
            const double u = bloomcast::detail::uniform01(rng);
            if (u < 0.002) {
                continue;  // station outage: the whole day is missing
            }
            const std::string date = bloomcast::format_date(year, doy);
            if (u < 0.03) {
                temperature.print("{},{:.1f},{:.1f},\n", date, tmax, tmin);
            } else {
                temperature.print("{},{:.1f},{:.1f},{:.1f}\n", date, tmax, tmin, tavg);
            }
        }
        if (bloom_doy > 0) {
            bloom.print("{},{}\n", year, bloomcast::format_date(year, bloom_doy));
        }
    }
    return 0;
}
