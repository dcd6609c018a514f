#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace mg {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Piecewise-linear time series: exact at sample points, linear between,
// constant beyond both ends.
struct LoadProfile {
    std::vector<double> time_s;  // strictly increasing
    std::vector<double> power_w; // >= 0

    double at(double t) const;
};

struct EnvSample {
    double irradiance_wm2;
    double temp_c;
};

struct EnvProfile {
    std::vector<double> time_s;
    std::vector<double> irradiance_wm2;
    std::vector<double> temp_c;

    EnvSample at(double t) const;
};

// CSV with header "time_s,power_w".
LoadProfile parse_load_csv(const std::filesystem::path& file);

// CSV with header "time_s,irradiance_wm2,temp_c".
EnvProfile parse_env_csv(const std::filesystem::path& file);

} // namespace mg
