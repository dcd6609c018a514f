#include "mg/profiles.hpp"

#include <charconv>
#include <fstream>

namespace mg {

namespace {

double interp(const std::vector<double>& ts, const std::vector<double>& ys, double t) {
    if (t <= ts.front())
        return ys.front();
    if (t >= ts.back())
        return ys.back();
    auto it = std::upper_bound(ts.begin(), ts.end(), t);
    const std::size_t i = std::size_t(it - ts.begin());
    const double f = (t - ts[i - 1]) / (ts[i] - ts[i - 1]);
    return ys[i - 1] + f * (ys[i] - ys[i - 1]);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            out.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

double parse_num(const std::string& s, const std::filesystem::path& file, int line_no) {
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw ParseError(file.string() + ":" + std::to_string(line_no) +
                         ": not a number: '" + s + "'");
    return v;
}

std::string strip_cr(std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == '\n'))
        s.pop_back();
    return s;
}

template <typename RowFn>
void parse_csv(const std::filesystem::path& file, const std::string& header, RowFn row) {
    std::ifstream in(file);
    if (!in)
        throw ParseError("cannot open " + file.string());
    std::string line;
    if (!std::getline(in, line) || strip_cr(line) != header)
        throw ParseError(file.string() + ":1: expected header '" + header + "'");
    int line_no = 1;
    bool any = false;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty())
            continue;
        row(split_csv(line), line_no);
        any = true;
    }
    if (!any)
        throw ParseError(file.string() + ": empty data section");
}

} // namespace

double LoadProfile::at(double t) const { return interp(time_s, power_w, t); }

EnvSample EnvProfile::at(double t) const {
    return {interp(time_s, irradiance_wm2, t), interp(time_s, temp_c, t)};
}

LoadProfile parse_load_csv(const std::filesystem::path& file) {
    LoadProfile p;
    parse_csv(file, "time_s,power_w", [&](const std::vector<std::string>& f, int ln) {
        if (f.size() != 2)
            throw ParseError(file.string() + ":" + std::to_string(ln) + ": expected 2 columns");
        const double t = parse_num(f[0], file, ln);
        const double w = parse_num(f[1], file, ln);
        if (!p.time_s.empty() && t <= p.time_s.back())
            throw ParseError(file.string() + ":" + std::to_string(ln) +
                             ": time not strictly increasing");
        if (w < 0)
            throw ParseError(file.string() + ":" + std::to_string(ln) + ": negative power");
        p.time_s.push_back(t);
        p.power_w.push_back(w);
    });
    return p;
}

EnvProfile parse_env_csv(const std::filesystem::path& file) {
    EnvProfile p;
    parse_csv(file, "time_s,irradiance_wm2,temp_c",
              [&](const std::vector<std::string>& f, int ln) {
                  if (f.size() != 3)
                      throw ParseError(file.string() + ":" + std::to_string(ln) +
                                       ": expected 3 columns");
                  const double t = parse_num(f[0], file, ln);
                  const double g = parse_num(f[1], file, ln);
                  const double c = parse_num(f[2], file, ln);
                  if (!p.time_s.empty() && t <= p.time_s.back())
                      throw ParseError(file.string() + ":" + std::to_string(ln) +
                                       ": time not strictly increasing");
                  if (g < 0)
                      throw ParseError(file.string() + ":" + std::to_string(ln) +
                                       ": negative irradiance");
                  p.time_s.push_back(t);
                  p.irradiance_wm2.push_back(g);
                  p.temp_c.push_back(c);
              });
    return p;
}

} // namespace mg
