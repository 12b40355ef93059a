#ifndef MIXWHITTLE_INGEST_HPP
#define MIXWHITTLE_INGEST_HPP

// CSV ingestion for a response series and an exogenous driver.
//
// Dialect: comma separated, header row, dot decimals, empty cell = missing.
// The first column is time, either ISO year-month (YYYY-MM) or a plain
// integer index; the second is the value. The format is detected from the
// first data row and must hold for every row.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mixwhittle/design.hpp"
#include "mixwhittle/error.hpp"
#include "mixwhittle/spectral.hpp"

namespace mixwhittle {

class IngestError : public SpecError {
public:
    IngestError(const std::string& what, std::vector<std::size_t> rows = {})
        : SpecError(what), rows_(std::move(rows)) {}
    /// 1-based line numbers in the file (the header is line 1).
    const std::vector<std::size_t>& rows() const noexcept { return rows_; }

private:
    std::vector<std::size_t> rows_;
};

enum class TimeFormat { Monthly, Integer };

inline std::string_view to_string(TimeFormat f) { return f == TimeFormat::Monthly ? "monthly" : "integer"; }

/// Regular time axis: point i sits at start + i * step, in months for the
/// monthly format and in index units otherwise.
struct TimeAxis {
    TimeFormat format = TimeFormat::Integer;
    long start = 1;
    long step = 1;

    long at(std::size_t i) const { return start + static_cast<long>(i) * step; }

    std::string label(long key) const {
        if (format == TimeFormat::Integer) return std::to_string(key);
        const long year = key >= 0 ? key / 12 : (key - 11) / 12;
        const long month = key - 12 * year + 1;
        std::ostringstream os;
        os << year << '-' << (month < 10 ? "0" : "") << month;
        return os.str();
    }
    std::string label_at(std::size_t i) const { return label(at(i)); }

    /// Season index in 0..11: the calendar month, or the index modulo 12.
    int season(long key) const { return static_cast<int>(((key % 12) + 12) % 12); }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t from = 0;
    for (;;) {
        const auto at = line.find(',', from);
        out.push_back(trim(line.substr(from, at == std::string_view::npos ? std::string_view::npos : at - from)));
        if (at == std::string_view::npos) return out;
        from = at + 1;
    }
}

inline std::optional<long> parse_long(std::string_view s) {
    long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::optional<double> parse_double(std::string_view s) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

// YYYY-MM -> 12 * year + month - 1
inline std::optional<long> parse_month(std::string_view s) {
    if (s.size() != 7 || s[4] != '-') return std::nullopt;
    const auto y = parse_long(s.substr(0, 4));
    const auto m = parse_long(s.substr(5, 2));
    if (!y || !m || *m < 1 || *m > 12) return std::nullopt;
    return 12 * *y + *m - 1;
}

struct TimedColumn {
    TimeFormat format = TimeFormat::Integer;
    std::vector<long> keys;
    std::vector<std::optional<double>> values;
    std::vector<std::size_t> lines;
};

inline TimedColumn read_timed_csv(std::istream& in, const std::string& name) {
    TimedColumn out;
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        if (!header) {
            header = true;
            continue;
        }
        const auto cells = split_commas(line);
        if (cells.size() < 2) throw IngestError(name + ": expected time and value columns on line " + std::to_string(lineno), {lineno});
        std::optional<long> key;
        if (out.keys.empty()) {
            if ((key = parse_month(cells[0]))) out.format = TimeFormat::Monthly;
            else if ((key = parse_long(cells[0]))) out.format = TimeFormat::Integer;
        } else {
            key = out.format == TimeFormat::Monthly ? parse_month(cells[0]) : parse_long(cells[0]);
        }
        if (!key)
            throw IngestError(name + ": cannot parse time '" + std::string(cells[0]) + "' on line " + std::to_string(lineno),
                              {lineno});
        std::optional<double> value;
        if (!cells[1].empty()) {
            value = parse_double(cells[1]);
            if (!value)
                throw IngestError(name + ": cannot parse value '" + std::string(cells[1]) + "' on line " +
                                      std::to_string(lineno),
                                  {lineno});
        }
        out.keys.push_back(*key);
        out.values.push_back(value);
        out.lines.push_back(lineno);
    }
    if (!header) throw IngestError(name + ": file is empty (a header row is required)");
    if (out.keys.size() < 2) throw IngestError(name + ": at least two data rows are required");
    return out;
}

inline std::string join_lines(const std::vector<std::size_t>& rows) {
    std::string s;
    for (std::size_t i = 0; i < rows.size() && i < 20; ++i) s += (i ? ", " : "") + std::to_string(rows[i]);
    if (rows.size() > 20) s += ", ... (" + std::to_string(rows.size()) + " in total)";
    return s;
}

// The step is the most common difference, so one skipped row is reported at
// that row even when it falls at the start of the file.
inline TimeAxis regular_axis(const TimedColumn& c, const std::string& name) {
    std::map<long, std::size_t> diffs;
    for (std::size_t i = 1; i < c.keys.size(); ++i) ++diffs[c.keys[i] - c.keys[i - 1]];
    long step = 0;
    std::size_t best = 0;
    for (const auto& [d, k] : diffs)
        if (d > 0 && k > best) {
            step = d;
            best = k;
        }
    std::vector<std::size_t> bad;
    for (std::size_t i = 1; i < c.keys.size(); ++i)
        if (c.keys[i] - c.keys[i - 1] != step) bad.push_back(c.lines[i]);
    if (!bad.empty())
        throw IngestError(name + ": time column is not strictly increasing on a regular step; offending lines: " +
                              join_lines(bad),
                          bad);
    return {c.format, c.keys[0], step};
}

}  // namespace detail

struct SeriesData {
    ObservedSeries series;
    TimeAxis axis;
};

inline SeriesData read_series(std::istream& in, const std::string& name = "series") {
    const auto c = detail::read_timed_csv(in, name);
    SeriesData out;
    out.axis = detail::regular_axis(c, name);
    out.series.values.resize(c.keys.size(), 0.0);
    out.series.mask.resize(c.keys.size(), 0);
    for (std::size_t i = 0; i < c.keys.size(); ++i)
        if (c.values[i]) {
            out.series.values[i] = *c.values[i];
            out.series.mask[i] = 1;
        }
    out.series.validate();
    return out;
}

/// Subtracts from each value the mean over all values sharing its season
/// (calendar month for monthly data).
inline std::vector<double> deseasonalise(const std::vector<double>& values, const TimeAxis& axis) {
    double sum[12] = {};
    std::size_t count[12] = {};
    for (std::size_t i = 0; i < values.size(); ++i) {
        const int s = axis.season(axis.at(i));
        sum[s] += values[i];
        ++count[s];
    }
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const int s = axis.season(axis.at(i));
        out[i] = values[i] - sum[s] / double(count[s]);
    }
    return out;
}

/// Reads the exogenous driver and aligns it with the response axis: the
/// returned lead is the number of exogenous values before the first response
/// time. The driver must be complete and share the response's format and step.
inline ExogenousSeries read_exogenous(std::istream& in, const TimeAxis& response, bool deseasonalise_values,
                                      const std::string& name = "exogenous") {
    const auto c = detail::read_timed_csv(in, name);
    const auto axis = detail::regular_axis(c, name);
    if (axis.format != response.format) throw IngestError(name + ": time format differs from the response series");
    if (axis.step != response.step) throw IngestError(name + ": time step differs from the response series");
    std::vector<std::size_t> gaps;
    for (std::size_t i = 0; i < c.values.size(); ++i)
        if (!c.values[i]) gaps.push_back(c.lines[i]);
    if (!gaps.empty())
        throw IngestError(name + ": exogenous series has missing values (no imputation is done); lines: " +
                              detail::join_lines(gaps),
                          gaps);
    const long offset = response.start - axis.start;
    if (offset < 0 || offset % axis.step != 0)
        throw IngestError(name + ": exogenous series must start on the response grid at or before " +
                          response.label(response.start));
    std::vector<double> v(c.values.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = *c.values[i];
    if (deseasonalise_values) v = deseasonalise(v, axis);
    return {std::move(v), static_cast<std::size_t>(offset / axis.step)};
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open '" + path + "'");
    return in;
}

}  // namespace mixwhittle

#endif  // MIXWHITTLE_INGEST_HPP
