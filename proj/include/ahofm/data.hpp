#pragma once

#include <Eigen/Core>

#include <ahofm/error.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace ahofm {

/// Feature matrix plus response.
struct Dataset {
    std::vector<std::string> feature_names;
    std::string target_name = "y";
    Eigen::MatrixXd x; ///< n x p, column j is feature j
    Eigen::VectorXd y;

    std::size_t n() const { return static_cast<std::size_t>(x.rows()); }
    std::size_t p() const { return static_cast<std::size_t>(x.cols()); }

    std::span<const double> column(std::size_t j) const
    {
        return {x.col(static_cast<Eigen::Index>(j)).data(), n()};
    }

    Dataset subset(std::span<const std::size_t> rows) const
    {
        Dataset out;
        out.feature_names = feature_names;
        out.target_name = target_name;
        out.x.resize(static_cast<Eigen::Index>(rows.size()), x.cols());
        out.y.resize(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const auto src = static_cast<Eigen::Index>(rows[r]);
            out.x.row(static_cast<Eigen::Index>(r)) = x.row(src);
            out.y(static_cast<Eigen::Index>(r)) = y(src);
        }
        return out;
    }
};

namespace detail {

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line, char delim)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(delim, start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline bool parse_double(std::string_view s, double& out)
{
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size() && !s.empty();
}

} // namespace detail

/// Shortest decimal text that reads back to the same double.
inline std::string format_double(double v)
{
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return ec == std::errc{} ? std::string(buf, ptr) : std::string("nan");
}

/// Reads a delimited file with a header row. Every column except the target
/// becomes a feature. Columns named in `log10_columns` are log10-transformed.
///
/// Errors report 1-based file line numbers (the header is line 1).
inline Dataset ingest_csv(const std::string& path, const std::string& target, char delimiter = ',',
                          const std::set<std::string>& log10_columns = {})
{
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open data file: " + path);

    std::string line;
    if (!std::getline(in, line) || detail::trim(line).empty()) throw InvalidArgument("empty data file: " + path);
    const auto header = detail::split(line, delimiter);
    std::vector<std::string> names(header.begin(), header.end());

    std::size_t target_col = names.size();
    for (std::size_t c = 0; c < names.size(); ++c) {
        if (names[c] == target) target_col = c;
    }
    if (target_col == names.size()) throw InvalidArgument("target column '" + target + "' not found in " + path);
    for (const auto& name : log10_columns) {
        if (std::find(names.begin(), names.end(), name) == names.end()) {
            throw InvalidArgument("log10 column '" + name + "' not found in " + path);
        }
    }

    std::vector<std::vector<double>> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split(line, delimiter);
        if (cells.size() != names.size()) {
            throw InvalidArgument("row " + std::to_string(lineno) + ": expected " + std::to_string(names.size()) +
                                  " cells, found " + std::to_string(cells.size()));
        }
        std::vector<double> vals(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (!detail::parse_double(cells[c], vals[c]) || !std::isfinite(vals[c])) {
                throw InvalidArgument("row " + std::to_string(lineno) + ", column '" + names[c] +
                                      "': cannot parse '" + std::string(cells[c]) + "' as a finite number");
            }
            if (log10_columns.count(names[c])) {
                if (!(vals[c] > 0.0)) {
                    throw InvalidArgument("row " + std::to_string(lineno) + ", column '" + names[c] +
                                          "': log10 of a non-positive value");
                }
                vals[c] = std::log10(vals[c]);
            }
        }
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw InvalidArgument("data file has a header but no rows: " + path);

    Dataset ds;
    ds.target_name = target;
    for (std::size_t c = 0; c < names.size(); ++c) {
        if (c != target_col) ds.feature_names.push_back(names[c]);
    }
    const auto n = static_cast<Eigen::Index>(rows.size());
    ds.x.resize(n, static_cast<Eigen::Index>(ds.feature_names.size()));
    ds.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        Eigen::Index j = 0;
        for (std::size_t c = 0; c < r.size(); ++c) {
            if (c == target_col) {
                ds.y(i) = r[c];
            } else {
                ds.x(i, j++) = r[c];
            }
        }
    }
    return ds;
}

/// Reads a feature-only table (for prediction): columns must match `names`
/// by name, extra columns are ignored.
inline Eigen::MatrixXd ingest_features(const std::string& path, const std::vector<std::string>& names,
                                       char delimiter = ',')
{
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open data file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw InvalidArgument("empty data file: " + path);
    const auto header = detail::split(line, delimiter);
    std::vector<std::size_t> cols;
    for (const auto& name : names) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw InvalidArgument("feature column '" + name + "' not found in " + path);
        cols.push_back(static_cast<std::size_t>(it - header.begin()));
    }
    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> bad_rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split(line, delimiter);
        std::vector<double> vals(cols.size(), 0.0);
        bool ok = cells.size() == header.size();
        for (std::size_t k = 0; ok && k < cols.size(); ++k) {
            ok = detail::parse_double(cells[cols[k]], vals[k]) && std::isfinite(vals[k]);
        }
        if (!ok) bad_rows.push_back(lineno);
        rows.push_back(std::move(vals));
    }
    if (!bad_rows.empty()) {
        std::string msg = "missing or non-finite feature cells in rows";
        for (std::size_t k = 0; k < bad_rows.size() && k < 20; ++k) msg += " " + std::to_string(bad_rows[k]);
        if (bad_rows.size() > 20) msg += " ...";
        throw InvalidArgument(msg);
    }
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t k = 0; k < cols.size(); ++k) {
            x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
        }
    }
    return x;
}

/// Writes features followed by the response, header row first.
inline void write_csv(std::ostream& out, const Dataset& ds)
{
    for (const auto& name : ds.feature_names) out << name << ',';
    out << ds.target_name << '\n';
    for (Eigen::Index i = 0; i < ds.x.rows(); ++i) {
        for (Eigen::Index j = 0; j < ds.x.cols(); ++j) out << format_double(ds.x(i, j)) << ',';
        out << format_double(ds.y(i)) << '\n';
    }
}

} // namespace ahofm
