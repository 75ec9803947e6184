#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "aero/aerometrics.hpp"
#include "aero/errors.hpp"

namespace aero {

/// One dataset row: design id joined to its aerodynamic coefficients.
struct ManifestRow {
    std::string design_id;
    AeroCoefficients coeffs;
};

/// Parsed coefficient CSV plus its origin. design_ids are unique; cd is
/// finite in every row.
struct DatasetManifest {
    std::vector<ManifestRow> rows;
    std::string source_path;

    std::vector<std::string> ids() const {
        std::vector<std::string> out;
        out.reserve(rows.size());
        for (const auto& r : rows) out.push_back(r.design_id);
        return out;
    }

    const ManifestRow* find(const std::string& id) const {
        for (const auto& r : rows) {
            if (r.design_id == id) return &r;
        }
        return nullptr;
    }
};

namespace detail {

/// Splits one CSV record; handles double-quoted fields with escaped quotes.
inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    fields.push_back(cur);
    return fields;
}

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

inline double parse_double_field(const std::string& field, std::size_t line_no,
                                 const std::string& column) {
    std::string t = trim(field);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc() || ptr != t.data() + t.size()) {
        throw ParseError("manifest row " + std::to_string(line_no) + ": column '" + column +
                         "' is not a number: '" + t + "'");
    }
    return value;
}

} // namespace detail

/// Loads the coefficient CSV. Columns are matched by name (order-insensitive);
/// `aliases` maps external header names onto the canonical design_id, cd, cl,
/// cl_f, cl_r, cm. design_id and cd are required; the lift/moment columns are
/// optional and default to NaN. When stl_dir is non-empty, every design must
/// have <design_id>.stl there.
inline DatasetManifest load_manifest(const std::string& path, const std::string& stl_dir = "",
                                     const std::map<std::string, std::string>& aliases = {}) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path);

    std::string line;
    if (!std::getline(in, line)) throw ParseError("manifest is empty: " + path);
    std::vector<std::string> header = detail::split_csv_line(line);
    std::unordered_map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) {
        std::string name = detail::trim(header[i]);
        auto alias = aliases.find(name);
        if (alias != aliases.end()) name = alias->second;
        col[name] = i;
    }
    for (const char* required : {"design_id", "cd"}) {
        if (!col.count(required)) throw MissingColumn(std::string("manifest: missing column '") +
                                                      required + "' in " + path);
    }
    auto optional_col = [&](const char* name) -> std::ptrdiff_t {
        auto it = col.find(name);
        return it == col.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
    };
    const std::size_t id_col = col["design_id"];
    const std::size_t cd_col = col["cd"];
    const std::ptrdiff_t cl_col = optional_col("cl");
    const std::ptrdiff_t clf_col = optional_col("cl_f");
    const std::ptrdiff_t clr_col = optional_col("cl_r");
    const std::ptrdiff_t cm_col = optional_col("cm");

    DatasetManifest manifest;
    manifest.source_path = path;
    std::set<std::string> seen;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        std::vector<std::string> fields = detail::split_csv_line(line);
        if (fields.size() < header.size()) {
            throw ParseError("manifest row " + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " fields, got " +
                             std::to_string(fields.size()));
        }
        ManifestRow row;
        row.design_id = detail::trim(fields[id_col]);
        if (row.design_id.empty()) {
            throw ParseError("manifest row " + std::to_string(line_no) + ": empty design_id");
        }
        if (!seen.insert(row.design_id).second) {
            throw DuplicateId("manifest: duplicate design_id '" + row.design_id + "' at row " +
                              std::to_string(line_no));
        }
        row.coeffs.cd = detail::parse_double_field(fields[cd_col], line_no, "cd");
        if (!std::isfinite(row.coeffs.cd)) {
            throw ParseError("manifest row " + std::to_string(line_no) + ": cd is not finite");
        }
        const double nan = std::numeric_limits<double>::quiet_NaN();
        row.coeffs.cl = cl_col >= 0 ? detail::parse_double_field(fields[static_cast<std::size_t>(cl_col)], line_no, "cl") : nan;
        row.coeffs.cl_f = clf_col >= 0 ? detail::parse_double_field(fields[static_cast<std::size_t>(clf_col)], line_no, "cl_f") : nan;
        row.coeffs.cl_r = clr_col >= 0 ? detail::parse_double_field(fields[static_cast<std::size_t>(clr_col)], line_no, "cl_r") : nan;
        row.coeffs.cm = cm_col >= 0 ? detail::parse_double_field(fields[static_cast<std::size_t>(cm_col)], line_no, "cm") : nan;
        manifest.rows.push_back(std::move(row));
    }
    if (manifest.rows.empty()) throw ParseError("manifest has no data rows: " + path);

    if (!stl_dir.empty()) {
        std::vector<std::string> missing;
        for (const auto& row : manifest.rows) {
            std::filesystem::path p = std::filesystem::path(stl_dir) / (row.design_id + ".stl");
            if (!std::filesystem::exists(p)) missing.push_back(row.design_id);
        }
        if (!missing.empty()) {
            std::string msg = "manifest: no STL found for " + std::to_string(missing.size()) +
                              " design(s):";
            for (const auto& id : missing) msg += " " + id;
            throw MissingStl(msg);
        }
    }
    return manifest;
}

} // namespace aero
