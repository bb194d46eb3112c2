#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cresta/csv.hpp"
#include "cresta/error.hpp"
#include "cresta/model.hpp"

namespace cresta::ingest {

// ---------------------------------------------------------------------------
// Harmonization rules
// ---------------------------------------------------------------------------

// Affine rescale v' = factor*v + offset for one variable. When from_unit is
// nonempty the rule applies only to sources whose declared unit matches it;
// otherwise it applies to every source. to_unit is the unit recorded after
// conversion.
struct UnitConversion {
    double factor = 1.0;
    double offset = 0.0;
    std::string from_unit;
    std::string to_unit;
};

struct HarmonizationRules {
    std::map<std::string, UnitConversion> unit_conversions;  // variable -> rule
    std::map<std::string, std::string> country_aliases;      // source text -> 3-letter code
    std::optional<std::pair<int, int>> year_range;            // inclusive [min, max]
    std::map<std::string, std::string> rename;               // source column -> registry name

    void validate() const {
        for (const auto& [var, conv] : unit_conversions)
            if (conv.factor == 0.0)
                throw Error(Errc::invalid_argument,
                            "unit conversion factor for '" + var + "' must be nonzero");
        std::map<std::string, std::string> seen;  // code -> alias (injectivity per source)
        for (const auto& [alias, code] : country_aliases) {
            CountryId::parse(code);
            auto [it, inserted] = seen.emplace(code, alias);
            (void)it;
        }
    }
};

enum class ImputeMethod { linear_time, entity_mean, none };

inline std::string_view to_string(ImputeMethod m) {
    switch (m) {
        case ImputeMethod::linear_time: return "linear_time";
        case ImputeMethod::entity_mean: return "entity_mean";
        case ImputeMethod::none: return "none";
    }
    return "?";
}

inline std::optional<ImputeMethod> impute_method_from_string(std::string_view s) {
    if (s == "linear_time") return ImputeMethod::linear_time;
    if (s == "entity_mean") return ImputeMethod::entity_mean;
    if (s == "none") return ImputeMethod::none;
    return std::nullopt;
}

struct ImputationReport {
    std::size_t cells_imputed = 0;
    std::map<std::string, std::size_t> per_variable;
    ImputeMethod method_used = ImputeMethod::none;
};

namespace detail {

inline bool is_missing_token(std::string_view raw) {
    std::string t = csv::trim(raw);
    if (t.empty()) return true;
    std::string low;
    for (char c : t) low.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return low == "na" || low == "nan";
}

inline double parse_number(const std::string& raw, int line, const std::string& column) {
    const std::string t = csv::trim(raw);
    double value = 0;
    const char* begin = t.data();
    const char* end = t.data() + t.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end)
        throw Error(Errc::malformed_csv, "line " + std::to_string(line) + ", column '" + column +
                                             "': cannot parse number from '" + t + "'");
    return value;
}

// Header cell "name (unit)" or plain "name".
inline Variable parse_header_cell(const std::string& raw) {
    std::string t = csv::trim(raw);
    auto open = t.rfind(" (");
    if (open != std::string::npos && t.back() == ')') {
        Variable v;
        v.name = csv::trim(t.substr(0, open));
        v.unit = t.substr(open + 2, t.size() - open - 3);
        return v;
    }
    return Variable{t, ""};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// CSV panel ingestion
// ---------------------------------------------------------------------------

// Expects a header with country, year, sector columns (any order, after
// `rules.rename`); every other column becomes a registry variable in header
// order. Missing cells are "" / "NA" / "NaN" (case-insensitive). Country
// aliases resolve before the 3-letter code check, and rows outside
// rules.year_range are dropped.
inline Panel parse_panel_csv(std::string_view text, const HarmonizationRules& rules = {}) {
    rules.validate();
    const csv::Table table = csv::parse(text);

    int country_col = -1, year_col = -1, sector_col = -1;
    std::vector<Variable> registry;
    std::vector<int> var_cols;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        Variable v = detail::parse_header_cell(table.header[c]);
        if (auto it = rules.rename.find(v.name); it != rules.rename.end()) v.name = it->second;
        std::string low;
        for (char ch : v.name)
            low.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        if (low == "country") country_col = static_cast<int>(c);
        else if (low == "year") year_col = static_cast<int>(c);
        else if (low == "sector") sector_col = static_cast<int>(c);
        else {
            registry.push_back(std::move(v));
            var_cols.push_back(static_cast<int>(c));
        }
    }
    if (country_col < 0 || year_col < 0 || sector_col < 0)
        throw Error(Errc::malformed_csv, "header must include country, year and sector columns");
    if (registry.empty())
        throw Error(Errc::malformed_csv, "no variable columns beyond country/year/sector");

    std::map<std::tuple<std::string, int, Sector>, int> first_line_of_key;
    std::vector<PanelObservation> rows;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& rec = table.rows[r];
        const int line = table.line_numbers[r];

        std::string country_raw = csv::trim(rec[country_col]);
        if (auto it = rules.country_aliases.find(country_raw); it != rules.country_aliases.end())
            country_raw = it->second;
        CountryId country;
        try {
            country = CountryId::parse(country_raw);
        } catch (const Error& e) {
            throw Error(Errc::malformed_csv,
                        "line " + std::to_string(line) + ": unparseable country '" +
                            csv::trim(rec[country_col]) + "'");
        }

        int year = 0;
        {
            const std::string t = csv::trim(rec[year_col]);
            auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), year);
            if (ec != std::errc() || ptr != t.data() + t.size())
                throw Error(Errc::malformed_csv,
                            "line " + std::to_string(line) + ": unparseable year '" + t + "'");
        }
        if (rules.year_range &&
            (year < rules.year_range->first || year > rules.year_range->second))
            continue;

        const std::string sector_raw = csv::trim(rec[sector_col]);
        auto sector = sector_from_string(sector_raw);
        if (!sector)
            throw Error(Errc::unknown_sector, "line " + std::to_string(line) +
                                                  ": unknown sector '" + sector_raw + "'");

        auto key = std::make_tuple(country.code, year, *sector);
        if (auto it = first_line_of_key.find(key); it != first_line_of_key.end())
            throw Error(Errc::duplicate_key,
                        "duplicate key (" + country.code + ", " + std::to_string(year) + ", " +
                            sector_raw + ") at lines " + std::to_string(it->second) + " and " +
                            std::to_string(line));
        first_line_of_key.emplace(key, line);

        PanelObservation obs;
        obs.country = country;
        obs.year = year;
        obs.sector = *sector;
        obs.cells.resize(registry.size());
        obs.imputed.assign(registry.size(), false);
        for (std::size_t v = 0; v < registry.size(); ++v) {
            const std::string& raw = rec[var_cols[v]];
            if (detail::is_missing_token(raw)) continue;
            obs.cells[v] = detail::parse_number(raw, line, registry[v].name);
        }
        rows.push_back(std::move(obs));
    }
    return Panel::build(std::move(registry), std::move(rows));
}

// ---------------------------------------------------------------------------
// Harmonization
// ---------------------------------------------------------------------------

// Merge panels into one: affine unit conversions applied per source, registry
// = union of variables (name-sorted), variables absent in a source appear as
// missing for its rows. Output is independent of the input list order.
inline Panel harmonize(const std::vector<Panel>& panels, const HarmonizationRules& rules = {}) {
    rules.validate();
    if (panels.empty()) throw Error(Errc::empty_input, "harmonize: no panels given");

    // Union registry with unit consistency check.
    std::map<std::string, std::string> unit_of;
    for (const auto& p : panels) {
        for (const auto& v : p.registry()) {
            std::string unit = v.unit;
            if (auto it = rules.unit_conversions.find(v.name);
                it != rules.unit_conversions.end()) {
                const auto& conv = it->second;
                if (conv.from_unit.empty() || conv.from_unit == v.unit) unit = conv.to_unit;
            }
            auto [it, inserted] = unit_of.emplace(v.name, unit);
            if (!inserted) {
                if (it->second.empty()) it->second = unit;
                else if (!unit.empty() && unit != it->second)
                    throw Error(Errc::incompatible_units,
                                "variable '" + v.name + "' has units '" + it->second + "' and '" +
                                    unit + "' with no conversion rule");
            }
        }
    }
    std::vector<Variable> registry;
    for (const auto& [name, unit] : unit_of) registry.push_back(Variable{name, unit});

    std::map<std::string, int> reg_index;
    for (std::size_t i = 0; i < registry.size(); ++i)
        reg_index[registry[i].name] = static_cast<int>(i);

    std::map<std::tuple<std::string, int, Sector>, std::string> seen_keys;  // key -> source tag
    std::vector<PanelObservation> rows;
    for (std::size_t pi = 0; pi < panels.size(); ++pi) {
        const Panel& p = panels[pi];
        // Which source variables get converted, and how.
        std::vector<std::pair<double, double>> affine(p.registry().size(), {1.0, 0.0});
        for (std::size_t v = 0; v < p.registry().size(); ++v) {
            if (auto it = rules.unit_conversions.find(p.registry()[v].name);
                it != rules.unit_conversions.end()) {
                const auto& conv = it->second;
                if (conv.from_unit.empty() || conv.from_unit == p.registry()[v].unit)
                    affine[v] = {conv.factor, conv.offset};
            }
        }
        for (const auto& obs : p.observations()) {
            std::string code = obs.country.code;
            if (auto it = rules.country_aliases.find(code); it != rules.country_aliases.end())
                code = it->second;
            if (rules.year_range &&
                (obs.year < rules.year_range->first || obs.year > rules.year_range->second))
                continue;

            auto key = std::make_tuple(code, obs.year, obs.sector);
            auto [kit, inserted] = seen_keys.emplace(key, "panel #" + std::to_string(pi));
            if (!inserted)
                throw Error(Errc::conflicting_keys,
                            "key (" + code + ", " + std::to_string(obs.year) + ", " +
                                std::string(to_string(obs.sector)) + ") present in " +
                                kit->second + " and panel #" + std::to_string(pi));

            PanelObservation out;
            out.country = CountryId{code};
            out.year = obs.year;
            out.sector = obs.sector;
            out.cells.resize(registry.size());
            out.imputed.assign(registry.size(), false);
            for (std::size_t v = 0; v < p.registry().size(); ++v) {
                const int dst = reg_index.at(p.registry()[v].name);
                if (obs.cells[v]) {
                    out.cells[dst] = affine[v].first * *obs.cells[v] + affine[v].second;
                    out.imputed[dst] = obs.imputed[v];
                }
            }
            rows.push_back(std::move(out));
        }
    }
    return Panel::build(std::move(registry), std::move(rows));
}

// ---------------------------------------------------------------------------
// Imputation
// ---------------------------------------------------------------------------

// Fill missing cells per (country, sector, variable) series. linear_time
// interpolates interior gaps linearly in the year and carries the nearest
// observed value across boundary gaps; entity_mean uses the series mean.
// Observed cells are never altered.
inline std::pair<Panel, ImputationReport> impute(const Panel& panel, ImputeMethod method) {
    ImputationReport report;
    report.method_used = method;
    for (const auto& v : panel.registry()) report.per_variable[v.name] = 0;
    if (method == ImputeMethod::none) return {panel, report};

    std::vector<PanelObservation> rows(panel.observations().begin(), panel.observations().end());

    // Group row indices by (country, sector); rows are already year-sorted
    // within a group because the panel sorts by (country, year, sector).
    std::map<std::pair<std::string, Sector>, std::vector<int>> groups;
    for (std::size_t i = 0; i < rows.size(); ++i)
        groups[{rows[i].country.code, rows[i].sector}].push_back(static_cast<int>(i));

    for (const auto& [key, idx] : groups) {
        for (std::size_t v = 0; v < panel.registry().size(); ++v) {
            std::vector<std::pair<int, double>> observed;  // (year, value)
            bool any_missing = false;
            for (int r : idx) {
                if (rows[r].cells[v]) observed.emplace_back(rows[r].year, *rows[r].cells[v]);
                else any_missing = true;
            }
            if (!any_missing) continue;
            if (observed.empty())
                throw Error(Errc::all_missing_series,
                            "series (" + key.first + ", " + std::string(to_string(key.second)) +
                                ", " + panel.registry()[v].name + ") has no observed values");

            double mean = 0;
            if (method == ImputeMethod::entity_mean) {
                for (const auto& [y, val] : observed) mean += val;
                mean /= static_cast<double>(observed.size());
            }

            for (int r : idx) {
                if (rows[r].cells[v]) continue;
                double filled = 0;
                if (method == ImputeMethod::entity_mean) {
                    filled = mean;
                } else {
                    const int y = rows[r].year;
                    if (y <= observed.front().first) {
                        filled = observed.front().second;
                    } else if (y >= observed.back().first) {
                        filled = observed.back().second;
                    } else {
                        auto hi = std::lower_bound(
                            observed.begin(), observed.end(), std::make_pair(y, 0.0),
                            [](const auto& a, const auto& b) { return a.first < b.first; });
                        auto lo = std::prev(hi);
                        const double t = static_cast<double>(y - lo->first) /
                                         static_cast<double>(hi->first - lo->first);
                        filled = lo->second + t * (hi->second - lo->second);
                    }
                }
                rows[r].cells[v] = filled;
                rows[r].imputed[v] = true;
                ++report.cells_imputed;
                ++report.per_variable[panel.registry()[v].name];
            }
        }
    }
    return {Panel::build(panel.registry(), std::move(rows)), report};
}

}  // namespace cresta::ingest
