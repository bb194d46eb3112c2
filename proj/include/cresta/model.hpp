#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cresta/error.hpp"

namespace cresta {

// ---------------------------------------------------------------------------
// Country / sector identifiers
// ---------------------------------------------------------------------------

// Three-letter uppercase country code (ISO-3166-alpha-3 style).
struct CountryId {
    std::string code;

    static CountryId parse(std::string_view s) {
        if (s.size() != 3)
            throw Error(Errc::invalid_argument,
                        "country code must be exactly 3 characters, got '" + std::string(s) + "'");
        std::string up;
        for (char c : s) {
            char u = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
            if (u < 'A' || u > 'Z')
                throw Error(Errc::invalid_argument,
                            "country code must be A-Z only, got '" + std::string(s) + "'");
            up.push_back(u);
        }
        return CountryId{std::move(up)};
    }

    auto operator<=>(const CountryId&) const = default;
};

enum class Sector { agriculture, industry, services };

inline constexpr Sector kAllSectors[] = {Sector::agriculture, Sector::industry, Sector::services};

inline std::string_view to_string(Sector s) {
    switch (s) {
        case Sector::agriculture: return "agriculture";
        case Sector::industry: return "industry";
        case Sector::services: return "services";
    }
    return "?";
}

inline std::optional<Sector> sector_from_string(std::string_view s) {
    std::string low;
    for (char c : s) low.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (low == "agriculture") return Sector::agriculture;
    if (low == "industry") return Sector::industry;
    if (low == "services") return Sector::services;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Panel data
// ---------------------------------------------------------------------------

struct Variable {
    std::string name;
    std::string unit;  // may be empty

    bool operator==(const Variable&) const = default;
};

// One (country, year, sector) row. Cell values align with the owning
// Panel's registry; a disengaged optional is a missing (not yet imputed)
// cell. `imputed[i]` marks cells filled by ingest::impute.
struct PanelObservation {
    CountryId country;
    int year = 0;
    Sector sector = Sector::agriculture;
    std::vector<std::optional<double>> cells;
    std::vector<bool> imputed;

    bool operator==(const PanelObservation&) const = default;
};

constexpr int kMinYear = 1900;
constexpr int kMaxYear = 2100;

// Immutable container of panel rows, kept sorted by (country, year, sector)
// so every downstream computation iterates in one reproducible order.
class Panel {
  public:
    Panel() = default;

    // Sorts rows, resizes cell/flag vectors to the registry, and enforces
    // the invariants: unique keys, finite stored values, valid years.
    static Panel build(std::vector<Variable> registry, std::vector<PanelObservation> rows) {
        Panel p;
        p.registry_ = std::move(registry);
        for (std::size_t i = 0; i < p.registry_.size(); ++i) {
            if (p.name_to_index_.count(p.registry_[i].name))
                throw Error(Errc::invalid_argument,
                            "duplicate variable '" + p.registry_[i].name + "' in registry");
            p.name_to_index_[p.registry_[i].name] = static_cast<int>(i);
        }
        for (auto& r : rows) {
            if (r.year < kMinYear || r.year > kMaxYear)
                throw Error(Errc::invalid_argument,
                            "year " + std::to_string(r.year) + " outside [1900, 2100]");
            r.cells.resize(p.registry_.size());
            r.imputed.resize(p.registry_.size(), false);
            for (const auto& c : r.cells)
                if (c && !std::isfinite(*c))
                    throw Error(Errc::invalid_argument, "non-finite value in panel row for " +
                                                            r.country.code + "/" +
                                                            std::to_string(r.year));
        }
        std::sort(rows.begin(), rows.end(), [](const PanelObservation& a, const PanelObservation& b) {
            return std::tie(a.country.code, a.year, a.sector) <
                   std::tie(b.country.code, b.year, b.sector);
        });
        for (std::size_t i = 1; i < rows.size(); ++i) {
            const auto& a = rows[i - 1];
            const auto& b = rows[i];
            if (a.country == b.country && a.year == b.year && a.sector == b.sector)
                throw Error(Errc::duplicate_key,
                            "duplicate panel key (" + a.country.code + ", " +
                                std::to_string(a.year) + ", " + std::string(to_string(a.sector)) +
                                ")");
        }
        p.rows_ = std::move(rows);
        for (std::size_t i = 0; i < p.rows_.size(); ++i) {
            p.entity_index_[p.rows_[i].country.code].push_back(static_cast<int>(i));
            p.time_index_[p.rows_[i].year].push_back(static_cast<int>(i));
        }
        return p;
    }

    const std::vector<Variable>& registry() const { return registry_; }
    const std::vector<PanelObservation>& observations() const { return rows_; }
    const std::map<std::string, std::vector<int>>& entity_index() const { return entity_index_; }
    const std::map<int, std::vector<int>>& time_index() const { return time_index_; }

    std::optional<int> variable_index(std::string_view name) const {
        auto it = name_to_index_.find(std::string(name));
        if (it == name_to_index_.end()) return std::nullopt;
        return it->second;
    }

    std::size_t n_rows() const { return rows_.size(); }
    std::size_t n_variables() const { return registry_.size(); }

    // Rows of one sector, as a new panel sharing the registry.
    Panel filter_sector(Sector s) const {
        std::vector<PanelObservation> kept;
        for (const auto& r : rows_)
            if (r.sector == s) kept.push_back(r);
        return build(registry_, std::move(kept));
    }

    std::vector<CountryId> countries() const {
        std::vector<CountryId> out;
        for (const auto& [code, idx] : entity_index_) out.push_back(CountryId{code});
        return out;
    }

    bool operator==(const Panel& other) const {
        return registry_ == other.registry_ && rows_ == other.rows_;
    }

  private:
    std::vector<Variable> registry_;
    std::vector<PanelObservation> rows_;
    std::map<std::string, int> name_to_index_;
    std::map<std::string, std::vector<int>> entity_index_;
    std::map<int, std::vector<int>> time_index_;
};

// ---------------------------------------------------------------------------
// Geospatial samples
// ---------------------------------------------------------------------------

struct GeoSample {
    double x = 0;
    double y = 0;
    double value = 0;
    std::vector<std::pair<std::string, double>> covariates;  // sorted by name

    bool operator==(const GeoSample&) const = default;
};

constexpr double kCoordinateMergeTol = 1e-9;

// Sparse point observations, sorted lexicographically by (x, y).
// Samples closer than kCoordinateMergeTol are merged (values averaged).
class GeoSampleSet {
  public:
    static GeoSampleSet build(std::vector<GeoSample> samples, std::string crs_note = "") {
        if (samples.empty())
            throw Error(Errc::too_few_samples, "a GeoSampleSet needs at least one sample");
        for (auto& s : samples) {
            if (!std::isfinite(s.x) || !std::isfinite(s.y) || !std::isfinite(s.value))
                throw Error(Errc::invalid_argument, "non-finite sample coordinates or value");
            std::sort(s.covariates.begin(), s.covariates.end());
        }
        std::sort(samples.begin(), samples.end(), [](const GeoSample& a, const GeoSample& b) {
            return std::tie(a.x, a.y) < std::tie(b.x, b.y);
        });
        // Merge coincident points: average value and covariates.
        std::vector<GeoSample> merged;
        std::vector<int> group_size;
        for (auto& s : samples) {
            if (!merged.empty() && std::abs(merged.back().x - s.x) < kCoordinateMergeTol &&
                std::abs(merged.back().y - s.y) < kCoordinateMergeTol) {
                auto& m = merged.back();
                int n = ++group_size.back();
                m.value += (s.value - m.value) / n;
                for (std::size_t i = 0; i < m.covariates.size() && i < s.covariates.size(); ++i)
                    m.covariates[i].second += (s.covariates[i].second - m.covariates[i].second) / n;
            } else {
                merged.push_back(std::move(s));
                group_size.push_back(1);
            }
        }
        GeoSampleSet out;
        out.samples_ = std::move(merged);
        out.crs_note_ = std::move(crs_note);
        return out;
    }

    const std::vector<GeoSample>& samples() const { return samples_; }
    const std::string& crs_note() const { return crs_note_; }
    std::size_t size() const { return samples_.size(); }

  private:
    std::vector<GeoSample> samples_;
    std::string crs_note_;
};

inline double euclidean(double x0, double y0, double x1, double y1) {
    return std::hypot(x1 - x0, y1 - y0);
}

// ---------------------------------------------------------------------------
// Variogram model
// ---------------------------------------------------------------------------

enum class VariogramFamily { spherical, exponential, gaussian };

inline std::string_view to_string(VariogramFamily f) {
    switch (f) {
        case VariogramFamily::spherical: return "spherical";
        case VariogramFamily::exponential: return "exponential";
        case VariogramFamily::gaussian: return "gaussian";
    }
    return "?";
}

inline std::optional<VariogramFamily> variogram_family_from_string(std::string_view s) {
    if (s == "spherical") return VariogramFamily::spherical;
    if (s == "exponential") return VariogramFamily::exponential;
    if (s == "gaussian") return VariogramFamily::gaussian;
    return std::nullopt;
}

struct VariogramModel {
    VariogramFamily family = VariogramFamily::spherical;
    double nugget = 0;
    double sill = 1;
    double range_param = 1;

    static VariogramModel make(VariogramFamily family, double nugget, double sill, double range) {
        if (!(nugget >= 0))
            throw Error(Errc::invalid_argument, "variogram nugget must be >= 0");
        if (!(sill >= nugget))
            throw Error(Errc::invalid_argument, "variogram sill must be >= nugget");
        if (!(range > 0))
            throw Error(Errc::invalid_argument, "variogram range must be > 0");
        return VariogramModel{family, nugget, sill, range};
    }
};

// Semivariance gamma(h). gamma(0) = nugget by convention; the exponential and
// gaussian forms use the practical-range scaling (factor 3), so range_param is
// the distance at which gamma reaches ~95% of the sill.
inline double semivariance(const VariogramModel& m, double h) {
    const double psill = m.sill - m.nugget;
    switch (m.family) {
        case VariogramFamily::spherical: {
            if (h >= m.range_param) return m.sill;
            const double r = h / m.range_param;
            return m.nugget + psill * (1.5 * r - 0.5 * r * r * r);
        }
        case VariogramFamily::exponential:
            return m.nugget + psill * (1.0 - std::exp(-3.0 * h / m.range_param));
        case VariogramFamily::gaussian:
            return m.nugget +
                   psill * (1.0 - std::exp(-3.0 * h * h / (m.range_param * m.range_param)));
    }
    return m.sill;
}

// ---------------------------------------------------------------------------
// Deterministic pseudo-randomness
// ---------------------------------------------------------------------------

// SplitMix64 (Steele, Lea, Flood 2014). Counter-based, 64-bit state,
// identical stream on every platform for a given seed. Doubles come from
// the top 53 bits, uniform on [0, 1).
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) {
        // Rejection-free modulo is biased for huge n; n here is always small
        // (restart counts, row counts), so plain modulo is fine.
        return next_u64() % n;
    }

    std::uint64_t seed() const { return seed_; }

    // Per-worker derived stream: seed XOR worker index.
    Rng fork(std::uint64_t worker_index) const { return Rng(seed_ ^ worker_index); }

  private:
    std::uint64_t seed_;
    std::uint64_t state_;
};

}  // namespace cresta
