#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cresta {

// Every failure the library can raise, by name. The CLI maps kinds to
// process exit codes (config=1, data=2, numeric=3).
enum class Errc {
    // ingest
    malformed_csv,
    unknown_sector,
    duplicate_key,
    conflicting_keys,
    incompatible_units,
    all_missing_series,
    // econ
    insufficient_rows,
    rank_deficient,
    singleton_entity,
    single_cluster,
    too_few_periods,
    // cluster
    empty_input,
    k_too_large,
    // geo
    too_few_samples,
    too_few_bins,
    singular_system,
    missing_covariate,
    rank_deficient_trend,
    collinear_samples,
    // raster
    empty_bbox,
    all_nodata,
    // synth
    factorization_failed,
    // cli / config
    invalid_config,
    io_failure,
    // shared type invariants
    invalid_argument,
};

enum class ErrorKind { config, data, numeric };

constexpr std::string_view errc_name(Errc c) {
    switch (c) {
        case Errc::malformed_csv: return "MalformedCsv";
        case Errc::unknown_sector: return "UnknownSector";
        case Errc::duplicate_key: return "DuplicateKey";
        case Errc::conflicting_keys: return "ConflictingKeys";
        case Errc::incompatible_units: return "IncompatibleUnits";
        case Errc::all_missing_series: return "AllMissingSeries";
        case Errc::insufficient_rows: return "InsufficientRows";
        case Errc::rank_deficient: return "RankDeficient";
        case Errc::singleton_entity: return "SingletonEntity";
        case Errc::single_cluster: return "SingleCluster";
        case Errc::too_few_periods: return "TooFewPeriods";
        case Errc::empty_input: return "EmptyInput";
        case Errc::k_too_large: return "KTooLarge";
        case Errc::too_few_samples: return "TooFewSamples";
        case Errc::too_few_bins: return "TooFewBins";
        case Errc::singular_system: return "SingularSystem";
        case Errc::missing_covariate: return "MissingCovariate";
        case Errc::rank_deficient_trend: return "RankDeficientTrend";
        case Errc::collinear_samples: return "CollinearSamples";
        case Errc::empty_bbox: return "EmptyBbox";
        case Errc::all_nodata: return "AllNodata";
        case Errc::factorization_failed: return "FactorizationFailed";
        case Errc::invalid_config: return "InvalidConfig";
        case Errc::io_failure: return "IoFailure";
        case Errc::invalid_argument: return "InvalidArgument";
    }
    return "UnknownError";
}

constexpr ErrorKind errc_kind(Errc c) {
    switch (c) {
        case Errc::rank_deficient:
        case Errc::singular_system:
        case Errc::rank_deficient_trend:
        case Errc::collinear_samples:
        case Errc::factorization_failed:
            return ErrorKind::numeric;
        case Errc::invalid_config:
            return ErrorKind::config;
        default:
            return ErrorKind::data;
    }
}

class Error : public std::runtime_error {
  public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const { return code_; }
    ErrorKind kind() const { return errc_kind(code_); }

  private:
    Errc code_;
};

}  // namespace cresta
