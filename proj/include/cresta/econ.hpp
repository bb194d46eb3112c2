#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cresta/error.hpp"
#include "cresta/model.hpp"
#include "cresta/stats.hpp"

namespace cresta::econ {

enum class CovType { unadjusted, robust_cluster_entity };

inline std::string_view to_string(CovType c) {
    return c == CovType::unadjusted ? "Unadjusted" : "Robust";
}

inline std::optional<CovType> cov_type_from_string(std::string_view s) {
    if (s == "unadjusted") return CovType::unadjusted;
    if (s == "robust_cluster_entity") return CovType::robust_cluster_entity;
    return std::nullopt;
}

// Which regression to run on a panel. climate_vars and structural_vars are
// registry names; their order fixes the design-matrix column order.
struct ModelSpec {
    std::string response;
    std::vector<std::string> climate_vars;
    std::vector<std::string> structural_vars;
    bool intercept = true;
    bool entity_effects = false;
    bool lag_dependent = false;  // adds rho * R_{i,t-1}; system_gmm only
    CovType cov_type = CovType::unadjusted;

    std::vector<std::string> regressors() const {
        std::vector<std::string> out = climate_vars;
        out.insert(out.end(), structural_vars.begin(), structural_vars.end());
        return out;
    }

    void validate(const Panel& panel) const {
        if (!panel.variable_index(response))
            throw Error(Errc::invalid_argument,
                        "response '" + response + "' not in panel registry");
        std::set<std::string> seen;
        for (const auto& r : regressors()) {
            if (!panel.variable_index(r))
                throw Error(Errc::invalid_argument, "regressor '" + r + "' not in panel registry");
            if (r == response)
                throw Error(Errc::invalid_argument,
                            "response '" + response + "' may not appear among regressors");
            if (!seen.insert(r).second)
                throw Error(Errc::invalid_argument, "regressor '" + r + "' listed twice");
        }
    }
};

struct EstimationResult {
    std::vector<std::string> names;
    Eigen::VectorXd coefficients;
    Eigen::VectorXd std_errors;
    Eigen::VectorXd t_stats;
    Eigen::VectorXd p_values;
    Eigen::VectorXd ci_lower;
    Eigen::VectorXd ci_upper;
    double r2 = 0;  // the estimator's own objective R-squared
    double r2_within = 0;
    double r2_between = 0;
    double r2_overall = 0;
    double log_likelihood = 0;
    int n_obs = 0;
    int df = 0;
    std::string estimator;
    std::string cov_label;
    std::string dep_variable;
    std::map<std::string, double> entity_effects;  // within estimator only
    std::vector<std::string> warnings;
};

struct DesignData {
    Eigen::VectorXd y;
    Eigen::MatrixXd X;
    std::vector<std::string> names;     // column names, intercept first when present
    std::vector<std::string> clusters;  // entity label per row
    std::vector<int> row_obs;           // design row -> panel observation index
};

// ---------------------------------------------------------------------------
// Design matrices
// ---------------------------------------------------------------------------

inline DesignData design_matrices(const Panel& panel, const ModelSpec& spec) {
    spec.validate(panel);
    const auto regs = spec.regressors();
    const int resp = *panel.variable_index(spec.response);
    std::vector<int> reg_idx;
    for (const auto& r : regs) reg_idx.push_back(*panel.variable_index(r));

    std::vector<int> kept;
    for (std::size_t i = 0; i < panel.n_rows(); ++i) {
        const auto& obs = panel.observations()[i];
        if (!obs.cells[resp]) continue;
        bool complete = true;
        for (int j : reg_idx)
            if (!obs.cells[j]) complete = false;
        if (complete) kept.push_back(static_cast<int>(i));
    }

    const int k = static_cast<int>(regs.size()) + (spec.intercept ? 1 : 0);
    const int n = static_cast<int>(kept.size());
    if (n < k + 1)
        throw Error(Errc::insufficient_rows,
                    "need at least " + std::to_string(k + 1) + " complete rows, have " +
                        std::to_string(n));

    DesignData d;
    d.y.resize(n);
    d.X.resize(n, k);
    if (spec.intercept) d.names.push_back("const");
    d.names.insert(d.names.end(), regs.begin(), regs.end());
    for (int r = 0; r < n; ++r) {
        const auto& obs = panel.observations()[kept[r]];
        d.y(r) = *obs.cells[resp];
        int c = 0;
        if (spec.intercept) d.X(r, c++) = 1.0;
        for (int j : reg_idx) d.X(r, c++) = *obs.cells[j];
        d.clusters.push_back(obs.country.code);
        d.row_obs.push_back(kept[r]);
    }
    return d;
}

// ---------------------------------------------------------------------------
// Shared numerics
// ---------------------------------------------------------------------------

namespace detail {

constexpr double kRankTol = 1e-10;

// Least squares with an explicit relative rank tolerance. Throws
// RankDeficient naming the first dependent column.
inline Eigen::VectorXd solve_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                 const std::vector<std::string>& names) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(kRankTol);
    if (qr.rank() < X.cols()) {
        const auto perm = qr.colsPermutation().indices();
        const int bad = perm(qr.rank());
        const std::string name =
            bad < static_cast<int>(names.size()) ? names[bad] : std::to_string(bad);
        throw Error(Errc::rank_deficient, "design matrix is rank deficient; column '" + name +
                                              "' is linearly dependent");
    }
    return qr.solve(y);
}

inline Eigen::MatrixXd xtx_inverse(const Eigen::MatrixXd& X) {
    const Eigen::MatrixXd xtx = X.transpose() * X;
    return xtx.ldlt().solve(Eigen::MatrixXd::Identity(X.cols(), X.cols()));
}

struct R2Set {
    double within = 0, between = 0, overall = 0;
};

// R-squared family computed from one coefficient vector. `recenter` absorbs
// the level left free by estimators without an explicit intercept (within
// FE); any of the three may be negative.
inline R2Set r_squared(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                       const Eigen::VectorXd& beta, const std::vector<std::string>& clusters,
                       bool recenter) {
    const int n = static_cast<int>(y.size());
    std::map<std::string, std::vector<int>> groups;
    for (int i = 0; i < n; ++i) groups[clusters[i]].push_back(i);

    const Eigen::VectorXd fitted = X * beta;

    auto one_minus = [](double ssr, double sst) {
        return sst > 0 ? 1.0 - ssr / sst : 0.0;
    };

    R2Set r2;
    // Overall: raw rows.
    {
        Eigen::VectorXd resid = y - fitted;
        if (recenter) resid.array() -= resid.mean();
        const double sst = (y.array() - y.mean()).square().sum();
        r2.overall = one_minus(resid.squaredNorm(), sst);
    }
    // Within: entity-demeaned rows.
    {
        Eigen::VectorXd yd = y, fd = fitted;
        for (const auto& [g, idx] : groups) {
            double ym = 0, fm = 0;
            for (int i : idx) {
                ym += y(i);
                fm += fitted(i);
            }
            ym /= static_cast<double>(idx.size());
            fm /= static_cast<double>(idx.size());
            for (int i : idx) {
                yd(i) -= ym;
                fd(i) -= fm;
            }
        }
        const double ssr = (yd - fd).squaredNorm();
        const double sst = yd.squaredNorm();
        r2.within = one_minus(ssr, sst);
    }
    // Between: entity means, one point per entity.
    {
        const int g_count = static_cast<int>(groups.size());
        Eigen::VectorXd ym(g_count), fm(g_count);
        int g = 0;
        for (const auto& [name, idx] : groups) {
            double ys = 0, fs = 0;
            for (int i : idx) {
                ys += y(i);
                fs += fitted(i);
            }
            ym(g) = ys / static_cast<double>(idx.size());
            fm(g) = fs / static_cast<double>(idx.size());
            ++g;
        }
        Eigen::VectorXd resid = ym - fm;
        if (recenter) resid.array() -= resid.mean();
        const double sst = (ym.array() - ym.mean()).square().sum();
        r2.between = one_minus(resid.squaredNorm(), sst);
    }
    return r2;
}

inline double gaussian_log_likelihood(double ssr, int n) {
    if (ssr <= 0) ssr = 1e-300;  // perfectly fitted; keep the value finite
    return -0.5 * n * (std::log(2.0 * M_PI) + std::log(ssr / n) + 1.0);
}

inline void fill_inference(EstimationResult& r, const Eigen::MatrixXd& cov, int df) {
    const int k = static_cast<int>(r.coefficients.size());
    r.std_errors.resize(k);
    r.t_stats.resize(k);
    r.p_values.resize(k);
    r.ci_lower.resize(k);
    r.ci_upper.resize(k);
    r.df = df;
    if (df < 1) throw Error(Errc::insufficient_rows, "no degrees of freedom for inference");
    const double tcrit = stats::students_t_ppf(0.975, df);
    for (int i = 0; i < k; ++i) {
        r.std_errors(i) = std::sqrt(std::max(0.0, cov(i, i)));
        r.t_stats(i) = r.std_errors(i) > 0 ? r.coefficients(i) / r.std_errors(i) : 0.0;
        r.p_values(i) = stats::students_t_two_sided_p(r.t_stats(i), df);
        r.ci_lower(i) = r.coefficients(i) - tcrit * r.std_errors(i);
        r.ci_upper(i) = r.coefficients(i) + tcrit * r.std_errors(i);
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Cluster-robust covariance
// ---------------------------------------------------------------------------

// Sandwich estimator with the small-sample factor G/(G-1) * (n-1)/(n-k).
inline Eigen::MatrixXd cluster_robust_cov(const Eigen::MatrixXd& X, const Eigen::VectorXd& resid,
                                          const std::vector<std::string>& clusters) {
    const int n = static_cast<int>(X.rows());
    const int k = static_cast<int>(X.cols());
    std::map<std::string, std::vector<int>> groups;
    for (int i = 0; i < n; ++i) groups[clusters[i]].push_back(i);
    const int g_count = static_cast<int>(groups.size());
    if (g_count < 2)
        throw Error(Errc::single_cluster, "cluster-robust covariance needs at least 2 clusters");

    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
    for (const auto& [g, idx] : groups) {
        Eigen::VectorXd score = Eigen::VectorXd::Zero(k);
        for (int i : idx) score += X.row(i).transpose() * resid(i);
        meat += score * score.transpose();
    }
    const Eigen::MatrixXd bread = detail::xtx_inverse(X);
    const double factor = (static_cast<double>(g_count) / (g_count - 1)) *
                          (static_cast<double>(n - 1) / (n - k));
    return factor * bread * meat * bread;
}

// ---------------------------------------------------------------------------
// Pooled OLS
// ---------------------------------------------------------------------------

inline EstimationResult pooled_ols(const Panel& panel, const ModelSpec& spec) {
    DesignData d = design_matrices(panel, spec);
    const int n = static_cast<int>(d.y.size());
    const int k = static_cast<int>(d.X.cols());

    const Eigen::VectorXd beta = detail::solve_ols(d.X, d.y, d.names);
    const Eigen::VectorXd resid = d.y - d.X * beta;
    const double ssr = resid.squaredNorm();
    const int df = n - k;

    Eigen::MatrixXd cov;
    if (spec.cov_type == CovType::robust_cluster_entity) {
        cov = cluster_robust_cov(d.X, resid, d.clusters);
    } else {
        const double s2 = ssr / df;
        cov = s2 * detail::xtx_inverse(d.X);
    }

    EstimationResult r;
    r.names = d.names;
    r.coefficients = beta;
    r.estimator = "PooledOLS";
    r.cov_label = std::string(to_string(spec.cov_type));
    r.dep_variable = spec.response;
    r.n_obs = n;
    detail::fill_inference(r, cov, df);
    const auto r2 = detail::r_squared(d.y, d.X, beta, d.clusters, /*recenter=*/false);
    r.r2 = r2.overall;
    r.r2_within = r2.within;
    r.r2_between = r2.between;
    r.r2_overall = r2.overall;
    r.log_likelihood = detail::gaussian_log_likelihood(ssr, n);
    return r;
}

// ---------------------------------------------------------------------------
// Within (fixed-effects) estimator
// ---------------------------------------------------------------------------

inline EstimationResult within_fe(const Panel& panel, const ModelSpec& spec) {
    ModelSpec inner = spec;
    inner.intercept = false;  // absorbed by the entity demeaning
    DesignData d = design_matrices(panel, inner);
    const int n = static_cast<int>(d.y.size());
    const int k = static_cast<int>(d.X.cols());

    std::map<std::string, std::vector<int>> groups;
    for (int i = 0; i < n; ++i) groups[d.clusters[i]].push_back(i);
    for (const auto& [g, idx] : groups)
        if (idx.size() < 2)
            throw Error(Errc::singleton_entity,
                        "entity '" + g + "' has a single observation; cannot demean");
    const int g_count = static_cast<int>(groups.size());

    // Entity demeaning.
    Eigen::VectorXd yd = d.y;
    Eigen::MatrixXd Xd = d.X;
    std::map<std::string, double> y_mean;
    std::map<std::string, Eigen::RowVectorXd> x_mean;
    for (const auto& [g, idx] : groups) {
        double ym = 0;
        Eigen::RowVectorXd xm = Eigen::RowVectorXd::Zero(k);
        for (int i : idx) {
            ym += d.y(i);
            xm += d.X.row(i);
        }
        ym /= static_cast<double>(idx.size());
        xm /= static_cast<double>(idx.size());
        for (int i : idx) {
            yd(i) -= ym;
            Xd.row(i) -= xm;
        }
        y_mean[g] = ym;
        x_mean[g] = xm;
    }

    const Eigen::VectorXd beta = detail::solve_ols(Xd, yd, d.names);
    const Eigen::VectorXd resid = yd - Xd * beta;
    const double ssr = resid.squaredNorm();
    const int df = n - k - g_count;
    if (df <= 0)
        throw Error(Errc::insufficient_rows, "no residual degrees of freedom after demeaning");

    Eigen::MatrixXd cov;
    if (spec.cov_type == CovType::robust_cluster_entity) {
        cov = cluster_robust_cov(Xd, resid, d.clusters);
    } else {
        const double s2 = ssr / df;
        cov = s2 * detail::xtx_inverse(Xd);
    }

    EstimationResult r;
    r.names = d.names;
    r.coefficients = beta;
    r.estimator = "PanelOLS";
    r.cov_label = std::string(to_string(spec.cov_type));
    r.dep_variable = spec.response;
    r.n_obs = n;
    detail::fill_inference(r, cov, df);
    const auto r2 = detail::r_squared(d.y, d.X, beta, d.clusters, /*recenter=*/true);
    r.r2 = r2.within;
    r.r2_within = r2.within;
    r.r2_between = r2.between;
    r.r2_overall = r2.overall;
    r.log_likelihood = detail::gaussian_log_likelihood(ssr, n);
    for (const auto& [g, idx] : groups) r.entity_effects[g] = y_mean[g] - x_mean[g].dot(beta);
    return r;
}

// ---------------------------------------------------------------------------
// One-step System GMM
// ---------------------------------------------------------------------------

struct GmmOptions {
    bool collapse_diff_instruments = true;
};

struct GmmLayout {
    int diff_gmm_cols = 0;   // lagged-level instruments for the difference equation
    int level_gmm_cols = 0;  // lagged-difference instruments for the level equation
    int iv_cols = 0;         // exogenous regressors + constant
    int diff_rows = 0;
    int level_rows = 0;
    int total_cols() const { return diff_gmm_cols + level_gmm_cols + iv_cols; }
};

namespace detail {

struct GmmData {
    // Stacked per-entity blocks; rows are [diff rows..., level rows...].
    struct EntityBlock {
        std::vector<double> dep;
        std::vector<Eigen::RowVectorXd> reg;
        std::vector<Eigen::RowVectorXd> z;
        std::vector<int> year;      // equation period
        std::vector<bool> is_diff;  // true = difference-equation row
    };
    std::vector<EntityBlock> entities;
    std::vector<std::string> entity_names;
    std::vector<std::string> coef_names;
    GmmLayout layout;
};

inline GmmData build_gmm_system(const Panel& panel, const ModelSpec& spec,
                                const GmmOptions& opt) {
    spec.validate(panel);
    if (!spec.lag_dependent)
        throw Error(Errc::invalid_argument, "system_gmm requires lag_dependent = true");

    const int resp = *panel.variable_index(spec.response);
    const auto regs = spec.regressors();
    std::vector<int> reg_idx;
    for (const auto& rname : regs) reg_idx.push_back(*panel.variable_index(rname));
    const int n_exo = static_cast<int>(regs.size());

    // Per entity: year -> (response, exogenous values), complete rows only.
    struct Series {
        std::map<int, double> y;
        std::map<int, Eigen::RowVectorXd> x;
    };
    std::map<std::string, Series> series;
    int min_year = kMaxYear + 1, max_year = kMinYear - 1;
    for (const auto& obs : panel.observations()) {
        if (!obs.cells[resp]) continue;
        bool complete = true;
        Eigen::RowVectorXd x(n_exo);
        for (int j = 0; j < n_exo; ++j) {
            if (!obs.cells[reg_idx[j]]) {
                complete = false;
                break;
            }
            x(j) = *obs.cells[reg_idx[j]];
        }
        if (!complete) continue;
        auto& s = series[obs.country.code];
        s.y[obs.year] = *obs.cells[resp];
        s.x[obs.year] = x;
        min_year = std::min(min_year, obs.year);
        max_year = std::max(max_year, obs.year);
    }
    if (series.empty()) throw Error(Errc::insufficient_rows, "no complete rows for system GMM");

    bool any_entity_long_enough = false;
    for (const auto& [code, s] : series)
        if (s.y.size() >= 3) any_entity_long_enough = true;
    if (!any_entity_long_enough)
        throw Error(Errc::too_few_periods, "system GMM needs at least one entity with T >= 3");

    // Instrument layout.
    const int span = max_year - min_year;  // T-1 for a consecutive panel
    std::vector<int> diff_depths;          // collapsed: one column per lag depth
    for (int l = 2; l <= span; ++l) diff_depths.push_back(l);

    // Uncollapsed difference instruments: one column per (equation year, depth).
    std::vector<std::pair<int, int>> diff_year_depth;
    // Level instruments: one column per equation year.
    std::vector<int> level_years;
    for (int t = min_year + 2; t <= max_year; ++t) {
        level_years.push_back(t);
        if (!opt.collapse_diff_instruments)
            for (int l = 2; l <= t - min_year; ++l) diff_year_depth.emplace_back(t, l);
    }

    const int n_diff_cols = opt.collapse_diff_instruments
                                ? static_cast<int>(diff_depths.size())
                                : static_cast<int>(diff_year_depth.size());
    const int n_level_cols = static_cast<int>(level_years.size());
    const int n_iv = n_exo + (spec.intercept ? 1 : 0);
    const int q = n_diff_cols + n_level_cols + n_iv;
    const int k = 1 + n_exo + (spec.intercept ? 1 : 0);

    std::map<int, int> level_col_of_year;
    for (std::size_t i = 0; i < level_years.size(); ++i)
        level_col_of_year[level_years[i]] = n_diff_cols + static_cast<int>(i);
    std::map<std::pair<int, int>, int> diff_col_of_year_depth;
    for (std::size_t i = 0; i < diff_year_depth.size(); ++i)
        diff_col_of_year_depth[diff_year_depth[i]] = static_cast<int>(i);

    GmmData g;
    g.coef_names.push_back("lag(" + spec.response + ")");
    g.coef_names.insert(g.coef_names.end(), regs.begin(), regs.end());
    if (spec.intercept) g.coef_names.push_back("const");

    for (const auto& [code, s] : series) {
        GmmData::EntityBlock blk;
        auto has = [&](int t) { return s.y.count(t) > 0; };
        // Difference-equation rows.
        for (int t = min_year + 2; t <= max_year; ++t) {
            if (!(has(t) && has(t - 1) && has(t - 2))) continue;
            Eigen::RowVectorXd reg = Eigen::RowVectorXd::Zero(k);
            reg(0) = s.y.at(t - 1) - s.y.at(t - 2);
            for (int j = 0; j < n_exo; ++j) reg(1 + j) = s.x.at(t)(j) - s.x.at(t - 1)(j);
            // constant column stays 0 in differences
            Eigen::RowVectorXd z = Eigen::RowVectorXd::Zero(q);
            if (opt.collapse_diff_instruments) {
                for (std::size_t di = 0; di < diff_depths.size(); ++di) {
                    const int l = diff_depths[di];
                    if (has(t - l)) z(static_cast<int>(di)) = s.y.at(t - l);
                }
            } else {
                for (int l = 2; l <= t - min_year; ++l) {
                    if (!has(t - l)) continue;
                    auto it = diff_col_of_year_depth.find({t, l});
                    if (it != diff_col_of_year_depth.end()) z(it->second) = s.y.at(t - l);
                }
            }
            for (int j = 0; j < n_exo; ++j)
                z(n_diff_cols + n_level_cols + j) = s.x.at(t)(j) - s.x.at(t - 1)(j);
            blk.dep.push_back(s.y.at(t) - s.y.at(t - 1));
            blk.reg.push_back(reg);
            blk.z.push_back(z);
            blk.year.push_back(t);
            blk.is_diff.push_back(true);
        }
        // Level-equation rows.
        for (int t = min_year + 2; t <= max_year; ++t) {
            if (!(has(t) && has(t - 1) && has(t - 2))) continue;
            Eigen::RowVectorXd reg = Eigen::RowVectorXd::Zero(k);
            reg(0) = s.y.at(t - 1);
            for (int j = 0; j < n_exo; ++j) reg(1 + j) = s.x.at(t)(j);
            if (spec.intercept) reg(k - 1) = 1.0;
            Eigen::RowVectorXd z = Eigen::RowVectorXd::Zero(q);
            z(level_col_of_year.at(t)) = s.y.at(t - 1) - s.y.at(t - 2);
            for (int j = 0; j < n_exo; ++j) z(n_diff_cols + n_level_cols + j) = s.x.at(t)(j);
            if (spec.intercept) z(q - 1) = 1.0;
            blk.dep.push_back(s.y.at(t));
            blk.reg.push_back(reg);
            blk.z.push_back(z);
            blk.year.push_back(t);
            blk.is_diff.push_back(false);
        }
        if (blk.dep.empty()) continue;
        for (bool isd : blk.is_diff)
            (isd ? g.layout.diff_rows : g.layout.level_rows)++;
        g.entities.push_back(std::move(blk));
        g.entity_names.push_back(code);
    }
    g.layout.diff_gmm_cols = n_diff_cols;
    g.layout.level_gmm_cols = n_level_cols;
    g.layout.iv_cols = n_iv;
    if (g.entities.empty())
        throw Error(Errc::too_few_periods, "no usable GMM rows; every entity has T < 3");
    return g;
}

}  // namespace detail

// Instrument-layout preview (column counts by block) for a given panel/spec.
inline GmmLayout system_gmm_layout(const Panel& panel, const ModelSpec& spec,
                                   const GmmOptions& opt = {}) {
    return detail::build_gmm_system(panel, spec, opt).layout;
}

// One-step System GMM for the dynamic panel R_{i,t} = rho R_{i,t-1} + x'beta
// + eta_i + eps. Difference equation instrumented by lagged levels (depth >=
// 2, collapsed by default), level equation by the lagged first difference;
// exogenous regressors instrument themselves. Standard errors are robust,
// clustered by entity.
inline EstimationResult system_gmm(const Panel& panel, const ModelSpec& spec,
                                   const GmmOptions& opt = {}) {
    using Eigen::MatrixXd;
    using Eigen::VectorXd;
    const auto g = detail::build_gmm_system(panel, spec, opt);
    const int q = g.layout.total_cols();
    const int k = static_cast<int>(g.coef_names.size());
    const int n_rows = g.layout.diff_rows + g.layout.level_rows;
    const int n_entities = static_cast<int>(g.entities.size());

    EstimationResult r;
    r.names = g.coef_names;
    r.estimator = "SystemGMM";
    r.cov_label = "Robust";
    r.dep_variable = spec.response;
    r.n_obs = n_rows;
    if (q > n_entities)
        r.warnings.push_back("instrument count (" + std::to_string(q) + ") exceeds entity count (" +
                             std::to_string(n_entities) + "); estimates may be unreliable");

    // Moment blocks: M = sum_i Z_i' H_i Z_i, A = sum_i Z_i' X_i, b = sum_i Z_i' y_i.
    MatrixXd M = MatrixXd::Zero(q, q);
    MatrixXd A = MatrixXd::Zero(q, k);
    VectorXd b = VectorXd::Zero(q);
    for (const auto& blk : g.entities) {
        const int m = static_cast<int>(blk.dep.size());
        MatrixXd Z(m, q), X(m, k);
        VectorXd y(m);
        for (int i = 0; i < m; ++i) {
            Z.row(i) = blk.z[i];
            X.row(i) = blk.reg[i];
            y(i) = blk.dep[i];
        }
        // One-step H: 2 / -1 tridiagonal pattern (by period distance) on the
        // difference block, identity on the level block.
        MatrixXd H = MatrixXd::Zero(m, m);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < m; ++j) {
                if (blk.is_diff[i] && blk.is_diff[j]) {
                    if (i == j) H(i, j) = 2.0;
                    else if (std::abs(blk.year[i] - blk.year[j]) == 1) H(i, j) = -1.0;
                } else if (!blk.is_diff[i] && !blk.is_diff[j]) {
                    if (i == j) H(i, j) = 1.0;
                }
            }
        }
        M += Z.transpose() * H * Z;
        A += Z.transpose() * X;
        b += Z.transpose() * y;
    }

    Eigen::FullPivLU<MatrixXd> m_lu(M);
    m_lu.setThreshold(detail::kRankTol);
    if (!m_lu.isInvertible())
        throw Error(Errc::rank_deficient, "one-step GMM weighting matrix is singular");
    const MatrixXd WA = m_lu.solve(A);   // W * A with W = M^{-1}
    const VectorXd Wb = m_lu.solve(b);

    const MatrixXd G = A.transpose() * WA;  // A' W A
    Eigen::FullPivLU<MatrixXd> g_lu(G);
    g_lu.setThreshold(detail::kRankTol);
    if (!g_lu.isInvertible())
        throw Error(Errc::rank_deficient, "GMM normal equations are rank deficient");
    const VectorXd theta = g_lu.solve(A.transpose() * Wb);

    // Robust (cluster-by-entity) covariance.
    MatrixXd S = MatrixXd::Zero(q, q);
    for (const auto& blk : g.entities) {
        VectorXd zu = VectorXd::Zero(q);
        for (std::size_t i = 0; i < blk.dep.size(); ++i) {
            const double u = blk.dep[i] - blk.reg[i].dot(theta);
            zu += blk.z[i].transpose() * u;
        }
        S += zu * zu.transpose();
    }
    const MatrixXd Ginv = g_lu.inverse();
    const MatrixXd middle = WA.transpose() * S * WA;  // A' W S W A
    const MatrixXd cov = Ginv * middle * Ginv;

    r.coefficients = theta;
    detail::fill_inference(r, cov, n_rows - k);

    // Goodness of fit reported on the level-equation rows.
    {
        std::vector<double> yv;
        std::vector<Eigen::RowVectorXd> xv;
        std::vector<std::string> cl;
        for (std::size_t e = 0; e < g.entities.size(); ++e) {
            const auto& blk = g.entities[e];
            for (std::size_t i = 0; i < blk.dep.size(); ++i) {
                if (blk.is_diff[i]) continue;
                yv.push_back(blk.dep[i]);
                xv.push_back(blk.reg[i]);
                cl.push_back(g.entity_names[e]);
            }
        }
        if (!yv.empty()) {
            VectorXd y(yv.size());
            MatrixXd X(yv.size(), k);
            for (std::size_t i = 0; i < yv.size(); ++i) {
                y(static_cast<int>(i)) = yv[i];
                X.row(static_cast<int>(i)) = xv[i];
            }
            const auto r2 = detail::r_squared(y, X, theta, cl, /*recenter=*/!spec.intercept);
            r.r2 = r2.overall;
            r.r2_within = r2.within;
            r.r2_between = r2.between;
            r.r2_overall = r2.overall;
            const double ssr = (y - X * theta).squaredNorm();
            r.log_likelihood = detail::gaussian_log_likelihood(ssr, static_cast<int>(yv.size()));
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Report formatting
// ---------------------------------------------------------------------------

namespace detail {

// 4 decimal places; scientific (4 significant digits) below 1e-4 magnitude.
inline std::string fmt_value(double v) {
    char buf[48];
    if (v == 0.0) {
        std::snprintf(buf, sizeof(buf), "%.4f", 0.0);
    } else if (std::abs(v) < 1e-4) {
        std::snprintf(buf, sizeof(buf), "%.3e", v);
    } else {
        std::snprintf(buf, sizeof(buf), "%.4f", v);
    }
    return buf;
}

inline std::string pad_left(const std::string& s, std::size_t w) {
    return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
}

inline std::string pad_right(const std::string& s, std::size_t w) {
    return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}

}  // namespace detail

// Fixed-width estimation summary: header block with fit statistics, then one
// row per coefficient with Std. Err., T-stat, P-value and the 95% CI.
inline std::string format_report(const EstimationResult& r) {
    using detail::fmt_value;
    using detail::pad_left;
    using detail::pad_right;

    std::size_t name_w = 12;
    for (const auto& n : r.names) name_w = std::max(name_w, n.size() + 2);
    const std::size_t col_w = 11;
    const std::size_t total_w = std::max<std::size_t>(name_w + 6 * col_w, 78);

    std::ostringstream os;
    const std::string rule(total_w, '=');
    const std::string thin_rule(total_w, '-');

    auto header_line = [&](const std::string& ll, const std::string& lv, const std::string& rl,
                           const std::string& rv) {
        const std::size_t half = total_w / 2;
        std::string left = ll.empty() ? std::string() : ll;
        std::string lval = lv;
        std::string line = pad_right(left, 20) + pad_left(lval, half - 22) + "  ";
        line += pad_right(rl, 22) + pad_left(rv, total_w - line.size() - 22);
        return line;
    };

    os << rule << "\n";
    os << header_line("Dep. Variable:", r.dep_variable, "R-squared:", fmt_value(r.r2)) << "\n";
    os << header_line("Estimator:", r.estimator, "R-squared (Between):", fmt_value(r.r2_between))
       << "\n";
    os << header_line("No. Observations:", std::to_string(r.n_obs),
                      "R-squared (Within):", fmt_value(r.r2_within))
       << "\n";
    os << header_line("Cov. Estimator:", r.cov_label,
                      "R-squared (Overall):", fmt_value(r.r2_overall))
       << "\n";
    os << header_line("", "", "Log-likelihood:", fmt_value(r.log_likelihood)) << "\n";
    os << rule << "\n";
    os << pad_right("", name_w) << pad_left("Parameter", col_w) << pad_left("Std. Err.", col_w)
       << pad_left("T-stat", col_w) << pad_left("P-value", col_w) << pad_left("Lower CI", col_w)
       << pad_left("Upper CI", col_w) << "\n";
    os << thin_rule << "\n";
    for (std::size_t i = 0; i < r.names.size(); ++i) {
        os << pad_right(r.names[i], name_w) << pad_left(fmt_value(r.coefficients(i)), col_w)
           << pad_left(fmt_value(r.std_errors(i)), col_w)
           << pad_left(fmt_value(r.t_stats(i)), col_w) << pad_left(fmt_value(r.p_values(i)), col_w)
           << pad_left(fmt_value(r.ci_lower(i)), col_w)
           << pad_left(fmt_value(r.ci_upper(i)), col_w) << "\n";
    }
    os << rule << "\n";
    return os.str();
}

inline nlohmann::ordered_json to_json(const EstimationResult& r) {
    nlohmann::ordered_json j;
    j["dep_variable"] = r.dep_variable;
    j["estimator"] = r.estimator;
    j["cov_estimator"] = r.cov_label;
    j["n_obs"] = r.n_obs;
    j["df"] = r.df;
    j["r2"] = r.r2;
    j["r2_within"] = r.r2_within;
    j["r2_between"] = r.r2_between;
    j["r2_overall"] = r.r2_overall;
    j["log_likelihood"] = r.log_likelihood;
    nlohmann::ordered_json coeffs = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < r.names.size(); ++i) {
        nlohmann::ordered_json c;
        c["name"] = r.names[i];
        c["coef"] = r.coefficients(i);
        c["std_err"] = r.std_errors(i);
        c["t_stat"] = r.t_stats(i);
        c["p_value"] = r.p_values(i);
        c["ci_lower"] = r.ci_lower(i);
        c["ci_upper"] = r.ci_upper(i);
        coeffs.push_back(std::move(c));
    }
    j["coefficients"] = std::move(coeffs);
    if (!r.entity_effects.empty()) j["entity_effects"] = r.entity_effects;
    if (!r.warnings.empty()) j["warnings"] = r.warnings;
    return j;
}

}  // namespace cresta::econ
