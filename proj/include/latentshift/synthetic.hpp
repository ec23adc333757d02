#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "latentshift/cohort.hpp"
#include "latentshift/rng.hpp"
#include "latentshift/schema.hpp"

namespace latentshift {

namespace detail {

inline double std_normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

inline double std_normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846);
}

/// Mean of N(mu, sigma^2) truncated to [lo, hi].
inline double truncated_mean(double mu, double sigma, double lo, double hi) {
    const double a = (lo - mu) / sigma;
    const double b = (hi - mu) / sigma;
    const double z = std_normal_cdf(b) - std_normal_cdf(a);
    if (z < 1e-300) {
        // Essentially all mass outside; the nearer bound is the limit.
        return mu < lo ? lo : hi;
    }
    return mu + sigma * (std_normal_pdf(a) - std_normal_pdf(b)) / z;
}

/// Mean of round(N(mu, sigma^2)) clipped to the integers in [lo, hi].
inline double rounded_clipped_mean(double mu, double sigma, double lo, double hi) {
    const long k_lo = static_cast<long>(std::ceil(lo));
    const long k_hi = static_cast<long>(std::floor(hi));
    double e = 0.0;
    for (long k = k_lo; k <= k_hi; ++k) {
        double p;
        if (k == k_lo) {
            p = std_normal_cdf((static_cast<double>(k) + 0.5 - mu) / sigma);
        } else if (k == k_hi) {
            p = 1.0 - std_normal_cdf((static_cast<double>(k) - 0.5 - mu) / sigma);
        } else {
            p = std_normal_cdf((static_cast<double>(k) + 0.5 - mu) / sigma) -
                std_normal_cdf((static_cast<double>(k) - 0.5 - mu) / sigma);
        }
        e += static_cast<double>(k) * p;
    }
    return e;
}

/// Location parameter whose truncated (or rounded+clipped) Gaussian has the
/// requested mean. Truncation biases the sample mean away from the location,
/// which for tight bounds (e.g. a strongly left-truncated score) would drag
/// cohort statistics off their targets; this bisection compensates.
inline double matched_location(double target_mean, double sigma, double lo, double hi,
                               bool integer_valued) {
    const double eps = 1e-9 * std::max(1.0, std::abs(target_mean));
    if (target_mean <= lo + eps || target_mean >= hi - eps) {
        throw ValidationError("synthetic: target mean " + std::to_string(target_mean) +
                              " not strictly inside plausible range [" + std::to_string(lo) +
                              ", " + std::to_string(hi) + "]");
    }
    auto mean_of = [&](double mu) {
        return integer_valued ? rounded_clipped_mean(mu, sigma, lo, hi)
                              : truncated_mean(mu, sigma, lo, hi);
    };
    double a = target_mean - 12.0 * sigma;
    double b = target_mean + 12.0 * sigma;
    for (int it = 0; it < 120; ++it) {
        const double mid = 0.5 * (a + b);
        if (mean_of(mid) < target_mean) {
            a = mid;
        } else {
            b = mid;
        }
    }
    return 0.5 * (a + b);
}

inline double sample_truncated(Rng& rng, double location, double sigma, double lo, double hi) {
    for (int tries = 0; tries < 1000; ++tries) {
        const double v = rng.next_gaussian(location, sigma);
        if (v >= lo && v <= hi) return v;
    }
    return std::min(hi, std::max(lo, location));
}

inline double sample_rounded(Rng& rng, double location, double sigma, double lo, double hi) {
    const double v = std::round(rng.next_gaussian(location, sigma));
    return std::min(std::floor(hi), std::max(std::ceil(lo), v));
}

} // namespace detail

struct GeneratorConfig {
    std::size_t n_dementia = 1343;
    std::size_t n_mci = 4021;
    bool longitudinal = false;
    double converter_fraction = 0.3; // MCI patients whose trajectory ends in dementia
    int visits_min = 2;
    int visits_max = 8;
    double drift_per_visit = 0.25; // fraction of the MCI-to-dementia mean gap per visit

    void validate() const {
        if (n_dementia == 0 || n_mci == 0) {
            throw ValidationError("generator: record counts must be positive");
        }
        if (longitudinal) {
            if (visits_min < 2 || visits_max < visits_min) {
                throw ValidationError("generator: visit range must satisfy 2 <= min <= max");
            }
            if (converter_fraction < 0.0 || converter_fraction > 1.0) {
                throw ValidationError("generator: converter fraction outside [0,1]");
            }
            if (drift_per_visit <= 0.0) {
                throw ValidationError("generator: drift per visit must be positive");
            }
        }
    }
};

/// Draws a cohort whose per-class, per-variable sample statistics track the
/// schema's means. Values are sampled from bound-truncated Gaussians whose
/// location is moment-matched (see detail::matched_location), then masked
/// missing independently at each variable's missing rate. Labels are never
/// missing. In longitudinal mode patients carry 2-8 visits; a converter's
/// visits drift from the MCI profile toward the dementia profile and the
/// trajectory ends with dementia-labeled visits.
inline Cohort generate_synthetic(const VariableSchema& schema, const GeneratorConfig& config, Rng& rng) {
    schema.validate();
    config.validate();

    const std::size_t nvars = schema.variables.size();

    // location/sigma per variable at drift d in [0,1]: 0 = MCI, 1 = dementia.
    std::map<long long, std::vector<std::pair<double, double>>> plan_cache;
    auto plan_for_drift = [&](double d) -> const std::vector<std::pair<double, double>>& {
        const long long key = static_cast<long long>(std::llround(d * 1e9));
        auto it = plan_cache.find(key);
        if (it != plan_cache.end()) return it->second;
        std::vector<std::pair<double, double>> plan(nvars);
        for (std::size_t j = 0; j < nvars; ++j) {
            const auto& v = schema.variables[j];
            const double mean = v.mci_mean + d * (v.dementia_mean - v.mci_mean);
            const double sigma = v.mci_std + d * (v.dementia_std - v.mci_std);
            plan[j] = {detail::matched_location(mean, sigma, v.plausible_min, v.plausible_max,
                                                v.integer_valued),
                       sigma};
        }
        return plan_cache.emplace(key, std::move(plan)).first->second;
    };

    auto sample_visit = [&](double drift) {
        const auto& plan = plan_for_drift(drift);
        std::vector<std::optional<double>> values(nvars);
        for (std::size_t j = 0; j < nvars; ++j) {
            const auto& v = schema.variables[j];
            const double drawn =
                v.integer_valued
                    ? detail::sample_rounded(rng, plan[j].first, plan[j].second, v.plausible_min,
                                             v.plausible_max)
                    : detail::sample_truncated(rng, plan[j].first, plan[j].second, v.plausible_min,
                                               v.plausible_max);
            const bool missing = rng.next_uniform() < v.missing_rate;
            if (!missing) values[j] = drawn;
        }
        return values;
    };

    Cohort cohort;
    cohort.schema = schema;
    std::size_t next_patient = 0;
    auto patient_id = [&]() {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "SYN-%06zu", next_patient++);
        return std::string(buf);
    };

    if (!config.longitudinal) {
        cohort.records.reserve(config.n_dementia + config.n_mci);
        for (std::size_t i = 0; i < config.n_dementia; ++i) {
            VisitRecord r;
            r.patient_id = patient_id();
            r.visit_index = 0;
            r.label = Label::Dementia;
            r.values = sample_visit(1.0);
            cohort.records.push_back(std::move(r));
        }
        for (std::size_t i = 0; i < config.n_mci; ++i) {
            VisitRecord r;
            r.patient_id = patient_id();
            r.visit_index = 0;
            r.label = Label::MCI;
            r.values = sample_visit(0.0);
            cohort.records.push_back(std::move(r));
        }
        return cohort;
    }

    std::size_t need_dem = config.n_dementia;
    std::size_t need_mci = config.n_mci;
    const std::uint64_t visit_span =
        static_cast<std::uint64_t>(config.visits_max - config.visits_min + 1);

    while (need_dem > 0 || need_mci > 0) {
        const bool make_mci_patient = need_mci > 0;
        const int n_visits = config.visits_min + static_cast<int>(rng.next_below(visit_span));
        const bool converter =
            make_mci_patient && rng.next_uniform() < config.converter_fraction;

        // Drift schedule decides labels; the record list is a prefix truncated
        // to whatever the remaining per-label budgets allow.
        std::vector<double> drifts;
        for (int v = 0; v < n_visits; ++v) {
            double d;
            if (!make_mci_patient) {
                d = 1.0;
            } else if (!converter) {
                d = 0.0;
            } else if (v == n_visits - 1) {
                d = 1.0;
            } else {
                d = std::min(1.0, v * config.drift_per_visit);
            }
            drifts.push_back(d);
        }

        const std::string id = patient_id();
        std::int64_t visit_index = 0;
        for (double d : drifts) {
            const bool is_dem = d >= 1.0;
            if (is_dem) {
                if (need_dem == 0) break;
            } else {
                if (need_mci == 0) break;
            }
            VisitRecord r;
            r.patient_id = id;
            r.visit_index = visit_index++;
            r.label = is_dem ? Label::Dementia : Label::MCI;
            r.values = sample_visit(d);
            cohort.records.push_back(std::move(r));
            (is_dem ? need_dem : need_mci) -= 1;
        }
    }
    return cohort;
}

} // namespace latentshift
