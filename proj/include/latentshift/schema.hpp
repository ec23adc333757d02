#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "latentshift/errors.hpp"

namespace latentshift {

inline constexpr std::size_t kVariableCount = 16;

/// Per-variable cohort statistics and plausibility bounds, in native units.
struct VariableSpec {
    std::string name;
    double dementia_mean = 0.0;
    double dementia_std = 1.0;
    double mci_mean = 0.0;
    double mci_std = 1.0;
    double missing_rate = 0.0;
    double plausible_min = 0.0;
    double plausible_max = 1.0;
    bool integer_valued = false; // sampled as a rounded, clipped integer
};

struct VariableSchema {
    std::vector<VariableSpec> variables;
    std::vector<std::string> volumetric_set; // the 5 names divided by intracranial volume
    std::string icv_name;

    void validate() const {
        if (variables.size() != kVariableCount) {
            throw ValidationError("schema: expected " + std::to_string(kVariableCount) +
                                  " variables, got " + std::to_string(variables.size()));
        }
        std::set<std::string> names;
        for (const auto& v : variables) {
            if (!names.insert(v.name).second) {
                throw ValidationError("schema: duplicate variable name " + v.name);
            }
            if (!(v.dementia_std > 0.0) || !(v.mci_std > 0.0)) {
                throw ValidationError("schema: non-positive std for " + v.name);
            }
            if (!(v.plausible_min < v.plausible_max)) {
                throw ValidationError("schema: empty plausible range for " + v.name);
            }
            if (v.missing_rate < 0.0 || v.missing_rate > 1.0) {
                throw ValidationError("schema: missing rate outside [0,1] for " + v.name);
            }
        }
        for (const auto& vol : volumetric_set) {
            if (!names.count(vol)) {
                throw ValidationError("schema: volumetric variable " + vol + " not in schema");
            }
        }
        if (!names.count(icv_name)) {
            throw ValidationError("schema: ICV variable " + icv_name + " not in schema");
        }
        if (std::find(volumetric_set.begin(), volumetric_set.end(), icv_name) != volumetric_set.end()) {
            throw ValidationError("schema: ICV variable cannot be in the volumetric set");
        }
    }

    std::size_t index_of(const std::string& name) const {
        for (std::size_t i = 0; i < variables.size(); ++i) {
            if (variables[i].name == name) return i;
        }
        throw ValidationError("schema: unknown variable " + name);
    }

    bool is_volumetric(const std::string& name) const {
        return std::find(volumetric_set.begin(), volumetric_set.end(), name) != volumetric_set.end();
    }

    std::size_t icv_index() const { return index_of(icv_name); }
};

/// The shipped default: 16 clinical variables with per-class means/stds and
/// missingness rates measured on a large MCI/dementia visit cohort.
///
/// Plausibility bounds follow the instruments where the instrument defines a
/// range (MMSE 0-30, CDRSB 0-18, FAQ 0-30, ADAS-11 0-70, ADAS-13 0-85, RAVLT
/// scores, APOE4 allele count 0-2). Volumes have no standard range and use
/// pooled mean +/- 6 pooled std, floored at zero. Everything is overridable
/// through a schema file.
inline VariableSchema default_schema() {
    auto var = [](std::string name, double dm, double ds, double mm, double ms, double miss,
                  double lo, double hi, bool integer_valued = false) {
        VariableSpec v;
        v.name = std::move(name);
        v.dementia_mean = dm;
        v.dementia_std = ds;
        v.mci_mean = mm;
        v.mci_std = ms;
        v.missing_rate = miss;
        v.plausible_min = lo;
        v.plausible_max = hi;
        v.integer_valued = integer_valued;
        return v;
    };
    auto volume_bounds = [](double dm, double ds, double mm, double ms) {
        const double mean = 0.5 * (dm + mm);
        const double spread = 6.0 * std::max(ds, ms);
        return std::pair<double, double>{std::max(0.0, mean - spread), mean + spread};
    };

    VariableSchema s;
    s.variables.push_back(var("CDRSB", 5.99, 3.07, 1.62, 1.11, 0.2965, 0.0, 18.0));
    s.variables.push_back(var("RAVLT_immediate", 20.3, 8.1, 34.1, 11.2, 0.3069, 0.0, 75.0));
    s.variables.push_back(var("RAVLT_forgetting", 4.23, 1.93, 4.66, 2.49, 0.3089, -15.0, 15.0));
    s.variables.push_back(var("RAVLT_learning", 1.66, 1.72, 3.99, 2.63, 0.3069, -15.0, 15.0));
    s.variables.push_back(var("ADAS11", 22.9, 10.1, 9.9, 5.1, 0.3006, 0.0, 70.0));
    s.variables.push_back(var("ADAS13", 33.5, 11.3, 16.1, 7.1, 0.3074, 0.0, 85.0));
    s.variables.push_back(var("FAQ", 16.9, 7.5, 3.4, 4.3, 0.2941, 0.0, 30.0));
    s.variables.push_back(var("MMSE", 21.2, 4.6, 27.4, 2.2, 0.2989, 0.0, 30.0));
    {
        auto [lo, hi] = volume_bounds(53200, 25400, 41900, 23200);
        s.variables.push_back(var("Ventricles", 53200, 25400, 41900, 23200, 0.4157, lo, hi));
    }
    {
        auto [lo, hi] = volume_bounds(5510, 1110, 6710, 1120);
        s.variables.push_back(var("Hippocampus", 5510, 1110, 6710, 1120, 0.4661, lo, hi));
    }
    {
        auto [lo, hi] = volume_bounds(950000, 110000, 1020000, 110000);
        s.variables.push_back(var("WholeBrain", 950000, 110000, 1020000, 110000, 0.3965, lo, hi));
    }
    {
        auto [lo, hi] = volume_bounds(2690, 720, 3510, 770);
        s.variables.push_back(var("Entorhinal", 2690, 720, 3510, 770, 0.4923, lo, hi));
    }
    {
        auto [lo, hi] = volume_bounds(14900, 2600, 17400, 2800);
        s.variables.push_back(var("Fusiform", 14900, 2600, 17400, 2800, 0.4923, lo, hi));
    }
    {
        auto [lo, hi] = volume_bounds(16500, 3200, 19500, 2900);
        s.variables.push_back(var("MidTemp", 16500, 3200, 19500, 2900, 0.4923, lo, hi));
    }
    {
        auto [lo, hi] = volume_bounds(1540000, 180000, 1540000, 160000);
        s.variables.push_back(var("ICV", 1540000, 180000, 1540000, 160000, 0.3758, lo, hi));
    }
    s.variables.push_back(var("APOE4", 0.88, 0.71, 0.55, 0.66, 0.0009, 0.0, 2.0, true));

    s.volumetric_set = {"Hippocampus", "WholeBrain", "MidTemp", "Entorhinal", "Fusiform"};
    s.icv_name = "ICV";
    s.validate();
    return s;
}

inline nlohmann::json schema_to_json(const VariableSchema& s) {
    nlohmann::json vars = nlohmann::json::array();
    for (const auto& v : s.variables) {
        vars.push_back({{"name", v.name},
                        {"dementia_mean", v.dementia_mean},
                        {"dementia_std", v.dementia_std},
                        {"mci_mean", v.mci_mean},
                        {"mci_std", v.mci_std},
                        {"missing_rate", v.missing_rate},
                        {"plausible_min", v.plausible_min},
                        {"plausible_max", v.plausible_max},
                        {"integer_valued", v.integer_valued}});
    }
    return {{"variables", vars}, {"volumetric", s.volumetric_set}, {"icv", s.icv_name}};
}

inline VariableSchema schema_from_json(const nlohmann::json& j) {
    VariableSchema s;
    try {
        for (const auto& jv : j.at("variables")) {
            VariableSpec v;
            v.name = jv.at("name").get<std::string>();
            v.dementia_mean = jv.at("dementia_mean").get<double>();
            v.dementia_std = jv.at("dementia_std").get<double>();
            v.mci_mean = jv.at("mci_mean").get<double>();
            v.mci_std = jv.at("mci_std").get<double>();
            v.missing_rate = jv.at("missing_rate").get<double>();
            v.plausible_min = jv.at("plausible_min").get<double>();
            v.plausible_max = jv.at("plausible_max").get<double>();
            v.integer_valued = jv.value("integer_valued", false);
            s.variables.push_back(std::move(v));
        }
        s.volumetric_set = j.at("volumetric").get<std::vector<std::string>>();
        s.icv_name = j.at("icv").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("schema json: ") + e.what());
    }
    s.validate();
    return s;
}

} // namespace latentshift
