#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "latentshift/io.hpp"
#include "latentshift/matrix.hpp"
#include "latentshift/rng.hpp"
#include "latentshift/schema.hpp"

namespace latentshift {

enum class Label { MCI, Dementia };

inline std::string label_to_string(Label l) {
    return l == Label::MCI ? "MCI" : "Dementia";
}

inline std::optional<Label> parse_label(std::string_view s) {
    if (s == "MCI") return Label::MCI;
    if (s == "Dementia") return Label::Dementia;
    return std::nullopt;
}

/// One patient visit in native units. Missing cells are nullopt until the
/// imputation pass fills them.
struct VisitRecord {
    std::string patient_id;
    std::int64_t visit_index = 0;
    std::vector<std::optional<double>> values;
    std::optional<Label> label;

    std::string key() const {
        return patient_id + "/" + std::to_string(visit_index);
    }
};

/// Per-variable mean/std fitted on a training subset.
struct ScalingState {
    std::vector<double> means;
    std::vector<double> stds;

    void validate() const {
        if (means.size() != stds.size()) {
            throw ValidationError("scaling: " + std::to_string(means.size()) + " means vs " +
                                  std::to_string(stds.size()) + " stds");
        }
        for (std::size_t i = 0; i < stds.size(); ++i) {
            if (!(stds[i] > 0.0)) {
                throw ValidationError("scaling: non-positive std at variable index " + std::to_string(i));
            }
        }
    }
};

struct Cohort {
    VariableSchema schema;
    std::vector<VisitRecord> records;
    std::optional<ScalingState> scaling;

    std::size_t size() const { return records.size(); }

    bool has_missing() const {
        for (const auto& r : records) {
            for (const auto& v : r.values) {
                if (!v.has_value()) return true;
            }
        }
        return false;
    }

    /// Dense value matrix; requires a fully observed cohort.
    Matrix to_matrix() const {
        Matrix m(records.size(), schema.variables.size());
        for (std::size_t i = 0; i < records.size(); ++i) {
            for (std::size_t j = 0; j < schema.variables.size(); ++j) {
                const auto& v = records[i].values[j];
                if (!v.has_value()) {
                    throw ValidationError("cohort: missing value at record " + records[i].key() +
                                          ", variable " + schema.variables[j].name);
                }
                m(i, j) = *v;
            }
        }
        return m;
    }

    /// 1 = Dementia, 0 = MCI; unlabeled records are rejected.
    std::vector<int> labels01() const {
        std::vector<int> out;
        out.reserve(records.size());
        for (const auto& r : records) {
            if (!r.label.has_value()) {
                throw ValidationError("cohort: unlabeled record " + r.key());
            }
            out.push_back(*r.label == Label::Dementia ? 1 : 0);
        }
        return out;
    }

    std::size_t count_label(Label l) const {
        std::size_t n = 0;
        for (const auto& r : records) {
            if (r.label == l) ++n;
        }
        return n;
    }
};

// ---------------------------------------------------------------------------
// CSV interface: header "patient_id,visit_index,label,<variables...>" in
// schema order; UTF-8; empty field = missing; label in {MCI, Dementia}.
// ---------------------------------------------------------------------------

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(std::move(current));
            current.clear();
        } else if (c != '\r') {
            current.push_back(c);
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

inline std::string cohort_to_csv(const Cohort& cohort) {
    std::string out = "patient_id,visit_index,label";
    for (const auto& v : cohort.schema.variables) {
        out += ",";
        out += v.name;
    }
    out += "\n";
    for (const auto& r : cohort.records) {
        out += r.patient_id;
        out += ",";
        out += std::to_string(r.visit_index);
        out += ",";
        if (r.label.has_value()) out += label_to_string(*r.label);
        for (const auto& v : r.values) {
            out += ",";
            if (v.has_value()) out += io::format_double(*v);
        }
        out += "\n";
    }
    return out;
}

inline void save_cohort_csv(const Cohort& cohort, const std::filesystem::path& path) {
    io::atomic_write(path, cohort_to_csv(cohort));
}

inline Cohort load_cohort_csv(const std::filesystem::path& path, const VariableSchema& schema) {
    schema.validate();
    if (!std::filesystem::exists(path)) {
        throw IngestError("cohort file does not exist: " + path.string());
    }
    std::istringstream in(io::read_file(path));
    std::string line;
    if (!std::getline(in, line)) {
        throw IngestError("cohort file is empty: " + path.string());
    }

    const auto header = split_csv_line(line);
    std::vector<std::string> expected = {"patient_id", "visit_index", "label"};
    for (const auto& v : schema.variables) expected.push_back(v.name);
    if (header.size() != expected.size()) {
        throw IngestError("header has " + std::to_string(header.size()) + " columns, expected " +
                          std::to_string(expected.size()));
    }
    for (std::size_t i = 0; i < expected.size(); ++i) {
        if (header[i] != expected[i]) {
            throw IngestError("header mismatch at column " + std::to_string(i + 1) + ": got '" +
                              header[i] + "', expected '" + expected[i] + "'");
        }
    }

    Cohort cohort;
    cohort.schema = schema;
    std::size_t row = 1;
    std::map<std::string, std::int64_t> last_visit;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != expected.size()) {
            throw IngestError("row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                              " fields, expected " + std::to_string(expected.size()));
        }
        VisitRecord r;
        r.patient_id = fields[0];
        if (r.patient_id.empty()) {
            throw IngestError("row " + std::to_string(row) + ": empty patient_id");
        }
        const auto vi = io::parse_double(fields[1]);
        if (!vi.has_value() || *vi < 0 || *vi != std::floor(*vi)) {
            throw IngestError("row " + std::to_string(row) + ": bad visit_index '" + fields[1] + "'");
        }
        r.visit_index = static_cast<std::int64_t>(*vi);
        if (!fields[2].empty()) {
            r.label = parse_label(fields[2]);
            if (!r.label.has_value()) {
                throw IngestError("row " + std::to_string(row) + ": unknown label '" + fields[2] + "'");
            }
        }
        r.values.resize(schema.variables.size());
        for (std::size_t j = 0; j < schema.variables.size(); ++j) {
            const std::string& cell = fields[3 + j];
            if (cell.empty()) continue;
            const auto parsed = io::parse_double(cell);
            if (!parsed.has_value() || !std::isfinite(*parsed)) {
                throw IngestError("row " + std::to_string(row) + ", column " +
                                  schema.variables[j].name + ": unparseable value '" + cell + "'");
            }
            r.values[j] = *parsed;
        }
        auto [it, inserted] = last_visit.try_emplace(r.patient_id, r.visit_index);
        if (!inserted) {
            if (r.visit_index <= it->second) {
                throw IngestError("row " + std::to_string(row) + ": visit_index " +
                                  std::to_string(r.visit_index) + " not increasing for patient " +
                                  r.patient_id);
            }
            it->second = r.visit_index;
        }
        cohort.records.push_back(std::move(r));
    }
    return cohort;
}

// ---------------------------------------------------------------------------
// Preprocessing passes. Each pass returns a new cohort.
// ---------------------------------------------------------------------------

/// Forward-fill within each patient (by visit order), then fall back to the
/// mean of the variable over same-label visits. Labeled records come out
/// fully observed; unlabeled records only get the forward-fill pass.
inline Cohort impute(const Cohort& cohort) {
    Cohort out = cohort;
    const std::size_t nvars = cohort.schema.variables.size();

    // Group means from originally observed values, per label.
    std::vector<double> sum_mci(nvars, 0.0), sum_dem(nvars, 0.0);
    std::vector<std::size_t> n_mci(nvars, 0), n_dem(nvars, 0);
    for (const auto& r : cohort.records) {
        if (!r.label.has_value()) continue;
        for (std::size_t j = 0; j < nvars; ++j) {
            if (!r.values[j].has_value()) continue;
            if (*r.label == Label::MCI) {
                sum_mci[j] += *r.values[j];
                ++n_mci[j];
            } else {
                sum_dem[j] += *r.values[j];
                ++n_dem[j];
            }
        }
    }

    // Visit order per patient, preserving cohort order inside ties-free groups.
    std::map<std::string, std::vector<std::size_t>> by_patient;
    for (std::size_t i = 0; i < out.records.size(); ++i) {
        by_patient[out.records[i].patient_id].push_back(i);
    }
    for (auto& [id, idxs] : by_patient) {
        std::sort(idxs.begin(), idxs.end(), [&](std::size_t a, std::size_t b) {
            return out.records[a].visit_index < out.records[b].visit_index;
        });
        for (std::size_t j = 0; j < nvars; ++j) {
            std::optional<double> carried;
            for (std::size_t idx : idxs) {
                auto& cell = out.records[idx].values[j];
                if (cell.has_value()) {
                    carried = cell;
                } else if (carried.has_value()) {
                    cell = carried;
                }
            }
        }
    }

    for (auto& r : out.records) {
        if (!r.label.has_value()) continue;
        for (std::size_t j = 0; j < nvars; ++j) {
            if (r.values[j].has_value()) continue;
            const bool mci = *r.label == Label::MCI;
            const std::size_t n = mci ? n_mci[j] : n_dem[j];
            if (n == 0) {
                throw ValidationError("impute: variable " + cohort.schema.variables[j].name +
                                      " has no observed values for label " + label_to_string(*r.label));
            }
            r.values[j] = (mci ? sum_mci[j] : sum_dem[j]) / static_cast<double>(n);
        }
    }
    return out;
}

/// Drops records carrying any observed value outside its plausible range.
inline std::pair<Cohort, std::size_t> remove_anomalies(const Cohort& cohort) {
    Cohort out;
    out.schema = cohort.schema;
    out.scaling = cohort.scaling;
    std::size_t removed = 0;
    for (const auto& r : cohort.records) {
        bool keep = true;
        for (std::size_t j = 0; j < cohort.schema.variables.size(); ++j) {
            if (!r.values[j].has_value()) continue;
            const auto& spec = cohort.schema.variables[j];
            if (*r.values[j] < spec.plausible_min || *r.values[j] > spec.plausible_max) {
                keep = false;
                break;
            }
        }
        if (keep) {
            out.records.push_back(r);
        } else {
            ++removed;
        }
    }
    return {std::move(out), removed};
}

/// Divides the five volumetric variables by the record's intracranial volume.
/// The ICV column itself stays in native units.
inline Cohort normalize_by_icv(const Cohort& cohort) {
    Cohort out = cohort;
    const std::size_t icv_idx = cohort.schema.icv_index();
    std::vector<std::size_t> vol_idx;
    for (const auto& name : cohort.schema.volumetric_set) {
        vol_idx.push_back(cohort.schema.index_of(name));
    }
    for (auto& r : out.records) {
        if (!r.values[icv_idx].has_value()) {
            throw ValidationError("normalize_by_icv: missing ICV at record " + r.key());
        }
        const double icv = *r.values[icv_idx];
        if (!(icv > 0.0)) {
            throw ValidationError("normalize_by_icv: non-positive ICV at record " + r.key());
        }
        for (std::size_t j : vol_idx) {
            if (!r.values[j].has_value()) {
                throw ValidationError("normalize_by_icv: missing " +
                                      cohort.schema.variables[j].name + " at record " + r.key());
            }
            r.values[j] = *r.values[j] / icv;
        }
    }
    return out;
}

/// Per-variable mean and sample std (n-1) over the fit subset.
inline ScalingState fit_scaling(const Cohort& cohort, const std::vector<std::size_t>& fit_subset) {
    if (fit_subset.empty()) {
        throw ValidationError("fit_scaling: empty fit subset");
    }
    const std::size_t nvars = cohort.schema.variables.size();
    ScalingState state;
    state.means.assign(nvars, 0.0);
    state.stds.assign(nvars, 0.0);
    for (std::size_t j = 0; j < nvars; ++j) {
        double sum = 0.0;
        for (std::size_t idx : fit_subset) {
            const auto& v = cohort.records[idx].values[j];
            if (!v.has_value()) {
                throw ValidationError("fit_scaling: missing value at record " +
                                      cohort.records[idx].key() + ", variable " +
                                      cohort.schema.variables[j].name);
            }
            sum += *v;
        }
        const double mean = sum / static_cast<double>(fit_subset.size());
        double sq = 0.0;
        for (std::size_t idx : fit_subset) {
            const double d = *cohort.records[idx].values[j] - mean;
            sq += d * d;
        }
        const double denom = static_cast<double>(fit_subset.size()) - 1.0;
        const double std_dev = denom > 0.0 ? std::sqrt(sq / denom) : 0.0;
        if (!(std_dev > 0.0)) {
            throw ValidationError("fit_scaling: zero std for variable " +
                                  cohort.schema.variables[j].name);
        }
        state.means[j] = mean;
        state.stds[j] = std_dev;
    }
    return state;
}

inline Cohort apply_scaling(const Cohort& cohort, const ScalingState& state) {
    state.validate();
    if (state.means.size() != cohort.schema.variables.size()) {
        throw ShapeError("apply_scaling: state for " + std::to_string(state.means.size()) +
                         " variables, cohort has " + std::to_string(cohort.schema.variables.size()));
    }
    Cohort out = cohort;
    for (auto& r : out.records) {
        for (std::size_t j = 0; j < r.values.size(); ++j) {
            if (r.values[j].has_value()) {
                r.values[j] = (*r.values[j] - state.means[j]) / state.stds[j];
            }
        }
    }
    out.scaling = state;
    return out;
}

inline Cohort invert_scaling(const Cohort& cohort) {
    if (!cohort.scaling.has_value()) {
        throw ValidationError("invert_scaling: cohort carries no scaling state");
    }
    const ScalingState& state = *cohort.scaling;
    Cohort out = cohort;
    for (auto& r : out.records) {
        for (std::size_t j = 0; j < r.values.size(); ++j) {
            if (r.values[j].has_value()) {
                r.values[j] = *r.values[j] * state.stds[j] + state.means[j];
            }
        }
    }
    out.scaling.reset();
    return out;
}

/// Inverse-scale a single row vector of scaled values back to native units.
inline Matrix invert_row(const ScalingState& state, const Matrix& scaled_row) {
    if (scaled_row.rows() != 1 || scaled_row.cols() != state.means.size()) {
        throw ShapeError("invert_row: row " + scaled_row.shape_str() + " vs state for " +
                         std::to_string(state.means.size()) + " variables");
    }
    Matrix out = scaled_row;
    for (std::size_t j = 0; j < state.means.size(); ++j) {
        out(0, j) = out(0, j) * state.stds[j] + state.means[j];
    }
    return out;
}

/// Label-stratified index split; `held_out_fraction` of each class (rounded)
/// goes to the second set. Deterministic for a given rng state.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
stratified_split(const std::vector<int>& labels, double held_out_fraction, Rng& rng) {
    if (held_out_fraction <= 0.0 || held_out_fraction >= 1.0) {
        throw ValidationError("stratified_split: fraction must be in (0,1)");
    }
    std::vector<std::size_t> kept, held;
    for (int cls : {0, 1}) {
        std::vector<std::size_t> idxs;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == cls) idxs.push_back(i);
        }
        rng.shuffle(idxs);
        const std::size_t n_held = static_cast<std::size_t>(
            std::llround(held_out_fraction * static_cast<double>(idxs.size())));
        for (std::size_t k = 0; k < idxs.size(); ++k) {
            (k < n_held ? held : kept).push_back(idxs[k]);
        }
    }
    std::sort(kept.begin(), kept.end());
    std::sort(held.begin(), held.end());
    if (kept.empty() || held.empty()) {
        throw ValidationError("stratified_split: a split came out empty");
    }
    return {kept, held};
}

} // namespace latentshift
