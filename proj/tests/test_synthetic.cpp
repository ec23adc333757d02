#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "latentshift/synthetic.hpp"

using namespace latentshift;

namespace {

struct ColumnStats {
    double mean = 0.0;
    double stddev = 0.0;
    std::size_t n = 0;
};

ColumnStats observed_stats(const Cohort& c, std::size_t var, Label label) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : c.records) {
        if (r.label != label || !r.values[var].has_value()) continue;
        sum += *r.values[var];
        ++n;
    }
    ColumnStats s;
    s.n = n;
    if (n == 0) return s;
    s.mean = sum / static_cast<double>(n);
    double sq = 0.0;
    for (const auto& r : c.records) {
        if (r.label != label || !r.values[var].has_value()) continue;
        sq += (*r.values[var] - s.mean) * (*r.values[var] - s.mean);
    }
    s.stddev = std::sqrt(sq / static_cast<double>(n - 1));
    return s;
}

} // namespace

TEST_CASE("default cohort matches the requested cardinalities", "[synthetic]") {
    Rng rng(1);
    GeneratorConfig config;
    Cohort c = generate_synthetic(default_schema(), config, rng);
    CHECK(c.size() == 1343 + 4021);
    CHECK(c.count_label(Label::Dementia) == 1343);
    CHECK(c.count_label(Label::MCI) == 4021);
    for (const auto& r : c.records) {
        CHECK(r.label.has_value()); // diagnosis labels are never missing
    }
}

TEST_CASE("per-variable sample means land within 3 standard errors", "[synthetic]") {
    Rng rng(12345);
    GeneratorConfig config;
    const VariableSchema schema = default_schema();
    Cohort c = generate_synthetic(schema, config, rng);

    for (std::size_t j = 0; j < schema.variables.size(); ++j) {
        const auto& spec = schema.variables[j];
        for (Label label : {Label::Dementia, Label::MCI}) {
            const double target = label == Label::Dementia ? spec.dementia_mean : spec.mci_mean;
            ColumnStats s = observed_stats(c, j, label);
            REQUIRE(s.n > 100);
            const double se = s.stddev / std::sqrt(static_cast<double>(s.n));
            INFO(spec.name << " " << label_to_string(label) << ": sample " << s.mean << " target "
                           << target << " se " << se);
            CHECK(std::abs(s.mean - target) <= 3.0 * se);
        }
    }
}

TEST_CASE("MMSE class means sit near their targets", "[synthetic]") {
    Rng rng(12345);
    Cohort c = generate_synthetic(default_schema(), GeneratorConfig{}, rng);
    const std::size_t j = default_schema().index_of("MMSE");
    ColumnStats dem = observed_stats(c, j, Label::Dementia);
    ColumnStats mci = observed_stats(c, j, Label::MCI);
    CHECK(std::abs(dem.mean - 21.2) <= 3.0 * dem.stddev / std::sqrt(static_cast<double>(dem.n)));
    CHECK(std::abs(mci.mean - 27.4) <= 3.0 * mci.stddev / std::sqrt(static_cast<double>(mci.n)));
}

TEST_CASE("zero missing rates produce a fully observed cohort", "[synthetic]") {
    VariableSchema schema = default_schema();
    for (auto& v : schema.variables) v.missing_rate = 0.0;
    Rng rng(2);
    GeneratorConfig config;
    config.n_dementia = 50;
    config.n_mci = 50;
    Cohort c = generate_synthetic(schema, config, rng);
    CHECK_FALSE(c.has_missing());
}

TEST_CASE("empirical missing fraction tracks the configured rate", "[synthetic]") {
    Rng rng(3);
    GeneratorConfig config; // 5364 records >= 5000
    const VariableSchema schema = default_schema();
    Cohort c = generate_synthetic(schema, config, rng);
    for (std::size_t j = 0; j < schema.variables.size(); ++j) {
        std::size_t missing = 0;
        for (const auto& r : c.records) {
            if (!r.values[j].has_value()) ++missing;
        }
        const double frac = static_cast<double>(missing) / static_cast<double>(c.size());
        CHECK(std::abs(frac - schema.variables[j].missing_rate) <= 0.02);
    }
}

TEST_CASE("fixed seed reproduces the cohort bit for bit", "[synthetic]") {
    GeneratorConfig config;
    config.n_dementia = 200;
    config.n_mci = 300;
    Rng a(99), b(99);
    Cohort c1 = generate_synthetic(default_schema(), config, a);
    Cohort c2 = generate_synthetic(default_schema(), config, b);
    CHECK(cohort_to_csv(c1) == cohort_to_csv(c2));
}

TEST_CASE("values respect plausible bounds and APOE4 is an allele count", "[synthetic]") {
    Rng rng(4);
    GeneratorConfig config;
    config.n_dementia = 400;
    config.n_mci = 400;
    const VariableSchema schema = default_schema();
    Cohort c = generate_synthetic(schema, config, rng);
    const std::size_t apoe = schema.index_of("APOE4");
    for (const auto& r : c.records) {
        for (std::size_t j = 0; j < schema.variables.size(); ++j) {
            if (!r.values[j].has_value()) continue;
            CHECK(*r.values[j] >= schema.variables[j].plausible_min);
            CHECK(*r.values[j] <= schema.variables[j].plausible_max);
        }
        if (r.values[apoe].has_value()) {
            const double v = *r.values[apoe];
            CHECK((v == 0.0 || v == 1.0 || v == 2.0));
        }
    }
}

TEST_CASE("degenerate counts produce a two-record cohort", "[synthetic]") {
    Rng rng(5);
    GeneratorConfig config;
    config.n_dementia = 1;
    config.n_mci = 1;
    Cohort c = generate_synthetic(default_schema(), config, rng);
    CHECK(c.size() == 2);
}

TEST_CASE("longitudinal mode links converters to later dementia visits", "[synthetic]") {
    Rng rng(6);
    GeneratorConfig config;
    config.n_dementia = 300;
    config.n_mci = 700;
    config.longitudinal = true;
    Cohort c = generate_synthetic(default_schema(), config, rng);

    CHECK(c.count_label(Label::Dementia) == 300);
    CHECK(c.count_label(Label::MCI) == 700);

    std::map<std::string, std::vector<const VisitRecord*>> by_patient;
    for (const auto& r : c.records) by_patient[r.patient_id].push_back(&r);

    std::size_t converters = 0;
    for (const auto& [id, visits] : by_patient) {
        for (std::size_t k = 1; k < visits.size(); ++k) {
            CHECK(visits[k]->visit_index > visits[k - 1]->visit_index);
        }
        bool saw_mci = false;
        for (const auto* v : visits) {
            if (v->label == Label::MCI) saw_mci = true;
            if (v->label == Label::Dementia && saw_mci) {
                ++converters;
                break;
            }
        }
    }
    CHECK(converters > 0); // future-visit links exist for the longitudinal table

    Rng again(6);
    Cohort c2 = generate_synthetic(default_schema(), config, again);
    CHECK(cohort_to_csv(c) == cohort_to_csv(c2));
}

TEST_CASE("invalid generator parameters are rejected", "[synthetic]") {
    Rng rng(7);
    GeneratorConfig config;
    config.n_dementia = 0;
    CHECK_THROWS_AS(generate_synthetic(default_schema(), config, rng), ValidationError);
}
