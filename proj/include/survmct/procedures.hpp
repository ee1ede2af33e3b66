#pragma once

// The four multiple-contrast test procedures and their common report format.
//
//  * adjusted_logrank   — unweighted pairwise log-rank tests, Bonferroni.
//  * adjusted_mdir      — studentized quadratic form over several weights
//                         per contrast, chi-square calibrated, Bonferroni.
//  * multi_weighted_lr  — max-type test over all standardized components,
//                         calibrated by an equicoordinate multivariate-normal
//                         quantile (Monte Carlo).
//  * multi_casanova     — pooled quadratic forms per contrast, calibrated by
//                         a wild bootstrap of the hazard increments.
//
// Every procedure reports one result per contrast plus a global decision.
// "rejected == (p_adjusted <= alpha)" holds exactly for the first three
// procedures; multi_casanova flags rejections by comparing against the
// bootstrap quantile as pinned, which can disagree with the add-one p-value
// on the one-replicate boundary.

#include "survmct/design.hpp"
#include "survmct/estimators.hpp"
#include "survmct/numerics.hpp"
#include "survmct/survdata.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace survmct {

struct ContrastResult {
    std::string label; // "<label j2> - <label j1>"
    int j1 = 0;        // zero-based group indices
    int j2 = 0;
    double statistic = 0.0;
    int df = 0;
    double p_raw = 1.0;
    double p_adjusted = 1.0;
    bool rejected = false;
    bool degenerate = false;
};

struct GlobalResult {
    double statistic = 0.0;
    double critical_value = 0.0;
    double p_value = 1.0;
    bool rejected = false;
};

struct ResamplingInfo {
    std::string kind; // "monte_carlo" or "wild_bootstrap"
    std::string law;  // "normal", "rademacher", "centered_poisson"
    long iterations = 0;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
};

struct TestReport {
    std::string method;
    double alpha = 0.0;
    std::vector<std::string> group_labels;
    std::vector<std::string> weight_labels;
    std::vector<ContrastResult> contrasts;
    GlobalResult global;
    std::optional<ResamplingInfo> resampling;
};

TestReport adjusted_logrank(const SurvivalSample& sample, const ContrastMatrix& contrasts,
                            double alpha);

// Requires linearly independent weights.
TestReport adjusted_mdir(const SurvivalSample& sample, const ContrastMatrix& contrasts,
                         std::span<const WeightSpec> weights, double alpha);

struct MaxWlrOptions {
    long mc_samples = 50000;
    RngStream rng;
    bool two_sided = true;
};

TestReport multi_weighted_lr(const SurvivalSample& sample, const ContrastMatrix& contrasts,
                             std::span<const WeightSpec> weights, double alpha,
                             const MaxWlrOptions& options);

struct CasanovaOptions {
    MultiplierLaw law = MultiplierLaw::rademacher;
    long iterations = 1000; // bootstrap replicates, >= 100
    RngStream rng;
    int threads = 1;
};

TestReport multi_casanova(const SurvivalSample& sample, const ContrastMatrix& contrasts,
                          std::span<const WeightSpec> weights, double alpha,
                          const CasanovaOptions& options);

enum class Method {
    logrank,
    mdir,
    maxwlr,
    casanova_rademacher,
    casanova_poisson,
};

std::string method_name(Method m);
std::optional<Method> parse_method(std::string_view name);
// Comma-separated list; "all" expands to every method in declaration order.
std::vector<Method> parse_methods(std::string_view csv);

// Dispatch helper used by the CLI and the study engine.  The casanova law in
// `casanova` is overridden by the method variant.
TestReport run_method(Method method, const SurvivalSample& sample,
                      const ContrastMatrix& contrasts, std::span<const WeightSpec> weights,
                      double alpha, const MaxWlrOptions& maxwlr,
                      const CasanovaOptions& casanova);

// Deterministic serializations of a set of reports over the same contrasts.
std::string reports_to_json(std::span<const TestReport> reports);
std::string reports_to_csv(std::span<const TestReport> reports);
std::string reports_to_text(std::span<const TestReport> reports);

} // namespace survmct
