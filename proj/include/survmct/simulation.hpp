#pragma once

// Monte Carlo study engine: parametric survival scenarios, censoring
// calibration, and FWER/power estimation for the test procedures.

#include "survmct/design.hpp"
#include "survmct/numerics.hpp"
#include "survmct/procedures.hpp"
#include "survmct/survdata.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace survmct {

// Event-time distribution of one arm (R parameterizations).
struct EventLaw {
    enum class Kind { exponential, lognormal, weibull };

    Kind kind = Kind::exponential;
    double a = 1.0; // rate | meanlog | shape
    double b = 0.0; // unused | sdlog | scale

    static EventLaw exponential(double rate);
    static EventLaw lognormal(double meanlog, double sdlog);
    static EventLaw weibull(double shape, double scale);

    [[nodiscard]] double survival(double t) const;
    // Inversion sampling; consumes exactly one uniform.
    [[nodiscard]] double draw(RngEngine& eng) const;
    // Closed form of int_0^b S(t) dt.
    [[nodiscard]] double partial_survival_integral(double bound) const;
    [[nodiscard]] std::string describe() const;
};

struct Scenario {
    std::string name;
    std::vector<EventLaw> laws; // one per arm, k >= 2
    int n_per_group = 100;
    double censoring = 0.0; // target P(C < T), uniform censoring, in [0, 1)

    // Same scenario with every arm following the first arm's law.
    [[nodiscard]] Scenario null_variant() const;
};

// The four alternative scenarios (prop, nprop, cross, mix) plus their
// full-null variants (first law in every arm), n = 100 per arm, no censoring.
std::vector<Scenario> builtin_scenarios();
std::optional<Scenario> find_builtin(const std::string& name);

// All 35 multisets of the scenario's k=4 arm laws reassigned to the arms in
// non-decreasing law order; covers every partial-null configuration.
std::vector<Scenario> law_combinations(const Scenario& base);

// Upper bound b such that C ~ U(0, b) censors a fraction `target` of events:
// solves P(C < T) = target by bisection to 1e-6 on the probability scale.
double uniform_censoring_bound(const EventLaw& law, double target);

// P(C < T) for C ~ U(0, b): partial_survival_integral(b) / b.
double censored_fraction(const EventLaw& law, double bound);

// One synthetic dataset: arm j draws from rng.spawn(j); per subject the event
// time is drawn first, then (with censoring) the censoring time.  Group
// labels are "1".."k".
SurvivalSample sample_scenario(const Scenario& scenario, RngStream rng);

// Scenario described as JSON: {"name": ..., "n_per_group": ..., "censoring":
// ..., "laws": [{"kind": "exponential", "rate": ...}, {"kind": "lognormal",
// "meanlog": ..., "sdlog": ...}, {"kind": "weibull", "shape": ..., "scale":
// ...}]}.  Throws std::invalid_argument on malformed input.
Scenario scenario_from_json(const std::string& text);

enum class ContrastKind { dunnett, tukey };

struct StudyConfig {
    std::vector<Scenario> scenarios;
    std::vector<Method> methods;
    ContrastKind contrast = ContrastKind::dunnett;
    int runs = 1000;
    std::optional<int> n_per_group;    // overrides every scenario when set
    std::optional<double> censoring;   // overrides every scenario when set
    double alpha = 0.05;
    long bootstrap_iterations = 500;   // casanova replicates per run
    long mc_samples = 50000;           // maxwlr Monte Carlo samples per run
    std::vector<WeightSpec> weights = default_weights();
    std::uint64_t seed = 0;
    int threads = 1;
};

struct MethodStudyResult {
    Method method = Method::logrank;
    std::vector<double> local_rates; // per contrast rejection rate
    double any_local_rate = 0.0;     // FWER under a null scenario
    double global_rate = 0.0;
    bool within_band = false;        // any_local_rate inside the binomial band
};

struct ScenarioStudyResult {
    std::string scenario;
    std::vector<std::string> law_descriptions;
    int n_per_group = 0;
    double censoring = 0.0;
    std::vector<std::string> contrast_labels;
    std::vector<MethodStudyResult> methods;
};

struct StudyReport {
    int runs = 0;
    double alpha = 0.0;
    std::string contrast_kind;
    long bootstrap_iterations = 0;
    long mc_samples = 0;
    std::vector<std::string> weight_labels;
    std::uint64_t seed = 0;
    int threads = 0;
    double band_low = 0.0; // 95% binomial band around alpha for `runs`
    double band_high = 0.0;
    std::vector<ScenarioStudyResult> scenarios;
};

// Runs the full cross of scenarios x methods.  Scenario s uses the stream
// family RngStream(seed, s): run r draws data from spawn(r).spawn(0) and
// method slot i resamples from spawn(r).spawn(1 + i).  Per-run decisions are
// written to preallocated slots and reduced in run order, so results do not
// depend on `threads`.
StudyReport run_study(const StudyConfig& config);

std::string study_to_json(const StudyReport& report);
std::string study_to_csv(const StudyReport& report);
std::string study_to_text(const StudyReport& report);

} // namespace survmct
