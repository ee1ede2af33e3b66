#pragma once

// Nonparametric estimators on the risk table: Nelson-Aalen cumulative
// hazards, pooled Kaplan-Meier distribution estimates, and the wild-bootstrap
// perturbation of a group hazard.

#include "survmct/numerics.hpp"
#include "survmct/survdata.hpp"

#include <iosfwd>
#include <span>
#include <vector>

namespace survmct {

// Right-continuous step function that is 0 before its first jump time.
// Jump times are strictly increasing; value(i) is the function value on
// [time(i), time(i+1)).
class StepFunction {
public:
    StepFunction() = default;
    StepFunction(std::vector<double> times, std::vector<double> values);

    [[nodiscard]] int size() const { return static_cast<int>(times_.size()); }
    [[nodiscard]] double jump_time(int i) const { return times_.at(static_cast<std::size_t>(i)); }
    [[nodiscard]] double value(int i) const { return values_.at(static_cast<std::size_t>(i)); }

    // Value at t (right-continuous) and just before t (left limit).
    [[nodiscard]] double value_at(double t) const;
    [[nodiscard]] double value_before(double t) const;

private:
    std::vector<double> times_;
    std::vector<double> values_;
};

// Group-j Nelson-Aalen estimate: jumps dN_j/Y_j at the event times of group j.
StepFunction nelson_aalen(const RiskTable& rt, int group);

// Pooled Kaplan-Meier estimate of the distribution function over a subset of
// groups: F = 1 - prod(1 - dN_S/Y_S), with jumps at the subset's event times.
// Subset counts accumulate over `groups` in the given order.
StepFunction kaplan_meier_pooled(const RiskTable& rt, std::span<const int> groups);

// Wild-bootstrap version of nelson_aalen: each event-time jump dN_j/Y_j is
// replaced by W_j(t)/Y_j(t), where W_j(t) sums the multipliers of the group-j
// subjects whose event falls at t.  `multipliers` aligns with
// rt.subject_event_index(group); its length must equal the group size.
StepFunction wild_bootstrap_nelson_aalen(const RiskTable& rt, int group,
                                         std::span<const double> multipliers);

enum class MultiplierLaw {
    rademacher,      // +1 / -1 with probability 1/2
    centered_poisson // Poisson(1) - 1
};

// `count` i.i.d. multipliers, one uniform consumed per draw.
std::vector<double> draw_multipliers(MultiplierLaw law, long count, RngStream rng);

// CSV export with header "time,value" and one row per jump.
void write_step_csv(const StepFunction& f, std::ostream& out);

} // namespace survmct
