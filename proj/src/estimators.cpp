#include "survmct/estimators.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace survmct {

StepFunction::StepFunction(std::vector<double> times, std::vector<double> values)
    : times_(std::move(times)), values_(std::move(values)) {
    if (times_.size() != values_.size()) {
        throw std::invalid_argument("StepFunction: times and values must have equal length");
    }
    for (std::size_t i = 0; i < times_.size(); ++i) {
        if (!std::isfinite(times_[i]) || !std::isfinite(values_[i])) {
            throw std::invalid_argument("StepFunction: non-finite entry");
        }
        if (i > 0 && !(times_[i] > times_[i - 1])) {
            throw std::invalid_argument("StepFunction: jump times must be strictly increasing");
        }
    }
}

double StepFunction::value_at(double t) const {
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    if (it == times_.begin()) return 0.0;
    return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

double StepFunction::value_before(double t) const {
    auto it = std::lower_bound(times_.begin(), times_.end(), t);
    if (it == times_.begin()) return 0.0;
    return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

namespace {

void check_group(const RiskTable& rt, int group) {
    if (group < 0 || group >= rt.k()) {
        throw std::invalid_argument("group index out of range");
    }
}

} // namespace

StepFunction nelson_aalen(const RiskTable& rt, int group) {
    check_group(rt, group);
    std::vector<double> times;
    std::vector<double> values;
    double cum = 0.0;
    for (int t = 0; t < rt.num_times(); ++t) {
        const long dn = rt.events(group, t);
        if (dn == 0) continue;
        cum += static_cast<double>(dn) / static_cast<double>(rt.at_risk(group, t));
        times.push_back(rt.time(t));
        values.push_back(cum);
    }
    return StepFunction(std::move(times), std::move(values));
}

StepFunction kaplan_meier_pooled(const RiskTable& rt, std::span<const int> groups) {
    if (groups.empty()) {
        throw std::invalid_argument("kaplan_meier_pooled: empty group subset");
    }
    for (std::size_t a = 0; a < groups.size(); ++a) {
        check_group(rt, groups[a]);
        for (std::size_t b = a + 1; b < groups.size(); ++b) {
            if (groups[a] == groups[b]) {
                throw std::invalid_argument("kaplan_meier_pooled: duplicate group in subset");
            }
        }
    }
    std::vector<double> times;
    std::vector<double> values;
    double surv = 1.0;
    for (int t = 0; t < rt.num_times(); ++t) {
        long dn = 0;
        long y = 0;
        for (int j : groups) {
            dn += rt.events(j, t);
            y += rt.at_risk(j, t);
        }
        if (dn == 0) continue;
        surv *= 1.0 - static_cast<double>(dn) / static_cast<double>(y);
        times.push_back(rt.time(t));
        values.push_back(1.0 - surv);
    }
    return StepFunction(std::move(times), std::move(values));
}

StepFunction wild_bootstrap_nelson_aalen(const RiskTable& rt, int group,
                                         std::span<const double> multipliers) {
    check_group(rt, group);
    const auto& subj = rt.subject_event_index(group);
    if (multipliers.size() != subj.size()) {
        throw std::invalid_argument(
            "wild_bootstrap_nelson_aalen: multiplier count must equal group size");
    }
    std::vector<double> w_at(static_cast<std::size_t>(rt.num_times()), 0.0);
    for (std::size_t i = 0; i < subj.size(); ++i) {
        if (subj[i] >= 0) {
            w_at[static_cast<std::size_t>(subj[i])] += multipliers[i];
        }
    }
    std::vector<double> times;
    std::vector<double> values;
    double cum = 0.0;
    for (int t = 0; t < rt.num_times(); ++t) {
        if (rt.events(group, t) == 0) continue;
        cum += w_at[static_cast<std::size_t>(t)] / static_cast<double>(rt.at_risk(group, t));
        times.push_back(rt.time(t));
        values.push_back(cum);
    }
    return StepFunction(std::move(times), std::move(values));
}

std::vector<double> draw_multipliers(MultiplierLaw law, long count, RngStream rng) {
    if (count < 0) {
        throw std::invalid_argument("draw_multipliers: count must be >= 0");
    }
    // CDF of Poisson(1) out to the point where the residual tail is far below
    // the resolution of u01() (max value 1 - 2^-54), so inversion always hits.
    static const std::array<double, 26> poisson_cdf = [] {
        std::array<double, 26> cdf{};
        double pmf = std::exp(-1.0);
        double acc = 0.0;
        for (std::size_t m = 0; m < cdf.size(); ++m) {
            if (m > 0) pmf /= static_cast<double>(m);
            acc += pmf;
            cdf[m] = acc;
        }
        return cdf;
    }();

    RngEngine eng(rng);
    std::vector<double> out(static_cast<std::size_t>(count));
    for (auto& v : out) {
        const double u = eng.u01();
        if (law == MultiplierLaw::rademacher) {
            v = u < 0.5 ? -1.0 : 1.0;
        } else {
            std::size_t m = 0;
            while (m + 1 < poisson_cdf.size() && poisson_cdf[m] < u) ++m;
            v = static_cast<double>(m) - 1.0;
        }
    }
    return out;
}

void write_step_csv(const StepFunction& f, std::ostream& out) {
    out << "time,value\n";
    for (int i = 0; i < f.size(); ++i) {
        out << format_double(f.jump_time(i)) << ',' << format_double(f.value(i)) << '\n';
    }
}

} // namespace survmct
