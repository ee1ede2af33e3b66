#include "survmct/teststats.hpp"

#include "survmct/estimators.hpp"
#include "survmct/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace survmct {

namespace {

void check_pair(const RiskTable& rt, int j1, int j2) {
    if (j1 < 0 || j2 < 0 || j1 >= rt.k() || j2 >= rt.k()) {
        throw std::invalid_argument("contrast group index out of range");
    }
    if (j1 == j2) {
        throw std::invalid_argument("contrast groups must differ");
    }
}

void check_weights(std::span<const WeightSpec> weights) {
    if (weights.empty()) {
        throw std::invalid_argument("at least one weight function is required");
    }
}

// Left limits F(t-) of the pooled Kaplan-Meier of `groups`, aligned with the
// risk-table event-time grid.
std::vector<double> km_left_limits(const RiskTable& rt, std::span<const int> groups) {
    const StepFunction km = kaplan_meier_pooled(rt, groups);
    std::vector<double> f(static_cast<std::size_t>(rt.num_times()), 0.0);
    int p = -1;
    for (int t = 0; t < rt.num_times(); ++t) {
        while (p + 1 < km.size() && km.jump_time(p + 1) < rt.time(t)) ++p;
        f[static_cast<std::size_t>(t)] = p >= 0 ? km.value(p) : 0.0;
    }
    return f;
}

std::vector<int> all_groups(const RiskTable& rt) {
    std::vector<int> g(static_cast<std::size_t>(rt.k()));
    for (int j = 0; j < rt.k(); ++j) g[static_cast<std::size_t>(j)] = j;
    return g;
}

struct WlrResult {
    Eigen::VectorXd stats; // length m
    Eigen::MatrixXd cov;   // m x m
};

// Shared accumulation kernel.  `pooled` selects the all-groups risk set and
// Kaplan-Meier; otherwise both are restricted to {j1, j2}.  Terms accumulate
// in ascending time order; the sqrt(n/(n_j1 n_j2)) scaling is applied once at
// the end.
WlrResult compute_pair(const RiskTable& rt, int j1, int j2,
                       std::span<const WeightSpec> weights, bool pooled) {
    check_pair(rt, j1, j2);
    check_weights(weights);
    const int m = static_cast<int>(weights.size());

    std::vector<double> f_minus;
    if (pooled) {
        const auto groups = all_groups(rt);
        f_minus = km_left_limits(rt, groups);
    } else {
        const int pair_groups[2] = {std::min(j1, j2), std::max(j1, j2)};
        f_minus = km_left_limits(rt, pair_groups);
    }

    Eigen::VectorXd stats = Eigen::VectorXd::Zero(m);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(m, m);
    std::vector<double> wvals(static_cast<std::size_t>(m));

    for (int t = 0; t < rt.num_times(); ++t) {
        const long y1 = rt.at_risk(j1, t);
        const long y2 = rt.at_risk(j2, t);
        if (y1 == 0 || y2 == 0) continue;
        long denom;
        long d_events;
        if (pooled) {
            denom = rt.total_at_risk(t);
            d_events = rt.total_events(t);
        } else {
            denom = rt.at_risk(std::min(j1, j2), t) + rt.at_risk(std::max(j1, j2), t);
            d_events = rt.events(std::min(j1, j2), t) + rt.events(std::max(j1, j2), t);
        }
        if (d_events == 0) continue;
        const double kfac = static_cast<double>(y1) * static_cast<double>(y2) /
                            static_cast<double>(denom);
        const long e1 = rt.events(j1, t);
        const long e2 = rt.events(j2, t);
        const double diff = static_cast<double>(e2) / static_cast<double>(y2) -
                            static_cast<double>(e1) / static_cast<double>(y1);
        const double haz = static_cast<double>(d_events) / static_cast<double>(denom);
        const double u = f_minus[static_cast<std::size_t>(t)];
        for (int r = 0; r < m; ++r) {
            wvals[static_cast<std::size_t>(r)] = weights[static_cast<std::size_t>(r)](u);
        }
        for (int r = 0; r < m; ++r) {
            stats[r] += wvals[static_cast<std::size_t>(r)] * kfac * diff;
        }
        for (int p = 0; p < m; ++p) {
            for (int s = p; s < m; ++s) {
                cov(p, s) += wvals[static_cast<std::size_t>(p)] *
                             wvals[static_cast<std::size_t>(s)] * kfac * haz;
            }
        }
    }
    const double n1 = rt.group_size(j1);
    const double n2 = rt.group_size(j2);
    const double scale2 = static_cast<double>(rt.n()) / (n1 * n2);
    const double scale = std::sqrt(scale2);
    for (int r = 0; r < m; ++r) stats[r] *= scale;
    for (int p = 0; p < m; ++p) {
        for (int s = p; s < m; ++s) {
            cov(p, s) *= scale2;
            cov(s, p) = cov(p, s);
        }
    }
    return {std::move(stats), std::move(cov)};
}

QuadraticForm quadratic_form(const WlrResult& r) {
    QuadraticForm qf;
    if (r.cov.isZero(0.0)) {
        qf.degenerate = true;
        return qf;
    }
    const Pseudoinverse pinv = moore_penrose(r.cov);
    qf.df = pinv.rank;
    qf.degenerate = pinv.rank == 0;
    if (!qf.degenerate) {
        qf.value = std::max(0.0, r.stats.dot(pinv.inverse * r.stats));
    }
    return qf;
}

} // namespace

double pairwise_wlr(const RiskTable& rt, int j1, int j2, const WeightSpec& weight) {
    const WeightSpec w[1] = {weight};
    return compute_pair(rt, j1, j2, w, false).stats[0];
}

Eigen::VectorXd pairwise_wlr_vector(const RiskTable& rt, int j1, int j2,
                                    std::span<const WeightSpec> weights) {
    return compute_pair(rt, j1, j2, weights, false).stats;
}

Eigen::MatrixXd pairwise_covariance(const RiskTable& rt, int j1, int j2,
                                    std::span<const WeightSpec> weights) {
    return compute_pair(rt, j1, j2, weights, false).cov;
}

QuadraticForm mdir_statistic(const RiskTable& rt, int j1, int j2,
                             std::span<const WeightSpec> weights) {
    return quadratic_form(compute_pair(rt, j1, j2, weights, false));
}

double pooled_wlr(const RiskTable& rt, int j1, int j2, const WeightSpec& weight) {
    const WeightSpec w[1] = {weight};
    return compute_pair(rt, j1, j2, w, true).stats[0];
}

Eigen::VectorXd pooled_wlr_vector(const RiskTable& rt, int j1, int j2,
                                  std::span<const WeightSpec> weights) {
    return compute_pair(rt, j1, j2, weights, true).stats;
}

Eigen::MatrixXd pooled_covariance(const RiskTable& rt, int j1, int j2,
                                  std::span<const WeightSpec> weights) {
    return compute_pair(rt, j1, j2, weights, true).cov;
}

QuadraticForm casanova_statistic(const RiskTable& rt, int j1, int j2,
                                 std::span<const WeightSpec> weights) {
    return quadratic_form(compute_pair(rt, j1, j2, weights, true));
}

StatVector pairwise_stat_vector(const RiskTable& rt, const ContrastMatrix& contrasts,
                                std::span<const WeightSpec> weights) {
    check_weights(weights);
    if (contrasts.k != rt.k()) {
        throw std::invalid_argument("contrast matrix group count does not match data");
    }
    if (contrasts.q() == 0) {
        throw std::invalid_argument("contrast set is empty");
    }
    StatVector sv;
    sv.q = contrasts.q();
    sv.m = static_cast<int>(weights.size());
    sv.values.resize(sv.q * sv.m);
    for (int c = 0; c < sv.q; ++c) {
        const auto [j1, j2] = contrasts.pairs[static_cast<std::size_t>(c)];
        const Eigen::VectorXd stats = pairwise_wlr_vector(rt, j1, j2, weights);
        for (int r = 0; r < sv.m; ++r) sv.values[sv.index(c, r)] = stats[r];
    }
    return sv;
}

namespace {

Eigen::MatrixXd joint_covariance_raw(const RiskTable& rt, const ContrastMatrix& contrasts,
                                     std::span<const WeightSpec> weights) {
    check_weights(weights);
    if (contrasts.k != rt.k()) {
        throw std::invalid_argument("contrast matrix group count does not match data");
    }
    const int q = contrasts.q();
    if (q == 0) {
        throw std::invalid_argument("contrast set is empty");
    }
    const int m = static_cast<int>(weights.size());
    const int dim = q * m;

    // Per-contrast constants and per-group membership lists.
    std::vector<double> scale(static_cast<std::size_t>(q));
    std::vector<std::vector<double>> f_minus(static_cast<std::size_t>(q));
    std::vector<std::vector<int>> contrasts_of_group(static_cast<std::size_t>(rt.k()));
    for (int c = 0; c < q; ++c) {
        const auto [j1, j2] = contrasts.pairs[static_cast<std::size_t>(c)];
        scale[static_cast<std::size_t>(c)] =
            std::sqrt(static_cast<double>(rt.n()) /
                      (static_cast<double>(rt.group_size(j1)) *
                       static_cast<double>(rt.group_size(j2))));
        const int pair_groups[2] = {j1, j2};
        f_minus[static_cast<std::size_t>(c)] = km_left_limits(rt, pair_groups);
        contrasts_of_group[static_cast<std::size_t>(j1)].push_back(c);
        contrasts_of_group[static_cast<std::size_t>(j2)].push_back(c);
    }

    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
    std::vector<double> kfac(static_cast<std::size_t>(q));
    std::vector<double> wv(static_cast<std::size_t>(q) * static_cast<std::size_t>(m));
    std::vector<int> active_idx;
    std::vector<double> active_val;
    active_idx.reserve(static_cast<std::size_t>(dim));
    active_val.reserve(static_cast<std::size_t>(dim));

    for (int t = 0; t < rt.num_times(); ++t) {
        for (int c = 0; c < q; ++c) {
            const auto [j1, j2] = contrasts.pairs[static_cast<std::size_t>(c)];
            const long y1 = rt.at_risk(j1, t);
            const long y2 = rt.at_risk(j2, t);
            double kf = 0.0;
            if (y1 > 0 && y2 > 0) {
                kf = static_cast<double>(y1) * static_cast<double>(y2) /
                     static_cast<double>(y1 + y2);
            }
            kfac[static_cast<std::size_t>(c)] = kf;
            if (kf != 0.0) {
                const double u = f_minus[static_cast<std::size_t>(c)][static_cast<std::size_t>(t)];
                for (int r = 0; r < m; ++r) {
                    wv[static_cast<std::size_t>(c * m + r)] =
                        weights[static_cast<std::size_t>(r)](u);
                }
            }
        }
        for (int j = 0; j < rt.k(); ++j) {
            const long dn = rt.events(j, t);
            if (dn == 0) continue;
            const long y = rt.at_risk(j, t);
            const double h = static_cast<double>(dn) /
                             (static_cast<double>(y) * static_cast<double>(y));
            active_idx.clear();
            active_val.clear();
            for (int c : contrasts_of_group[static_cast<std::size_t>(j)]) {
                const double kf = kfac[static_cast<std::size_t>(c)];
                if (kf == 0.0) continue;
                const auto [j1, j2] = contrasts.pairs[static_cast<std::size_t>(c)];
                const double sign = j == j2 ? 1.0 : -1.0;
                const double base = sign * scale[static_cast<std::size_t>(c)] * kf;
                for (int r = 0; r < m; ++r) {
                    active_idx.push_back(c * m + r);
                    active_val.push_back(base * wv[static_cast<std::size_t>(c * m + r)]);
                }
            }
            for (std::size_t a = 0; a < active_idx.size(); ++a) {
                for (std::size_t b = a; b < active_idx.size(); ++b) {
                    cov(active_idx[a], active_idx[b]) += h * active_val[a] * active_val[b];
                }
            }
        }
    }
    for (int i = 0; i < dim; ++i) {
        for (int jx = i + 1; jx < dim; ++jx) {
            cov(jx, i) = cov(i, jx);
        }
    }
    return cov;
}

} // namespace

Eigen::MatrixXd joint_covariance_unfloored(const RiskTable& rt,
                                           const ContrastMatrix& contrasts,
                                           std::span<const WeightSpec> weights) {
    return joint_covariance_raw(rt, contrasts, weights);
}

Eigen::MatrixXd joint_covariance(const RiskTable& rt, const ContrastMatrix& contrasts,
                                 std::span<const WeightSpec> weights) {
    return psd_floor(joint_covariance_raw(rt, contrasts, weights));
}

CasanovaPlan make_casanova_plan(const RiskTable& rt, const ContrastMatrix& contrasts,
                                std::span<const WeightSpec> weights) {
    check_weights(weights);
    if (contrasts.k != rt.k()) {
        throw std::invalid_argument("contrast matrix group count does not match data");
    }
    if (contrasts.q() == 0) {
        throw std::invalid_argument("contrast set is empty");
    }
    const int m = static_cast<int>(weights.size());
    const int T = rt.num_times();

    const auto groups = all_groups(rt);
    const std::vector<double> f_minus = km_left_limits(rt, groups);

    CasanovaPlan plan;
    plan.num_times = T;
    plan.m = m;
    plan.contrasts.reserve(static_cast<std::size_t>(contrasts.q()));
    for (int c = 0; c < contrasts.q(); ++c) {
        const auto [j1, j2] = contrasts.pairs[static_cast<std::size_t>(c)];
        CasanovaPlan::Contrast pc;
        pc.j1 = j1;
        pc.j2 = j2;
        const WlrResult obs = compute_pair(rt, j1, j2, weights, true);
        pc.observed = quadratic_form(obs);
        if (pc.observed.degenerate) {
            pc.pinv = Eigen::MatrixXd::Zero(m, m);
        } else {
            pc.pinv = moore_penrose(obs.cov).inverse;
        }
        const double scale = std::sqrt(static_cast<double>(rt.n()) /
                                       (static_cast<double>(rt.group_size(j1)) *
                                        static_cast<double>(rt.group_size(j2))));
        pc.coef1 = Eigen::MatrixXd::Zero(m, T);
        pc.coef2 = Eigen::MatrixXd::Zero(m, T);
        for (int t = 0; t < T; ++t) {
            const long y1 = rt.at_risk(j1, t);
            const long y2 = rt.at_risk(j2, t);
            if (y1 == 0 || y2 == 0) continue;
            const double kf = static_cast<double>(y1) * static_cast<double>(y2) /
                              static_cast<double>(rt.total_at_risk(t));
            const double u = f_minus[static_cast<std::size_t>(t)];
            for (int r = 0; r < m; ++r) {
                const double a = scale * weights[static_cast<std::size_t>(r)](u) * kf;
                pc.coef1(r, t) = -a / static_cast<double>(y1);
                pc.coef2(r, t) = a / static_cast<double>(y2);
            }
        }
        plan.contrasts.push_back(std::move(pc));
    }
    return plan;
}

Eigen::VectorXd scatter_event_weights(const RiskTable& rt, int group,
                                      std::span<const double> multipliers) {
    if (group < 0 || group >= rt.k()) {
        throw std::invalid_argument("scatter_event_weights: group index out of range");
    }
    const auto& subj = rt.subject_event_index(group);
    if (multipliers.size() != subj.size()) {
        throw std::invalid_argument("scatter_event_weights: multiplier count must equal group size");
    }
    Eigen::VectorXd w = Eigen::VectorXd::Zero(rt.num_times());
    for (std::size_t i = 0; i < subj.size(); ++i) {
        if (subj[i] >= 0) w[subj[i]] += multipliers[i];
    }
    return w;
}

double casanova_replicate_max(const CasanovaPlan& plan,
                              std::span<const Eigen::VectorXd> group_w) {
    double cmax = 0.0;
    Eigen::VectorXd stats(plan.m);
    for (const auto& pc : plan.contrasts) {
        if (pc.observed.degenerate) continue;
        stats.noalias() = pc.coef1 * group_w[static_cast<std::size_t>(pc.j1)] +
                          pc.coef2 * group_w[static_cast<std::size_t>(pc.j2)];
        const double c = std::max(0.0, stats.dot(pc.pinv * stats));
        cmax = std::max(cmax, c);
    }
    return cmax;
}

} // namespace survmct
