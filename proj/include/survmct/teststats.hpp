#pragma once

// Weighted log-rank statistics for pairwise contrasts, their estimated
// covariances, and the quadratic forms built from them.  Two variants share
// one accumulation kernel:
//
//  * pairwise: risk sets and Kaplan-Meier restricted to the two groups of
//    the contrast (the classical two-sample statistic);
//  * pooled: risk sets and Kaplan-Meier over all k groups (the factorial
//    formulation used by the casanova procedure).
//
// At k = 2 the two variants receive bitwise-identical inputs and therefore
// produce bitwise-identical outputs.
//
// Conventions: groups are zero-based; T(j1, j2) accumulates hazard(j2) minus
// hazard(j1) increments; weights are evaluated at the left limit F(t-) of the
// pooled Kaplan-Meier of the participating groups; a group with an empty risk
// set contributes hazard increment 0; the scaling constant is
// sqrt(n / (n_j1 * n_j2)) with n the total size over all groups.

#include "survmct/design.hpp"
#include "survmct/survdata.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace survmct {

// Weighted log-rank statistic of contrast (j1, j2) for one weight.
double pairwise_wlr(const RiskTable& rt, int j1, int j2, const WeightSpec& weight);

// All weights at once; entry r corresponds to weights[r].
Eigen::VectorXd pairwise_wlr_vector(const RiskTable& rt, int j1, int j2,
                                    std::span<const WeightSpec> weights);

// m x m plug-in covariance of the weighted statistics of one contrast:
// (n/(n_j1 n_j2)) sum_t w_p w_s K(t) dN_pair / Y_pair.
Eigen::MatrixXd pairwise_covariance(const RiskTable& rt, int j1, int j2,
                                    std::span<const WeightSpec> weights);

struct QuadraticForm {
    double value = 0.0;
    int df = 0;
    bool degenerate = false; // covariance had rank 0
};

// Studentized quadratic form T' Sigma^+ T with df = rank(Sigma).
QuadraticForm mdir_statistic(const RiskTable& rt, int j1, int j2,
                             std::span<const WeightSpec> weights);

// Pooled (all-groups) counterparts.
double pooled_wlr(const RiskTable& rt, int j1, int j2, const WeightSpec& weight);
Eigen::VectorXd pooled_wlr_vector(const RiskTable& rt, int j1, int j2,
                                  std::span<const WeightSpec> weights);
Eigen::MatrixXd pooled_covariance(const RiskTable& rt, int j1, int j2,
                                  std::span<const WeightSpec> weights);
QuadraticForm casanova_statistic(const RiskTable& rt, int j1, int j2,
                                 std::span<const WeightSpec> weights);

// Stacked pairwise statistics for a contrast set: component (c, r) sits at
// index c*m + r.
struct StatVector {
    Eigen::VectorXd values;
    int q = 0; // contrasts
    int m = 0; // weights

    [[nodiscard]] int index(int contrast, int weight) const { return contrast * m + weight; }
};

StatVector pairwise_stat_vector(const RiskTable& rt, const ContrastMatrix& contrasts,
                                std::span<const WeightSpec> weights);

// Estimated qm x qm covariance of the stacked vector, accumulated as a sum of
// rank-one outer products v v' dN_j / Y_j^2 over (event time, group): entry
// (a,p) of v is sign_j(a) * sqrt(n/(n_a1 n_a2)) * w_p(F_a(t-)) * K_a(t) when
// j belongs to contrast a (sign +1 for j = a2, -1 for j = a1), else 0.
// joint_covariance floors negative eigenvalues at zero; the _unfloored
// variant returns the raw accumulation.
Eigen::MatrixXd joint_covariance(const RiskTable& rt, const ContrastMatrix& contrasts,
                                 std::span<const WeightSpec> weights);
Eigen::MatrixXd joint_covariance_unfloored(const RiskTable& rt,
                                           const ContrastMatrix& contrasts,
                                           std::span<const WeightSpec> weights);

// Precomputed apparatus for wild-bootstrap replicates of the pooled
// quadratic forms: the observed statistics, the (fixed) pseudoinverses, and
// per-time coefficients so one replicate costs two mat-vec products per
// contrast.
struct CasanovaPlan {
    struct Contrast {
        int j1 = 0;
        int j2 = 0;
        QuadraticForm observed;
        Eigen::MatrixXd pinv;  // Moore-Penrose of the pooled covariance
        Eigen::MatrixXd coef1; // m x T, multiplies W_j1; includes -1/Y_j1
        Eigen::MatrixXd coef2; // m x T, multiplies W_j2; includes +1/Y_j2
    };
    std::vector<Contrast> contrasts;
    int num_times = 0;
    int m = 0;
};

CasanovaPlan make_casanova_plan(const RiskTable& rt, const ContrastMatrix& contrasts,
                                std::span<const WeightSpec> weights);

// Sums multipliers by event-time column: entry t collects the multipliers of
// the group's subjects whose event falls at time index t.
Eigen::VectorXd scatter_event_weights(const RiskTable& rt, int group,
                                      std::span<const double> multipliers);

// max_c of the bootstrap quadratic forms given per-group scattered multiplier
// vectors (group_w[j] must have length rt.num_times()).
double casanova_replicate_max(const CasanovaPlan& plan,
                              std::span<const Eigen::VectorXd> group_w);

} // namespace survmct
