#include "survmct/teststats.hpp"

#include "survmct/estimators.hpp"
#include "survmct/numerics.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

using namespace survmct;

namespace {

std::vector<WeightSpec> w_logrank() {
    std::vector<WeightSpec> w;
    w.push_back(WeightSpec::fleming_harrington(0, 0));
    return w;
}

std::vector<WeightSpec> w_pair() {
    std::vector<WeightSpec> w;
    w.push_back(WeightSpec::fleming_harrington(0, 0));
    w.push_back(WeightSpec::crossing());
    return w;
}

} // namespace

TEST_CASE("worked sample: log-rank statistic and variance") {
    const auto rt = build_risk_table(testutil::worked_sample());
    const auto w = w_logrank();

    // Hand computation: contributions -1/2, 1/3, -1/2 (last time skipped
    // because group 1 has an empty risk set), scale = sqrt(4/(2*2)) = 1.
    const double t_stat = pairwise_wlr(rt, 0, 1, w[0]);
    CHECK(t_stat == doctest::Approx(-2.0 / 3.0).epsilon(1e-14));

    const Eigen::MatrixXd cov = pairwise_covariance(rt, 0, 1, w);
    REQUIRE(cov.rows() == 1);
    CHECK(cov(0, 0) == doctest::Approx(13.0 / 18.0).epsilon(1e-14));

    const QuadraticForm qf = mdir_statistic(rt, 0, 1, w);
    CHECK(qf.value == doctest::Approx(8.0 / 13.0).epsilon(1e-12));
    CHECK(qf.df == 1);
    CHECK_FALSE(qf.degenerate);
}

TEST_CASE("worked sample: left-limit weights enter correctly") {
    // Pooled KM left limits at the four event times are 0, 1/4, 1/2, 3/4.
    const auto rt = build_risk_table(testutil::worked_sample());

    // fh:1:0 (w = u): contributions 0, (1/4)(1/3), (1/2)(-1/2).
    const WeightSpec fh10 = WeightSpec::fleming_harrington(1, 0);
    CHECK(pairwise_wlr(rt, 0, 1, fh10) == doctest::Approx(-1.0 / 6.0).epsilon(1e-14));

    // cross (w = 1-2u): contributions 1*(-1/2), (1/2)(1/3), 0.
    CHECK(pairwise_wlr(rt, 0, 1, WeightSpec::crossing()) ==
          doctest::Approx(-1.0 / 3.0).epsilon(1e-14));

    std::vector<WeightSpec> w;
    w.push_back(WeightSpec::fleming_harrington(0, 0));
    w.push_back(fh10);
    const Eigen::MatrixXd cov = pairwise_covariance(rt, 0, 1, w);
    CHECK(cov(0, 0) == doctest::Approx(13.0 / 18.0).epsilon(1e-14));
    CHECK(cov(0, 1) == doctest::Approx(13.0 / 72.0).epsilon(1e-14));
    CHECK(cov(1, 0) == cov(0, 1));
    CHECK(cov(1, 1) == doctest::Approx(11.0 / 144.0).epsilon(1e-14));

    const Eigen::MatrixXd cov2 = pairwise_covariance(rt, 0, 1, w_pair());
    CHECK(cov2(0, 1) == doctest::Approx(13.0 / 36.0).epsilon(1e-14));
    CHECK(cov2(1, 1) == doctest::Approx(11.0 / 36.0).epsilon(1e-14));
}

TEST_CASE("worked sample: mdir quadratic form, two directions") {
    const auto rt = build_risk_table(testutil::worked_sample());
    // Exact value 8/13 for the span {1, 1-2u}; the same value arises for the
    // basis {1, u} because the quadratic form only depends on the span.
    const QuadraticForm qf = mdir_statistic(rt, 0, 1, w_pair());
    CHECK(qf.value == doctest::Approx(8.0 / 13.0).epsilon(1e-12));
    CHECK(qf.df == 2);

    std::vector<WeightSpec> w_alt;
    w_alt.push_back(WeightSpec::fleming_harrington(0, 0));
    w_alt.push_back(WeightSpec::fleming_harrington(1, 0));
    const QuadraticForm qf2 = mdir_statistic(rt, 0, 1, w_alt);
    CHECK(qf2.value == doctest::Approx(8.0 / 13.0).epsilon(1e-12));
    CHECK(qf2.df == 2);
}

TEST_CASE("statistic is antisymmetric in the group order") {
    RngEngine eng(RngStream(311, 0));
    for (int trial = 0; trial < 10; ++trial) {
        const auto sample = testutil::random_sample(eng, {.k = 3, .tied_grid = trial % 2 == 1});
        const auto rt = build_risk_table(sample);
        for (const auto& w : w_pair()) {
            // Bitwise: every accumulated term is the exact negation.
            CHECK(pairwise_wlr(rt, 0, 2, w) == -pairwise_wlr(rt, 2, 0, w));
        }
    }
}

TEST_CASE("random samples agree with the raw-observation log-rank oracle") {
    RngEngine eng(RngStream(271828, 1));
    const auto w = w_logrank();
    int informative = 0;
    for (int trial = 0; trial < 30; ++trial) {
        const testutil::RandomSampleOptions opt{.k = 2,
                                               .min_per_group = 2,
                                               .max_per_group = 12,
                                               .censor_prob = 0.3,
                                               .tied_grid = trial % 3 == 0};
        const auto sample = testutil::random_sample(eng, opt);
        const auto rt = build_risk_table(sample);
        const auto oracle = testutil::logrank_oracle(sample, "g1", "g2");
        const double scale =
            std::sqrt(static_cast<double>(sample.n()) /
                      (static_cast<double>(sample.group_size(0)) *
                       static_cast<double>(sample.group_size(1))));

        const double t_stat = pairwise_wlr(rt, 0, 1, w[0]);
        CHECK(t_stat == doctest::Approx(scale * oracle.observed_minus_expected)
                            .epsilon(1e-10)
                            .scale(1.0));

        const Eigen::MatrixXd cov = pairwise_covariance(rt, 0, 1, w);
        CHECK(cov(0, 0) == doctest::Approx(scale * scale * oracle.variance)
                               .epsilon(1e-10)
                               .scale(1.0));

        const QuadraticForm qf = mdir_statistic(rt, 0, 1, w);
        if (oracle.variance > 0.0) {
            const double chi = oracle.observed_minus_expected *
                               oracle.observed_minus_expected / oracle.variance;
            CHECK(qf.value == doctest::Approx(chi).epsilon(1e-9).scale(1.0));
            CHECK(qf.df == 1);
            ++informative;
        } else {
            CHECK(qf.degenerate);
        }
    }
    CHECK(informative >= 25); // the generator seldom produces zero variance
}

TEST_CASE("mdir is invariant under a change of weight basis") {
    // {2, 2-2u} spans the same space as {1, 1-2u}; the studentized form only
    // sees the span.
    std::vector<WeightSpec> recombined;
    recombined.push_back(WeightSpec::tabulated({{0.0, 2.0}, {1.0, 2.0}}, "two"));
    recombined.push_back(WeightSpec::tabulated({{0.0, 2.0}, {1.0, 0.0}}, "ramp"));

    RngEngine eng(RngStream(5150, 2));
    for (int trial = 0; trial < 10; ++trial) {
        const auto sample = testutil::random_sample(
            eng, {.k = 2, .min_per_group = 4, .max_per_group = 15, .censor_prob = 0.2});
        const auto rt = build_risk_table(sample);
        const QuadraticForm a = mdir_statistic(rt, 0, 1, w_pair());
        const QuadraticForm b = mdir_statistic(rt, 0, 1, recombined);
        CHECK(a.degenerate == b.degenerate);
        if (!a.degenerate && a.df == 2 && b.df == 2) {
            CHECK(a.value == doctest::Approx(b.value).epsilon(1e-9).scale(1.0));
        }
    }
}

TEST_CASE("two groups: pooled and pairwise variants are bitwise identical") {
    RngEngine eng(RngStream(161803, 3));
    const auto w = w_pair();
    for (int trial = 0; trial < 20; ++trial) {
        const auto sample = testutil::random_sample(eng, {.k = 2, .tied_grid = trial % 2 == 0});
        const auto rt = build_risk_table(sample);
        const Eigen::VectorXd sp = pairwise_wlr_vector(rt, 0, 1, w);
        const Eigen::VectorXd so = pooled_wlr_vector(rt, 0, 1, w);
        const Eigen::MatrixXd cp = pairwise_covariance(rt, 0, 1, w);
        const Eigen::MatrixXd co = pooled_covariance(rt, 0, 1, w);
        for (int r = 0; r < sp.size(); ++r) {
            CHECK(sp[r] == so[r]); // exact
        }
        for (int p = 0; p < cp.rows(); ++p) {
            for (int s = 0; s < cp.cols(); ++s) {
                CHECK(cp(p, s) == co(p, s)); // exact
            }
        }
        const QuadraticForm qp = mdir_statistic(rt, 0, 1, w);
        const QuadraticForm qo = casanova_statistic(rt, 0, 1, w);
        CHECK(qp.value == qo.value);
        CHECK(qp.df == qo.df);
        CHECK(qp.degenerate == qo.degenerate);
    }
}

TEST_CASE("three groups: pooled and pairwise variants differ") {
    // A third-group event at t=0.5 enlarges the pooled risk set and adds a
    // pooled covariance term that the pairwise variant never sees.
    const auto sample = SurvivalSample::from_rows({
        {1.0, 1, "g1"},
        {2.0, 1, "g2"},
        {3.0, 1, "g1"},
        {4.0, 1, "g2"},
        {0.5, 1, "g3"},
    });
    const auto rt = build_risk_table(sample);
    const auto w = w_logrank();
    const Eigen::MatrixXd cp = pairwise_covariance(rt, 0, 1, w);
    const Eigen::MatrixXd co = pooled_covariance(rt, 0, 1, w);
    CHECK(co(0, 0) > cp(0, 0));
    // With a time-varying weight the statistics differ too: the pooled KM
    // left limits feel the g3 event.
    const WeightSpec fh10 = WeightSpec::fleming_harrington(1, 0);
    CHECK(pairwise_wlr(rt, 0, 1, fh10) != pooled_wlr(rt, 0, 1, fh10));
}

TEST_CASE("degenerate contrast: no events in either group") {
    const auto sample = SurvivalSample::from_rows({
        {5.0, 0, "g1"},
        {6.0, 0, "g1"},
        {5.5, 0, "g2"},
        {1.0, 1, "g3"},
        {2.0, 1, "g3"},
    });
    const auto rt = build_risk_table(sample);
    const QuadraticForm qf = mdir_statistic(rt, 0, 1, w_pair());
    CHECK(qf.value == 0.0);
    CHECK(qf.df == 0);
    CHECK(qf.degenerate);
    CHECK(pairwise_wlr(rt, 0, 1, WeightSpec::crossing()) == 0.0);
}

TEST_CASE("input validation for pair statistics") {
    const auto rt = build_risk_table(testutil::worked_sample());
    const auto w = w_logrank();
    CHECK_THROWS_AS((void)pairwise_wlr(rt, 0, 0, w[0]), std::invalid_argument);
    CHECK_THROWS_AS((void)pairwise_wlr(rt, 0, 2, w[0]), std::invalid_argument);
    CHECK_THROWS_AS((void)pairwise_wlr(rt, -1, 1, w[0]), std::invalid_argument);
    CHECK_THROWS_AS(pairwise_covariance(rt, 0, 1, std::span<const WeightSpec>{}),
                    std::invalid_argument);
}

TEST_CASE("stacked statistic vector indexes contrast-major") {
    RngEngine eng(RngStream(424, 5));
    const auto sample = testutil::random_sample(
        eng, {.k = 4, .min_per_group = 3, .max_per_group = 8, .censor_prob = 0.2});
    const auto rt = build_risk_table(sample);
    const auto w = w_pair();
    const auto cm = tukey(4);
    const StatVector sv = pairwise_stat_vector(rt, cm, w);
    REQUIRE(sv.q == 6);
    REQUIRE(sv.m == 2);
    REQUIRE(sv.values.size() == 12);
    for (int c = 0; c < sv.q; ++c) {
        const auto [j1, j2] = cm.pairs[static_cast<std::size_t>(c)];
        for (int r = 0; r < sv.m; ++r) {
            CHECK(sv.values[sv.index(c, r)] == pairwise_wlr(rt, j1, j2, w[r]));
        }
    }
}

namespace {

// Direct accumulation of the joint covariance per its defining formula,
// using full outer products and StepFunction left limits; deliberately a
// different code path from the library's active-index accumulation.
Eigen::MatrixXd joint_cov_oracle(const RiskTable& rt, const ContrastMatrix& cm,
                                 std::span<const WeightSpec> weights) {
    const int q = cm.q();
    const int m = static_cast<int>(weights.size());
    const int dim = q * m;
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
    std::vector<StepFunction> km;
    for (int c = 0; c < q; ++c) {
        const auto [j1, j2] = cm.pairs[static_cast<std::size_t>(c)];
        const int pair_groups[2] = {j1, j2};
        km.push_back(kaplan_meier_pooled(rt, pair_groups));
    }
    for (int t = 0; t < rt.num_times(); ++t) {
        for (int j = 0; j < rt.k(); ++j) {
            const long dn = rt.events(j, t);
            if (dn == 0) continue;
            const double y = static_cast<double>(rt.at_risk(j, t));
            Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
            for (int c = 0; c < q; ++c) {
                const auto [j1, j2] = cm.pairs[static_cast<std::size_t>(c)];
                if (j != j1 && j != j2) continue;
                const double y1 = static_cast<double>(rt.at_risk(j1, t));
                const double y2 = static_cast<double>(rt.at_risk(j2, t));
                if (y1 == 0.0 || y2 == 0.0) continue;
                const double kf = y1 * y2 / (y1 + y2);
                const double sc = std::sqrt(
                    static_cast<double>(rt.n()) /
                    (static_cast<double>(rt.group_size(j1)) *
                     static_cast<double>(rt.group_size(j2))));
                const double sign = j == j2 ? 1.0 : -1.0;
                const double u = km[static_cast<std::size_t>(c)].value_before(rt.time(t));
                for (int r = 0; r < m; ++r) {
                    v[c * m + r] = sign * sc * weights[static_cast<std::size_t>(r)](u) * kf;
                }
            }
            cov += v * v.transpose() * (static_cast<double>(dn) / (y * y));
        }
    }
    return cov;
}

} // namespace

TEST_CASE("joint covariance matches a direct-formula oracle") {
    RngEngine eng(RngStream(999, 8));
    const auto w = w_pair();
    for (int trial = 0; trial < 8; ++trial) {
        const auto sample = testutil::random_sample(
            eng, {.k = 4, .min_per_group = 3, .max_per_group = 9,
                  .censor_prob = 0.25, .tied_grid = trial % 2 == 0});
        const auto rt = build_risk_table(sample);
        const auto cm = tukey(4);
        const Eigen::MatrixXd raw = joint_covariance_unfloored(rt, cm, w);
        const Eigen::MatrixXd oracle = joint_cov_oracle(rt, cm, w);
        REQUIRE(raw.rows() == 12);
        const double scale = std::max(1.0, oracle.norm());
        CHECK((raw - oracle).norm() / scale < 1e-12);
        CHECK((raw - raw.transpose()).norm() == 0.0); // exactly symmetric

        const Eigen::MatrixXd floored = joint_covariance(rt, cm, w);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(floored);
        CHECK(es.eigenvalues().minCoeff() >= -1e-10 * scale);
    }
}

TEST_CASE("joint covariance of the worked sample") {
    const auto rt = build_risk_table(testutil::worked_sample());
    const auto cm = dunnett(2);
    const auto w = w_logrank();
    const Eigen::MatrixXd raw = joint_covariance_unfloored(rt, cm, w);
    REQUIRE(raw.rows() == 1);
    // Optional-variation form: 1/4 + 1/9 + 1/4 (distinct from the plug-in
    // pairwise estimate 13/18).
    CHECK(raw(0, 0) == doctest::Approx(11.0 / 18.0).epsilon(1e-14));
}

TEST_CASE("contrasts sharing no group have exactly zero cross-covariance") {
    RngEngine eng(RngStream(777, 9));
    const auto sample = testutil::random_sample(
        eng, {.k = 4, .min_per_group = 4, .max_per_group = 8, .censor_prob = 0.2});
    const auto rt = build_risk_table(sample);
    const auto cm = tukey(4); // pair 0 = (0,1), pair 5 = (2,3)
    const auto w = w_pair();
    const Eigen::MatrixXd raw = joint_covariance_unfloored(rt, cm, w);
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
            CHECK(raw(0 * 2 + a, 5 * 2 + b) == 0.0); // never accumulated
        }
    }
    // Sanity: contrasts sharing a group are correlated.
    CHECK(raw(0, 1 * 2) != 0.0);
}

TEST_CASE("casanova plan reproduces the observed statistics under unit multipliers") {
    RngEngine eng(RngStream(2718, 11));
    const auto w = w_pair();
    for (int trial = 0; trial < 10; ++trial) {
        const auto sample = testutil::random_sample(
            eng, {.k = 3, .min_per_group = 3, .max_per_group = 10,
                  .censor_prob = 0.25, .tied_grid = trial % 2 == 1});
        const auto rt = build_risk_table(sample);
        const auto cm = tukey(3);
        const CasanovaPlan plan = make_casanova_plan(rt, cm, w);
        REQUIRE(plan.contrasts.size() == 3);
        REQUIRE(plan.m == 2);
        REQUIRE(plan.num_times == rt.num_times());

        // Observed quadratic forms equal the standalone computation.
        for (int c = 0; c < 3; ++c) {
            const auto [j1, j2] = cm.pairs[static_cast<std::size_t>(c)];
            const QuadraticForm direct = casanova_statistic(rt, j1, j2, w);
            CHECK(plan.contrasts[static_cast<std::size_t>(c)].observed.value == direct.value);
            CHECK(plan.contrasts[static_cast<std::size_t>(c)].observed.df == direct.df);
        }

        // Unit multipliers scatter to dN_j, so each replicate statistic is
        // the observed one and the max matches.
        std::vector<Eigen::VectorXd> gw;
        for (int j = 0; j < rt.k(); ++j) {
            const std::vector<double> ones(
                static_cast<std::size_t>(rt.group_size(j)), 1.0);
            gw.push_back(scatter_event_weights(rt, j, ones));
        }
        double expect = 0.0;
        for (const auto& pc : plan.contrasts) {
            if (!pc.observed.degenerate) expect = std::max(expect, pc.observed.value);
        }
        const double got = casanova_replicate_max(plan, gw);
        CHECK(got == doctest::Approx(expect).epsilon(1e-12).scale(1.0));
    }
}

TEST_CASE("scatter_event_weights validates and aligns") {
    const auto rt = build_risk_table(testutil::worked_sample());
    const std::vector<double> two = {0.5, 2.0};
    const Eigen::VectorXd w0 = scatter_event_weights(rt, 0, two);
    REQUIRE(w0.size() == 4);
    // Group g1 subjects: times 1 and 3 -> event-time indices 0 and 2.
    CHECK(w0[0] == 0.5);
    CHECK(w0[1] == 0.0);
    CHECK(w0[2] == 2.0);
    CHECK(w0[3] == 0.0);

    const std::vector<double> wrong = {1.0};
    CHECK_THROWS_AS(scatter_event_weights(rt, 0, wrong), std::invalid_argument);
    CHECK_THROWS_AS(scatter_event_weights(rt, 5, two), std::invalid_argument);
}

TEST_CASE("replicate max skips degenerate contrasts") {
    // Groups g1/g2 carry no events, so contrast (0,1) is degenerate in the
    // pooled plan only if its covariance vanishes; with pooled risk sets the
    // statistic can still accumulate variance from other groups' event times,
    // so build the plan and check the replicate path never produces NaN and
    // respects the degenerate flag.
    const auto sample = SurvivalSample::from_rows({
        {5.0, 0, "g1"},
        {6.0, 0, "g1"},
        {5.5, 0, "g2"},
        {7.0, 0, "g2"},
        {1.0, 1, "g3"},
        {2.0, 1, "g3"},
        {3.0, 1, "g3"},
    });
    const auto rt = build_risk_table(sample);
    const auto cm = tukey(3);
    const auto w = w_logrank();
    const CasanovaPlan plan = make_casanova_plan(rt, cm, w);

    std::vector<Eigen::VectorXd> gw;
    RngEngine eng(RngStream(31, 12));
    for (int j = 0; j < rt.k(); ++j) {
        std::vector<double> mult(static_cast<std::size_t>(rt.group_size(j)));
        for (auto& x : mult) x = eng.normal();
        gw.push_back(scatter_event_weights(rt, j, mult));
    }
    const double value = casanova_replicate_max(plan, gw);
    CHECK(std::isfinite(value));
    CHECK(value >= 0.0);

    // A plan consisting only of degenerate contrasts yields exactly zero.
    CasanovaPlan degen;
    degen.m = 1;
    degen.num_times = rt.num_times();
    CasanovaPlan::Contrast pc;
    pc.j1 = 0;
    pc.j2 = 1;
    pc.observed.degenerate = true;
    degen.contrasts.push_back(pc);
    CHECK(casanova_replicate_max(degen, gw) == 0.0);
}
