// Standalone acceptance checks.
//
// Usage: acceptance <path-to-cli-binary> [criteria]
//   criteria: optional comma-separated criterion numbers (default: all)
//
// Each numbered criterion prints exactly one [PASS]/[FAIL] line on stdout
// (progress notes go to stderr); the process exit code is the number of
// failed criteria.  The CLI binary path is needed only by the determinism
// criterion, which spawns real processes.

#include "survmct/design.hpp"
#include "survmct/estimators.hpp"
#include "survmct/numerics.hpp"
#include "survmct/procedures.hpp"
#include "survmct/simulation.hpp"
#include "survmct/survdata.hpp"
#include "survmct/teststats.hpp"

#include "test_util.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace {

using namespace survmct;

using Clock = std::chrono::steady_clock;

// Master seed for every randomized criterion.  The simulation-based bounds
// below hold for the true rejection rates with comfortable margins (checked
// against independent high-run estimates), but any single seed still draws
// 1000-run binomial noise around them.
constexpr std::uint64_t kSeed = 123;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

int hardware_threads() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

const MethodStudyResult* find_method(const ScenarioStudyResult& s, Method m) {
    for (const auto& r : s.methods) {
        if (r.method == m) return &r;
    }
    return nullptr;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// ---------------------------------------------------------------------------
// Criterion 1: on random small two-group datasets the w = 1 statistic
// reproduces the classical log-rank chi-square computed by the independent
// raw-observation oracle.
std::string criterion1() {
    const auto start = Clock::now();
    RngEngine eng{RngStream(kSeed, 1)};
    const WeightSpec unit = WeightSpec::fleming_harrington(0, 0);
    const std::vector<WeightSpec> w = {unit};
    int informative = 0;
    for (int i = 0; i < 240; ++i) {
        testutil::RandomSampleOptions opt;
        opt.k = 2;
        opt.min_per_group = 2;
        opt.max_per_group = 10;
        opt.censor_prob = 0.2 * (i % 3); // 0, 0.2, 0.4
        opt.tied_grid = (i % 2) == 1;
        const SurvivalSample sample = testutil::random_sample(eng, opt);
        const RiskTable rt = build_risk_table(sample);
        const double t = pairwise_wlr(rt, 0, 1, unit);
        const double v = pairwise_covariance(rt, 0, 1, w)(0, 0);
        const auto oracle = testutil::logrank_oracle(sample, "g1", "g2");
        const bool lib_degenerate = v <= 0.0;
        const bool oracle_degenerate = oracle.variance <= 0.0;
        if (lib_degenerate != oracle_degenerate) {
            return "dataset " + std::to_string(i) + ": degeneracy mismatch (library " +
                   format_double(v) + ", oracle " + format_double(oracle.variance) + ")";
        }
        if (lib_degenerate) continue;
        ++informative;
        // The normalizing constant sqrt(n/(n1 n2)) cancels in T^2 / Sigma.
        const double chi = t * t / v;
        const double oe = oracle.observed_minus_expected;
        const double oracle_chi = oe * oe / oracle.variance;
        const double tol = opt.tied_grid ? 1e-6 : 1e-8;
        if (std::fabs(chi - oracle_chi) > tol * std::max(1.0, std::fabs(oracle_chi))) {
            return "dataset " + std::to_string(i) + ": chi-square " + format_double(chi) +
                   " vs oracle " + format_double(oracle_chi);
        }
    }
    if (informative < 200) {
        return "only " + std::to_string(informative) + " informative datasets (need 200)";
    }
    const double elapsed = seconds_since(start);
    if (elapsed >= 10.0) {
        return "runtime " + format_double(elapsed) + " s exceeds the 10 s budget";
    }
    return {};
}

// ---------------------------------------------------------------------------
// Criterion 2: the worked four-subject example evaluates exactly.
std::string criterion2() {
    const SurvivalSample sample = testutil::worked_sample();
    const RiskTable rt = build_risk_table(sample);
    const WeightSpec unit = WeightSpec::fleming_harrington(0, 0);
    const std::vector<WeightSpec> w = {unit};
    const double t = pairwise_wlr(rt, 0, 1, unit);
    const double v = pairwise_covariance(rt, 0, 1, w)(0, 0);
    const QuadraticForm qf = mdir_statistic(rt, 0, 1, w);
    if (std::fabs(t - (-2.0 / 3.0)) > 1e-12) {
        return "T = " + format_double(t) + ", expected -2/3";
    }
    if (std::fabs(v - 13.0 / 18.0) > 1e-12) {
        return "variance = " + format_double(v) + ", expected 13/18";
    }
    if (std::fabs(qf.value - 8.0 / 13.0) > 1e-12 || qf.df != 1 || qf.degenerate) {
        return "chi-square = " + format_double(qf.value) + " (df " + std::to_string(qf.df) +
               "), expected 8/13 with df 1";
    }
    return {};
}

// ---------------------------------------------------------------------------
// Criterion 3: empirical FWER of every method on the four full-null
// scenarios, Dunnett and Tukey, inside [0.030, 0.070].
std::string criterion3() {
    std::string failures;
    for (const ContrastKind kind : {ContrastKind::dunnett, ContrastKind::tukey}) {
        StudyConfig config;
        for (const char* base : {"prop", "nprop", "cross", "mix"}) {
            auto s = find_builtin(std::string(base) + "-null");
            if (!s) return std::string("builtin scenario missing: ") + base + "-null";
            config.scenarios.push_back(std::move(*s));
        }
        config.methods = parse_methods("all");
        config.contrast = kind;
        config.runs = 1000;
        config.n_per_group = 100;
        config.bootstrap_iterations = 500;
        config.mc_samples = 50000;
        config.alpha = 0.05;
        config.seed = kSeed;
        config.threads = hardware_threads();
        const char* kind_name = kind == ContrastKind::dunnett ? "dunnett" : "tukey";
        std::cerr << "  criterion 3: " << kind_name
                  << " null grid (4 scenarios x 1000 runs, 5 methods)...\n";
        const auto t0 = Clock::now();
        const StudyReport report = run_study(config);
        std::cerr << "  criterion 3: " << kind_name << " done in "
                  << format_double(seconds_since(t0)) << " s\n";
        for (const auto& s : report.scenarios) {
            for (const auto& m : s.methods) {
                const double fwer = m.any_local_rate;
                if (!(fwer >= 0.030 && fwer <= 0.070)) {
                    failures += " " + s.scenario + "/" + kind_name + "/" +
                                method_name(m.method) + "=" + format_double(fwer);
                }
            }
        }
    }
    if (!failures.empty()) return "FWER outside [0.030, 0.070]:" + failures;
    return {};
}

// ---------------------------------------------------------------------------
// Criteria 4 and 5 share one 500-run Dunnett power study over the cross and
// prop scenarios.
const StudyReport& power_study() {
    static const StudyReport report = [] {
        StudyConfig config;
        config.scenarios = {*find_builtin("cross"), *find_builtin("prop")};
        config.methods = parse_methods("all");
        config.contrast = ContrastKind::dunnett;
        config.runs = 500;
        config.n_per_group = 100;
        config.bootstrap_iterations = 500;
        config.mc_samples = 50000;
        config.alpha = 0.05;
        config.seed = kSeed;
        config.threads = hardware_threads();
        std::cerr << "  criteria 4-5: cross+prop power study (2 x 500 runs, 5 methods)...\n";
        const auto t0 = Clock::now();
        StudyReport out = run_study(config);
        std::cerr << "  criteria 4-5: done in " << format_double(seconds_since(t0)) << " s\n";
        return out;
    }();
    return report;
}

std::string criterion4() {
    const ScenarioStudyResult& cross = power_study().scenarios.at(0);
    if (cross.scenario != "cross") return "unexpected scenario order";
    // Contrast (1,3) pits the two same-scale Weibull arms whose hazards cross
    // near the survival median; arm pair (1,4) separates so strongly that
    // every method saturates at power 1 there, so the log-rank collapse shows
    // on this contrast.
    std::size_t idx = cross.contrast_labels.size();
    for (std::size_t c = 0; c < cross.contrast_labels.size(); ++c) {
        if (cross.contrast_labels[c] == "3 - 1") idx = c;
    }
    if (idx == cross.contrast_labels.size()) return "contrast '3 - 1' not found";
    const MethodStudyResult* lr = find_method(cross, Method::logrank);
    if (!lr) return "logrank results missing";
    const double lr_power = lr->local_rates.at(idx);
    std::string failures;
    for (const Method m :
         {Method::casanova_rademacher, Method::casanova_poisson, Method::mdir}) {
        const MethodStudyResult* r = find_method(cross, m);
        if (!r) return method_name(m) + " results missing";
        const double power = r->local_rates.at(idx);
        if (!(power >= lr_power + 0.10)) {
            failures += " " + method_name(m) + "=" + format_double(power);
        }
    }
    if (!failures.empty()) {
        return "logrank=" + format_double(lr_power) +
               ", methods not ahead by 0.10:" + failures;
    }
    return {};
}

std::string criterion5() {
    const ScenarioStudyResult& prop = power_study().scenarios.at(1);
    if (prop.scenario != "prop") return "unexpected scenario order";
    const MethodStudyResult* lr = find_method(prop, Method::logrank);
    if (!lr) return "logrank results missing";
    const double lr_mean = mean_of(lr->local_rates);
    std::string failures;
    for (const Method m : {Method::mdir, Method::maxwlr, Method::casanova_rademacher,
                           Method::casanova_poisson}) {
        const MethodStudyResult* r = find_method(prop, m);
        if (!r) return method_name(m) + " results missing";
        const double other = mean_of(r->local_rates);
        if (!(lr_mean >= other - 0.02)) {
            failures += " " + method_name(m) + "=" + format_double(other);
        }
    }
    if (!failures.empty()) {
        return "logrank mean power " + format_double(lr_mean) + " trails:" + failures;
    }
    return {};
}

// ---------------------------------------------------------------------------
// Criterion 6: Penrose conditions on random PSD matrices, the chi-square
// tail identity, and equicoordinate quantiles against the Sidak closed form.
std::string criterion6() {
    RngEngine eng{RngStream(kSeed, 6)};
    for (int i = 0; i < 1000; ++i) {
        const int n = 1 + static_cast<int>(eng.u01() * 12.0);
        const int r = 1 + static_cast<int>(eng.u01() * n);
        Eigen::MatrixXd b(n, r);
        for (int row = 0; row < n; ++row) {
            for (int col = 0; col < r; ++col) b(row, col) = eng.normal();
        }
        const Eigen::MatrixXd a = b * b.transpose();
        const Eigen::MatrixXd p = moore_penrose(a).inverse;
        const Eigen::MatrixXd ap = a * p;
        const Eigen::MatrixXd pa = p * a;
        const double na = std::max(1.0, a.norm());
        const double np = std::max(1.0, p.norm());
        std::string which;
        if ((ap * a - a).norm() > 1e-8 * na) which = "A P A = A";
        else if ((pa * p - p).norm() > 1e-8 * np) which = "P A P = P";
        else if ((ap - ap.transpose()).norm() > 1e-8 * std::max(1.0, ap.norm())) {
            which = "(A P)' = A P";
        } else if ((pa - pa.transpose()).norm() > 1e-8 * std::max(1.0, pa.norm())) {
            which = "(P A)' = P A";
        }
        if (!which.empty()) {
            return "Penrose condition " + which + " violated on matrix " + std::to_string(i) +
                   " (dim " + std::to_string(n) + ", rank <= " + std::to_string(r) + ")";
        }
    }
    const double tail = chi_square_upper_tail(3.841459, 1);
    if (std::fabs(tail - 0.05) > 1e-6) {
        return "chi-square tail at 3.841459 is " + format_double(tail);
    }
    for (const int d : {1, 2, 5}) {
        const Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(d, d);
        const double q = equicoordinate_quantile(corr, 0.05, 100000,
                                                 RngStream(kSeed, 600 + d), true);
        const double sidak = normal_quantile(0.5 * (1.0 + std::pow(0.95, 1.0 / d)));
        if (std::fabs(q - sidak) > 0.01) {
            return "d=" + std::to_string(d) + ": quantile " + format_double(q) +
                   " vs Sidak " + format_double(sidak);
        }
    }
    return {};
}

// ---------------------------------------------------------------------------
// Criterion 7: wild-bootstrap Nelson-Aalen replicates are centered: their
// pointwise mean over 10,000 replicates stays within 4 standard errors of 0
// at every event time, for both multiplier laws.
std::string criterion7() {
    std::vector<SurvivalSample::Row> rows;
    for (int i = 0; i < 50; ++i) {
        rows.push_back({0.1 + 0.07 * i, i % 5 == 4 ? 0 : 1, "a"});
    }
    rows.push_back({1000.0, 0, "b"}); // far-censored second arm completes the sample
    const SurvivalSample sample = SurvivalSample::from_rows(rows);
    const RiskTable rt = build_risk_table(sample);
    const long B = 10000;
    const RngStream master(kSeed, 7);
    int law_index = 0;
    for (const MultiplierLaw law : {MultiplierLaw::rademacher, MultiplierLaw::centered_poisson}) {
        const char* law_name = law == MultiplierLaw::rademacher ? "rademacher" : "centered_poisson";
        const RngStream law_stream = master.spawn(static_cast<std::uint64_t>(law_index++));
        std::vector<double> sum;
        std::vector<double> sumsq;
        int times = 0;
        for (long b = 0; b < B; ++b) {
            const std::vector<double> mult = draw_multipliers(
                law, sample.group_size(0), law_stream.spawn(static_cast<std::uint64_t>(b)));
            const StepFunction f = wild_bootstrap_nelson_aalen(rt, 0, mult);
            if (sum.empty()) {
                times = f.size();
                sum.assign(static_cast<std::size_t>(times), 0.0);
                sumsq.assign(static_cast<std::size_t>(times), 0.0);
            }
            for (int i = 0; i < times; ++i) {
                const double x = f.value(i);
                sum[static_cast<std::size_t>(i)] += x;
                sumsq[static_cast<std::size_t>(i)] += x * x;
            }
        }
        if (times < 30) return std::string(law_name) + ": unexpectedly few event times";
        for (int i = 0; i < times; ++i) {
            const double mean = sum[static_cast<std::size_t>(i)] / static_cast<double>(B);
            const double var = (sumsq[static_cast<std::size_t>(i)] -
                                static_cast<double>(B) * mean * mean) /
                               static_cast<double>(B - 1);
            const double se = std::sqrt(std::max(var, 0.0) / static_cast<double>(B));
            if (se == 0.0 ? mean != 0.0 : std::fabs(mean) > 4.0 * se) {
                return std::string(law_name) + ": time index " + std::to_string(i) +
                       " has mean " + format_double(mean) + " .. " + format_double(4.0 * se);
            }
        }
    }
    return {};
}

// ---------------------------------------------------------------------------
// Criterion 8: spawned CLI invocations repeated with the same seed produce
// byte-identical output, and a 1000-run study gives identical results with 1
// and 8 worker threads.
std::string read_file_or_empty(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string criterion8(const std::string& cli) {
    if (cli.empty()) return "CLI binary path missing (pass it as argv[1])";

    const std::string input = "/tmp/survmct_acc_input.csv";
    {
        std::ostringstream rows;
        rows << "time,status,group\n";
        const double base[3] = {0.2, 0.8, 2.0};
        const double step[3] = {0.06, 0.09, 0.15};
        const char* label[3] = {"ctrl", "mid", "high"};
        for (int j = 0; j < 3; ++j) {
            for (int i = 0; i < 15; ++i) {
                rows << base[j] + step[j] * i << ',' << (i % 6 == 5 ? 0 : 1) << ','
                     << label[j] << '\n';
            }
        }
        std::ofstream out(input, std::ios::binary);
        out << rows.str();
        if (!out) return "cannot write fixture " + input;
    }

    auto shell = [](const std::string& cmd) {
        return std::system((cmd + " 2>>/tmp/survmct_acc_stderr.log").c_str()) == 0;
    };
    auto repeat_identical = [&](const std::string& name, const std::string& base_cmd,
                                const std::string& out1,
                                const std::string& out2) -> std::string {
        if (!shell(base_cmd + " --output " + out1)) return name + ": first run failed";
        if (!shell(base_cmd + " --output " + out2)) return name + ": second run failed";
        const std::string a = read_file_or_empty(out1);
        if (a.empty()) return name + ": empty output";
        if (a != read_file_or_empty(out2)) return name + ": repeated run differs";
        return {};
    };

    const std::string q = "\"" + cli + "\"";
    std::cerr << "  criterion 8: spawning CLI invocations...\n";
    for (const std::string format : {"json", "text", "csv"}) {
        const std::string msg = repeat_identical(
            "test/" + format,
            q + " test --input " + input +
                " --methods all --iterations 300 --mc-samples 5000 --seed 11 --format " +
                format,
            "/tmp/survmct_acc_test_" + format + "_1", "/tmp/survmct_acc_test_" + format + "_2");
        if (!msg.empty()) return msg;
    }
    {
        const std::string msg =
            repeat_identical("km-export", q + " km-export --input " + input,
                             "/tmp/survmct_acc_km_1", "/tmp/survmct_acc_km_2");
        if (!msg.empty()) return msg;
    }
    {
        const std::string msg = repeat_identical(
            "simulate",
            q + " simulate --scenario mix --runs 40 --n 15 --methods logrank,maxwlr"
                " --mc-samples 2000 --seed 3 --format json",
            "/tmp/survmct_acc_sim_1", "/tmp/survmct_acc_sim_2");
        if (!msg.empty()) return msg;
    }

    // 1000-run study, 1 thread vs 8 threads.  CSV carries every reported
    // rate but no thread count, so the files must match byte for byte.
    std::cerr << "  criterion 8: 1000-run study with 1 and 8 threads...\n";
    const std::string study_base =
        q + " simulate --scenario prop-null --runs 1000 --n 20 --methods logrank,mdir"
            " --seed 5 --format csv";
    if (!shell(study_base + " --threads 1 --output /tmp/survmct_acc_study_t1")) {
        return "study with 1 thread failed";
    }
    if (!shell(study_base + " --threads 8 --output /tmp/survmct_acc_study_t8")) {
        return "study with 8 threads failed";
    }
    const std::string t1 = read_file_or_empty("/tmp/survmct_acc_study_t1");
    if (t1.empty()) return "study output empty";
    if (t1 != read_file_or_empty("/tmp/survmct_acc_study_t8")) {
        return "study results differ between 1 and 8 threads";
    }
    if (!shell(study_base + " --threads 8 --output /tmp/survmct_acc_study_t8b")) {
        return "study repeat failed";
    }
    if (t1 != read_file_or_empty("/tmp/survmct_acc_study_t8b")) {
        return "repeated study run differs";
    }
    return {};
}

// ---------------------------------------------------------------------------
// Criterion 9: at k = 2 the pooled statistics collapse to the pairwise ones
// bitwise.
std::string criterion9() {
    RngEngine eng{RngStream(kSeed, 9)};
    const std::vector<WeightSpec> w = default_weights();
    for (int i = 0; i < 100; ++i) {
        testutil::RandomSampleOptions opt;
        opt.k = 2;
        opt.min_per_group = 2;
        opt.max_per_group = 12;
        opt.censor_prob = 0.15 * (i % 4);
        opt.tied_grid = (i % 2) == 1;
        const SurvivalSample sample = testutil::random_sample(eng, opt);
        const RiskTable rt = build_risk_table(sample);
        const Eigen::VectorXd tp = pairwise_wlr_vector(rt, 0, 1, w);
        const Eigen::VectorXd tq = pooled_wlr_vector(rt, 0, 1, w);
        for (int r = 0; r < tp.size(); ++r) {
            if (tp(r) != tq(r)) return "dataset " + std::to_string(i) + ": statistic differs";
        }
        const Eigen::MatrixXd cp = pairwise_covariance(rt, 0, 1, w);
        const Eigen::MatrixXd cq = pooled_covariance(rt, 0, 1, w);
        for (int a = 0; a < cp.rows(); ++a) {
            for (int b = 0; b < cp.cols(); ++b) {
                if (cp(a, b) != cq(a, b)) {
                    return "dataset " + std::to_string(i) + ": covariance differs";
                }
            }
        }
        const QuadraticForm qa = mdir_statistic(rt, 0, 1, w);
        const QuadraticForm qb = casanova_statistic(rt, 0, 1, w);
        if (qa.value != qb.value || qa.df != qb.df || qa.degenerate != qb.degenerate) {
            return "dataset " + std::to_string(i) + ": quadratic form differs";
        }
    }
    return {};
}

} // namespace

int main(int argc, char** argv) {
    const std::string cli = argc > 1 ? argv[1] : "";
    struct Entry {
        int number;
        const char* label;
        std::function<std::string()> run;
    };
    const std::vector<Entry> entries = {
        {1, "pairwise w=1 statistic matches the classical log-rank oracle on 240 random datasets",
         [] { return criterion1(); }},
        {2, "worked example gives T = -2/3, variance = 13/18, chi-square = 8/13 to 1e-12",
         [] { return criterion2(); }},
        {3, "FWER in [0.030, 0.070] for every method on the four null scenarios (Dunnett+Tukey)",
         [] { return criterion3(); }},
        {4, "crossing hazards: casanova and mdir beat log-rank power on contrast (1,3) by 0.10",
         [] { return criterion4(); }},
        {5, "proportional hazards: log-rank mean power within 0.02 of the best method",
         [] { return criterion5(); }},
        {6, "Penrose conditions, chi-square tail, and equicoordinate vs Sidak quantiles",
         [] { return criterion6(); }},
        {7, "wild-bootstrap Nelson-Aalen replicates have pointwise mean within 4 SE of 0",
         [] { return criterion7(); }},
        {8, "CLI output is byte-deterministic; 1000-run study identical with 1 and 8 threads",
         [&] { return criterion8(cli); }},
        {9, "pooled statistics collapse bitwise to pairwise ones on 100 two-group datasets",
         [] { return criterion9(); }},
    };
    std::vector<bool> selected(entries.size() + 1, true);
    if (argc > 2) {
        selected.assign(entries.size() + 1, false);
        std::istringstream list(argv[2]);
        std::string token;
        while (std::getline(list, token, ',')) {
            const int number = std::atoi(token.c_str());
            if (number < 1 || number > static_cast<int>(entries.size())) {
                std::fprintf(stderr, "unknown criterion '%s'\n", token.c_str());
                return 1;
            }
            selected[static_cast<std::size_t>(number)] = true;
        }
    }
    int failures = 0;
    for (const auto& e : entries) {
        if (!selected[static_cast<std::size_t>(e.number)]) continue;
        std::string detail;
        try {
            detail = e.run();
        } catch (const std::exception& ex) {
            detail = std::string("exception: ") + ex.what();
        }
        if (detail.empty()) {
            std::printf("[PASS] criterion %d: %s\n", e.number, e.label);
        } else {
            std::printf("[FAIL] criterion %d: %s (%s)\n", e.number, e.label, detail.c_str());
            ++failures;
        }
        std::fflush(stdout);
    }
    return failures;
}
