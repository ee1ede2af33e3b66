#include "survmct/procedures.hpp"

#include "survmct/teststats.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace survmct {

namespace {

void check_setup(const SurvivalSample& sample, const ContrastMatrix& contrasts, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("alpha must lie strictly between 0 and 1");
    }
    if (contrasts.k != sample.k()) {
        throw std::invalid_argument("contrast matrix group count does not match the sample");
    }
    if (contrasts.q() == 0) {
        throw std::invalid_argument("contrast set is empty");
    }
}

ContrastResult base_result(const ContrastMatrix& contrasts, int c,
                           const SurvivalSample& sample) {
    const auto pair = contrasts.pairs[static_cast<std::size_t>(c)];
    ContrastResult r;
    r.label = contrast_label(pair, sample.labels());
    r.j1 = pair.first;
    r.j2 = pair.second;
    return r;
}

// Index of the contrast carrying the smallest raw p-value (first on ties);
// drives the global statistic for the Bonferroni procedures.
std::size_t best_contrast(const std::vector<ContrastResult>& rs) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < rs.size(); ++i) {
        if (rs[i].p_raw < rs[best].p_raw) best = i;
    }
    return best;
}

} // namespace

TestReport adjusted_logrank(const SurvivalSample& sample, const ContrastMatrix& contrasts,
                            double alpha) {
    check_setup(sample, contrasts, alpha);
    const RiskTable rt = build_risk_table(sample);
    const WeightSpec w = WeightSpec::fleming_harrington(0, 0);
    const WeightSpec warr[1] = {w};
    const int q = contrasts.q();

    TestReport report;
    report.method = method_name(Method::logrank);
    report.alpha = alpha;
    report.group_labels = sample.labels();
    report.weight_labels = {w.label()};
    for (int c = 0; c < q; ++c) {
        ContrastResult r = base_result(contrasts, c, sample);
        const double t = pairwise_wlr(rt, r.j1, r.j2, w);
        const Eigen::MatrixXd cov = pairwise_covariance(rt, r.j1, r.j2, warr);
        const double var = cov(0, 0);
        if (var == 0.0) {
            r.degenerate = true;
        } else {
            r.statistic = t * t / var;
            r.df = 1;
            r.p_raw = chi_square_upper_tail(r.statistic, 1);
            r.p_adjusted = std::min(1.0, r.p_raw * q);
            r.rejected = r.p_adjusted <= alpha;
        }
        report.contrasts.push_back(std::move(r));
    }
    const std::size_t best = best_contrast(report.contrasts);
    report.global.statistic = report.contrasts[best].statistic;
    report.global.critical_value = chi_square_upper_quantile(alpha / q, 1);
    report.global.p_value = 1.0;
    for (const auto& r : report.contrasts) {
        report.global.p_value = std::min(report.global.p_value, r.p_adjusted);
    }
    report.global.rejected = report.global.p_value <= alpha;
    return report;
}

TestReport adjusted_mdir(const SurvivalSample& sample, const ContrastMatrix& contrasts,
                         std::span<const WeightSpec> weights, double alpha) {
    check_setup(sample, contrasts, alpha);
    if (weights.empty()) {
        throw std::invalid_argument("adjusted_mdir: at least one weight function is required");
    }
    if (!weights_linearly_independent(weights)) {
        throw std::invalid_argument("adjusted_mdir: weight functions must be linearly independent");
    }
    const RiskTable rt = build_risk_table(sample);
    const int q = contrasts.q();

    TestReport report;
    report.method = method_name(Method::mdir);
    report.alpha = alpha;
    report.group_labels = sample.labels();
    for (const auto& w : weights) report.weight_labels.push_back(w.label());
    for (int c = 0; c < q; ++c) {
        ContrastResult r = base_result(contrasts, c, sample);
        const QuadraticForm qf = mdir_statistic(rt, r.j1, r.j2, weights);
        r.statistic = qf.value;
        r.df = qf.df;
        r.degenerate = qf.degenerate;
        r.p_raw = qf.degenerate ? 1.0 : chi_square_upper_tail(qf.value, qf.df);
        r.p_adjusted = std::min(1.0, r.p_raw * q);
        r.rejected = !qf.degenerate && r.p_adjusted <= alpha;
        report.contrasts.push_back(std::move(r));
    }
    const std::size_t best = best_contrast(report.contrasts);
    const int best_df = report.contrasts[best].df;
    report.global.statistic = report.contrasts[best].statistic;
    report.global.critical_value =
        best_df >= 1 ? chi_square_upper_quantile(alpha / q, best_df) : 0.0;
    report.global.p_value = 1.0;
    for (const auto& r : report.contrasts) {
        report.global.p_value = std::min(report.global.p_value, r.p_adjusted);
    }
    report.global.rejected = report.global.p_value <= alpha;
    return report;
}

TestReport multi_weighted_lr(const SurvivalSample& sample, const ContrastMatrix& contrasts,
                             std::span<const WeightSpec> weights, double alpha,
                             const MaxWlrOptions& options) {
    check_setup(sample, contrasts, alpha);
    if (weights.empty()) {
        throw std::invalid_argument("multi_weighted_lr: at least one weight function is required");
    }
    if (options.mc_samples < 1) {
        throw std::invalid_argument("multi_weighted_lr: mc_samples must be >= 1");
    }
    const RiskTable rt = build_risk_table(sample);
    const int q = contrasts.q();
    const int m = static_cast<int>(weights.size());

    const StatVector sv = pairwise_stat_vector(rt, contrasts, weights);
    const Eigen::MatrixXd raw = joint_covariance_unfloored(rt, contrasts, weights);

    // Components with exactly zero estimated variance carry no information;
    // they are excluded from the max and from the calibration.
    std::vector<int> active;
    for (int i = 0; i < q * m; ++i) {
        if (raw(i, i) > 0.0) active.push_back(i);
    }

    TestReport report;
    report.method = method_name(Method::maxwlr);
    report.alpha = alpha;
    report.group_labels = sample.labels();
    for (const auto& w : weights) report.weight_labels.push_back(w.label());
    report.resampling = ResamplingInfo{"monte_carlo", "normal", options.mc_samples,
                                       options.rng.seed, options.rng.stream};

    if (active.empty()) {
        for (int c = 0; c < q; ++c) {
            ContrastResult r = base_result(contrasts, c, sample);
            r.degenerate = true;
            report.contrasts.push_back(std::move(r));
        }
        return report;
    }

    const int dim = static_cast<int>(active.size());
    Eigen::MatrixXd sub(dim, dim);
    for (int a = 0; a < dim; ++a) {
        for (int b = 0; b < dim; ++b) {
            sub(a, b) = raw(active[static_cast<std::size_t>(a)],
                            active[static_cast<std::size_t>(b)]);
        }
    }
    sub = psd_floor(sub);
    Eigen::VectorXd sd(dim);
    for (int a = 0; a < dim; ++a) {
        if (!(sub(a, a) > 0.0)) {
            throw std::runtime_error("multi_weighted_lr: covariance diagonal lost positivity");
        }
        sd[a] = std::sqrt(sub(a, a));
    }
    Eigen::MatrixXd corr(dim, dim);
    for (int a = 0; a < dim; ++a) {
        for (int b = 0; b < dim; ++b) {
            corr(a, b) = a == b ? 1.0 : std::clamp(sub(a, b) / (sd[a] * sd[b]), -1.0, 1.0);
        }
    }

    // Standardized components, grouped back by contrast.
    std::vector<double> z(static_cast<std::size_t>(dim));
    for (int a = 0; a < dim; ++a) {
        z[static_cast<std::size_t>(a)] = sv.values[active[static_cast<std::size_t>(a)]] / sd[a];
    }
    std::vector<double> thresholds;
    std::vector<int> contrast_of_threshold;
    double global_stat = 0.0;
    std::vector<ContrastResult> results;
    for (int c = 0; c < q; ++c) {
        ContrastResult r = base_result(contrasts, c, sample);
        double local = 0.0;
        int count = 0;
        for (int a = 0; a < dim; ++a) {
            if (active[static_cast<std::size_t>(a)] / m != c) continue;
            const double v = options.two_sided ? std::fabs(z[static_cast<std::size_t>(a)])
                                               : z[static_cast<std::size_t>(a)];
            if (count == 0 || v > local) local = v;
            ++count;
        }
        if (count == 0) {
            r.degenerate = true;
        } else {
            r.statistic = local;
            r.df = count;
            thresholds.push_back(local);
            contrast_of_threshold.push_back(c);
            global_stat = std::max(global_stat, local);
        }
        results.push_back(std::move(r));
    }
    thresholds.push_back(global_stat);

    const double critical = equicoordinate_quantile(corr, alpha, options.mc_samples,
                                                    options.rng, options.two_sided);
    const std::vector<double> pvals = max_abs_mvn_pvalues(corr, thresholds, options.mc_samples,
                                                          options.rng, options.two_sided);
    for (std::size_t i = 0; i + 1 < pvals.size(); ++i) {
        auto& r = results[static_cast<std::size_t>(contrast_of_threshold[i])];
        r.p_raw = pvals[i];
        r.p_adjusted = pvals[i];
        r.rejected = pvals[i] <= alpha;
    }
    report.contrasts = std::move(results);
    report.global.statistic = global_stat;
    report.global.critical_value = critical;
    report.global.p_value = pvals.back();
    report.global.rejected = pvals.back() <= alpha;
    return report;
}

TestReport multi_casanova(const SurvivalSample& sample, const ContrastMatrix& contrasts,
                          std::span<const WeightSpec> weights, double alpha,
                          const CasanovaOptions& options) {
    check_setup(sample, contrasts, alpha);
    if (weights.empty()) {
        throw std::invalid_argument("multi_casanova: at least one weight function is required");
    }
    if (options.iterations < 100) {
        throw std::invalid_argument("multi_casanova: at least 100 bootstrap replicates required");
    }
    if (options.threads < 1) {
        throw std::invalid_argument("multi_casanova: threads must be >= 1");
    }
    const RiskTable rt = build_risk_table(sample);
    const int q = contrasts.q();
    const long B = options.iterations;

    const CasanovaPlan plan = make_casanova_plan(rt, contrasts, weights);

    // Bootstrap replicates of max_c C*; each replicate owns a spawned stream,
    // so the values are independent of the thread partition.
    std::vector<double> cmax(static_cast<std::size_t>(B), 0.0);
    const int k = rt.k();
    auto run_chunk = [&](long lo, long hi) {
        std::vector<Eigen::VectorXd> w(static_cast<std::size_t>(k));
        for (long b = lo; b < hi; ++b) {
            const RngStream rep = options.rng.spawn(static_cast<std::uint64_t>(b));
            for (int j = 0; j < k; ++j) {
                const auto mult = draw_multipliers(
                    options.law, rt.group_size(j), rep.spawn(static_cast<std::uint64_t>(j)));
                w[static_cast<std::size_t>(j)] = scatter_event_weights(rt, j, mult);
            }
            cmax[static_cast<std::size_t>(b)] = casanova_replicate_max(plan, w);
        }
    };
    const int threads = static_cast<int>(std::min<long>(options.threads, B));
    if (threads <= 1) {
        run_chunk(0, B);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
        const long chunk = (B + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            const long lo = t * chunk;
            const long hi = std::min<long>(B, lo + chunk);
            pool.emplace_back([&, lo, hi, t] {
                try {
                    run_chunk(lo, hi);
                } catch (...) {
                    errors[static_cast<std::size_t>(t)] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (const auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    std::vector<double> sorted = cmax;
    std::sort(sorted.begin(), sorted.end());
    const auto rank = static_cast<std::size_t>(
        std::ceil((1.0 - alpha) * static_cast<double>(B)));
    const double qstar = sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];

    auto add_one_p = [&](double stat) {
        long count = 0;
        for (double v : cmax) {
            if (v >= stat) ++count;
        }
        return static_cast<double>(1 + count) / static_cast<double>(B + 1);
    };

    TestReport report;
    report.method = method_name(options.law == MultiplierLaw::rademacher
                                    ? Method::casanova_rademacher
                                    : Method::casanova_poisson);
    report.alpha = alpha;
    report.group_labels = sample.labels();
    for (const auto& w : weights) report.weight_labels.push_back(w.label());
    report.resampling = ResamplingInfo{
        "wild_bootstrap",
        options.law == MultiplierLaw::rademacher ? "rademacher" : "centered_poisson", B,
        options.rng.seed, options.rng.stream};

    double global_stat = 0.0;
    for (int c = 0; c < q; ++c) {
        ContrastResult r = base_result(contrasts, c, sample);
        const QuadraticForm& qf = plan.contrasts[static_cast<std::size_t>(c)].observed;
        r.statistic = qf.value;
        r.df = qf.df;
        r.degenerate = qf.degenerate;
        r.p_raw = add_one_p(qf.value);
        r.p_adjusted = r.p_raw;
        r.rejected = !qf.degenerate && qf.value > qstar;
        global_stat = std::max(global_stat, qf.value);
        report.contrasts.push_back(std::move(r));
    }
    report.global.statistic = global_stat;
    report.global.critical_value = qstar;
    report.global.p_value = add_one_p(global_stat);
    report.global.rejected = global_stat > qstar;
    return report;
}

std::string method_name(Method m) {
    switch (m) {
    case Method::logrank: return "logrank";
    case Method::mdir: return "mdir";
    case Method::maxwlr: return "maxwlr";
    case Method::casanova_rademacher: return "casanova-rade";
    case Method::casanova_poisson: return "casanova-pois";
    }
    throw std::logic_error("unknown method");
}

std::optional<Method> parse_method(std::string_view name) {
    for (Method m : {Method::logrank, Method::mdir, Method::maxwlr,
                     Method::casanova_rademacher, Method::casanova_poisson}) {
        if (name == method_name(m)) return m;
    }
    return std::nullopt;
}

std::vector<Method> parse_methods(std::string_view csv) {
    std::vector<Method> out;
    std::size_t start = 0;
    while (start <= csv.size()) {
        auto pos = csv.find(',', start);
        const auto tok = csv.substr(start, pos == std::string_view::npos ? csv.size() - start
                                                                         : pos - start);
        if (tok == "all") {
            for (Method m : {Method::logrank, Method::mdir, Method::maxwlr,
                             Method::casanova_rademacher, Method::casanova_poisson}) {
                out.push_back(m);
            }
        } else if (auto m = parse_method(tok)) {
            out.push_back(*m);
        } else {
            throw std::invalid_argument("unknown method '" + std::string(tok) +
                                        "' (expected logrank, mdir, maxwlr, casanova-rade, "
                                        "casanova-pois or all)");
        }
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    if (out.empty()) {
        throw std::invalid_argument("method list is empty");
    }
    for (std::size_t a = 0; a < out.size(); ++a) {
        for (std::size_t b = a + 1; b < out.size(); ++b) {
            if (out[a] == out[b]) {
                throw std::invalid_argument("method list contains duplicates");
            }
        }
    }
    return out;
}

TestReport run_method(Method method, const SurvivalSample& sample,
                      const ContrastMatrix& contrasts, std::span<const WeightSpec> weights,
                      double alpha, const MaxWlrOptions& maxwlr,
                      const CasanovaOptions& casanova) {
    switch (method) {
    case Method::logrank:
        return adjusted_logrank(sample, contrasts, alpha);
    case Method::mdir:
        return adjusted_mdir(sample, contrasts, weights, alpha);
    case Method::maxwlr:
        return multi_weighted_lr(sample, contrasts, weights, alpha, maxwlr);
    case Method::casanova_rademacher: {
        CasanovaOptions o = casanova;
        o.law = MultiplierLaw::rademacher;
        return multi_casanova(sample, contrasts, weights, alpha, o);
    }
    case Method::casanova_poisson: {
        CasanovaOptions o = casanova;
        o.law = MultiplierLaw::centered_poisson;
        return multi_casanova(sample, contrasts, weights, alpha, o);
    }
    }
    throw std::logic_error("unknown method");
}

namespace {

nlohmann::ordered_json report_json(const TestReport& r) {
    nlohmann::ordered_json j;
    j["method"] = r.method;
    j["alpha"] = r.alpha;
    j["groups"] = r.group_labels;
    j["weights"] = r.weight_labels;
    nlohmann::ordered_json cs = nlohmann::ordered_json::array();
    for (const auto& c : r.contrasts) {
        nlohmann::ordered_json cj;
        cj["label"] = c.label;
        cj["pair"] = {c.j1 + 1, c.j2 + 1};
        cj["statistic"] = c.statistic;
        cj["df"] = c.df;
        cj["p_raw"] = c.p_raw;
        cj["p_adjusted"] = c.p_adjusted;
        cj["rejected"] = c.rejected;
        cj["degenerate"] = c.degenerate;
        cs.push_back(std::move(cj));
    }
    j["contrasts"] = std::move(cs);
    j["global"] = {{"statistic", r.global.statistic},
                   {"critical_value", r.global.critical_value},
                   {"p_value", r.global.p_value},
                   {"rejected", r.global.rejected}};
    if (r.resampling) {
        j["resampling"] = {{"kind", r.resampling->kind},
                           {"law", r.resampling->law},
                           {"iterations", r.resampling->iterations},
                           {"seed", r.resampling->seed},
                           {"stream", r.resampling->stream}};
    }
    return j;
}

std::string fixed4(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", x);
    return buf;
}

} // namespace

std::string reports_to_json(std::span<const TestReport> reports) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : reports) arr.push_back(report_json(r));
    j["reports"] = std::move(arr);
    return j.dump(2) + "\n";
}

std::string reports_to_csv(std::span<const TestReport> reports) {
    std::ostringstream out;
    out << "method,scope,contrast,statistic,df,p_raw,p_adjusted,rejected,degenerate,"
           "critical_value\n";
    for (const auto& r : reports) {
        for (const auto& c : r.contrasts) {
            out << r.method << ",contrast," << c.label << ',' << format_double(c.statistic)
                << ',' << c.df << ',' << format_double(c.p_raw) << ','
                << format_double(c.p_adjusted) << ',' << (c.rejected ? "true" : "false") << ','
                << (c.degenerate ? "true" : "false") << ",\n";
        }
        out << r.method << ",global,GLOBAL," << format_double(r.global.statistic) << ",,"
            << format_double(r.global.p_value) << ',' << format_double(r.global.p_value) << ','
            << (r.global.rejected ? "true" : "false") << ",false,"
            << format_double(r.global.critical_value) << '\n';
    }
    return out.str();
}

std::string reports_to_text(std::span<const TestReport> reports) {
    std::ostringstream out;
    if (reports.empty()) return {};
    // All reports share the contrast set; use the first as the row template.
    const auto& first = reports.front();
    out << "Multiple contrast tests, alpha = " << format_double(first.alpha) << "\n";
    out << "Adjusted p-values ('*' marks a rejection)\n\n";
    std::size_t label_w = std::string("contrast").size();
    for (const auto& c : first.contrasts) label_w = std::max(label_w, c.label.size());
    auto pad = [&out](const std::string& s, std::size_t w) {
        out << s;
        for (std::size_t i = s.size(); i < w + 2; ++i) out << ' ';
    };
    pad("contrast", label_w);
    for (const auto& r : reports) pad(r.method, std::max<std::size_t>(r.method.size(), 9));
    out << '\n';
    for (std::size_t i = 0; i < first.contrasts.size(); ++i) {
        pad(first.contrasts[i].label, label_w);
        for (const auto& r : reports) {
            const auto& c = r.contrasts.at(i);
            std::string cell = c.degenerate ? "  -" : fixed4(c.p_adjusted);
            if (c.rejected) cell += '*';
            pad(cell, std::max<std::size_t>(r.method.size(), 9));
        }
        out << '\n';
    }
    pad("GLOBAL", label_w);
    for (const auto& r : reports) {
        std::string cell = fixed4(r.global.p_value);
        if (r.global.rejected) cell += '*';
        pad(cell, std::max<std::size_t>(r.method.size(), 9));
    }
    out << "\n\n";
    for (const auto& r : reports) {
        out << r.method << ": statistic=" << fixed4(r.global.statistic)
            << " critical=" << fixed4(r.global.critical_value)
            << " p=" << fixed4(r.global.p_value)
            << (r.global.rejected ? " -> reject" : " -> retain");
        if (r.resampling) {
            out << " [" << r.resampling->kind << ", " << r.resampling->law << ", "
                << r.resampling->iterations << " iterations]";
        }
        out << '\n';
    }
    return out.str();
}

} // namespace survmct
