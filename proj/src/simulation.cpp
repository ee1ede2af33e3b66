#include "survmct/simulation.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace survmct {

EventLaw EventLaw::exponential(double rate) {
    if (!(rate > 0.0) || !std::isfinite(rate)) {
        throw std::invalid_argument("exponential law: rate must be positive and finite");
    }
    return {Kind::exponential, rate, 0.0};
}

EventLaw EventLaw::lognormal(double meanlog, double sdlog) {
    if (!std::isfinite(meanlog) || !(sdlog > 0.0) || !std::isfinite(sdlog)) {
        throw std::invalid_argument("lognormal law: need finite meanlog and positive sdlog");
    }
    return {Kind::lognormal, meanlog, sdlog};
}

EventLaw EventLaw::weibull(double shape, double scale) {
    if (!(shape > 0.0) || !(scale > 0.0) || !std::isfinite(shape) || !std::isfinite(scale)) {
        throw std::invalid_argument("weibull law: shape and scale must be positive and finite");
    }
    return {Kind::weibull, shape, scale};
}

double EventLaw::survival(double t) const {
    if (t <= 0.0) return 1.0;
    switch (kind) {
    case Kind::exponential:
        return std::exp(-a * t);
    case Kind::lognormal:
        return 1.0 - normal_cdf((std::log(t) - a) / b);
    case Kind::weibull:
        return std::exp(-std::pow(t / b, a));
    }
    throw std::logic_error("unknown law kind");
}

double EventLaw::draw(RngEngine& eng) const {
    const double u = eng.u01(); // treated as the survival probability
    switch (kind) {
    case Kind::exponential:
        return -std::log(u) / a;
    case Kind::lognormal:
        return std::exp(a + b * normal_quantile(u));
    case Kind::weibull:
        return b * std::pow(-std::log(u), 1.0 / a);
    }
    throw std::logic_error("unknown law kind");
}

double EventLaw::partial_survival_integral(double bound) const {
    if (!(bound > 0.0) || !std::isfinite(bound)) {
        throw std::invalid_argument("partial_survival_integral: bound must be positive and finite");
    }
    switch (kind) {
    case Kind::exponential:
        return (1.0 - std::exp(-a * bound)) / a;
    case Kind::lognormal: {
        const double z = (std::log(bound) - a) / b;
        return bound * (1.0 - normal_cdf(z)) +
               std::exp(a + 0.5 * b * b) * normal_cdf(z - b);
    }
    case Kind::weibull:
        return (b / a) * boost::math::tgamma_lower(1.0 / a, std::pow(bound / b, a));
    }
    throw std::logic_error("unknown law kind");
}

std::string EventLaw::describe() const {
    switch (kind) {
    case Kind::exponential:
        return "exponential(rate=" + format_double(a) + ")";
    case Kind::lognormal:
        return "lognormal(meanlog=" + format_double(a) + ", sdlog=" + format_double(b) + ")";
    case Kind::weibull:
        return "weibull(shape=" + format_double(a) + ", scale=" + format_double(b) + ")";
    }
    throw std::logic_error("unknown law kind");
}

Scenario Scenario::null_variant() const {
    Scenario s = *this;
    if (s.laws.empty()) {
        throw std::invalid_argument("null_variant: scenario has no laws");
    }
    for (auto& l : s.laws) l = s.laws.front();
    s.name = name + "-null";
    return s;
}

namespace {

Scenario make_scenario(std::string name, std::vector<EventLaw> laws) {
    Scenario s;
    s.name = std::move(name);
    s.laws = std::move(laws);
    s.n_per_group = 100;
    s.censoring = 0.0;
    return s;
}

void check_scenario(const Scenario& s) {
    if (s.laws.size() < 2) {
        throw std::invalid_argument("scenario '" + s.name + "': need at least two arms");
    }
    if (s.n_per_group < 1) {
        throw std::invalid_argument("scenario '" + s.name + "': n_per_group must be >= 1");
    }
    if (!(s.censoring >= 0.0 && s.censoring < 1.0)) {
        throw std::invalid_argument("scenario '" + s.name + "': censoring must lie in [0, 1)");
    }
}

} // namespace

std::vector<Scenario> builtin_scenarios() {
    std::vector<Scenario> out;
    out.push_back(make_scenario("prop", {EventLaw::exponential(1.5), EventLaw::exponential(2.5),
                                         EventLaw::exponential(3.5), EventLaw::exponential(4.5)}));
    out.push_back(make_scenario("nprop",
                                {EventLaw::lognormal(1.7, 1.7), EventLaw::lognormal(2.4, 1.6),
                                 EventLaw::lognormal(3.5, 1.7), EventLaw::lognormal(4.5, 1.6)}));
    out.push_back(make_scenario("cross", {EventLaw::weibull(1.5, 5.0), EventLaw::weibull(2.5, 5.0),
                                          EventLaw::weibull(3.5, 5.0), EventLaw::weibull(4.5, 2.4)}));
    out.push_back(make_scenario("mix", {EventLaw::lognormal(2.3, 1.7), EventLaw::exponential(0.05),
                                        EventLaw::weibull(2.4, 11.7), EventLaw::lognormal(3.0, 1.6)}));
    const std::size_t alternatives = out.size();
    for (std::size_t i = 0; i < alternatives; ++i) {
        out.push_back(out[i].null_variant());
    }
    return out;
}

std::optional<Scenario> find_builtin(const std::string& name) {
    for (auto& s : builtin_scenarios()) {
        if (s.name == name) return s;
    }
    return std::nullopt;
}

std::vector<Scenario> law_combinations(const Scenario& base) {
    check_scenario(base);
    if (base.laws.size() != 4) {
        throw std::invalid_argument("law_combinations: base scenario must have four arms");
    }
    std::vector<Scenario> out;
    int index = 0;
    for (int a = 0; a < 4; ++a) {
        for (int b = a; b < 4; ++b) {
            for (int c = b; c < 4; ++c) {
                for (int d = c; d < 4; ++d) {
                    ++index;
                    Scenario s = base;
                    s.laws = {base.laws[static_cast<std::size_t>(a)],
                              base.laws[static_cast<std::size_t>(b)],
                              base.laws[static_cast<std::size_t>(c)],
                              base.laws[static_cast<std::size_t>(d)]};
                    char suffix[24];
                    std::snprintf(suffix, sizeof(suffix), "-combo-%02d", index);
                    s.name = base.name + suffix;
                    out.push_back(std::move(s));
                }
            }
        }
    }
    return out;
}

double censored_fraction(const EventLaw& law, double bound) {
    return law.partial_survival_integral(bound) / bound;
}

double uniform_censoring_bound(const EventLaw& law, double target) {
    if (!(target > 0.0 && target < 1.0)) {
        throw std::invalid_argument("uniform_censoring_bound: target must lie in (0, 1)");
    }
    // censored_fraction(b) decreases from 1 (b -> 0) to 0 (b -> inf).
    double lo = 1e-12;
    double hi = 1.0;
    int guard = 0;
    while (censored_fraction(law, hi) > target) {
        hi *= 2.0;
        if (++guard > 200) {
            throw std::runtime_error("uniform_censoring_bound: bracketing failed");
        }
    }
    double mid = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        mid = 0.5 * (lo + hi);
        const double f = censored_fraction(law, mid);
        if (std::fabs(f - target) <= 1e-6) return mid;
        if (f > target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return mid;
}

SurvivalSample sample_scenario(const Scenario& scenario, RngStream rng) {
    check_scenario(scenario);
    const int k = static_cast<int>(scenario.laws.size());
    std::vector<Observation> obs;
    obs.reserve(static_cast<std::size_t>(k) * static_cast<std::size_t>(scenario.n_per_group));
    std::vector<std::string> labels;
    for (int j = 0; j < k; ++j) {
        labels.push_back(std::to_string(j + 1));
        const EventLaw& law = scenario.laws[static_cast<std::size_t>(j)];
        const double bound =
            scenario.censoring > 0.0 ? uniform_censoring_bound(law, scenario.censoring) : 0.0;
        RngEngine eng(rng.spawn(static_cast<std::uint64_t>(j)));
        for (int i = 0; i < scenario.n_per_group; ++i) {
            const double t = law.draw(eng);
            if (scenario.censoring > 0.0) {
                const double c = bound * eng.u01();
                obs.push_back({std::min(t, c), t <= c ? 1 : 0, j});
            } else {
                obs.push_back({t, 1, j});
            }
        }
    }
    return SurvivalSample::from_observations(std::move(obs), std::move(labels));
}

Scenario scenario_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("scenario JSON: ") + e.what());
    }
    try {
        Scenario s;
        s.name = j.value("name", std::string("custom"));
        s.n_per_group = j.value("n_per_group", 100);
        s.censoring = j.value("censoring", 0.0);
        if (!j.contains("laws") || !j["laws"].is_array()) {
            throw std::invalid_argument("scenario JSON: missing 'laws' array");
        }
        for (const auto& lj : j["laws"]) {
            const std::string kind = lj.at("kind").get<std::string>();
            if (kind == "exponential") {
                s.laws.push_back(EventLaw::exponential(lj.at("rate").get<double>()));
            } else if (kind == "lognormal") {
                s.laws.push_back(EventLaw::lognormal(lj.at("meanlog").get<double>(),
                                                     lj.at("sdlog").get<double>()));
            } else if (kind == "weibull") {
                s.laws.push_back(EventLaw::weibull(lj.at("shape").get<double>(),
                                                   lj.at("scale").get<double>()));
            } else {
                throw std::invalid_argument("scenario JSON: unknown law kind '" + kind + "'");
            }
        }
        check_scenario(s);
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("scenario JSON: ") + e.what());
    }
}

namespace {

std::string contrast_kind_name(ContrastKind kind) {
    return kind == ContrastKind::dunnett ? "dunnett" : "tukey";
}

} // namespace

StudyReport run_study(const StudyConfig& config) {
    if (config.runs < 1) {
        throw std::invalid_argument("study: runs must be >= 1");
    }
    if (config.scenarios.empty()) {
        throw std::invalid_argument("study: no scenarios given");
    }
    if (config.methods.empty()) {
        throw std::invalid_argument("study: no methods given");
    }
    if (!(config.alpha > 0.0 && config.alpha < 1.0)) {
        throw std::invalid_argument("study: alpha must lie strictly between 0 and 1");
    }
    if (config.threads < 1) {
        throw std::invalid_argument("study: threads must be >= 1");
    }
    if (config.weights.empty()) {
        throw std::invalid_argument("study: at least one weight function is required");
    }
    for (std::size_t a = 0; a < config.methods.size(); ++a) {
        for (std::size_t b = a + 1; b < config.methods.size(); ++b) {
            if (config.methods[a] == config.methods[b]) {
                throw std::invalid_argument("study: duplicate method");
            }
        }
    }
    // Fail fast on method-specific configuration problems.
    const bool has_mdir =
        std::find(config.methods.begin(), config.methods.end(), Method::mdir) !=
        config.methods.end();
    if (has_mdir && !weights_linearly_independent(config.weights)) {
        throw std::invalid_argument("study: mdir requires linearly independent weights");
    }
    const bool has_casanova =
        std::find(config.methods.begin(), config.methods.end(), Method::casanova_rademacher) !=
            config.methods.end() ||
        std::find(config.methods.begin(), config.methods.end(), Method::casanova_poisson) !=
            config.methods.end();
    if (has_casanova && config.bootstrap_iterations < 100) {
        throw std::invalid_argument("study: at least 100 bootstrap replicates required");
    }
    const bool has_maxwlr =
        std::find(config.methods.begin(), config.methods.end(), Method::maxwlr) !=
        config.methods.end();
    if (has_maxwlr && config.mc_samples < 1) {
        throw std::invalid_argument("study: mc_samples must be >= 1");
    }

    StudyReport report;
    report.runs = config.runs;
    report.alpha = config.alpha;
    report.contrast_kind = contrast_kind_name(config.contrast);
    report.bootstrap_iterations = config.bootstrap_iterations;
    report.mc_samples = config.mc_samples;
    for (const auto& w : config.weights) report.weight_labels.push_back(w.label());
    report.seed = config.seed;
    report.threads = config.threads;
    const double z95 = 1.959963984540054;
    const double half =
        z95 * std::sqrt(config.alpha * (1.0 - config.alpha) / config.runs);
    report.band_low = std::max(0.0, config.alpha - half);
    report.band_high = config.alpha + half;

    const int runs = config.runs;
    const int num_methods = static_cast<int>(config.methods.size());

    for (std::size_t si = 0; si < config.scenarios.size(); ++si) {
        Scenario scenario = config.scenarios[si];
        if (config.n_per_group) scenario.n_per_group = *config.n_per_group;
        if (config.censoring) scenario.censoring = *config.censoring;
        check_scenario(scenario);
        const int k = static_cast<int>(scenario.laws.size());
        const ContrastMatrix contrasts =
            config.contrast == ContrastKind::dunnett ? dunnett(k) : tukey(k);
        const int q = contrasts.q();

        ScenarioStudyResult sres;
        sres.scenario = scenario.name;
        for (const auto& l : scenario.laws) sres.law_descriptions.push_back(l.describe());
        sres.n_per_group = scenario.n_per_group;
        sres.censoring = scenario.censoring;
        std::vector<std::string> group_labels;
        for (int j = 0; j < k; ++j) group_labels.push_back(std::to_string(j + 1));
        for (int c = 0; c < q; ++c) {
            sres.contrast_labels.push_back(
                contrast_label(contrasts.pairs[static_cast<std::size_t>(c)], group_labels));
        }

        // decisions[r * num_methods * (q + 2) + mi * (q + 2) + slot]:
        // slots 0..q-1 local, q any-local, q+1 global.
        const std::size_t per_run = static_cast<std::size_t>(num_methods) *
                                    static_cast<std::size_t>(q + 2);
        std::vector<std::uint8_t> decisions(per_run * static_cast<std::size_t>(runs), 0);
        const RngStream scen_master(config.seed, static_cast<std::uint64_t>(si));

        auto run_range = [&](int lo, int hi) {
            for (int r = lo; r < hi; ++r) {
                const RngStream run_stream = scen_master.spawn(static_cast<std::uint64_t>(r));
                const SurvivalSample sample = sample_scenario(scenario, run_stream.spawn(0));
                for (int mi = 0; mi < num_methods; ++mi) {
                    const RngStream method_stream =
                        run_stream.spawn(static_cast<std::uint64_t>(1 + mi));
                    MaxWlrOptions mo;
                    mo.mc_samples = config.mc_samples;
                    mo.rng = method_stream;
                    CasanovaOptions co;
                    co.iterations = config.bootstrap_iterations;
                    co.rng = method_stream;
                    co.threads = 1;
                    const TestReport tr =
                        run_method(config.methods[static_cast<std::size_t>(mi)], sample,
                                   contrasts, config.weights, config.alpha, mo, co);
                    std::uint8_t* slot = decisions.data() +
                                         static_cast<std::size_t>(r) * per_run +
                                         static_cast<std::size_t>(mi) *
                                             static_cast<std::size_t>(q + 2);
                    bool any = false;
                    for (int c = 0; c < q; ++c) {
                        const bool rej = tr.contrasts[static_cast<std::size_t>(c)].rejected;
                        slot[c] = rej ? 1 : 0;
                        any = any || rej;
                    }
                    slot[q] = any ? 1 : 0;
                    slot[q + 1] = tr.global.rejected ? 1 : 0;
                }
            }
        };

        const int threads = std::min(config.threads, runs);
        if (threads <= 1) {
            run_range(0, runs);
        } else {
            std::vector<std::thread> pool;
            std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
            const int chunk = (runs + threads - 1) / threads;
            for (int t = 0; t < threads; ++t) {
                const int lo = t * chunk;
                const int hi = std::min(runs, lo + chunk);
                if (lo >= hi) break;
                pool.emplace_back([&, lo, hi, t] {
                    try {
                        run_range(lo, hi);
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

        // Reduce in ascending run order (integer sums, thread-count invariant).
        for (int mi = 0; mi < num_methods; ++mi) {
            MethodStudyResult mres;
            mres.method = config.methods[static_cast<std::size_t>(mi)];
            std::vector<long> counts(static_cast<std::size_t>(q + 2), 0);
            for (int r = 0; r < runs; ++r) {
                const std::uint8_t* slot = decisions.data() +
                                           static_cast<std::size_t>(r) * per_run +
                                           static_cast<std::size_t>(mi) *
                                               static_cast<std::size_t>(q + 2);
                for (int s = 0; s < q + 2; ++s) counts[static_cast<std::size_t>(s)] += slot[s];
            }
            for (int c = 0; c < q; ++c) {
                mres.local_rates.push_back(static_cast<double>(counts[static_cast<std::size_t>(c)]) /
                                           runs);
            }
            mres.any_local_rate = static_cast<double>(counts[static_cast<std::size_t>(q)]) / runs;
            mres.global_rate =
                static_cast<double>(counts[static_cast<std::size_t>(q + 1)]) / runs;
            mres.within_band = mres.any_local_rate >= report.band_low &&
                               mres.any_local_rate <= report.band_high;
            sres.methods.push_back(std::move(mres));
        }
        report.scenarios.push_back(std::move(sres));
    }
    return report;
}

std::string study_to_json(const StudyReport& report) {
    nlohmann::ordered_json j;
    j["runs"] = report.runs;
    j["alpha"] = report.alpha;
    j["contrast"] = report.contrast_kind;
    j["bootstrap_iterations"] = report.bootstrap_iterations;
    j["mc_samples"] = report.mc_samples;
    j["weights"] = report.weight_labels;
    j["seed"] = report.seed;
    j["threads"] = report.threads;
    j["band"] = {report.band_low, report.band_high};
    nlohmann::ordered_json scen = nlohmann::ordered_json::array();
    for (const auto& s : report.scenarios) {
        nlohmann::ordered_json sj;
        sj["scenario"] = s.scenario;
        sj["laws"] = s.law_descriptions;
        sj["n_per_group"] = s.n_per_group;
        sj["censoring"] = s.censoring;
        sj["contrasts"] = s.contrast_labels;
        nlohmann::ordered_json ms = nlohmann::ordered_json::array();
        for (const auto& m : s.methods) {
            nlohmann::ordered_json mj;
            mj["method"] = method_name(m.method);
            mj["local_rates"] = m.local_rates;
            mj["any_local_rate"] = m.any_local_rate;
            mj["global_rate"] = m.global_rate;
            mj["within_band"] = m.within_band;
            ms.push_back(std::move(mj));
        }
        sj["methods"] = std::move(ms);
        scen.push_back(std::move(sj));
    }
    j["scenarios"] = std::move(scen);
    return j.dump(2) + "\n";
}

std::string study_to_csv(const StudyReport& report) {
    std::ostringstream out;
    out << "scenario,n_per_group,censoring,method,scope,contrast,rate,within_band\n";
    for (const auto& s : report.scenarios) {
        for (const auto& m : s.methods) {
            const std::string prefix = s.scenario + ',' + std::to_string(s.n_per_group) + ',' +
                                       format_double(s.censoring) + ',' +
                                       method_name(m.method) + ',';
            for (std::size_t c = 0; c < m.local_rates.size(); ++c) {
                out << prefix << "local," << s.contrast_labels[c] << ','
                    << format_double(m.local_rates[c]) << ",\n";
            }
            out << prefix << "any_local,," << format_double(m.any_local_rate) << ','
                << (m.within_band ? "true" : "false") << '\n';
            out << prefix << "global,," << format_double(m.global_rate) << ",\n";
        }
    }
    return out.str();
}

std::string study_to_text(const StudyReport& report) {
    std::ostringstream out;
    char buf[64];
    out << "Monte Carlo study: " << report.runs << " runs, alpha = "
        << format_double(report.alpha) << ", " << report.contrast_kind << " contrasts\n";
    std::snprintf(buf, sizeof(buf), "95%% binomial band: [%.4f, %.4f]\n\n", report.band_low,
                  report.band_high);
    out << buf;
    for (const auto& s : report.scenarios) {
        out << s.scenario << " (n=" << s.n_per_group << ", censoring="
            << format_double(s.censoring) << ")\n";
        std::size_t label_w = std::string("method").size();
        for (const auto& m : s.methods) {
            label_w = std::max(label_w, method_name(m.method).size());
        }
        auto pad = [&out](const std::string& txt, std::size_t w) {
            out << txt;
            for (std::size_t i = txt.size(); i < w + 2; ++i) out << ' ';
        };
        pad("method", label_w);
        for (const auto& label : s.contrast_labels) {
            pad(label, std::max<std::size_t>(label.size(), 6));
        }
        pad("any", 6);
        out << "global\n";
        for (const auto& m : s.methods) {
            pad(method_name(m.method), label_w);
            for (std::size_t c = 0; c < m.local_rates.size(); ++c) {
                std::snprintf(buf, sizeof(buf), "%.3f", m.local_rates[c]);
                pad(buf, std::max<std::size_t>(s.contrast_labels[c].size(), 6));
            }
            std::snprintf(buf, sizeof(buf), "%.3f%s", m.any_local_rate,
                          m.within_band ? "*" : "");
            pad(buf, 6);
            std::snprintf(buf, sizeof(buf), "%.3f", m.global_rate);
            out << buf << '\n';
        }
        out << '\n';
    }
    return out.str();
}

} // namespace survmct
