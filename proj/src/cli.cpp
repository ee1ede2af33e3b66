#include "survmct/cli.hpp"

#include "survmct/design.hpp"
#include "survmct/estimators.hpp"
#include "survmct/procedures.hpp"
#include "survmct/simulation.hpp"
#include "survmct/survdata.hpp"
#include "survmct/teststats.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace survmct {

namespace {

void write_output(const std::string& path, const std::string& content) {
    if (path.empty()) {
        std::cout << content;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot open output file: " + path);
    }
    out << content;
    if (!out) {
        throw DataError("failed while writing output file: " + path);
    }
}

SurvivalSample read_sample(const std::string& path, const ColumnSpec& columns) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open input file: " + path);
    }
    return parse_csv(in, columns);
}

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("--alpha must lie strictly between 0 and 1");
    }
}

struct TestArgs {
    std::string input;
    ColumnSpec columns;
    std::string reference;
    std::string contrast = "dunnett";
    std::string methods = "all";
    std::string weights = "fh:0:0,cross";
    double alpha = 0.05;
    long iterations = 1000;
    long mc_samples = 50000;
    std::uint64_t seed = 0;
    int threads = 1;
    bool one_sided = false;
    std::string format = "text";
    std::string output;
};

int run_test(const TestArgs& a) {
    check_alpha(a.alpha);
    if (a.threads < 1) {
        throw std::invalid_argument("--threads must be >= 1");
    }
    SurvivalSample sample = read_sample(a.input, a.columns);
    if (!a.reference.empty()) {
        sample = sample.with_reference(a.reference);
    }
    const ContrastMatrix contrasts = parse_contrasts(a.contrast, sample.k());
    const std::vector<Method> methods = parse_methods(a.methods);
    const std::vector<WeightSpec> weights = parse_weights(a.weights);

    const RngStream master(a.seed);
    std::vector<TestReport> reports;
    for (std::size_t i = 0; i < methods.size(); ++i) {
        // Slot 0 of the stream tree is reserved for data generation in the
        // study engine; method slots start at 1 here as well.
        const RngStream method_stream = master.spawn(1 + i);
        MaxWlrOptions mo;
        mo.mc_samples = a.mc_samples;
        mo.rng = method_stream;
        mo.two_sided = !a.one_sided;
        CasanovaOptions co;
        co.iterations = a.iterations;
        co.rng = method_stream;
        co.threads = a.threads;
        reports.push_back(
            run_method(methods[i], sample, contrasts, weights, a.alpha, mo, co));
    }
    if (a.format == "json") {
        write_output(a.output, reports_to_json(reports));
    } else if (a.format == "csv") {
        write_output(a.output, reports_to_csv(reports));
    } else {
        write_output(a.output, reports_to_text(reports));
    }
    return 0;
}

struct SimulateArgs {
    std::vector<std::string> scenario_names;
    std::vector<std::string> scenario_files;
    bool null_variant = false;
    std::string contrast = "dunnett";
    std::string methods = "all";
    std::string weights = "fh:0:0,cross";
    double alpha = 0.05;
    int runs = 1000;
    int n_per_group = 0;      // 0 = keep scenario value
    double censoring = -1.0;  // < 0 = keep scenario value
    long iterations = 500;
    long mc_samples = 50000;
    std::uint64_t seed = 0;
    int threads = 1;
    std::string format = "json";
    std::string output;
};

int run_simulate(const SimulateArgs& a) {
    check_alpha(a.alpha);
    StudyConfig config;
    for (const auto& name : a.scenario_names) {
        auto s = find_builtin(name);
        if (!s) {
            throw std::invalid_argument(
                "unknown scenario '" + name +
                "' (builtins: prop, nprop, cross, mix and their -null variants)");
        }
        config.scenarios.push_back(std::move(*s));
    }
    for (const auto& path : a.scenario_files) {
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            throw DataError("cannot open scenario file: " + path);
        }
        std::ostringstream text;
        text << in.rdbuf();
        config.scenarios.push_back(scenario_from_json(text.str()));
    }
    if (config.scenarios.empty()) {
        throw std::invalid_argument("no scenario given (use --scenario or --scenario-file)");
    }
    if (a.null_variant) {
        for (auto& s : config.scenarios) s = s.null_variant();
    }
    if (a.contrast == "dunnett") {
        config.contrast = ContrastKind::dunnett;
    } else if (a.contrast == "tukey") {
        config.contrast = ContrastKind::tukey;
    } else {
        throw std::invalid_argument("--contrast must be dunnett or tukey");
    }
    config.methods = parse_methods(a.methods);
    config.weights = parse_weights(a.weights);
    config.alpha = a.alpha;
    config.runs = a.runs;
    if (a.n_per_group > 0) config.n_per_group = a.n_per_group;
    if (a.censoring >= 0.0) config.censoring = a.censoring;
    config.bootstrap_iterations = a.iterations;
    config.mc_samples = a.mc_samples;
    config.seed = a.seed;
    config.threads = a.threads;

    const StudyReport report = run_study(config);
    if (a.format == "csv") {
        write_output(a.output, study_to_csv(report));
    } else if (a.format == "text") {
        write_output(a.output, study_to_text(report));
    } else {
        write_output(a.output, study_to_json(report));
    }
    return 0;
}

struct KmArgs {
    std::string input;
    ColumnSpec columns;
    std::string output;
};

int run_km_export(const KmArgs& a) {
    const SurvivalSample sample = read_sample(a.input, a.columns);
    const RiskTable rt = build_risk_table(sample);
    std::ostringstream out;
    out << "group,time,survival\n";
    for (int j = 0; j < sample.k(); ++j) {
        const int g[1] = {j};
        const StepFunction f = kaplan_meier_pooled(rt, g);
        out << sample.label(j) << ",0,1\n";
        for (int i = 0; i < f.size(); ++i) {
            out << sample.label(j) << ',' << format_double(f.jump_time(i)) << ','
                << format_double(1.0 - f.value(i)) << '\n';
        }
    }
    write_output(a.output, out.str());
    return 0;
}

void add_column_options(CLI::App* cmd, ColumnSpec& columns) {
    cmd->add_option("--time-column", columns.time, "Name of the time column")
        ->capture_default_str();
    cmd->add_option("--status-column", columns.status,
                    "Name of the status column (1 = event, 0 = censored)")
        ->capture_default_str();
    cmd->add_option("--group-column", columns.group, "Name of the group column")
        ->capture_default_str();
}

} // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"Multiple contrast tests for right-censored time-to-event data"};
    app.require_subcommand(1);

    TestArgs ta;
    CLI::App* test = app.add_subcommand("test", "Run the test procedures on a CSV dataset");
    test->add_option("--input", ta.input, "Input CSV file")->required();
    add_column_options(test, ta.columns);
    test->add_option("--reference", ta.reference,
                     "Group label to use as the reference (group 1)");
    test->add_option("--contrast", ta.contrast,
                     "Contrast set: dunnett, tukey or pairs:1-2,1-3,...")
        ->capture_default_str();
    test->add_option("--methods", ta.methods,
                     "Comma-separated methods (logrank, mdir, maxwlr, casanova-rade, "
                     "casanova-pois) or all")
        ->capture_default_str();
    test->add_option("--weights", ta.weights, "Comma-separated weights (fh:<r>:<g>, cross)")
        ->capture_default_str();
    test->add_option("--alpha", ta.alpha, "Familywise error level")->capture_default_str();
    test->add_option("--iterations", ta.iterations, "Wild bootstrap replicates")
        ->capture_default_str();
    test->add_option("--mc-samples", ta.mc_samples,
                     "Monte Carlo samples for the equicoordinate quantile")
        ->capture_default_str();
    test->add_option("--seed", ta.seed, "Master seed")->capture_default_str();
    test->add_option("--threads", ta.threads, "Worker threads for resampling")
        ->capture_default_str();
    test->add_flag("--one-sided", ta.one_sided,
                   "One-sided (upper) max-type test instead of two-sided");
    test->add_option("--format", ta.format, "Output format")
        ->check(CLI::IsMember({"text", "json", "csv"}))
        ->capture_default_str();
    test->add_option("--output", ta.output, "Output file (default: stdout)");

    SimulateArgs sa;
    CLI::App* sim = app.add_subcommand("simulate", "Run a Monte Carlo FWER/power study");
    sim->add_option("--scenario", sa.scenario_names,
                    "Builtin scenario name (repeatable): prop, nprop, cross, mix, or "
                    "<name>-null");
    sim->add_option("--scenario-file", sa.scenario_files,
                    "JSON scenario description (repeatable)");
    sim->add_flag("--null", sa.null_variant,
                  "Replace every scenario by its full-null variant");
    sim->add_option("--contrast", sa.contrast, "Contrast set: dunnett or tukey")
        ->capture_default_str();
    sim->add_option("--methods", sa.methods, "Comma-separated methods or all")
        ->capture_default_str();
    sim->add_option("--weights", sa.weights, "Comma-separated weights")
        ->capture_default_str();
    sim->add_option("--alpha", sa.alpha, "Familywise error level")->capture_default_str();
    sim->add_option("--runs", sa.runs, "Simulation runs per scenario")->capture_default_str();
    sim->add_option("--n", sa.n_per_group, "Override subjects per arm");
    sim->add_option("--censoring", sa.censoring, "Override target censoring fraction");
    sim->add_option("--iterations", sa.iterations, "Wild bootstrap replicates per run")
        ->capture_default_str();
    sim->add_option("--mc-samples", sa.mc_samples,
                    "Monte Carlo samples for the equicoordinate quantile per run")
        ->capture_default_str();
    sim->add_option("--seed", sa.seed, "Master seed")->capture_default_str();
    sim->add_option("--threads", sa.threads, "Worker threads across runs")
        ->capture_default_str();
    sim->add_option("--format", sa.format, "Output format")
        ->check(CLI::IsMember({"json", "csv", "text"}))
        ->capture_default_str();
    sim->add_option("--output", sa.output, "Output file (default: stdout)");

    KmArgs ka;
    CLI::App* km = app.add_subcommand("km-export", "Export per-group Kaplan-Meier curves as CSV");
    km->add_option("--input", ka.input, "Input CSV file")->required();
    add_column_options(km, ka.columns);
    km->add_option("--output", ka.output, "Output file (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        app.exit(e);
        return 0;
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (test->parsed()) return run_test(ta);
        if (sim->parsed()) return run_simulate(sa);
        return run_km_export(ka);
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<std::string> full;
    full.emplace_back("survmct");
    full.insert(full.end(), args.begin(), args.end());
    std::vector<char*> argv;
    argv.reserve(full.size());
    for (auto& s : full) argv.push_back(s.data());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

} // namespace survmct
