#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "cli_support.hpp"

using namespace betabart;
using namespace betabart::cli;

namespace {

struct ModelOptions {
    std::string data;
    std::string response;
    std::string covariates;
    std::string link = "logit";
    std::string format = "text";
    std::string out;
};

void add_model_options(CLI::App* cmd, ModelOptions& o) {
    cmd->add_option("--data", o.data, "CSV file with a header row")->required();
    cmd->add_option("--response", o.response, "response column, strictly inside (0,1)")->required();
    cmd->add_option("--covariates", o.covariates, "comma-separated terms: col, a*b, a^2, label=expr");
    cmd->add_option("--link", o.link, "link function")->capture_default_str();
    cmd->add_option("--format", o.format, "text, json or csv")->capture_default_str();
    cmd->add_option("--out", o.out, "write the report here instead of stdout");
}

void emit(const ModelOptions& o, const json& report) {
    const Format f = parse_format(o.format);
    if (o.out.empty()) {
        render(std::cout, report, f);
        return;
    }
    std::ofstream os(o.out);
    if (!os) throw ConfigError("cannot write '" + o.out + "'");
    render(os, report, f);
}

struct Loaded {
    Dataset data;
    ModelSpec spec;
    Link link;
};

Loaded load(const ModelOptions& o) {
    parse_format(o.format);
    const Link link = Link::from_name(o.link);
    const std::vector<Term> terms = parse_terms(o.covariates);
    const Table table = parse_csv_file(o.data);
    Dataset data = build_dataset(table, o.response, terms);
    ModelSpec spec{o.response, link.name(), data.names(), data.n()};
    return {std::move(data), std::move(spec), link};
}

int run_fit(const ModelOptions& o) {
    const Loaded l = load(o);
    const FitResult fit = fit_mle(l.data, l.link);
    emit(o, fit_report_json(l.spec, fit));
    return kOk;
}

int run_test_cmd(const ModelOptions& o, const std::string& null_spec, const std::string& methods, int boot_b,
                 std::uint64_t seed) {
    const MethodSet ms = MethodSet::parse(methods);
    if (boot_b < 1) throw ConfigError("--boot-B must be at least 1");
    // resolve the null against the requested terms before touching the data
    std::vector<std::string> names{kInterceptName};
    for (const auto& t : parse_terms(o.covariates)) names.push_back(t.label);
    parse_null(null_spec, names);

    const Loaded l = load(o);
    const Restriction r = parse_null(null_spec, l.data.names());
    TestOptions topts;
    topts.boot.B = boot_b;
    topts.boot.seed = seed;
    const TestReport rep = run_test(l.data, l.link, r, ms, topts);
    emit(o, test_report_json(l.spec, r, rep, ms, topts.boot));
    return kOk;
}

int run_simulate(const std::string& config_path, const std::string& out_prefix, int threads) {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot open config '" + config_path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + config_path + "' is not valid JSON: " + e.what());
    }
    SimSpec spec = load_sim_config(j);
    if (!out_prefix.empty()) spec.output_prefix = out_prefix;
    if (threads > 0) spec.config.threads = threads;
    const SimResult r = run_sim(spec);
    print_sim_summary(std::cout, spec, r);
    if (!spec.output_prefix.empty()) {
        auto write = [&](const std::string& suffix, auto writer) {
            const std::string path = spec.output_prefix + suffix;
            std::ofstream os(path);
            if (!os) throw ConfigError("cannot write '" + path + "'");
            writer(os, r);
            std::cout << "wrote " << path << '\n';
        };
        write("_rates.csv", [](std::ostream& os, const SimResult& s) { write_rates_csv(os, s); });
        write("_archive.csv", [](std::ostream& os, const SimResult& s) { write_archive_csv(os, s); });
        write("_moments.csv", [](std::ostream& os, const SimResult& s) { write_moments_csv(os, s); });
    }
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Beta regression with Bartlett-corrected likelihood ratio tests"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    ModelOptions fit_opts;
    CLI::App* fit = app.add_subcommand("fit", "maximum likelihood fit");
    add_model_options(fit, fit_opts);

    ModelOptions test_opts;
    std::string null_spec;
    std::string methods = "lr,b1,b2,b3,boot";
    int boot_b = 500;
    std::uint64_t seed = 0;
    CLI::App* test = app.add_subcommand("test", "likelihood ratio test with Bartlett corrections");
    add_model_options(test, test_opts);
    test->add_option("--null", null_spec, "restrictions: name or name=value, comma-separated")->required();
    test->add_option("--methods", methods, "subset of lr,b1,b2,b3,boot")->capture_default_str();
    test->add_option("--boot-B", boot_b, "bootstrap resamples")->capture_default_str();
    test->add_option("--seed", seed, "bootstrap seed")->capture_default_str();

    std::string config_path, out_prefix;
    int threads = 0;
    CLI::App* sim = app.add_subcommand("simulate", "Monte Carlo size, power or moment study");
    sim->add_option("--config", config_path, "JSON study configuration")->required();
    sim->add_option("--out", out_prefix, "prefix for the rates, archive and moments CSV files");
    sim->add_option("--threads", threads, "worker threads (0 = BETABART_THREADS or all cores)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        if (*fit) return run_fit(fit_opts);
        if (*test) return run_test_cmd(test_opts, null_spec, methods, boot_b, seed);
        if (*sim) return run_simulate(config_path, out_prefix, threads);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
    return kOk;
}
