#pragma once
// Pieces of the betabart command line tool that are worth testing on their
// own: CSV ingestion, design construction, null-hypothesis parsing, report
// rendering and simulation config loading.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "betabart/betabart.hpp"

namespace betabart::cli {

using json = nlohmann::json;

enum ExitCode { kOk = 0, kConfig = 2, kData = 3, kNumerical = 4 };

/// Maps a library exception to the tool's exit code contract.
inline int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return kConfig;
    if (dynamic_cast<const DataError*>(&e)) return kData;
    if (dynamic_cast<const DomainError*>(&e)) return kData;
    // collinear columns are fixed in the input, not by retrying
    if (dynamic_cast<const RankDeficientError*>(&e)) return kData;
    return kNumerical;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::stringstream ss(s);
    while (std::getline(ss, cur, sep)) out.push_back(trim(cur));
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

/// Named numeric columns read from a CSV file.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;
    /// File line number of each data row (1-based, header is line 1).
    std::vector<int> lines;

    std::size_t rows() const { return lines.size(); }

    int index_of(const std::string& name) const {
        for (std::size_t j = 0; j < header.size(); ++j)
            if (header[j] == name) return static_cast<int>(j);
        return -1;
    }

    const std::vector<double>& column(const std::string& name) const {
        const int j = index_of(name);
        if (j < 0) throw ConfigError("unknown column '" + name + "'");
        return columns[static_cast<std::size_t>(j)];
    }
};

inline double parse_number(const std::string& tok, const std::string& where) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(tok, &used);
    } catch (const std::exception&) {
        throw DataError(where + ": '" + tok + "' is not a number");
    }
    if (used != tok.size()) throw DataError(where + ": '" + tok + "' is not a number");
    return v;
}

inline Table parse_csv(std::istream& in, const std::string& source = "input") {
    Table t;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        t.header = split(line, ',');
        break;
    }
    if (t.header.empty()) throw DataError(source + ": file is empty");
    std::set<std::string> seen;
    for (const auto& h : t.header) {
        if (h.empty()) throw DataError(source + ":" + std::to_string(lineno) + ": empty column name in header");
        if (!seen.insert(h).second) throw DataError(source + ":" + std::to_string(lineno) + ": duplicate column '" + h + "'");
    }
    t.columns.assign(t.header.size(), {});
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto fields = split(line, ',');
        const std::string where = source + ":" + std::to_string(lineno);
        if (fields.size() != t.header.size())
            throw DataError(where + ": expected " + std::to_string(t.header.size()) + " fields, found " +
                            std::to_string(fields.size()));
        for (std::size_t j = 0; j < fields.size(); ++j)
            t.columns[j].push_back(parse_number(fields[j], where + " column '" + t.header[j] + "'"));
        t.lines.push_back(lineno);
    }
    if (t.lines.empty()) throw DataError(source + ": no data rows");
    return t;
}

inline Table parse_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open data file '" + path + "'");
    return parse_csv(in, path);
}

/// A covariate: a column, a product `a*b` or a square `a^2`, optionally labelled `label=expr`.
struct Term {
    std::string label;
    std::string a;
    std::string b;  // empty for a plain column
};

inline Term parse_term(const std::string& spec) {
    std::string s = trim(spec);
    Term t;
    std::string expr = s;
    if (const auto eq = s.find('='); eq != std::string::npos) {
        t.label = trim(s.substr(0, eq));
        expr = trim(s.substr(eq + 1));
        if (t.label.empty()) throw ConfigError("term '" + spec + "' has an empty label");
    }
    if (expr.empty()) throw ConfigError("empty covariate term");
    if (const auto star = expr.find('*'); star != std::string::npos) {
        t.a = trim(expr.substr(0, star));
        t.b = trim(expr.substr(star + 1));
        if (t.a.empty() || t.b.empty() || t.b.find('*') != std::string::npos)
            throw ConfigError("malformed product term '" + expr + "' (expected a*b)");
    } else if (const auto caret = expr.find('^'); caret != std::string::npos) {
        t.a = trim(expr.substr(0, caret));
        if (trim(expr.substr(caret + 1)) != "2" || t.a.empty())
            throw ConfigError("malformed power term '" + expr + "' (only a^2 is supported)");
        t.b = t.a;
    } else {
        t.a = expr;
    }
    if (t.label.empty()) t.label = expr;
    return t;
}

inline std::vector<Term> parse_terms(const std::string& list) {
    std::vector<Term> out;
    if (trim(list).empty()) return out;
    for (const auto& tok : split(list, ',')) out.push_back(parse_term(tok));
    return out;
}

inline constexpr const char* kInterceptName = "(Intercept)";

/// Design with an intercept column followed by the terms; response checked strictly inside (0,1).
inline Dataset build_dataset(const Table& t, const std::string& response, const std::vector<Term>& terms) {
    const auto& yc = t.column(response);
    for (const auto& term : terms) {
        t.column(term.a);
        if (!term.b.empty()) t.column(term.b);
    }
    const auto n = static_cast<Eigen::Index>(t.rows());
    VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double v = yc[static_cast<std::size_t>(i)];
        if (!(v > 0.0 && v < 1.0)) {
            std::ostringstream os;
            os << "line " << t.lines[static_cast<std::size_t>(i)] << ": response '" << response << "' = " << v
               << " is not strictly inside (0,1)";
            throw DataError(os.str());
        }
        y[i] = v;
    }
    MatrixXd x(n, static_cast<Eigen::Index>(terms.size()) + 1);
    std::vector<std::string> names{kInterceptName};
    x.col(0).setOnes();
    std::set<std::string> seen{kInterceptName};
    for (std::size_t k = 0; k < terms.size(); ++k) {
        const Term& term = terms[k];
        if (!seen.insert(term.label).second) throw ConfigError("duplicate covariate name '" + term.label + "'");
        const auto& ca = t.column(term.a);
        for (Eigen::Index i = 0; i < n; ++i) {
            double v = ca[static_cast<std::size_t>(i)];
            if (!term.b.empty()) v *= t.column(term.b)[static_cast<std::size_t>(i)];
            x(i, static_cast<Eigen::Index>(k) + 1) = v;
        }
        names.push_back(term.label);
    }
    if (n <= x.cols()) throw DataError("need more rows than coefficients (n = " + std::to_string(n) + ")");
    return Dataset(std::move(y), std::move(x), std::move(names));
}

/// "x4" or "x4=0.5" entries, comma separated; names refer to design columns.
inline Restriction parse_null(const std::string& spec, const std::vector<std::string>& names) {
    std::vector<int> idx;
    std::vector<double> vals;
    for (const auto& tok : split(spec, ',')) {
        if (tok.empty()) throw ConfigError("empty entry in --null");
        std::string name = tok;
        double v = 0.0;
        if (const auto eq = tok.find('='); eq != std::string::npos) {
            name = trim(tok.substr(0, eq));
            const std::string val = trim(tok.substr(eq + 1));
            try {
                std::size_t used = 0;
                v = std::stod(val, &used);
                if (used != val.size()) throw std::invalid_argument(val);
            } catch (const std::exception&) {
                throw ConfigError("--null value for '" + name + "' is not a number");
            }
        }
        const auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) throw ConfigError("--null refers to unknown covariate '" + name + "'");
        idx.push_back(static_cast<int>(it - names.begin()));
        vals.push_back(v);
    }
    Restriction r(idx, vals);
    r.validate(static_cast<Eigen::Index>(names.size()));
    return r;
}

enum class Format { Text, Json, Csv };

inline Format parse_format(const std::string& s) {
    if (s == "text") return Format::Text;
    if (s == "json") return Format::Json;
    if (s == "csv") return Format::Csv;
    throw ConfigError("unknown format '" + s + "' (expected text, json, csv)");
}

struct ModelSpec {
    std::string response;
    std::string link = "logit";
    std::vector<std::string> names;
    Eigen::Index n = 0;
};

inline json estimates_json(const FitResult& fit, const std::vector<std::string>& names) {
    json est = json::object();
    const auto p = fit.theta.beta.size();
    for (Eigen::Index j = 0; j < p; ++j)
        est[names[static_cast<std::size_t>(j)]] = {{"value", fit.theta.beta[j]}, {"std_error", fit.std_errors[j]}};
    est["phi"] = {{"value", fit.theta.phi}, {"std_error", fit.std_errors[p]}};
    return est;
}

inline json model_json(const ModelSpec& m) {
    return {{"response", m.response}, {"link", m.link}, {"covariates", m.names}, {"n", m.n}};
}

inline json fit_report_json(const ModelSpec& m, const FitResult& fit) {
    json j;
    j["command"] = "fit";
    j["model"] = model_json(m);
    j["estimates"] = estimates_json(fit, m.names);
    j["tests"] = json::object();
    j["meta"] = {{"loglik", fit.loglik}, {"iterations", fit.iterations}, {"converged", fit.converged},
                 {"clamp_activated", fit.clamp_activated}, {"version", kVersion}};
    return j;
}

inline const std::vector<std::string>& statistic_order() {
    static const std::vector<std::string> order{"LR", "LR_b1", "LR_b2", "LR_b3", "LR_boot"};
    return order;
}

inline json test_report_json(const ModelSpec& m, const Restriction& r, const TestReport& rep, const MethodSet& methods,
                             const BootstrapOptions& boot) {
    json j;
    j["command"] = "test";
    json model = model_json(m);
    json null = json::object();
    for (int a = 0; a < r.q(); ++a)
        null[m.names[static_cast<std::size_t>(r.indices()[static_cast<std::size_t>(a)])]] = r.values()[static_cast<std::size_t>(a)];
    model["null"] = null;
    j["model"] = model;
    j["estimates"] = estimates_json(rep.full, m.names);
    j["restricted_estimates"] = estimates_json(rep.restricted, m.names);
    json tests = json::object();
    for (const auto& name : statistic_order()) {
        const auto it = rep.statistics.find(name);
        if (it == rep.statistics.end()) continue;
        tests[name] = {{"statistic", it->second}, {"df", rep.df}, {"p_value", rep.p_values.at(name)}};
    }
    j["tests"] = tests;
    json meta = {{"loglik_full", rep.full.loglik},
                 {"loglik_restricted", rep.restricted.loglik},
                 {"iterations", {{"full", rep.full.iterations}, {"restricted", rep.restricted.iterations}}},
                 {"version", kVersion}};
    if (rep.bartlett) {
        meta["bartlett"] = {{"eps_full", rep.bartlett->eps_full},
                            {"eps_nuis", rep.bartlett->eps_nuis},
                            {"eps_diff_over_q", rep.bartlett->diff_over_q()},
                            {"c", rep.bartlett->c}};
        if (rep.b1_invalid) meta["bartlett"]["b1_invalid"] = true;
    }
    if (methods.has(Method::Boot)) {
        meta["seed"] = boot.seed;
        meta["B"] = boot.B;
        meta["boot_failures"] = rep.boot_failures;
        if (rep.boot_mean) meta["boot_mean"] = *rep.boot_mean;
    }
    j["meta"] = meta;
    return j;
}

inline std::string fmt(double v, int digits = 10) {
    std::ostringstream os;
    os << std::setprecision(digits) << v;
    return os.str();
}

inline std::string fmt_full(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

/// Writes a report produced by fit_report_json or test_report_json in the chosen format.
inline void render(std::ostream& os, const json& report, Format f) {
    if (f == Format::Json) {
        os << report.dump(2) << '\n';
        return;
    }
    const auto& est = report.at("estimates");
    std::vector<std::string> order = report.at("model").at("covariates").get<std::vector<std::string>>();
    order.push_back("phi");
    if (f == Format::Csv) {
        os << "section,name,value,std_error,df,p_value\n";
        for (const auto& name : order) {
            const auto& e = est.at(name);
            os << "estimate," << name << ',' << fmt_full(e.at("value").get<double>()) << ','
               << fmt_full(e.at("std_error").get<double>()) << ",,\n";
        }
        for (const auto& name : statistic_order()) {
            if (!report.at("tests").contains(name)) continue;
            const auto& t = report.at("tests").at(name);
            os << "test," << name << ',' << fmt_full(t.at("statistic").get<double>()) << ",," << t.at("df").get<int>()
               << ',' << fmt_full(t.at("p_value").get<double>()) << '\n';
        }
        return;
    }
    const auto& model = report.at("model");
    os << "beta regression (" << model.at("link").get<std::string>() << " link), response "
       << model.at("response").get<std::string>() << ", n = " << model.at("n").get<long>() << "\n\n";
    os << std::left << std::setw(16) << "coefficient" << std::right << std::setw(18) << "estimate" << std::setw(18)
       << "std.error" << '\n';
    for (const auto& name : order) {
        const auto& e = est.at(name);
        os << std::left << std::setw(16) << name << std::right << std::setw(18) << fmt(e.at("value").get<double>())
           << std::setw(18) << fmt(e.at("std_error").get<double>()) << '\n';
    }
    const auto& meta = report.at("meta");
    if (report.at("command") == "fit") {
        os << "\nlog-likelihood " << fmt(meta.at("loglik").get<double>()) << ", iterations "
           << meta.at("iterations").get<int>() << '\n';
        return;
    }
    os << "\nH0:";
    for (const auto& [k, v] : model.at("null").items()) os << ' ' << k << " = " << fmt(v.get<double>());
    os << "\n\n"
       << std::left << std::setw(12) << "statistic" << std::right << std::setw(18) << "value" << std::setw(6) << "df"
       << std::setw(18) << "p-value" << '\n';
    for (const auto& name : statistic_order()) {
        if (!report.at("tests").contains(name)) continue;
        const auto& t = report.at("tests").at(name);
        os << std::left << std::setw(12) << name << std::right << std::setw(18) << fmt(t.at("statistic").get<double>())
           << std::setw(6) << t.at("df").get<int>() << std::setw(18) << fmt(t.at("p_value").get<double>()) << '\n';
    }
    if (meta.contains("bartlett")) {
        const auto& b = meta.at("bartlett");
        os << "\nBartlett factor c = " << fmt(b.at("c").get<double>()) << " (eps_k = " << fmt(b.at("eps_full").get<double>())
           << ", eps_k-q = " << fmt(b.at("eps_nuis").get<double>()) << ")\n";
    }
    if (meta.contains("B")) {
        os << "bootstrap: B = " << meta.at("B").get<int>() << ", seed = " << meta.at("seed").get<std::uint64_t>()
           << ", failures = " << meta.at("boot_failures").get<int>() << '\n';
    }
}

enum class Study { Size, Power, Moments };

struct SimSpec {
    SimConfig config;
    Study study = Study::Size;
    std::string output_prefix;
};

namespace detail {

template <class T>
T get_field(const json& j, const std::string& key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config field '" + key + "' has the wrong type");
    }
}

} // namespace detail

/// Reads a simulation config. Coefficient positions in "test" are 1-based (1 = intercept).
inline SimSpec load_sim_config(const json& j) {
    static const std::set<std::string> known{"study", "design", "q", "n", "p", "phi", "beta", "test", "null_values",
                                             "delta", "reps", "boot_B", "alpha", "seed", "covariate_seed", "methods",
                                             "threads", "max_failure_fraction", "output_prefix"};
    if (!j.is_object()) throw ConfigError("simulation config must be a JSON object");
    for (const auto& [k, v] : j.items())
        if (!known.count(k)) throw ConfigError("unknown config field '" + k + "'");
    using detail::get_field;
    SimSpec spec;
    for (const char* req : {"n", "phi"})
        if (!j.contains(req)) throw ConfigError(std::string("config field '") + req + "' is required");
    const int n = get_field<int>(j, "n");
    const double phi = get_field<double>(j, "phi");
    const std::string design = j.contains("design") ? get_field<std::string>(j, "design") : "standard";
    SimConfig& c = spec.config;
    if (design == "standard") {
        if (!j.contains("q")) throw ConfigError("config field 'q' is required for the standard design");
        for (const char* bad : {"p", "beta", "test", "null_values"})
            if (j.contains(bad)) throw ConfigError(std::string("config field '") + bad + "' conflicts with design 'standard'");
        c = SimConfig::standard_design(n, phi, get_field<int>(j, "q"));
    } else if (design == "custom") {
        for (const char* req : {"beta", "test"})
            if (!j.contains(req)) throw ConfigError(std::string("config field '") + req + "' is required for design 'custom'");
        const auto beta = get_field<std::vector<double>>(j, "beta");
        const auto test = get_field<std::vector<int>>(j, "test");
        c.n = n;
        c.phi_true = phi;
        c.p = static_cast<int>(beta.size());
        if (j.contains("p") && get_field<int>(j, "p") != c.p) throw ConfigError("config field 'p' disagrees with 'beta'");
        c.beta_true = Eigen::Map<const VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
        std::vector<int> idx;
        for (int t : test) {
            if (t < 1 || t > c.p) throw ConfigError("config field 'test' has position " + std::to_string(t) + " outside 1..p");
            idx.push_back(t - 1);
        }
        std::vector<double> vals(idx.size(), 0.0);
        if (j.contains("null_values")) {
            vals = get_field<std::vector<double>>(j, "null_values");
            if (vals.size() != idx.size()) throw ConfigError("config field 'null_values' must match 'test' in length");
        }
        c.restriction = Restriction(idx, vals);
    } else {
        throw ConfigError("config field 'design' must be 'standard' or 'custom'");
    }
    if (j.contains("delta")) c.delta = get_field<double>(j, "delta");
    if (j.contains("reps")) c.reps = get_field<int>(j, "reps");
    if (j.contains("boot_B")) c.boot_B = get_field<int>(j, "boot_B");
    if (j.contains("alpha")) c.alpha_levels = get_field<std::vector<double>>(j, "alpha");
    if (j.contains("seed")) c.base_seed = get_field<std::uint64_t>(j, "seed");
    if (j.contains("covariate_seed")) c.covariate_seed = get_field<std::uint64_t>(j, "covariate_seed");
    if (j.contains("threads")) c.threads = get_field<int>(j, "threads");
    if (j.contains("max_failure_fraction")) c.max_failure_fraction = get_field<double>(j, "max_failure_fraction");
    if (j.contains("methods")) {
        const json& m = j.at("methods");
        std::string list;
        if (m.is_string()) {
            list = m.get<std::string>();
        } else if (m.is_array()) {
            for (const auto& e : m) {
                if (!e.is_string()) throw ConfigError("config field 'methods' must hold strings");
                list += (list.empty() ? "" : ",") + e.get<std::string>();
            }
        } else {
            throw ConfigError("config field 'methods' has the wrong type");
        }
        c.methods = MethodSet::parse(list);
    }
    const std::string study = j.contains("study") ? get_field<std::string>(j, "study") : "size";
    if (study == "size") spec.study = Study::Size;
    else if (study == "power") spec.study = Study::Power;
    else if (study == "moments") spec.study = Study::Moments;
    else throw ConfigError("config field 'study' must be 'size', 'power' or 'moments'");
    if (j.contains("output_prefix")) spec.output_prefix = get_field<std::string>(j, "output_prefix");
    c.validate();
    return spec;
}

inline SimResult run_sim(const SimSpec& spec) {
    switch (spec.study) {
    case Study::Power: return power_study(spec.config);
    case Study::Moments: return null_moments(spec.config);
    case Study::Size: break;
    }
    return size_study(spec.config);
}

inline void print_sim_summary(std::ostream& os, const SimSpec& spec, const SimResult& r) {
    const SimConfig& c = spec.config;
    os << "n = " << c.n << ", p = " << c.p << ", phi = " << c.phi_true << ", q = " << c.restriction.q()
       << ", delta = " << c.delta << ", reps = " << c.reps << ", failures = " << r.failures << "\n\n";
    os << std::left << std::setw(10) << "statistic";
    for (double a : c.alpha_levels) os << std::right << std::setw(12) << ("alpha=" + fmt(a, 3));
    os << '\n';
    for (const auto& s : r.statistics) {
        os << std::left << std::setw(10) << s;
        for (double a : c.alpha_levels) os << std::right << std::setw(12) << fmt(100.0 * r.rate(s, a), 4);
        os << '\n';
    }
    if (spec.study == Study::Moments) {
        os << '\n'
           << std::left << std::setw(10) << "statistic" << std::right << std::setw(10) << "mean" << std::setw(10) << "var"
           << std::setw(10) << "skew" << std::setw(10) << "kurt" << std::setw(10) << "q90" << std::setw(10) << "q95"
           << std::setw(10) << "q99" << '\n';
        for (const auto& s : r.statistics) {
            const auto it = r.moments.find(s);
            if (it == r.moments.end()) continue;
            const Moments& m = it->second;
            os << std::left << std::setw(10) << s << std::right;
            for (double v : {m.mean, m.variance, m.skewness, m.kurtosis, m.q90, m.q95, m.q99}) os << std::setw(10) << fmt(v, 5);
            os << '\n';
        }
    }
}

} // namespace betabart::cli
