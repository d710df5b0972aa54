#include "kpde/bench.hpp"
#include "kpde/errors.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

using namespace kpde;
using nlohmann::json;

namespace {

constexpr int exit_config = 2;
constexpr int exit_numerical = 3;

// Config document plus command-line overrides.
struct ConfigArgs {
    std::string path;
    std::optional<std::string> problem;
    std::optional<std::string> method;
    std::optional<int> training_size;
    std::optional<double> noise;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode;
    std::optional<int> test_count;
    std::optional<std::string> backend;

    void attach(CLI::App* app) {
        app->add_option("--config", path, "JSON experiment config");
        app->add_option("--problem", problem, "pendulum | diffusion | darcy");
        app->add_option("--method", method, "kernel-ARD | kernel-polynomial | sindy");
        app->add_option("--I", training_size, "training pairs");
        app->add_option("--noise", noise, "noise ratio");
        app->add_option("--seed", seed, "random seed");
        app->add_option("--mode", mode, "preset | cv");
        app->add_option("--tests", test_count, "test pairs");
        app->add_option("--solver", backend, "gauss-newton | lbfgs");
    }

    [[nodiscard]] ExperimentConfig load() const {
        json doc = json::object();
        if (!path.empty()) {
            std::ifstream in(path);
            if (!in) throw ConfigError("cannot open config '" + path + "'");
            try {
                doc = json::parse(in);
            } catch (const json::exception& e) {
                throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
            }
        }
        if (problem) doc["problem"] = *problem;
        if (method) doc["method"] = *method;
        if (training_size) doc["training_size"] = *training_size;
        if (noise) doc["noise_ratio"] = *noise;
        if (seed) doc["seed"] = *seed;
        if (mode) doc["hyperparameter_mode"] = *mode;
        if (test_count) doc["test_count"] = *test_count;
        if (backend) {
            if (!doc.contains("solver")) doc["solver"] = json::object();
            doc["solver"]["backend"] = *backend;
        }
        return ExperimentConfig::from_json(doc);
    }
};

void write_json(const json& doc, const std::string& path) {
    if (path.empty()) {
        std::cout << doc.dump(2) << '\n';
        return;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << doc.dump(2) << '\n';
}

void print_summary(const ErrorReport& r) {
    std::cout << "mean " << r.mean << " std " << r.std << " over " << r.per_case.size() << " test cases\n";
    const json& ref = r.paper_reference_values;
    if (ref.contains("method") && !ref["method"].is_null()) {
        std::cout << "published " << ref["method"]["mean"].get<double>() << " (" << ref["method"]["std"].get<double>()
                  << ")\n";
    }
}

int operator_bench(const ExperimentConfig& config, const std::string& out, bool csv) {
    const ErrorReport r = run_operator_learning(config);
    const std::string path = !out.empty() ? out : config.output;
    if (!path.empty()) emit_report(r, csv ? ReportFormat::Csv : ReportFormat::Json, path);
    print_summary(r);
    return 0;
}

int generate(const ExperimentConfig& config, bool test, double beta, const std::string& dir) {
    GenerationOptions o;
    o.count = test ? config.test_count : config.training_size;
    o.seed = config.seed;
    o.noise_ratio = test ? 0.0 : config.noise_ratio;
    o.beta = beta;
    if (test) o.stream_offset = test_stream_offset;
    const Dataset d = generate_dataset(BenchmarkProblem::make(config.problem), o);
    std::filesystem::create_directories(dir);
    write_dataset(d, dir);
    std::cout << "wrote " << d.pairs.size() << " pairs to " << dir << '\n';
    return 0;
}

int discover(const ExperimentConfig& config, const std::string& out) {
    const TrainedModel t = train_model(config, training_data(config));
    json doc;
    doc["model"] = t.model.to_json();
    doc["hyperparameters"] = t.hyperparameters;
    doc["training_discovery_error"] = t.discovery_error;
    doc["config"] = config.to_json();
    write_json(doc, out);
    std::cerr << "training discovery error " << t.discovery_error << '\n';
    return 0;
}

int solve(const ExperimentConfig& config, const std::string& model_path, bool true_model, int index,
          const std::string& out, const std::string& trace) {
    const BenchmarkProblem problem = BenchmarkProblem::make(config.problem);
    ExperimentConfig c = config;
    c.test_count = std::max(c.test_count, index + 1);
    const Dataset test = test_data(c);
    std::shared_ptr<const PointwiseModel> interior;
    if (true_model) {
        interior = true_interior_model(problem);
    } else if (!model_path.empty()) {
        std::ifstream in(model_path);
        if (!in) throw ConfigError("cannot open model '" + model_path + "'");
        const json doc = json::parse(in);
        interior = learned_interior_model(problem, LearnedModel::from_json(doc.contains("model") ? doc["model"] : doc));
    } else {
        interior = learned_interior_model(problem, train_model(config, training_data(config)).model);
    }
    const Sample& s = test.pairs.at(static_cast<std::size_t>(index));
    const CaseResult r = solve_case(problem, s, interior, config.solver);
    std::cout << "relative L2 error " << r.error << " objective " << r.state.objective << " iterations "
              << r.state.iteration << '\n';
    if (!out.empty()) {
        std::ofstream f(out);
        if (!f) throw std::runtime_error("cannot open '" + out + "' for writing");
        f.precision(17);
        const int dim = problem.dim(), comps = problem.components();
        for (int d = 0; d < dim; ++d) f << (dim == 1 ? "t" : "x" + std::to_string(d + 1)) << ',';
        for (int k = 0; k < comps; ++k) f << "u" << k + 1 << ",pred" << k + 1 << (k + 1 < comps ? "," : "\n");
        for (Eigen::Index i = 0; i < s.points.rows(); ++i) {
            for (int d = 0; d < dim; ++d) f << s.points(i, d) << ',';
            for (int k = 0; k < comps; ++k) f << s.u(i, k) << ',' << r.prediction(i, k) << (k + 1 < comps ? "," : "\n");
        }
    }
    if (!trace.empty()) {
        std::ofstream f(trace);
        if (!f) throw std::runtime_error("cannot open '" + trace + "' for writing");
        write_trace_csv(r.state, f);
    }
    return 0;
}

int robustness(const ExperimentConfig& config, const std::vector<std::string>& names, const std::string& out) {
    std::vector<Method> methods;
    for (const auto& n : names) methods.push_back(method_from_string(n));
    const auto points = run_discovery_robustness(config, methods);
    if (!out.empty()) write_robustness_csv(points, out);
    for (const auto& p : points) std::cout << p.beta << ' ' << p.method << ' ' << p.error << '\n';
    return 0;
}

int tune(const ExperimentConfig& config, const std::string& out) {
    ExperimentConfig c = config;
    c.mode = HyperMode::Cv;
    c.validate();
    const TrainedModel t = train_model(c, training_data(c));
    std::ostringstream tables;
    for (std::size_t e = 0; e < t.kernel_cv.size(); ++e) {
        tables << "# equation " << e << '\n';
        t.kernel_cv[e].write_csv(tables);
    }
    if (out.empty()) {
        std::cout << tables.str();
    } else {
        std::ofstream f(out);
        if (!f) throw std::runtime_error("cannot open '" + out + "' for writing");
        f << tables.str();
    }
    std::cout << t.hyperparameters.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kernel equation learning and operator learning benchmarks"};
    app.require_subcommand(1);

    ConfigArgs gen_args, disc_args, solve_args, bench_args, rob_args, tune_args, run_args;

    auto* gen = app.add_subcommand("generate-data", "sample source/solution pairs and write CSV files");
    gen_args.attach(gen);
    bool gen_test = false;
    double gen_beta = 0.0;
    std::string gen_dir;
    gen->add_flag("--test", gen_test, "write the test set instead of the training set");
    gen->add_option("--beta", gen_beta, "forcing perturbation size");
    gen->add_option("--out", gen_dir, "output directory")->required();

    auto* disc = app.add_subcommand("discover", "learn the equation from training data");
    disc_args.attach(disc);
    std::string disc_out;
    disc->add_option("--out", disc_out, "model JSON path");

    auto* sol = app.add_subcommand("solve", "solve one test case with a learned or exact equation");
    solve_args.attach(sol);
    std::string sol_model, sol_out, sol_trace;
    int sol_case = 0;
    bool sol_true = false;
    sol->add_option("--model", sol_model, "model JSON from discover");
    sol->add_flag("--true-equation", sol_true, "use the known equation");
    sol->add_option("--case", sol_case, "test case index")->check(CLI::NonNegativeNumber);
    sol->add_option("--out", sol_out, "prediction CSV");
    sol->add_option("--trace", sol_trace, "solver trace CSV");

    auto* bench = app.add_subcommand("operator-bench", "operator learning error over the test set");
    bench_args.attach(bench);
    std::string bench_out;
    bool bench_csv = false;
    bench->add_option("--out", bench_out, "report path");
    bench->add_flag("--csv", bench_csv, "write a CSV table instead of JSON");

    auto* rob = app.add_subcommand("robustness", "discovery error under perturbed forcings");
    rob_args.attach(rob);
    std::vector<std::string> rob_methods{"kernel-ARD", "kernel-polynomial", "sindy"};
    std::string rob_out;
    rob->add_option("--methods", rob_methods, "methods to compare");
    rob->add_option("--out", rob_out, "plot CSV (beta, method, error)");

    auto* tn = app.add_subcommand("tune", "cross-validate the Step (ii) kernel");
    tune_args.attach(tn);
    std::string tune_out;
    tn->add_option("--out", tune_out, "score table CSV");

    auto* run = app.add_subcommand("run", "operator-bench driven by a config file");
    run_args.attach(run);
    std::string run_out;
    run->add_option("--out", run_out, "report path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_config;
    }

    try {
        if (*gen) return generate(gen_args.load(), gen_test, gen_beta, gen_dir);
        if (*disc) return discover(disc_args.load(), disc_out);
        if (*sol) return solve(solve_args.load(), sol_model, sol_true, sol_case, sol_out, sol_trace);
        if (*bench) return operator_bench(bench_args.load(), bench_out, bench_csv);
        if (*rob) return robustness(rob_args.load(), rob_methods, rob_out);
        if (*tn) return tune(tune_args.load(), tune_out);
        if (*run) {
            if (run_args.path.empty()) throw ConfigError("run requires --config");
            return operator_bench(run_args.load(), run_out, false);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const InvalidArgument& e) {
        std::cerr << "invalid argument: " << e.what() << '\n';
        return exit_config;
    } catch (const UnsupportedOperation& e) {
        std::cerr << "unsupported: " << e.what() << '\n';
        return exit_config;
    } catch (const StageFailure& e) {
        std::cerr << e.what() << '\n';
        if (!e.partial().empty()) std::cerr << "completed cases: " << e.partial().size() << '\n';
        return exit_numerical;
    } catch (const NumericalFailure& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return exit_numerical;
    } catch (const DegenerateModel& e) {
        std::cerr << "degenerate model: " << e.what() << '\n';
        return exit_numerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
