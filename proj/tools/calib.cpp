// calib: calibration measures for binary predictors from the command line.
//
//   calib measure     --input d.csv --metrics ece,smce [--output r.json]
//   calib generate    --family dbeta --beta 2 --n 10000 --seed 1 [--output d.csv]
//   calib sweep       --beta-grid 0.01,1,100 --n 10000 --trials 50 --metrics smce
//   calib reliability --input d.csv --bins 20
//
// Exit codes: 0 success, 1 bad flags, 2 unreadable or malformed input,
// 3 solver failure.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "calib/calib.hpp"

namespace {

using json = nlohmann::json;
using namespace calib;

constexpr const char* kToolVersion = "0.1.0";

const std::vector<std::string> kAllMetrics = {"ece",  "binned-ece", "binned-ece-w", "sintce",
                                              "smce", "ldce",       "kce-laplace",  "kce-gaussian"};

const std::vector<std::string> kSweepMetrics = {"binned-ece", "binned-ece-w", "sintce", "smce", "kce-laplace"};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MeasureOptions {
    int bins = 20;
    double eps = 0.01;
    std::int64_t sintce_shifts = 0;
    std::string kce_mode = "subsample";
    std::int64_t kce_terms = 0;
    std::int64_t kce_reps = 0;
    double ldce_eps1 = 0.005;
    double ldce_eps2 = 0.005;
    std::string ldce_form = "primal";
};

struct MetricOutcome {
    double value = 0.0;
    json config = json::object();
    std::optional<std::uint64_t> seed;
    std::vector<std::string> caveats;
    json extra = json::object();
};

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<std::string> parse_metrics(const std::string& text) {
    auto names = split_list(text);
    if (names.size() == 1 && names[0] == "all") return kAllMetrics;
    if (names.empty()) throw UsageError("--metrics: no metric names given");
    std::vector<std::string> out;
    for (const auto& n : names) {
        if (std::find(kAllMetrics.begin(), kAllMetrics.end(), n) == kAllMetrics.end())
            throw UsageError("--metrics: unknown metric '" + n + "'");
        if (std::find(out.begin(), out.end(), n) == out.end()) out.push_back(n);
    }
    return out;
}

std::vector<double> parse_beta_grid(const std::string& text) {
    std::vector<double> out;
    for (const auto& item : split_list(text)) {
        double b = 0.0;
        const auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), b);
        if (ec != std::errc() || end != item.data() + item.size() || !(b > 0.0) || !std::isfinite(b))
            throw UsageError("--beta-grid: '" + item + "' is not a positive number");
        out.push_back(b);
    }
    if (out.empty()) throw UsageError("--beta-grid: empty grid");
    return out;
}

KernelMode parse_kce_mode(const std::string& s) {
    if (s == "exact") return KernelMode::Exact;
    if (s == "subsample") return KernelMode::Subsample;
    if (s == "fourier") return KernelMode::Fourier;
    if (s == "binning") return KernelMode::Binning;
    throw UsageError("--kce-mode: expected exact, subsample, fourier or binning");
}

void validate(const MeasureOptions& o) {
    if (o.bins < 1) throw UsageError("--bins must be >= 1");
    if (!(o.eps > 0.0 && o.eps < 1.0)) throw UsageError("--eps must lie in (0,1)");
    if (o.sintce_shifts < 0) throw UsageError("--sintce-shifts must be >= 1");
    if (o.kce_terms < 0) throw UsageError("--kce-terms must be >= 1");
    if (o.kce_reps < 0) throw UsageError("--kce-reps must be >= 1");
    if (!(o.ldce_eps1 > 0.0 && o.ldce_eps1 <= 0.5)) throw UsageError("--ldce-eps1 must lie in (0, 1/2]");
    if (!(o.ldce_eps2 > 0.0 && o.ldce_eps2 <= 0.5)) throw UsageError("--ldce-eps2 must lie in (0, 1/2]");
    if (o.ldce_form != "primal" && o.ldce_form != "dual") throw UsageError("--ldce-form: expected primal or dual");
    parse_kce_mode(o.kce_mode);
}

MetricOutcome compute_metric(const std::string& name, const EmpiricalDistribution& dist, const MeasureOptions& o,
                             std::uint64_t seed) {
    MetricOutcome m;
    const auto n = static_cast<double>(dist.size());
    if (name == "ece") {
        m.value = ece(dist);
        m.config = {{"grouping", "exact prediction equality"}};
        m.caveats.push_back("groups by exact prediction equality; informative only when predictions repeat");
    } else if (name == "binned-ece" || name == "binned-ece-w") {
        const bool penalty = name == "binned-ece-w";
        const auto r = binned_ece_detail(dist, uniform_partition(o.bins), penalty);
        m.value = r.value;
        m.config = {{"bins", o.bins}, {"width_penalty", penalty}};
        if (penalty) m.extra = {{"residual_term", round_significant(r.residual_term)}, {"width_term", round_significant(r.width_term)}};
    } else if (name == "sintce") {
        IntervalEstimatorConfig cfg;
        cfg.epsilon = o.eps;
        cfg.shifts_m = o.sintce_shifts;
        cfg.rng = SeededRng(seed);
        const auto r = sintce_detail(dist, cfg);
        m.value = r.value;
        m.seed = seed;
        m.config = {{"epsilon", o.eps},        {"constant_c", cfg.constant_c}, {"delta", cfg.delta},
                    {"shifts_m", r.shifts_m}, {"k_star", r.k_star},           {"best_k", r.best_k}};
        const double wanted = cfg.constant_c / (o.eps * o.eps * o.eps);
        if (n < wanted)
            m.caveats.push_back("n is below C/eps^3 = " + format_significant(wanted, 6) +
                                "; the accuracy guarantee for eps does not apply");
    } else if (name == "smce") {
        m.value = smce(dist);
        m.config = {{"solver", "chain dynamic program"}};
        m.caveats.push_back("sample estimate; sampling error O(n^-1/2)");
    } else if (name == "ldce") {
        LdceConfig cfg{o.ldce_eps1, o.ldce_eps2, o.ldce_form == "dual" ? LdceForm::Dual : LdceForm::Primal};
        const auto r = ldce_detail(dist, cfg);
        m.value = r.value;
        m.config = {{"eps1", cfg.eps1},
                    {"eps2", cfg.eps2},
                    {"form", to_string(cfg.form)},
                    {"grid_points", r.grid.size()},
                    {"support_pairs", r.gamma.size()}};
        m.caveats.push_back("discretization error at most eps1 + 2*eps2 = " +
                            format_significant(cfg.eps1 + 2.0 * cfg.eps2, 6));
        m.caveats.push_back("sample estimate; sampling error O(n^-1/2)");
    } else {
        const auto kind = name == "kce-laplace" ? KernelKind::Laplace : KernelKind::Gaussian;
        KernelEstimatorConfig cfg;
        cfg.mode = parse_kce_mode(o.kce_mode);
        cfg.terms_m = o.kce_terms;
        cfg.reps_r = o.kce_reps;
        cfg.rng = SeededRng(seed);
        const auto r = kce_estimate_detail(dist, kind, cfg);
        m.value = r.value;
        m.config = {{"kernel", to_string(kind)}, {"mode", to_string(cfg.mode)}};
        if (cfg.mode == KernelMode::Subsample) m.config["terms_m"] = r.terms;
        if (cfg.mode == KernelMode::Fourier || cfg.mode == KernelMode::Binning) {
            m.config["reps_r"] = r.terms;
            m.config["accuracy"] = cfg.accuracy;
        }
        if (cfg.mode != KernelMode::Exact) m.seed = seed;
        m.extra = {{"squared", round_significant(r.squared)}, {"squared_raw", round_significant(r.squared_raw)}};
        if (r.squared_raw < 0.0) m.caveats.push_back("negative squared estimate clamped to 0");
    }
    return m;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open input file '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

EmpiricalDistribution load_samples(const std::string& bytes) {
    std::istringstream in(bytes);
    return EmpiricalDistribution(parse_samples_csv(in));
}

void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        std::cout.flush();
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot write output file '" + path + "'");
    out << text;
}

int cmd_measure(const std::string& input, const std::string& output, const std::string& metrics_text,
                const MeasureOptions& opts, std::uint64_t seed) {
    validate(opts);
    const auto metrics = parse_metrics(metrics_text);
    const auto bytes = read_file(input);
    const auto dist = load_samples(bytes);

    json report;
    report["tool_version"] = kToolVersion;
    report["n"] = dist.size();
    report["input_digest"] = "fnv1a64:" + fnv1a_hex(bytes);
    report["metrics"] = json::object();
    bool solver_failed = false;
    for (const auto& name : metrics) {
        json entry;
        try {
            const auto m = compute_metric(name, dist, opts, seed);
            entry["value"] = round_significant(m.value);
            entry["config"] = m.config;
            entry["seed"] = m.seed ? json(*m.seed) : json(nullptr);
            entry["caveats"] = m.caveats;
            for (const auto& [k, v] : m.extra.items()) entry[k] = v;
        } catch (const SolverFailure& e) {
            solver_failed = true;
            entry["error"] = e.what();
        }
        report["metrics"][name] = entry;
    }
    emit(output, report.dump(2) + "\n");
    return solver_failed ? 3 : 0;
}

struct GenerateOptions {
    std::string family;
    std::size_t n = 10000;
    double beta = 1.0;
    double alpha = 0.25;
    int which = 1;
    std::optional<double> eps;
};

std::pair<EmpiricalDistribution, std::string> generate_family(const GenerateOptions& g, std::uint64_t seed) {
    if (g.n < 1) throw UsageError("--n must be >= 1");
    SeededRng rng(seed);
    std::ostringstream desc;
    auto pick = [&](const std::pair<FiniteProblem, FiniteProblem>& pair) -> const FiniteProblem& {
        if (g.which != 1 && g.which != 2) throw UsageError("--which must be 1 or 2");
        return g.which == 1 ? pair.first : pair.second;
    };
    auto describe = [&](const FiniteProblem& p) {
        desc << "points (mass, E[y|x], f):";
        for (const auto& q : p.points())
            desc << " (" << format_significant(q.mass) << ", " << format_significant(q.f_star) << ", "
                 << format_significant(q.f) << ")";
    };
    try {
        if (g.family == "dbeta") {
            desc << "dbeta: f ~ U[0,1], y ~ Bernoulli(f), v = f^b/(f^b+(1-f)^b) with b = " << format_significant(g.beta);
            return {gen_dbeta({g.beta, g.n, rng}), desc.str()};
        }
        if (g.family == "gauss-gap") {
            const double eps = g.eps.value_or(0.05);
            desc << "gauss-gap: v ~ U[1/4,3/4], P(y=1|v) = v + cos((v-1/2)/e) exp(-(v-1/2)^2/e)/4 with e = "
                 << format_significant(eps);
            return {gen_gauss_gap({eps, g.n, rng}), desc.str()};
        }
        if (g.family == "pa-gap") {
            const auto pair = gap_pa_pair(g.alpha);
            const auto& p = pick(pair);
            desc << "pa-gap alpha = " << format_significant(g.alpha) << ", problem " << g.which << "; ";
            describe(p);
            return {induce_gamma(p, g.n, rng), desc.str()};
        }
        if (g.family == "quad-gap") {
            const auto p = gap_quadratic(g.alpha);
            desc << "quad-gap alpha = " << format_significant(g.alpha) << "; ";
            describe(p);
            return {induce_gamma(p, g.n, rng), desc.str()};
        }
        if (g.family == "discontinuity") {
            const double eps = g.eps.value_or(0.01);
            const auto pair = discontinuity_pair(eps);
            const auto& p = pick(pair);
            desc << "discontinuity eps = " << format_significant(eps) << ", predictor " << g.which << "; ";
            describe(p);
            return {induce_gamma(p, g.n, rng), desc.str()};
        }
        if (g.family == "f-eps") {
            const double eps = g.eps.value_or(0.01);
            const auto p = f_eps_problem(eps);
            desc << "f-eps eps = " << format_significant(eps) << "; ";
            describe(p);
            return {induce_gamma(p, g.n, rng), desc.str()};
        }
    } catch (const Error& e) {
        throw UsageError(std::string("--family ") + g.family + ": " + e.what());
    }
    throw UsageError("--family: unknown family '" + g.family +
                     "' (expected dbeta, pa-gap, quad-gap, discontinuity, gauss-gap, f-eps)");
}

int cmd_generate(const GenerateOptions& g, const std::string& output, std::uint64_t seed) {
    const auto [dist, desc] = generate_family(g, seed);
    std::ostringstream csv;
    write_samples_csv(csv, dist.samples());
    emit(output, csv.str());
    auto& info = (output.empty() || output == "-") ? std::cerr : std::cout;
    info << desc << "\n";
    return 0;
}

int cmd_sweep(const std::string& grid_text, std::size_t n, int trials, const std::string& metrics_text,
              const MeasureOptions& opts, const std::string& output, std::uint64_t seed) {
    validate(opts);
    const auto grid = parse_beta_grid(grid_text);
    const auto metrics = metrics_text.empty() ? kSweepMetrics : parse_metrics(metrics_text);
    if (trials < 1) throw UsageError("--trials must be >= 1");
    if (n < 1) throw UsageError("--n must be >= 1");

    // One job per (beta, trial); each derives its own seeds so the output
    // does not depend on scheduling.
    const std::size_t jobs = grid.size() * static_cast<std::size_t>(trials);
    std::vector<std::vector<double>> values(jobs);
    std::vector<std::string> failures(jobs);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t j; (j = next.fetch_add(1)) < jobs;) {
            const std::size_t b = j / static_cast<std::size_t>(trials);
            const std::size_t t = j % static_cast<std::size_t>(trials);
            const SeededRng base = SeededRng(seed).derive(b, t);
            try {
                const auto dist = gen_dbeta({grid[b], n, base.derive(0)});
                for (std::size_t k = 0; k < metrics.size(); ++k)
                    values[j].push_back(compute_metric(metrics[k], dist, opts, base.derive(1, k).next_u64()).value);
            } catch (const std::exception& e) {
                failures[j] = e.what();
            }
        }
    };
    const unsigned threads = std::max(1U, std::min(std::thread::hardware_concurrency(), static_cast<unsigned>(jobs)));
    std::vector<std::thread> pool;
    for (unsigned i = 1; i < threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    for (const auto& f : failures)
        if (!f.empty()) throw SolverFailure(LpStatus::NumericalFailure, f);

    std::ostringstream csv;
    csv << "beta,trial,metric,value\n";
    for (std::size_t j = 0; j < jobs; ++j) {
        const std::size_t b = j / static_cast<std::size_t>(trials);
        const std::size_t t = j % static_cast<std::size_t>(trials);
        for (std::size_t k = 0; k < metrics.size(); ++k)
            csv << format_significant(grid[b]) << ',' << t << ',' << metrics[k] << ',' << format_significant(values[j][k])
                << '\n';
    }
    emit(output, csv.str());
    return 0;
}

int cmd_reliability(const std::string& input, int bins, const std::string& output) {
    if (bins < 1) throw UsageError("--bins must be >= 1");
    const auto dist = load_samples(read_file(input));
    std::ostringstream csv;
    csv << "lo,hi,count,mean_v,mean_y\n";
    for (const auto& b : reliability_bins(dist, bins)) {
        csv << format_significant(b.lo) << ',' << format_significant(b.hi) << ',' << b.count << ',';
        if (b.count > 0) csv << format_significant(b.mean_v) << ',' << format_significant(b.mean_y);
        else csv << ',';
        csv << '\n';
    }
    emit(output, csv.str());
    return 0;
}

void add_measure_flags(CLI::App* cmd, MeasureOptions& o) {
    cmd->add_option("--bins", o.bins, "Equal-width bins for binned measures")->capture_default_str();
    cmd->add_option("--eps", o.eps, "Target accuracy of the interval estimator")->capture_default_str();
    cmd->add_option("--sintce-shifts", o.sintce_shifts, "Random shifts per width (0 = from --eps)")->capture_default_str();
    cmd->add_option("--kce-mode", o.kce_mode, "exact | subsample | fourier | binning")->capture_default_str();
    cmd->add_option("--kce-terms", o.kce_terms, "Sampled terms in subsample mode (0 = 10 n)")->capture_default_str();
    cmd->add_option("--kce-reps", o.kce_reps, "Draws in fourier/binning mode (0 = 4000)")->capture_default_str();
    cmd->add_option("--ldce-eps1", o.ldce_eps1, "Prediction rounding step")->capture_default_str();
    cmd->add_option("--ldce-eps2", o.ldce_eps2, "Calibrated-value grid spacing")->capture_default_str();
    cmd->add_option("--ldce-form", o.ldce_form, "primal | dual")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Calibration measures for binary predictors"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    std::uint64_t seed = 0;
    std::string input, output, metrics = "all", family, beta_grid = "0.01,0.1,0.33,1,3,10,100", sweep_metrics;
    MeasureOptions mopts;
    GenerateOptions gopts;
    double gen_eps = 0.0;
    int rel_bins = 20, trials = 50;
    std::size_t sweep_n = 10000;

    auto* measure = app.add_subcommand("measure", "Compute calibration measures of a sample file");
    measure->add_option("--input", input, "CSV file with header v,y")->required();
    measure->add_option("--output", output, "Report path (default stdout)");
    measure->add_option("--metrics", metrics, "Comma-separated metric names or 'all'")->capture_default_str();
    measure->add_option("--seed", seed, "Seed for randomized estimators")->capture_default_str();
    add_measure_flags(measure, mopts);

    auto* generate = app.add_subcommand("generate", "Write samples from a synthetic family");
    generate->add_option("--family", gopts.family, "dbeta | pa-gap | quad-gap | discontinuity | gauss-gap | f-eps")
        ->required();
    generate->add_option("--n", gopts.n, "Number of samples")->capture_default_str();
    generate->add_option("--seed", seed, "Random seed")->capture_default_str();
    generate->add_option("--output", output, "CSV path (default stdout)");
    generate->add_option("--beta", gopts.beta, "Inverse temperature (dbeta)")->capture_default_str();
    generate->add_option("--alpha", gopts.alpha, "Gap parameter (pa-gap, quad-gap)")->capture_default_str();
    generate->add_option("--which", gopts.which, "Problem 1 or 2 (pa-gap, discontinuity)")->capture_default_str();
    auto* eps_opt = generate->add_option("--eps", gen_eps, "Construction parameter (gauss-gap, discontinuity, f-eps)");

    auto* sweep = app.add_subcommand("sweep", "Measures across inverse temperatures of the dbeta family");
    sweep->add_option("--beta-grid", beta_grid, "Comma-separated inverse temperatures")->capture_default_str();
    sweep->add_option("--n", sweep_n, "Samples per trial")->capture_default_str();
    sweep->add_option("--trials", trials, "Trials per beta")->capture_default_str();
    sweep->add_option("--metrics", sweep_metrics, "Comma-separated metric names (default binned-ece, binned-ece-w, sintce, smce, kce-laplace)");
    sweep->add_option("--seed", seed, "Random seed")->capture_default_str();
    sweep->add_option("--output", output, "CSV path (default stdout)");
    add_measure_flags(sweep, mopts);

    auto* reliability = app.add_subcommand("reliability", "Reliability diagram data");
    reliability->add_option("--input", input, "CSV file with header v,y")->required();
    reliability->add_option("--bins", rel_bins, "Equal-width bins")->capture_default_str();
    reliability->add_option("--output", output, "CSV path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*measure) return cmd_measure(input, output, metrics, mopts, seed);
        if (*generate) {
            if (eps_opt->count() > 0) gopts.eps = gen_eps;
            return cmd_generate(gopts, output, seed);
        }
        if (*sweep) return cmd_sweep(beta_grid, sweep_n, trials, sweep_metrics, mopts, output, seed);
        if (*reliability) return cmd_reliability(input, rel_bins, output);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const CsvError& e) {
        std::cerr << "error: " << input << ": " << e.what() << "\n";
        return 2;
    } catch (const SolverFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
