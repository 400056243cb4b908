// dgpk: command-line front end for the deepkernel shared library.
//
// Every subcommand is a pure function of (config, seed): outputs are
// byte-identical across runs unless --timestamp adds a generation-time
// comment. Options come from flags, which override keys in an optional
// JSON config file (--config). The effective configuration is echoed into
// '#' comment lines at the top of CSV outputs.
//
// Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 validation
// failure (mirroring the library status codes).

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "deepkernel/capi.h"

using nlohmann::json;

namespace {

// ---- small RAII shims over the C API ----

struct OwnedString {
    char* ptr = nullptr;
    ~OwnedString() { dk_string_free(ptr); }
    std::string str() const { return ptr ? std::string(ptr) : std::string(); }
};

template <typename T, void (*FreeFn)(T*)>
struct Handle {
    T* ptr = nullptr;
    Handle() = default;
    Handle(const Handle&) = delete;
    Handle& operator=(const Handle&) = delete;
    ~Handle() {
        if (ptr) FreeFn(ptr);
    }
    T** out() { return &ptr; }
    operator T*() const { return ptr; }
};

using KernelHandle = Handle<dk_kernel, dk_kernel_free>;
using DatasetHandle = Handle<dk_dataset, dk_dataset_free>;
using GpHandle = Handle<dk_gp, dk_gp_free>;
using FitHandle = Handle<dk_fit, dk_fit_free>;

int fail(dk_status st) {
    std::fprintf(stderr, "error: %s\n", dk_last_error());
    return static_cast<int>(st);
}

#define CHECK(call)                        \
    do {                                   \
        const dk_status st_ = (call);      \
        if (st_ != DK_OK) return fail(st_); \
    } while (0)

// ---- formatting and IO helpers ----

std::string fmt(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// --kernel accepts inline JSON or a path to a JSON file.
std::string kernel_text(const std::string& arg) {
    const auto pos = arg.find_first_not_of(" \t\r\n");
    if (pos != std::string::npos && arg[pos] == '{') return arg;
    return slurp(arg);
}

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    const json cfg = json::parse(slurp(path));
    if (!cfg.is_object()) throw std::runtime_error("config file must hold a JSON object");
    return cfg;
}

std::string utc_now() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::vector<std::string> config_comments(const std::string& command, const json& effective,
                                         bool timestamp) {
    std::vector<std::string> comments;
    comments.push_back("command: " + command);
    comments.push_back("config: " + effective.dump());
    if (timestamp) comments.push_back("generated: " + utc_now());
    return comments;
}

std::string with_comments(const std::vector<std::string>& comments, const std::string& body) {
    std::string out;
    for (const std::string& c : comments) out += "# " + c + "\n";
    out += body;
    return out;
}

int write_output(const std::string& out_path, const std::string& content) {
    if (out_path.empty()) {
        std::fwrite(content.data(), 1, content.size(), stdout);
        return 0;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) {
        std::fprintf(stderr, "error: cannot open '%s' for writing\n", out_path.c_str());
        return 1;
    }
    out << content;
    return 0;
}

// Shared flag state; each subcommand reads what it uses.
struct CommonOpts {
    std::string config_path;
    std::string out_path;
    std::vector<std::string> kernels;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int restarts = 0;
    bool restarts_set = false;
    std::int64_t samples = 0;
    bool samples_set = false;
    bool timestamp = false;
};

std::uint64_t pick_seed(const CommonOpts& opts, const json& cfg) {
    if (opts.seed_set) return opts.seed;
    return cfg.value("seed", static_cast<std::uint64_t>(0));
}

// ---- subcommand implementations ----

int run_sample_prior(const CommonOpts& opts) {
    const json cfg = load_config(opts.config_path);
    const double x_lo = cfg.value("x_lo", -5.0);
    const double x_hi = cfg.value("x_hi", 5.0);
    const int grid = cfg.value("grid", 101);
    const int samples =
        opts.samples_set ? static_cast<int>(opts.samples) : cfg.value("samples", 3);
    const std::uint64_t seed = pick_seed(opts, cfg);
    if (opts.kernels.empty()) {
        std::fprintf(stderr, "error: sample-prior needs at least one --kernel\n");
        return 1;
    }
    if (grid < 1 || samples < 1) {
        std::fprintf(stderr, "error: grid and samples must be positive\n");
        return 1;
    }

    std::vector<double> x(static_cast<std::size_t>(grid));
    for (int i = 0; i < grid; ++i) {
        x[static_cast<std::size_t>(i)] =
            grid == 1 ? x_lo : x_lo + (x_hi - x_lo) * i / (grid - 1);
    }

    json effective{{"x_lo", x_lo},       {"x_hi", x_hi}, {"grid", grid},
                   {"samples", samples}, {"seed", seed}, {"kernels", json::array()}};
    std::vector<std::string> comments;
    std::vector<std::vector<double>> draws;  // one buffer per kernel
    std::vector<std::string> labels;
    for (std::size_t ki = 0; ki < opts.kernels.size(); ++ki) {
        KernelHandle k;
        CHECK(dk_kernel_parse(kernel_text(opts.kernels[ki]).c_str(), k.out()));
        OwnedString label, kjson;
        CHECK(dk_kernel_describe(k, &label.ptr));
        CHECK(dk_kernel_to_json(k, -1, &kjson.ptr));
        effective["kernels"].push_back(json::parse(kjson.str()));
        labels.push_back(label.str());
        std::vector<double> buf(static_cast<std::size_t>(samples) * grid);
        CHECK(dk_sample_prior(k, x.data(), grid, 1, samples, seed, buf.data()));
        draws.push_back(std::move(buf));
    }
    comments = config_comments("sample-prior", effective, opts.timestamp);
    for (std::size_t ki = 0; ki < labels.size(); ++ki) {
        comments.push_back("kernel " + std::to_string(ki + 1) + ": " + labels[ki]);
    }

    std::ostringstream body;
    body << "x";
    for (std::size_t ki = 0; ki < draws.size(); ++ki) {
        const std::string prefix =
            draws.size() > 1 ? "k" + std::to_string(ki + 1) + "." : "";
        for (int f = 1; f <= samples; ++f) body << ',' << prefix << 'f' << f;
    }
    body << '\n';
    for (int g = 0; g < grid; ++g) {
        body << fmt(x[static_cast<std::size_t>(g)]);
        for (const auto& buf : draws) {
            for (int f = 0; f < samples; ++f) {
                body << ',' << fmt(buf[static_cast<std::size_t>(f) * grid + g]);
            }
        }
        body << '\n';
    }
    return write_output(opts.out_path, with_comments(comments, body.str()));
}

int run_gen_data(const CommonOpts& opts, const std::string& generator_flag) {
    const json cfg = load_config(opts.config_path);
    const std::string generator =
        !generator_flag.empty() ? generator_flag : cfg.value("generator", "two_scale");
    const std::uint64_t seed = pick_seed(opts, cfg);

    DatasetHandle ds;
    json effective{{"generator", generator}, {"seed", seed}};
    if (generator == "two_scale") {
        const int n = cfg.value("n", 100);
        const double x_lo = cfg.value("x_lo", 0.0), x_hi = cfg.value("x_hi", 10.0);
        const double long_sigma = cfg.value("long_sigma", 1.0);
        const double long_ell = cfg.value("long_ell", 2.0);
        const double short_sigma = cfg.value("short_sigma", 0.3);
        const double short_ell = cfg.value("short_ell", 0.3);
        const double noise_sd = cfg.value("noise_sd", 0.05);
        effective.update(json{{"n", n},
                              {"x_lo", x_lo},
                              {"x_hi", x_hi},
                              {"long_sigma", long_sigma},
                              {"long_ell", long_ell},
                              {"short_sigma", short_sigma},
                              {"short_ell", short_ell},
                              {"noise_sd", noise_sd}});
        CHECK(dk_gen_two_scale(n, x_lo, x_hi, long_sigma, long_ell, short_sigma,
                               short_ell, noise_sd, seed, ds.out()));
    } else if (generator == "pure_noise") {
        const int n = cfg.value("n", 90);
        const double sd = cfg.value("sd", 0.2);
        const double x_lo = cfg.value("x_lo", 0.0), x_hi = cfg.value("x_hi", 1.0);
        effective.update(json{{"n", n}, {"sd", sd}, {"x_lo", x_lo}, {"x_hi", x_hi}});
        CHECK(dk_gen_pure_noise(n, sd, x_lo, x_hi, seed, ds.out()));
    } else if (generator == "from_kernel") {
        std::string ktext;
        if (!opts.kernels.empty()) {
            ktext = kernel_text(opts.kernels.front());
        } else if (cfg.contains("kernel")) {
            ktext = cfg["kernel"].is_string() ? kernel_text(cfg["kernel"].get<std::string>())
                                              : cfg["kernel"].dump();
        } else {
            std::fprintf(stderr, "error: from_kernel needs --kernel or a config kernel\n");
            return 1;
        }
        const int n = cfg.value("n", 150);
        const double noise_sd = cfg.value("noise_sd", 0.1);
        const double x_lo = cfg.value("x_lo", 0.0), x_hi = cfg.value("x_hi", 10.0);
        KernelHandle k;
        CHECK(dk_kernel_parse(ktext.c_str(), k.out()));
        OwnedString kjson;
        CHECK(dk_kernel_to_json(k, -1, &kjson.ptr));
        effective.update(json{{"n", n},
                              {"noise_sd", noise_sd},
                              {"x_lo", x_lo},
                              {"x_hi", x_hi},
                              {"kernel", json::parse(kjson.str())}});
        CHECK(dk_gen_from_kernel(k, n, noise_sd, x_lo, x_hi, seed, ds.out()));
    } else {
        std::fprintf(stderr,
                     "error: unknown generator '%s' (two_scale, pure_noise, from_kernel)\n",
                     generator.c_str());
        return 1;
    }

    const std::vector<std::string> comments =
        config_comments("gen-data", effective, opts.timestamp);
    std::vector<const char*> cptrs;
    for (const std::string& c : comments) cptrs.push_back(c.c_str());
    OwnedString csv;
    CHECK(dk_dataset_to_csv(ds, cptrs.data(), static_cast<int>(cptrs.size()), &csv.ptr));
    return write_output(opts.out_path, csv.str());
}

int run_fit(const CommonOpts& opts, const std::string& data_arg) {
    const json cfg = load_config(opts.config_path);
    const std::string data_path = !data_arg.empty() ? data_arg : cfg.value("data", "");
    if (data_path.empty()) {
        std::fprintf(stderr, "error: fit needs a dataset CSV path\n");
        return 1;
    }
    std::string ktext;
    if (!opts.kernels.empty()) {
        ktext = kernel_text(opts.kernels.front());
    } else if (cfg.contains("kernel")) {
        ktext = cfg["kernel"].is_string() ? kernel_text(cfg["kernel"].get<std::string>())
                                          : cfg["kernel"].dump();
    } else {
        std::fprintf(stderr, "error: fit needs --kernel or a config kernel\n");
        return 1;
    }
    const int restarts = opts.restarts_set ? opts.restarts : cfg.value("restarts", 20);
    const int budget = cfg.value("budget", 1000);
    const std::uint64_t seed = pick_seed(opts, cfg);

    KernelHandle templ;
    CHECK(dk_kernel_parse(ktext.c_str(), templ.out()));
    DatasetHandle ds;
    CHECK(dk_dataset_read_csv(data_path.c_str(), ds.out()));
    FitHandle fit;
    CHECK(dk_fit_run(templ, ds, restarts, seed, budget, fit.out()));
    OwnedString report;
    CHECK(dk_fit_to_json(fit, 2, &report.ptr));
    std::string text = report.str();
    if (!text.empty() && text.back() != '\n') text += '\n';
    return write_output(opts.out_path, text);
}

int run_predict(const CommonOpts& opts, const std::string& report_arg,
                const std::string& data_arg) {
    const json cfg = load_config(opts.config_path);
    const std::string report_path =
        !report_arg.empty() ? report_arg : cfg.value("report", "");
    const std::string data_path = !data_arg.empty() ? data_arg : cfg.value("data", "");
    if (report_path.empty() || data_path.empty()) {
        std::fprintf(stderr, "error: predict needs a fit-report path and a dataset path\n");
        return 1;
    }

    KernelHandle k;
    double noise = 0.0, best_lml = 0.0;
    CHECK(dk_fit_parse(slurp(report_path).c_str(), k.out(), &noise, &best_lml));
    if (!opts.kernels.empty()) {
        // Guard against pairing a report with the wrong kernel spec.
        KernelHandle given;
        CHECK(dk_kernel_parse(kernel_text(opts.kernels.front()).c_str(), given.out()));
        OwnedString a, b;
        CHECK(dk_kernel_to_json(k, -1, &a.ptr));
        CHECK(dk_kernel_to_json(given, -1, &b.ptr));
        if (a.str() != b.str()) {
            std::fprintf(stderr, "error: --kernel does not match the fit report\n");
            return DK_ERR_VALIDATION;
        }
    }

    DatasetHandle ds;
    CHECK(dk_dataset_read_csv(data_path.c_str(), ds.out()));
    GpHandle gp;
    CHECK(dk_gp_create(k, noise, ds, gp.out()));

    const int dims = dk_dataset_dims(ds);
    const bool include_noise = cfg.value("include_noise", true);
    std::vector<double> xs;
    int n_star = 0;
    json effective{{"report", report_path},
                   {"data", data_path},
                   {"include_noise", include_noise},
                   {"noise_variance", noise},
                   {"best_lml", best_lml}};
    if (cfg.contains("test_data")) {
        const std::string test_path = cfg["test_data"].get<std::string>();
        DatasetHandle test;
        CHECK(dk_dataset_read_csv(test_path.c_str(), test.out()));
        if (dk_dataset_dims(test) != dims) {
            std::fprintf(stderr, "error: test data dimension mismatch\n");
            return DK_ERR_VALIDATION;
        }
        n_star = dk_dataset_rows(test);
        xs.resize(static_cast<std::size_t>(n_star) * dims);
        CHECK(dk_dataset_get(test, xs.data(), nullptr));
        effective["test_data"] = test_path;
    } else {
        if (dims != 1) {
            std::fprintf(stderr,
                         "error: grid prediction is 1-D only; give test_data in the config\n");
            return 1;
        }
        // Default grid: the training range padded by one unit each side.
        const int rows = dk_dataset_rows(ds);
        std::vector<double> X(static_cast<std::size_t>(rows));
        CHECK(dk_dataset_get(ds, X.data(), nullptr));
        double lo = X[0], hi = X[0];
        for (double v : X) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        const double x_lo = cfg.value("x_lo", lo - 1.0);
        const double x_hi = cfg.value("x_hi", hi + 1.0);
        const int grid = cfg.value("grid", 201);
        if (grid < 1) {
            std::fprintf(stderr, "error: grid must be positive\n");
            return 1;
        }
        n_star = grid;
        xs.resize(static_cast<std::size_t>(grid));
        for (int i = 0; i < grid; ++i) {
            xs[static_cast<std::size_t>(i)] =
                grid == 1 ? x_lo : x_lo + (x_hi - x_lo) * i / (grid - 1);
        }
        effective.update(json{{"x_lo", x_lo}, {"x_hi", x_hi}, {"grid", grid}});
    }

    std::vector<double> mean(static_cast<std::size_t>(n_star));
    std::vector<double> var(static_cast<std::size_t>(n_star));
    int clamped = 0;
    CHECK(dk_gp_predict(gp, xs.data(), n_star, dims, include_noise ? 1 : 0, mean.data(),
                        var.data(), &clamped));

    std::vector<std::string> comments =
        config_comments("predict", effective, opts.timestamp);
    if (clamped > 0) {
        comments.push_back("warning: " + std::to_string(clamped) +
                           " variance values clamped to zero");
    }
    std::ostringstream body;
    for (int j = 1; j <= dims; ++j) body << 'x' << j << ',';
    body << "mean,var\n";
    for (int i = 0; i < n_star; ++i) {
        for (int j = 0; j < dims; ++j) {
            body << fmt(xs[static_cast<std::size_t>(i) * dims + j]) << ',';
        }
        body << fmt(mean[static_cast<std::size_t>(i)]) << ','
             << fmt(var[static_cast<std::size_t>(i)]) << '\n';
    }
    return write_output(opts.out_path, with_comments(comments, body.str()));
}

int run_chi_sweep(const CommonOpts& opts) {
    json cfg = load_config(opts.config_path);
    if (opts.seed_set) cfg["seed"] = opts.seed;
    if (opts.restarts_set) cfg["restarts"] = opts.restarts;
    if (opts.samples_set) cfg["draws_per_generator"] = opts.samples;
    if (!opts.kernels.empty()) {
        json gens = json::array();
        for (const std::string& arg : opts.kernels) {
            gens.push_back(json::parse(kernel_text(arg)));
        }
        cfg["generators"] = gens;
    }
    OwnedString csv;
    CHECK(dk_chi_sweep(cfg.dump().c_str(), &csv.ptr));
    const std::vector<std::string> comments =
        config_comments("chi-sweep", cfg, opts.timestamp);
    return write_output(opts.out_path, with_comments(comments, csv.str()));
}

int run_moments(const CommonOpts& opts) {
    const json cfg = load_config(opts.config_path);
    if (opts.kernels.empty()) {
        std::fprintf(stderr, "error: moments needs --kernel\n");
        return 1;
    }
    const std::int64_t n_samples = opts.samples_set
                                       ? opts.samples
                                       : cfg.value("samples", static_cast<std::int64_t>(200000));
    const std::uint64_t seed = pick_seed(opts, cfg);
    const double corrupt_delta = cfg.value("corrupt_delta", 0.0);

    std::vector<double> x;
    if (cfg.contains("x")) {
        for (const auto& v : cfg["x"]) x.push_back(v.get<double>());
    } else {
        const int n_x = cfg.value("n_x", 4);
        const double x_lo = cfg.value("x_lo", 0.0), x_hi = cfg.value("x_hi", 2.0);
        for (int i = 0; i < n_x; ++i) {
            x.push_back(n_x == 1 ? x_lo : x_lo + (x_hi - x_lo) * i / (n_x - 1));
        }
    }
    if (x.empty()) {
        std::fprintf(stderr, "error: moments needs a nonempty probe set\n");
        return 1;
    }

    KernelHandle k;
    CHECK(dk_kernel_parse(kernel_text(opts.kernels.front()).c_str(), k.out()));
    OwnedString kjson;
    CHECK(dk_kernel_to_json(k, -1, &kjson.ptr));
    json effective{{"kernel", json::parse(kjson.str())},
                   {"samples", n_samples},
                   {"seed", seed},
                   {"x", x}};
    if (corrupt_delta != 0.0) effective["corrupt_delta"] = corrupt_delta;

    OwnedString csv;
    int all_ok = 0;
    CHECK(dk_moments_report(k, x.data(), static_cast<int>(x.size()), 1, n_samples, seed,
                            corrupt_delta, &csv.ptr, &all_ok));
    const std::vector<std::string> comments =
        config_comments("moments", effective, opts.timestamp);
    const int rc = write_output(opts.out_path, with_comments(comments, csv.str()));
    if (rc != 0) return rc;
    if (!all_ok) {
        std::fprintf(stderr, "error: moment checks failed (see report)\n");
        return DK_ERR_VALIDATION;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deep kernel toolkit: effective kernels, GP regression, moment checks"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string generator_flag;
    std::string data_arg, report_arg;
    int rc = 0;

    // One seed option per subcommand; each callback records whether its own
    // flag was given before running.
    auto add_common = [&](CLI::App* cmd) -> CLI::Option* {
        cmd->add_option("--config", opts.config_path, "JSON config file");
        cmd->add_option("--out", opts.out_path, "output path (default stdout)");
        cmd->add_flag("--timestamp", opts.timestamp,
                      "add a generation-time comment (breaks byte determinism)");
        cmd->add_option("--kernel", opts.kernels,
                        "kernel spec, inline JSON or a file path (repeatable)");
        return cmd->add_option("--seed", opts.seed, "RNG seed");
    };

    CLI::App* sample = app.add_subcommand(
        "sample-prior", "draw prior functions on a grid (config: x_lo, x_hi, grid)");
    CLI::Option* sample_seed = add_common(sample);
    auto* sample_samples =
        sample->add_option("--samples", opts.samples, "functions per kernel");

    CLI::App* gen = app.add_subcommand(
        "gen-data", "synthesize a dataset (two_scale, pure_noise, from_kernel)");
    CLI::Option* gen_seed = add_common(gen);
    gen->add_option("--generator", generator_flag, "generator name");

    CLI::App* fit = app.add_subcommand(
        "fit", "maximize marginal likelihood over hyperparameters (config: budget)");
    CLI::Option* fit_seed = add_common(fit);
    fit->add_option("data", data_arg, "dataset CSV path");
    auto* fit_restarts = fit->add_option("--restarts", opts.restarts, "random restarts");

    CLI::App* predict = app.add_subcommand(
        "predict", "posterior mean/variance from a fit report (config: grid, test_data)");
    add_common(predict);
    predict->add_option("report", report_arg, "fit report JSON path");
    predict->add_option("data", data_arg, "training dataset CSV path");

    CLI::App* sweep = app.add_subcommand(
        "chi-sweep", "fit the three-layer recursion to generated data, record LML vs chi");
    CLI::Option* sweep_seed = add_common(sweep);
    auto* sweep_restarts = sweep->add_option("--restarts", opts.restarts, "random restarts");
    auto* sweep_samples =
        sweep->add_option("--samples", opts.samples, "datasets per generator");

    CLI::App* moments = app.add_subcommand(
        "moments", "fourth-moment report vs the sampling oracle (config: x, corrupt_delta)");
    CLI::Option* moments_seed = add_common(moments);
    auto* moments_samples =
        moments->add_option("--samples", opts.samples, "Monte-Carlo replicates");

    sample->callback([&] {
        opts.seed_set = sample_seed->count() > 0;
        opts.samples_set = sample_samples->count() > 0;
        rc = run_sample_prior(opts);
    });
    gen->callback([&] {
        opts.seed_set = gen_seed->count() > 0;
        rc = run_gen_data(opts, generator_flag);
    });
    fit->callback([&] {
        opts.seed_set = fit_seed->count() > 0;
        opts.restarts_set = fit_restarts->count() > 0;
        rc = run_fit(opts, data_arg);
    });
    predict->callback([&] { rc = run_predict(opts, report_arg, data_arg); });
    sweep->callback([&] {
        opts.seed_set = sweep_seed->count() > 0;
        opts.restarts_set = sweep_restarts->count() > 0;
        opts.samples_set = sweep_samples->count() > 0;
        rc = run_chi_sweep(opts);
    });
    moments->callback([&] {
        opts.seed_set = moments_seed->count() > 0;
        opts.samples_set = moments_samples->count() > 0;
        rc = run_moments(opts);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return rc;
}
