#include "deepkernel/capi.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <sstream>
#include <string>

#include <json.hpp>

#include "deepkernel/csv.hpp"
#include "deepkernel/datagen.hpp"
#include "deepkernel/errors.hpp"
#include "deepkernel/gp.hpp"
#include "deepkernel/moments.hpp"
#include "deepkernel/optimize.hpp"
#include "deepkernel/sweep.hpp"

struct dk_kernel {
    dk::SpecPtr spec;
};
struct dk_dataset {
    dk::Dataset data;
};
struct dk_gp {
    dk::GPModel model;
};
struct dk_fit {
    dk::FitReport report;
};

namespace {

thread_local std::string t_last_error;

char* dup_string(const std::string& s) {
    char* p = static_cast<char*>(std::malloc(s.size() + 1));
    if (!p) throw std::bad_alloc();
    std::memcpy(p, s.c_str(), s.size() + 1);
    return p;
}

// Runs the body and translates exceptions into status codes; the message is
// stashed for dk_last_error. Out-parameters are only written on success
// because every body assigns them as its final step.
template <typename Fn>
dk_status guarded(Fn&& fn) noexcept {
    try {
        fn();
        return DK_OK;
    } catch (const dk::invalid_argument_error& e) {
        t_last_error = e.what();
        return DK_ERR_INVALID_ARGUMENT;
    } catch (const dk::numerical_error& e) {
        t_last_error = e.what();
        return DK_ERR_NUMERICAL;
    } catch (const dk::validation_error& e) {
        t_last_error = e.what();
        return DK_ERR_VALIDATION;
    } catch (const nlohmann::json::exception& e) {
        t_last_error = e.what();
        return DK_ERR_VALIDATION;
    } catch (const std::invalid_argument& e) {
        t_last_error = e.what();
        return DK_ERR_INVALID_ARGUMENT;
    } catch (const std::exception& e) {
        t_last_error = e.what();
        return DK_ERR_NUMERICAL;
    }
}

void need(bool cond, const char* msg) {
    if (!cond) throw dk::invalid_argument_error(msg);
}

Eigen::MatrixXd to_matrix(const double* X, int n, int d, const char* what) {
    need(X != nullptr, "input matrix pointer is null");
    need(n > 0 && d > 0, what);
    Eigen::MatrixXd M(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) M(i, j) = X[static_cast<std::size_t>(i) * d + j];
    return M;
}

std::vector<std::string> to_comments(const char* const* comments, int n_comments) {
    need(n_comments >= 0, "comment count must be nonnegative");
    need(n_comments == 0 || comments != nullptr, "comment array pointer is null");
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(n_comments));
    for (int i = 0; i < n_comments; ++i) {
        need(comments[i] != nullptr, "comment entry is null");
        out.emplace_back(comments[i]);
    }
    return out;
}

}  // namespace

extern "C" {

const char* dk_version(void) { return "0.1.0"; }

const char* dk_last_error(void) { return t_last_error.c_str(); }

void dk_string_free(char* s) { std::free(s); }

/* ---- kernel specs ---- */

dk_status dk_kernel_parse(const char* json_text, dk_kernel** out) {
    return guarded([&] {
        need(json_text != nullptr, "kernel JSON pointer is null");
        need(out != nullptr, "output pointer is null");
        dk::SpecPtr spec = dk::spec_from_json(json_text);
        *out = new dk_kernel{std::move(spec)};
    });
}

dk_status dk_kernel_to_json(const dk_kernel* k, int indent, char** out) {
    return guarded([&] {
        need(k != nullptr && out != nullptr, "null pointer argument");
        *out = dup_string(dk::to_json(*k->spec, indent));
    });
}

dk_status dk_kernel_describe(const dk_kernel* k, char** out) {
    return guarded([&] {
        need(k != nullptr && out != nullptr, "null pointer argument");
        *out = dup_string(dk::describe(*k->spec));
    });
}

dk_status dk_kernel_eval(const dk_kernel* k, const double* x, const double* y, int dim,
                         double* out) {
    return guarded([&] {
        need(k != nullptr && x != nullptr && y != nullptr && out != nullptr,
             "null pointer argument");
        need(dim > 0, "dim must be positive");
        Eigen::Map<const Eigen::VectorXd> xv(x, dim), yv(y, dim);
        *out = dk::eval_effective(*k->spec, xv, yv);
    });
}

dk_status dk_kernel_eval_diag(const dk_kernel* k, const double* x, int dim, double* out) {
    return guarded([&] {
        need(k != nullptr && x != nullptr && out != nullptr, "null pointer argument");
        need(dim > 0, "dim must be positive");
        Eigen::Map<const Eigen::VectorXd> xv(x, dim);
        *out = dk::eval_effective_diag(*k->spec, xv);
    });
}

dk_status dk_kernel_chi(const dk_kernel* k, double* out) {
    return guarded([&] {
        need(k != nullptr && out != nullptr, "null pointer argument");
        *out = dk::chi(*k->spec);
    });
}

dk_status dk_kernel_expected_sq_derivative(const dk_kernel* k, const double* at, int dim,
                                           double* out) {
    return guarded([&] {
        need(k != nullptr && at != nullptr && out != nullptr, "null pointer argument");
        need(dim > 0, "dim must be positive");
        Eigen::Map<const Eigen::VectorXd> atv(at, dim);
        *out = dk::expected_sq_derivative(*k->spec, atv);
    });
}

void dk_kernel_free(dk_kernel* k) { delete k; }

/* ---- datasets ---- */

dk_status dk_dataset_create(const double* X, const double* y, int n, int d,
                            dk_dataset** out) {
    return guarded([&] {
        need(y != nullptr && out != nullptr, "null pointer argument");
        dk::Dataset data;
        data.X = to_matrix(X, n, d, "dataset shape must be positive");
        data.y = Eigen::Map<const Eigen::VectorXd>(y, n);
        dk::validate(data);
        *out = new dk_dataset{std::move(data)};
    });
}

dk_status dk_dataset_read_csv(const char* path, dk_dataset** out) {
    return guarded([&] {
        need(path != nullptr && out != nullptr, "null pointer argument");
        *out = new dk_dataset{dk::read_dataset_csv_file(path)};
    });
}

dk_status dk_dataset_to_csv(const dk_dataset* ds, const char* const* comments,
                            int n_comments, char** out) {
    return guarded([&] {
        need(ds != nullptr && out != nullptr, "null pointer argument");
        std::ostringstream ss;
        dk::write_dataset_csv(ds->data, ss, to_comments(comments, n_comments));
        *out = dup_string(ss.str());
    });
}

dk_status dk_dataset_write_csv(const dk_dataset* ds, const char* path,
                               const char* const* comments, int n_comments) {
    return guarded([&] {
        need(ds != nullptr && path != nullptr, "null pointer argument");
        dk::write_dataset_csv_file(ds->data, path, to_comments(comments, n_comments));
    });
}

int dk_dataset_rows(const dk_dataset* ds) {
    return ds ? static_cast<int>(ds->data.X.rows()) : 0;
}

int dk_dataset_dims(const dk_dataset* ds) {
    return ds ? static_cast<int>(ds->data.X.cols()) : 0;
}

dk_status dk_dataset_get(const dk_dataset* ds, double* X_out, double* y_out) {
    return guarded([&] {
        need(ds != nullptr, "null pointer argument");
        const Eigen::MatrixXd& X = ds->data.X;
        if (X_out) {
            for (Eigen::Index i = 0; i < X.rows(); ++i)
                for (Eigen::Index j = 0; j < X.cols(); ++j)
                    X_out[static_cast<std::size_t>(i) * X.cols() + j] = X(i, j);
        }
        if (y_out) Eigen::Map<Eigen::VectorXd>(y_out, ds->data.y.size()) = ds->data.y;
    });
}

void dk_dataset_free(dk_dataset* ds) { delete ds; }

/* ---- synthetic data generators ---- */

dk_status dk_gen_two_scale(int n, double x_lo, double x_hi, double long_sigma,
                           double long_ell, double short_sigma, double short_ell,
                           double noise_sd, uint64_t seed, dk_dataset** out) {
    return guarded([&] {
        need(out != nullptr, "output pointer is null");
        dk::TwoScaleParams params;
        params.n = n;
        params.x_lo = x_lo;
        params.x_hi = x_hi;
        params.long_sigma = long_sigma;
        params.long_ell = long_ell;
        params.short_sigma = short_sigma;
        params.short_ell = short_ell;
        params.noise_sd = noise_sd;
        *out = new dk_dataset{dk::gen_two_scale(params, seed)};
    });
}

dk_status dk_gen_pure_noise(int n, double sd, double x_lo, double x_hi, uint64_t seed,
                            dk_dataset** out) {
    return guarded([&] {
        need(out != nullptr, "output pointer is null");
        *out = new dk_dataset{dk::gen_pure_noise(n, sd, seed, x_lo, x_hi)};
    });
}

dk_status dk_gen_from_kernel(const dk_kernel* k, int n, double noise_sd, double x_lo,
                             double x_hi, uint64_t seed, dk_dataset** out) {
    return guarded([&] {
        need(k != nullptr && out != nullptr, "null pointer argument");
        *out = new dk_dataset{dk::gen_from_kernel(*k->spec, n, noise_sd, seed, x_lo, x_hi)};
    });
}

/* ---- GP prior and posterior ---- */

dk_status dk_sample_prior(const dk_kernel* k, const double* X, int n, int d,
                          int n_functions, uint64_t seed, double* out) {
    return guarded([&] {
        need(k != nullptr && out != nullptr, "null pointer argument");
        need(n_functions > 0, "n_functions must be positive");
        const Eigen::MatrixXd Xm = to_matrix(X, n, d, "grid shape must be positive");
        const Eigen::MatrixXd F = dk::sample_prior(*k->spec, Xm, n_functions, seed);
        for (Eigen::Index i = 0; i < F.rows(); ++i)
            for (Eigen::Index j = 0; j < F.cols(); ++j)
                out[static_cast<std::size_t>(i) * F.cols() + j] = F(i, j);
    });
}

dk_status dk_gp_create(const dk_kernel* k, double noise_variance, const dk_dataset* ds,
                       dk_gp** out) {
    return guarded([&] {
        need(k != nullptr && ds != nullptr && out != nullptr, "null pointer argument");
        dk::GPModel model{k->spec, noise_variance, ds->data};
        dk::validate(model);
        *out = new dk_gp{std::move(model)};
    });
}

dk_status dk_gp_lml(const dk_gp* gp, double* out) {
    return guarded([&] {
        need(gp != nullptr && out != nullptr, "null pointer argument");
        *out = dk::log_marginal_likelihood(gp->model);
    });
}

dk_status dk_gp_predict(const dk_gp* gp, const double* X_star, int n_star, int d,
                        int include_noise, double* mean_out, double* var_out,
                        int* clamped_out) {
    return guarded([&] {
        need(gp != nullptr && mean_out != nullptr && var_out != nullptr,
             "null pointer argument");
        const Eigen::MatrixXd Xs = to_matrix(X_star, n_star, d,
                                             "prediction grid shape must be positive");
        const dk::PredictResult res =
            dk::posterior_predict(gp->model, Xs, include_noise != 0);
        Eigen::Map<Eigen::VectorXd>(mean_out, n_star) = res.mean;
        Eigen::Map<Eigen::VectorXd>(var_out, n_star) = res.var;
        if (clamped_out) *clamped_out = res.clamped_below_tolerance;
    });
}

void dk_gp_free(dk_gp* gp) { delete gp; }

/* ---- hyperparameter fitting ---- */

dk_status dk_fit_run(const dk_kernel* templ, const dk_dataset* ds, int restarts,
                     uint64_t seed, int budget, dk_fit** out) {
    return guarded([&] {
        need(templ != nullptr && ds != nullptr && out != nullptr, "null pointer argument");
        *out = new dk_fit{dk::optimize(*templ->spec, ds->data, restarts, seed, budget)};
    });
}

dk_status dk_fit_to_json(const dk_fit* f, int indent, char** out) {
    return guarded([&] {
        need(f != nullptr && out != nullptr, "null pointer argument");
        *out = dup_string(dk::fit_report_json(f->report, indent));
    });
}

dk_status dk_fit_best_lml(const dk_fit* f, double* out) {
    return guarded([&] {
        need(f != nullptr && out != nullptr, "null pointer argument");
        *out = f->report.best_lml;
    });
}

dk_status dk_fit_best_noise(const dk_fit* f, double* out) {
    return guarded([&] {
        need(f != nullptr && out != nullptr, "null pointer argument");
        *out = f->report.best_noise;
    });
}

dk_status dk_fit_best_kernel(const dk_fit* f, dk_kernel** out) {
    return guarded([&] {
        need(f != nullptr && out != nullptr, "null pointer argument");
        *out = new dk_kernel{f->report.best_spec};
    });
}

dk_status dk_fit_parse(const char* json_text, dk_kernel** kernel_out, double* noise_out,
                       double* lml_out) {
    return guarded([&] {
        need(json_text != nullptr, "fit report JSON pointer is null");
        dk::LoadedFit lf = dk::fit_report_parse(json_text);
        if (kernel_out) *kernel_out = new dk_kernel{std::move(lf.spec)};
        if (noise_out) *noise_out = lf.noise_variance;
        if (lml_out) *lml_out = lf.best_lml;
    });
}

void dk_fit_free(dk_fit* f) { delete f; }

/* ---- verification reports ---- */

dk_status dk_moments_report(const dk_kernel* k, const double* X, int n, int d,
                            int64_t n_samples, uint64_t seed, double corrupt_delta,
                            char** csv_out, int* all_ok_out) {
    return guarded([&] {
        need(k != nullptr && csv_out != nullptr, "null pointer argument");
        const Eigen::MatrixXd Xm = to_matrix(X, n, d, "input shape must be positive");
        const dk::HeavyTailReport report =
            dk::heavy_tail_report(*k->spec, Xm, n_samples, seed, corrupt_delta);
        *csv_out = dup_string(report.to_csv());
        if (all_ok_out) *all_ok_out = report.all_ok ? 1 : 0;
    });
}

dk_status dk_sign_flip_check(const dk_kernel* k, const double* X, int n, int d,
                             int trials, uint64_t seed, double inner_mean, int* ok_out) {
    return guarded([&] {
        need(k != nullptr && ok_out != nullptr, "null pointer argument");
        const Eigen::MatrixXd Xm = to_matrix(X, n, d, "input shape must be positive");
        *ok_out = dk::sign_flip_symmetry_check(*k->spec, Xm, trials, seed, inner_mean)
                      ? 1
                      : 0;
    });
}

dk_status dk_chi_sweep(const char* config_json, char** csv_out) {
    return guarded([&] {
        need(config_json != nullptr && csv_out != nullptr, "null pointer argument");
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(config_json);
        } catch (const nlohmann::json::parse_error& e) {
            throw dk::validation_error(std::string("sweep config parse error: ") +
                                       e.what());
        }
        if (!j.is_object()) throw dk::validation_error("sweep config must be an object");
        dk::ChiSweepConfig config;
        if (j.contains("generators")) {
            if (!j["generators"].is_array())
                throw dk::validation_error("sweep config 'generators' must be an array");
            for (const auto& g : j["generators"]) {
                config.generators.push_back(dk::spec_from_json(g.dump()));
            }
        }
        config.n_points = j.value("n_points", config.n_points);
        config.draws_per_generator =
            j.value("draws_per_generator", config.draws_per_generator);
        config.restarts = j.value("restarts", config.restarts);
        config.budget = j.value("budget", config.budget);
        config.noise_sd = j.value("noise_sd", config.noise_sd);
        config.x_lo = j.value("x_lo", config.x_lo);
        config.x_hi = j.value("x_hi", config.x_hi);
        config.seed = j.value("seed", config.seed);
        const std::vector<dk::ChiSweepRow> rows = dk::chi_sweep(config);
        *csv_out = dup_string(dk::to_csv(dk::chi_sweep_table(rows)));
    });
}

} /* extern "C" */
