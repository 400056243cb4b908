#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "deepkernel/compose.hpp"

namespace dk {

struct Dataset {
    Eigen::MatrixXd X;  // N x D inputs
    Eigen::VectorXd y;  // N targets
    std::vector<std::string> names;  // column names, x1..xD then y
};

void validate(const Dataset& data);

// Cholesky with a fixed jitter ladder. Factorization is attempted with
// diagonal inflation 0, then 1e-10, 1e-8, 1e-6 times the mean diagonal;
// the inflation actually used is recorded so runs are auditable. Throws
// numerical_error if the last rung still fails.
struct CholResult {
    Eigen::MatrixXd L;   // lower triangular
    double jitter_added; // absolute value added to the diagonal
};
CholResult chol_with_jitter(const Eigen::MatrixXd& K, double extra_diag = 0.0);

inline const std::vector<double>& jitter_ladder() {
    static const std::vector<double> ladder = {0.0, 1e-10, 1e-8, 1e-6};
    return ladder;
}

struct GramResult {
    Eigen::MatrixXd K;    // raw kernel matrix, no noise or jitter
    double jitter_added;
    Eigen::MatrixXd chol; // lower factor of K + (extra_diag + jitter) I
};

// K[i][j] = k_eff(x_i, x_j); the upper triangle is computed and mirrored.
// extra_diag typically carries the observation-noise variance.
GramResult gram(const KernelSpec& spec, const Eigen::MatrixXd& X, double extra_diag = 0.0);

// n_functions rows, each chol(K) z with z standard normal. The z draws
// depend only on (seed, row index), never on spec, so two kernels sampled
// with the same seed share the same underlying noise vectors.
Eigen::MatrixXd sample_prior(const KernelSpec& spec, const Eigen::MatrixXd& X,
                             int n_functions, std::uint64_t seed);

struct GPModel {
    SpecPtr spec;
    double noise_variance = 1e-4;
    Dataset data;
};

void validate(const GPModel& model);

// Exact GP log marginal likelihood through the Cholesky factor:
//   -1/2 y^T (K + s_n^2 I)^{-1} y - 1/2 log|K + s_n^2 I| - N/2 log(2 pi)
double log_marginal_likelihood(const GPModel& model);

struct PredictResult {
    Eigen::VectorXd mean;
    Eigen::VectorXd var;
    int clamped_below_tolerance = 0;  // entries below -1e-10 before clamping
};

// Standard exact predictive equations. Variance is the latent variance plus
// the observation noise when include_noise is set; tiny negative values from
// roundoff are clamped to zero, counting those below -1e-10 so callers can
// surface a warning.
PredictResult posterior_predict(const GPModel& model, const Eigen::MatrixXd& X_star,
                                bool include_noise = true);

}  // namespace dk
