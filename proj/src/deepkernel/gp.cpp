#include "deepkernel/gp.hpp"

#include <cmath>

#include <Eigen/Cholesky>

#include "deepkernel/errors.hpp"
#include "deepkernel/rng.hpp"

namespace dk {

void validate(const Dataset& data) {
    if (data.X.rows() < 1) {
        throw validation_error("dataset must contain at least one row");
    }
    if (data.y.size() != data.X.rows()) {
        throw validation_error("dataset target length does not match input rows");
    }
    if (!data.X.allFinite() || !data.y.allFinite()) {
        throw validation_error("dataset contains non-finite entries");
    }
}

CholResult chol_with_jitter(const Eigen::MatrixXd& K, double extra_diag) {
    if (K.rows() != K.cols() || K.rows() == 0) {
        throw invalid_argument_error("Cholesky requires a nonempty square matrix");
    }
    const double mean_diag = K.diagonal().mean();
    const Eigen::MatrixXd base =
        K + extra_diag * Eigen::MatrixXd::Identity(K.rows(), K.cols());
    for (double rung : jitter_ladder()) {
        const double jitter = rung * mean_diag;
        Eigen::LLT<Eigen::MatrixXd> llt(
            base + jitter * Eigen::MatrixXd::Identity(K.rows(), K.cols()));
        if (llt.info() == Eigen::Success) {
            return {Eigen::MatrixXd(llt.matrixL()), jitter};
        }
    }
    throw numerical_error("Cholesky failed at maximum jitter (matrix not PSD)");
}

GramResult gram(const KernelSpec& spec, const Eigen::MatrixXd& X, double extra_diag) {
    validate(spec);
    const Eigen::Index n = X.rows();
    if (n < 1) throw invalid_argument_error("gram requires a nonempty point set");
    Eigen::MatrixXd K(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        K(i, i) = eval_effective_diag(spec, X.row(i).transpose());
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double v = eval_effective(spec, X.row(i).transpose(), X.row(j).transpose());
            K(i, j) = v;
            K(j, i) = v;
        }
    }
    CholResult c;
    try {
        c = chol_with_jitter(K, extra_diag);
    } catch (const numerical_error&) {
        throw numerical_error("gram matrix for spec " + describe(spec) +
                              " is not PSD at maximum jitter");
    }
    return {std::move(K), c.jitter_added, std::move(c.L)};
}

Eigen::MatrixXd sample_prior(const KernelSpec& spec, const Eigen::MatrixXd& X,
                             int n_functions, std::uint64_t seed) {
    if (n_functions < 1) {
        throw invalid_argument_error("sample_prior requires n_functions >= 1");
    }
    const GramResult g = gram(spec, X);
    const Eigen::Index n = X.rows();
    Eigen::MatrixXd out(n_functions, n);
    Eigen::VectorXd z(n);
    for (int f = 0; f < n_functions; ++f) {
        RandomStream stream(seed, static_cast<std::uint64_t>(f));
        stream.fill_normal(z.data(), static_cast<std::size_t>(n));
        out.row(f) = (g.chol * z).transpose();
    }
    return out;
}

void validate(const GPModel& model) {
    if (!model.spec) throw invalid_argument_error("GP model has no kernel spec");
    validate(*model.spec);
    validate(model.data);
    if (!(model.noise_variance > 0.0) || !std::isfinite(model.noise_variance)) {
        throw validation_error("noise variance must be a positive finite real");
    }
}

double log_marginal_likelihood(const GPModel& model) {
    validate(model);
    const GramResult g = gram(*model.spec, model.data.X, model.noise_variance);
    const Eigen::Index n = model.data.y.size();
    const Eigen::VectorXd alpha =
        g.chol.triangularView<Eigen::Lower>().solve(model.data.y);
    const double quad = alpha.squaredNorm();
    const double logdet = 2.0 * g.chol.diagonal().array().log().sum();
    constexpr double kLog2Pi = 1.8378770664093454835606594728112;
    return -0.5 * quad - 0.5 * logdet - 0.5 * static_cast<double>(n) * kLog2Pi;
}

PredictResult posterior_predict(const GPModel& model, const Eigen::MatrixXd& X_star,
                                bool include_noise) {
    validate(model);
    if (X_star.cols() != model.data.X.cols()) {
        throw invalid_argument_error("prediction inputs have wrong dimension");
    }
    if (X_star.rows() < 1) {
        throw invalid_argument_error("prediction requires at least one input");
    }
    const GramResult g = gram(*model.spec, model.data.X, model.noise_variance);
    const Eigen::Index n = model.data.X.rows();
    const Eigen::Index m = X_star.rows();

    Eigen::MatrixXd Kxs(n, m);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            Kxs(i, j) = eval_effective(*model.spec, model.data.X.row(i).transpose(),
                                       X_star.row(j).transpose());
        }
    }

    const Eigen::VectorXd w =
        g.chol.triangularView<Eigen::Lower>().solve(model.data.y);
    const Eigen::VectorXd alpha =
        g.chol.transpose().triangularView<Eigen::Upper>().solve(w);

    PredictResult out;
    out.mean = Kxs.transpose() * alpha;
    const Eigen::MatrixXd V = g.chol.triangularView<Eigen::Lower>().solve(Kxs);

    out.var.resize(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        double v = eval_effective_diag(*model.spec, X_star.row(j).transpose()) -
                   V.col(j).squaredNorm();
        if (v < -1e-10) ++out.clamped_below_tolerance;
        if (v < 0.0) v = 0.0;
        if (include_noise) v += model.noise_variance;
        out.var[j] = v;
    }
    return out;
}

}  // namespace dk
