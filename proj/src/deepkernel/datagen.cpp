#include "deepkernel/datagen.hpp"

#include <algorithm>
#include <vector>

#include "deepkernel/errors.hpp"
#include "deepkernel/rng.hpp"

namespace dk {
namespace {

// Stream ids within one generator seed. Inputs, each latent draw and the
// observation noise come from disjoint streams so adding a component never
// shifts the others.
enum : std::uint64_t { kStreamX = 0, kStreamF1 = 1, kStreamF2 = 2, kStreamNoise = 3 };

Eigen::MatrixXd sorted_uniform_inputs(int n, double lo, double hi, std::uint64_t seed) {
    RandomStream rs(seed, kStreamX);
    std::vector<double> xs(static_cast<std::size_t>(n));
    for (double& x : xs) x = rs.uniform(lo, hi);
    std::sort(xs.begin(), xs.end());
    Eigen::MatrixXd X(n, 1);
    for (int i = 0; i < n; ++i) X(i, 0) = xs[static_cast<std::size_t>(i)];
    return X;
}

Eigen::VectorXd prior_draw(const KernelSpec& spec, const Eigen::MatrixXd& X,
                           std::uint64_t seed, std::uint64_t stream) {
    GramResult g = gram(spec, X);
    RandomStream rs(seed, stream);
    Eigen::VectorXd z(X.rows());
    rs.fill_normal(z.data(), z.size());
    return g.chol.triangularView<Eigen::Lower>() * z;
}

void add_noise(Eigen::VectorXd& y, double sd, std::uint64_t seed) {
    if (sd == 0.0) return;
    RandomStream rs(seed, kStreamNoise);
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += sd * rs.normal();
}

void check_range(int n, double lo, double hi, double noise_sd) {
    if (n <= 0) throw invalid_argument_error("dataset size must be positive");
    if (!(hi > lo)) throw invalid_argument_error("input range must satisfy x_hi > x_lo");
    if (noise_sd < 0.0) throw invalid_argument_error("noise sd must be nonnegative");
}

}  // namespace

Dataset gen_two_scale(const TwoScaleParams& params, std::uint64_t seed) {
    check_range(params.n, params.x_lo, params.x_hi, params.noise_sd);
    if (params.long_sigma <= 0.0 || params.long_ell <= 0.0)
        throw invalid_argument_error("long component needs positive sigma and ell");
    if (params.short_sigma < 0.0 || params.short_ell <= 0.0)
        throw invalid_argument_error("short component needs sigma >= 0 and ell > 0");

    Dataset data;
    data.X = sorted_uniform_inputs(params.n, params.x_lo, params.x_hi, seed);
    data.y = prior_draw(*KernelSpec::leaf(BaseKernel::se(params.long_sigma, params.long_ell)),
                        data.X, seed, kStreamF1);
    if (params.short_sigma > 0.0) {
        data.y += prior_draw(
            *KernelSpec::leaf(BaseKernel::se(params.short_sigma, params.short_ell)),
            data.X, seed, kStreamF2);
    }
    add_noise(data.y, params.noise_sd, seed);
    data.names = {"x1", "y"};
    return data;
}

Dataset gen_pure_noise(int n, double sd, std::uint64_t seed, double x_lo, double x_hi) {
    check_range(n, x_lo, x_hi, sd);

    Dataset data;
    data.X.resize(n, 1);
    if (n == 1) {
        data.X(0, 0) = 0.5 * (x_lo + x_hi);
    } else {
        const double step = (x_hi - x_lo) / (n - 1);
        for (int i = 0; i < n; ++i) data.X(i, 0) = x_lo + step * i;
    }
    data.y = Eigen::VectorXd::Zero(n);
    add_noise(data.y, sd, seed);
    data.names = {"x1", "y"};
    return data;
}

Dataset gen_from_kernel(const KernelSpec& spec, int n, double noise_sd,
                        std::uint64_t seed, double x_lo, double x_hi) {
    check_range(n, x_lo, x_hi, noise_sd);
    validate(spec);

    Dataset data;
    data.X = sorted_uniform_inputs(n, x_lo, x_hi, seed);
    data.y = prior_draw(spec, data.X, seed, kStreamF1);
    add_noise(data.y, noise_sd, seed);
    data.names = {"x1", "y"};
    return data;
}

}  // namespace dk
