#include "deepkernel/moments.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "deepkernel/csv.hpp"
#include "deepkernel/errors.hpp"
#include "deepkernel/gp.hpp"
#include "deepkernel/rng.hpp"

namespace dk {

void validate(const MvnSpec& mvn) {
    if (mvn.cov.rows() != mvn.cov.cols() || mvn.cov.rows() == 0) {
        throw validation_error("MvnSpec covariance must be square and nonempty");
    }
    if (mvn.mean.size() != mvn.cov.rows()) {
        throw validation_error("MvnSpec mean length does not match covariance");
    }
    if (!mvn.cov.isApprox(mvn.cov.transpose(), 1e-12)) {
        throw validation_error("MvnSpec covariance is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(mvn.cov, Eigen::EigenvaluesOnly);
    const double scale = std::max(1.0, mvn.cov.diagonal().cwiseAbs().maxCoeff());
    if (es.eigenvalues().minCoeff() < -1e-10 * scale) {
        throw validation_error("MvnSpec covariance is not positive semidefinite");
    }
}

double gauss_quadratic_expectation(const MvnSpec& mvn, const Eigen::MatrixXd& J) {
    validate(mvn);
    const Eigen::Index n = mvn.cov.rows();
    if (J.rows() != n || J.cols() != n) {
        throw invalid_argument_error("quadratic form J has wrong dimensions");
    }
    // The quadratic form only sees the symmetric part of J.
    const Eigen::MatrixXd Js = 0.5 * (J + J.transpose());

    // Convergence needs I + S^T J S > 0 with K = S S^T. The sign of
    // |I + KJ| alone cannot tell: an even count of negative eigenvalues
    // leaves the determinant positive while the integral diverges.
    // Sylvester's identity |I + S S^T J| = |I + S^T J S| lets the symmetric
    // form supply both the check and the determinant.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ek(mvn.cov);
    const Eigen::VectorXd evals = ek.eigenvalues().cwiseMax(0.0);
    const Eigen::MatrixXd S = ek.eigenvectors() * evals.cwiseSqrt().asDiagonal();
    const Eigen::MatrixXd Msym =
        Eigen::MatrixXd::Identity(n, n) + S.transpose() * Js * S;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(Msym);
    if (!(em.eigenvalues().minCoeff() > 0.0)) {
        throw numerical_error(
            "gauss_quadratic_expectation: I + K^{1/2} J K^{1/2} is not positive "
            "definite, the integral diverges");
    }
    const double det = em.eigenvalues().prod();

    // A = K^{-1}[I - (I+KJ)^{-1}] collapses to J (I+KJ)^{-1}, so no K inverse
    // is ever formed.
    const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n) + mvn.cov * Js;
    const Eigen::VectorXd Av = Js * M.partialPivLu().solve(mvn.mean);
    return std::exp(-0.5 * mvn.mean.dot(Av)) / std::sqrt(det);
}

double gauss_linear_expectation(const MvnSpec& mvn, const Eigen::VectorXd& u) {
    validate(mvn);
    if (u.size() != mvn.cov.rows()) {
        throw invalid_argument_error("linear form u has wrong dimension");
    }
    return std::exp(u.dot(mvn.mean) + 0.5 * u.dot(mvn.cov * u));
}

double sc_pair_expectation(const MvnSpec& mvn, double ell) {
    validate(mvn);
    if (mvn.cov.rows() != 2) {
        throw invalid_argument_error("sc_pair_expectation expects a 2-D MvnSpec");
    }
    if (!(ell > 0.0)) throw validation_error("sc_pair_expectation requires ell > 0");
    const double kii = mvn.cov(0, 0), kjj = mvn.cov(1, 1), kij = mvn.cov(0, 1);
    const double phase = (mvn.mean[0] - mvn.mean[1]) / ell;
    return std::cos(phase) * std::exp((2.0 * kij - kii - kjj) / (2.0 * ell * ell));
}

namespace {

void check_quartet(const Eigen::MatrixXd& K, const QuartetIndices& q) {
    const int n = static_cast<int>(K.rows());
    for (int idx : {q.i, q.j, q.m, q.l}) {
        if (idx < 0 || idx >= n) {
            throw invalid_argument_error("quartet index out of range");
        }
    }
}

}  // namespace

double fourth_moment_se_pairing(const Eigen::MatrixXd& K4, double ell,
                                const QuartetIndices& q) {
    check_quartet(K4, q);
    if (!(ell > 0.0)) throw validation_error("fourth_moment_se_pairing requires ell > 0");
    const double l2 = ell * ell;
    const double Dij = K4(q.i, q.i) + K4(q.j, q.j) - 2.0 * K4(q.i, q.j);
    const double Dml = K4(q.m, q.m) + K4(q.l, q.l) - 2.0 * K4(q.m, q.l);
    const double X = K4(q.i, q.m) + K4(q.j, q.l) - K4(q.i, q.l) - K4(q.j, q.m);
    const double Gij = 1.0 + Dij / l2;
    const double Gml = 1.0 + Dml / l2;
    const double V = (X / l2) * (X / l2);
    const double disc = Gij * Gml - V;
    if (!(disc > 0.0)) {
        throw validation_error(
            "fourth_moment_se_pairing: G_ij G_ml <= V, covariance is not PSD");
    }
    return 1.0 / std::sqrt(disc);
}

double fourth_moment_sc_pairing(const Eigen::MatrixXd& K4, double ell,
                                const QuartetIndices& q) {
    check_quartet(K4, q);
    if (!(ell > 0.0)) throw validation_error("fourth_moment_sc_pairing requires ell > 0");
    const double l2 = ell * ell;
    const double Dij = K4(q.i, q.i) + K4(q.j, q.j) - 2.0 * K4(q.i, q.j);
    const double Dml = K4(q.m, q.m) + K4(q.l, q.l) - 2.0 * K4(q.m, q.l);
    const double C = (K4(q.i, q.m) - K4(q.i, q.l) - K4(q.j, q.m) + K4(q.j, q.l)) / l2;
    return std::exp(-0.5 * (Dij + Dml) / l2) * std::cosh(C);
}

double isserlis_fourth(const std::function<double(int, int, int, int)>& pair_joint,
                       const QuartetIndices& q) {
    return pair_joint(q.i, q.j, q.m, q.l) + pair_joint(q.i, q.m, q.j, q.l) +
           pair_joint(q.i, q.l, q.j, q.m);
}

namespace {

// Scalar-latent kernel value, avoiding per-call vector temporaries in the
// million-replicate loops.
inline double latent_kernel(const BaseKernel& k, double a, double b) {
    const double s2 = k.sigma * k.sigma;
    switch (k.kind) {
        case BaseKind::SE: {
            const double d = a - b;
            return s2 * std::exp(-d * d / (2.0 * k.ell * k.ell));
        }
        case BaseKind::SC: {
            const double c = std::cos((a - b) / (2.0 * k.ell));
            return s2 * c * c;
        }
        case BaseKind::Lin:
            return s2 * a * b;
        case BaseKind::NuN:
            return s2 * std::exp(-0.5 * (k.alpha * a * a - 2.0 * k.beta * a * b +
                                         k.alpha * b * b));
        case BaseKind::Const:
            return s2;
    }
    return 0.0;
}

// In-place lower Cholesky with the shared jitter ladder; no allocation.
// Returns false if the last rung still fails.
bool small_chol(const Eigen::MatrixXd& K, Eigen::MatrixXd& L) {
    const Eigen::Index n = K.rows();
    const double mean_diag = K.diagonal().mean();
    for (double rung : jitter_ladder()) {
        const double jitter = rung * mean_diag;
        bool ok = true;
        for (Eigen::Index i = 0; i < n && ok; ++i) {
            for (Eigen::Index j = 0; j <= i; ++j) {
                double s = K(i, j) + ((i == j) ? jitter : 0.0);
                for (Eigen::Index t = 0; t < j; ++t) s -= L(i, t) * L(j, t);
                if (i == j) {
                    if (!(s > 0.0)) {
                        ok = false;
                        break;
                    }
                    L(i, i) = std::sqrt(s);
                } else {
                    L(i, j) = s / L(j, j);
                }
            }
        }
        if (ok) return true;
    }
    return false;
}

struct LayerStack {
    BaseKernel leaf;
    std::vector<BaseKernel> wraps;  // innermost wrap first
};

LayerStack layer_stack(const KernelSpec& spec) {
    validate(spec);
    const int d = depth(spec);
    if (d < 2 || d > 3) {
        throw invalid_argument_error(
            "ancestral sampling supports depth-2 and depth-3 specs only");
    }
    LayerStack s;
    std::vector<const KernelSpec*> nodes;
    const KernelSpec* node = &spec;
    while (!node->is_leaf) {
        nodes.push_back(node);
        node = node->inner.get();
    }
    s.leaf = node->base;
    for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
        const KernelSpec* w = *it;
        switch (w->outer) {
            case WrapKind::SE:
                s.wraps.push_back(BaseKernel::se(w->params.sigma, w->params.ell));
                break;
            case WrapKind::SC:
                s.wraps.push_back(BaseKernel::sc(w->params.sigma, w->params.ell));
                break;
            case WrapKind::NuN:
                s.wraps.push_back(BaseKernel::nun(w->params.sigma, w->params.alpha,
                                                  w->params.beta));
                break;
            case WrapKind::ThreeLayerErf:
                throw validation_error(
                    "the erf-form three-layer kernel has no sampling representation");
        }
    }
    return s;
}

// Runs the layered simulation and hands each replicate's output vector to
// sink(f). Draw order per replicate: leaf normals, then one block of N
// normals per wrap layer.
template <typename Sink>
void ancestral_stream(const KernelSpec& spec, const Eigen::MatrixXd& X, std::int64_t n,
                      std::uint64_t seed, double inner_mean, Sink&& sink) {
    if (n < 1) throw invalid_argument_error("sample count must be >= 1");
    const LayerStack layers = layer_stack(spec);
    const Eigen::Index N = X.rows();
    if (N < 1) throw invalid_argument_error("point set must be nonempty");

    // Leaf gram is shared by every replicate.
    Eigen::MatrixXd K1(N, N);
    for (Eigen::Index a = 0; a < N; ++a) {
        K1(a, a) = diag_value(layers.leaf, X.row(a).transpose());
        for (Eigen::Index b = a + 1; b < N; ++b) {
            const double v =
                eval_base(layers.leaf, X.row(a).transpose(), X.row(b).transpose());
            K1(a, b) = v;
            K1(b, a) = v;
        }
    }
    Eigen::MatrixXd L1(N, N);
    L1.setZero();
    if (!small_chol(K1, L1)) {
        throw numerical_error("leaf gram is not PSD at maximum jitter");
    }

    Eigen::VectorXd z(N), h(N), g(N);
    Eigen::MatrixXd K(N, N), L(N, N);
    L.setZero();
    for (std::int64_t r = 0; r < n; ++r) {
        RandomStream stream(seed, static_cast<std::uint64_t>(r));
        stream.fill_normal(z.data(), static_cast<std::size_t>(N));
        h.noalias() = L1.triangularView<Eigen::Lower>() * z;
        h.array() += inner_mean;
        for (const BaseKernel& wk : layers.wraps) {
            for (Eigen::Index a = 0; a < N; ++a) {
                for (Eigen::Index b = a; b < N; ++b) {
                    const double v = latent_kernel(wk, h[a], h[b]);
                    K(a, b) = v;
                    K(b, a) = v;
                }
            }
            if (!small_chol(K, L)) {
                throw numerical_error(
                    "latent-layer gram is not PSD at maximum jitter");
            }
            stream.fill_normal(z.data(), static_cast<std::size_t>(N));
            g.noalias() = L.triangularView<Eigen::Lower>() * z;
            h = g;
        }
        sink(static_cast<const Eigen::VectorXd&>(h));
    }
}

}  // namespace

Eigen::MatrixXd ancestral_sample(const KernelSpec& spec, const Eigen::MatrixXd& X,
                                 int n, std::uint64_t seed, double inner_mean) {
    Eigen::MatrixXd out(n, X.rows());
    std::int64_t r = 0;
    ancestral_stream(spec, X, n, seed, inner_mean,
                     [&](const Eigen::VectorXd& f) { out.row(r++) = f.transpose(); });
    return out;
}

MomentEstimate mc_pair_moment(const KernelSpec& spec, const InputPoint& x,
                              const InputPoint& y, std::int64_t n, std::uint64_t seed) {
    Eigen::MatrixXd X(2, x.size());
    X.row(0) = x.transpose();
    X.row(1) = y.transpose();
    BatchAccumulator acc(static_cast<std::size_t>(n));
    ancestral_stream(spec, X, n, seed, 0.0,
                     [&](const Eigen::VectorXd& f) { acc.add(f[0] * f[1]); });
    return {acc.mean(), acc.std_error(), n, seed};
}

MomentEstimate mc_quartet_moment(const KernelSpec& spec, const Eigen::MatrixXd& X,
                                 const QuartetIndices& q, std::int64_t n,
                                 std::uint64_t seed) {
    check_quartet(Eigen::MatrixXd::Zero(X.rows(), X.rows()), q);
    BatchAccumulator acc(static_cast<std::size_t>(n));
    ancestral_stream(spec, X, n, seed, 0.0, [&](const Eigen::VectorXd& f) {
        acc.add(f[q.i] * f[q.j] * f[q.m] * f[q.l]);
    });
    return {acc.mean(), acc.std_error(), n, seed};
}

namespace {

std::vector<QuartetIndices> index_multisets(int n) {
    std::vector<QuartetIndices> out;
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j)
            for (int m = j; m < n; ++m)
                for (int l = m; l < n; ++l) out.push_back({i, j, m, l});
    return out;
}

}  // namespace

HeavyTailReport heavy_tail_report(const KernelSpec& spec, const Eigen::MatrixXd& X,
                                  std::int64_t n, std::uint64_t seed,
                                  double corrupt_delta) {
    validate(spec);
    if (wrap_count(spec) != 1 ||
        (spec.outer != WrapKind::SE && spec.outer != WrapKind::SC)) {
        throw invalid_argument_error(
            "heavy_tail_report expects a two-layer spec with an SE or SC outer");
    }
    const Eigen::Index N = X.rows();
    const double sigma = spec.params.sigma;
    const double ell = spec.params.ell;
    const double s4 = sigma * sigma * sigma * sigma;

    // Inner covariance for the analytic quartet joints.
    Eigen::MatrixXd K1(N, N);
    for (Eigen::Index a = 0; a < N; ++a) {
        K1(a, a) = diag_value(spec.inner->base, X.row(a).transpose());
        for (Eigen::Index b = a + 1; b < N; ++b) {
            const double v = eval_base(spec.inner->base, X.row(a).transpose(),
                                       X.row(b).transpose());
            K1(a, b) = v;
            K1(b, a) = v;
        }
    }
    // Effective kernel for the Gaussian side.
    Eigen::MatrixXd E2(N, N);
    for (Eigen::Index a = 0; a < N; ++a) {
        E2(a, a) = eval_effective_diag(spec, X.row(a).transpose());
        for (Eigen::Index b = a + 1; b < N; ++b) {
            const double v =
                eval_effective(spec, X.row(a).transpose(), X.row(b).transpose());
            E2(a, b) = v;
            E2(b, a) = v;
        }
    }

    auto sc_pair = [&](int a, int b) {
        return std::exp((2.0 * K1(a, b) - K1(a, a) - K1(b, b)) / (2.0 * ell * ell));
    };
    auto joint_p = [&](int a, int b, int c, int d) {
        const QuartetIndices q{a, b, c, d};
        if (spec.outer == WrapKind::SE) {
            return s4 * fourth_moment_se_pairing(K1, ell, q);
        }
        return 0.25 * s4 *
               (1.0 + sc_pair(a, b) + sc_pair(c, d) +
                fourth_moment_sc_pairing(K1, ell, q));
    };
    auto joint_q = [&](int a, int b, int c, int d) { return E2(a, b) * E2(c, d); };

    HeavyTailReport report;
    report.n_samples = n;
    report.seed = seed;

    const std::vector<QuartetIndices> quartets = index_multisets(static_cast<int>(N));
    std::vector<BatchAccumulator> acc(quartets.size(),
                                      BatchAccumulator(static_cast<std::size_t>(n)));
    ancestral_stream(spec, X, n, seed, 0.0, [&](const Eigen::VectorXd& f) {
        for (std::size_t t = 0; t < quartets.size(); ++t) {
            const QuartetIndices& q = quartets[t];
            acc[t].add(f[q.i] * f[q.j] * f[q.m] * f[q.l]);
        }
    });

    bool all_ok = true;
    for (std::size_t t = 0; t < quartets.size(); ++t) {
        const QuartetIndices& q = quartets[t];
        HeavyTailRow row;
        row.q = q;
        row.analytic_p = isserlis_fourth(joint_p, q) + corrupt_delta;
        row.analytic_q = isserlis_fourth(joint_q, q);
        row.mc_value = acc[t].mean();
        row.mc_stderr = acc[t].std_error();
        row.margin = row.analytic_p - row.analytic_q;
        row.analytic_p_single = joint_p(q.i, q.j, q.m, q.l) +
                                0.5 * (joint_p(q.i, q.m, q.j, q.l) +
                                       joint_p(q.i, q.l, q.j, q.m)) +
                                corrupt_delta;
        row.analytic_q_single = joint_q(q.i, q.j, q.m, q.l) +
                                0.5 * (joint_q(q.i, q.m, q.j, q.l) +
                                       joint_q(q.i, q.l, q.j, q.m));
        row.margin_ok = row.margin >= -1e-12;
        row.oracle_ok = std::abs(row.mc_value - row.analytic_p) <= 4.0 * row.mc_stderr;
        all_ok = all_ok && row.margin_ok && row.oracle_ok;
        report.rows.push_back(row);
    }
    report.all_ok = all_ok;
    return report;
}

std::string HeavyTailReport::to_csv() const {
    std::ostringstream out;
    out << "i,j,m,l,analytic_p,analytic_q,mc_value,mc_stderr,margin,"
           "analytic_p_single,analytic_q_single\n";
    for (const HeavyTailRow& r : rows) {
        out << r.q.i << ',' << r.q.j << ',' << r.q.m << ',' << r.q.l << ','
            << format_double(r.analytic_p) << ',' << format_double(r.analytic_q) << ','
            << format_double(r.mc_value) << ',' << format_double(r.mc_stderr) << ','
            << format_double(r.margin) << ',' << format_double(r.analytic_p_single)
            << ',' << format_double(r.analytic_q_single) << '\n';
    }
    return out.str();
}

std::vector<PairOracleRow> second_moment_oracle(const KernelSpec& spec,
                                                const Eigen::MatrixXd& X,
                                                std::int64_t n, std::uint64_t seed,
                                                double tolerance_se) {
    const Eigen::Index N = X.rows();
    std::vector<std::pair<int, int>> pairs;
    for (int a = 0; a < N; ++a)
        for (int b = a; b < N; ++b) pairs.emplace_back(a, b);

    std::vector<BatchAccumulator> acc(pairs.size(),
                                      BatchAccumulator(static_cast<std::size_t>(n)));
    ancestral_stream(spec, X, n, seed, 0.0, [&](const Eigen::VectorXd& f) {
        for (std::size_t t = 0; t < pairs.size(); ++t) {
            acc[t].add(f[pairs[t].first] * f[pairs[t].second]);
        }
    });

    std::vector<PairOracleRow> rows;
    for (std::size_t t = 0; t < pairs.size(); ++t) {
        PairOracleRow row;
        row.i = pairs[t].first;
        row.j = pairs[t].second;
        row.analytic = (row.i == row.j)
                           ? eval_effective_diag(spec, X.row(row.i).transpose())
                           : eval_effective(spec, X.row(row.i).transpose(),
                                            X.row(row.j).transpose());
        row.mc_value = acc[t].mean();
        row.mc_stderr = acc[t].std_error();
        row.ok = std::abs(row.mc_value - row.analytic) <= tolerance_se * row.mc_stderr;
        rows.push_back(row);
    }
    return rows;
}

namespace {

double mvn_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                  const Eigen::MatrixXd& L) {
    const Eigen::VectorXd z = L.triangularView<Eigen::Lower>().solve(x - mean);
    constexpr double kLog2Pi = 1.8378770664093454835606594728112;
    return -0.5 * z.squaredNorm() - L.diagonal().array().log().sum() -
           0.5 * static_cast<double>(x.size()) * kLog2Pi;
}

}  // namespace

bool sign_flip_symmetry_check(const KernelSpec& spec, const Eigen::MatrixXd& X,
                              int trials, std::uint64_t seed, double inner_mean) {
    if (trials < 1) throw invalid_argument_error("trials must be >= 1");
    const LayerStack layers = layer_stack(spec);
    const Eigen::Index N = X.rows();

    Eigen::MatrixXd K1(N, N);
    for (Eigen::Index a = 0; a < N; ++a) {
        K1(a, a) = diag_value(layers.leaf, X.row(a).transpose());
        for (Eigen::Index b = a + 1; b < N; ++b) {
            const double v =
                eval_base(layers.leaf, X.row(a).transpose(), X.row(b).transpose());
            K1(a, b) = v;
            K1(b, a) = v;
        }
    }
    Eigen::MatrixXd L1(N, N);
    L1.setZero();
    if (!small_chol(K1, L1)) {
        throw numerical_error("leaf gram is not PSD at maximum jitter");
    }
    const Eigen::VectorXd mean1 = Eigen::VectorXd::Constant(N, inner_mean);

    auto latent_gram_chol = [&](const BaseKernel& wk, const Eigen::VectorXd& h,
                                Eigen::MatrixXd& K, Eigen::MatrixXd& L) {
        for (Eigen::Index a = 0; a < N; ++a) {
            for (Eigen::Index b = a; b < N; ++b) {
                const double v = latent_kernel(wk, h[a], h[b]);
                K(a, b) = v;
                K(b, a) = v;
            }
        }
        if (!small_chol(K, L)) {
            throw numerical_error("latent-layer gram is not PSD at maximum jitter");
        }
    };

    Eigen::VectorXd z(N);
    Eigen::MatrixXd K(N, N), L(N, N);
    L.setZero();
    for (int t = 0; t < trials; ++t) {
        RandomStream stream(seed, static_cast<std::uint64_t>(t));

        // Draw the full set of layer values (latents plus output).
        std::vector<Eigen::VectorXd> values;  // innermost latent first
        stream.fill_normal(z.data(), static_cast<std::size_t>(N));
        Eigen::VectorXd h = mean1 + L1.triangularView<Eigen::Lower>() * z;
        values.push_back(h);
        for (const BaseKernel& wk : layers.wraps) {
            latent_gram_chol(wk, h, K, L);
            stream.fill_normal(z.data(), static_cast<std::size_t>(N));
            h = L.triangularView<Eigen::Lower>() * z;
            values.push_back(h);
        }

        // Joint log density of (latents, output) and of the configuration with
        // every latent layer negated; the output layer stays as drawn.
        auto joint_logpdf = [&](double flip) {
            double lp = mvn_logpdf(flip * values[0], mean1, L1);
            Eigen::VectorXd prev = flip * values[0];
            for (std::size_t w = 0; w < layers.wraps.size(); ++w) {
                latent_gram_chol(layers.wraps[w], prev, K, L);
                const bool is_output = (w + 1 == layers.wraps.size());
                const Eigen::VectorXd cur =
                    is_output ? values[w + 1] : Eigen::VectorXd(flip * values[w + 1]);
                lp += mvn_logpdf(cur, Eigen::VectorXd::Zero(N), L);
                prev = cur;
            }
            return lp;
        };

        const double lp_plus = joint_logpdf(1.0);
        const double lp_minus = joint_logpdf(-1.0);
        const double scale = std::max({std::abs(lp_plus), std::abs(lp_minus), 1.0});
        if (std::abs(lp_plus - lp_minus) > 1e-10 * scale) return false;
    }
    return true;
}

}  // namespace dk
