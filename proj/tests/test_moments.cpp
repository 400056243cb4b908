#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/LU>

#include "deepkernel/compose.hpp"
#include "deepkernel/errors.hpp"
#include "deepkernel/moments.hpp"
#include "deepkernel/rng.hpp"

using dk::BaseKernel;
using dk::KernelSpec;
using dk::MvnSpec;
using dk::QuartetIndices;

namespace {

Eigen::MatrixXd grid(std::initializer_list<double> xs) {
    Eigen::MatrixXd X(static_cast<int>(xs.size()), 1);
    int i = 0;
    for (double v : xs) X(i++, 0) = v;
    return X;
}

// Random PSD matrix with unit-ish scale: A A^T / n + eps I.
Eigen::MatrixXd random_psd(int n, dk::RandomStream& rs) {
    Eigen::MatrixXd A(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) A(i, j) = rs.normal();
    return A * A.transpose() / n + 1e-6 * Eigen::MatrixXd::Identity(n, n);
}

// Monte-Carlo mean of f(h), h ~ mvn, with a standard error, using plain
// Cholesky sampling so it shares nothing with the library estimators.
template <typename F>
std::pair<double, double> mvn_mc(const MvnSpec& mvn, int n, std::uint64_t seed, F&& f) {
    Eigen::LLT<Eigen::MatrixXd> llt(mvn.cov);
    REQUIRE(llt.info() == Eigen::Success);
    Eigen::MatrixXd L = llt.matrixL();
    dk::RandomStream rs(seed, 900);
    const int d = static_cast<int>(mvn.mean.size());
    double sum = 0.0, sumsq = 0.0;
    Eigen::VectorXd z(d);
    for (int t = 0; t < n; ++t) {
        for (int i = 0; i < d; ++i) z(i) = rs.normal();
        double v = f((mvn.mean + L * z).eval());
        sum += v;
        sumsq += v * v;
    }
    double mean = sum / n;
    double var = (sumsq - n * mean * mean) / (n - 1);
    return {mean, std::sqrt(var / n)};
}

}  // namespace

TEST_CASE("gauss_quadratic_expectation frozen value and MC agreement") {
    MvnSpec mvn;
    mvn.mean = Eigen::Vector2d(0.3, -0.6);
    mvn.cov = (Eigen::Matrix2d() << 1.3, 0.4, 0.4, 0.9).finished();
    Eigen::Matrix2d J;
    J << 0.7, -0.2, -0.2, 0.5;

    // Value computed once from the closed form with independent arithmetic
    // (det and inverse of the explicit 2x2) and frozen here.
    double got = dk::gauss_quadratic_expectation(mvn, J);
    CHECK(got == doctest::Approx(0.5676943291692654).epsilon(1e-14));

    auto [mc, se] = mvn_mc(mvn, 200000, 11, [&](const Eigen::VectorXd& h) {
        return std::exp(-0.5 * h.dot(J * h));
    });
    CHECK(std::abs(mc - got) < 4 * se);

    // A J negative enough to defeat the covariance diverges.
    Eigen::Matrix2d bad = -2.0 * Eigen::Matrix2d::Identity();
    CHECK_THROWS_AS(dk::gauss_quadratic_expectation(mvn, bad), dk::numerical_error);
}

TEST_CASE("gauss_linear_expectation is the lognormal mean") {
    MvnSpec mvn;
    mvn.mean = Eigen::Vector2d(0.1, 0.4);
    mvn.cov = (Eigen::Matrix2d() << 0.8, -0.3, -0.3, 1.1).finished();
    Eigen::Vector2d u(0.9, -0.5);
    double expect = std::exp(u.dot(mvn.mean) + 0.5 * u.dot(mvn.cov * u));
    CHECK(dk::gauss_linear_expectation(mvn, u) == doctest::Approx(expect).epsilon(1e-14));

    auto [mc, se] =
        mvn_mc(mvn, 200000, 12, [&](const Eigen::VectorXd& h) { return std::exp(u.dot(h)); });
    CHECK(std::abs(mc - expect) < 4 * se);
}

TEST_CASE("sc_pair_expectation matches the characteristic function") {
    MvnSpec mvn;
    mvn.mean = Eigen::Vector2d(0.7, -0.2);
    mvn.cov = (Eigen::Matrix2d() << 1.2, 0.5, 0.5, 0.8).finished();
    double ell = 0.9;
    double D = 1.2 + 0.8 - 2 * 0.5;
    double expect = std::cos((0.7 + 0.2) / ell) * std::exp(-D / (2 * ell * ell));
    CHECK(dk::sc_pair_expectation(mvn, ell) == doctest::Approx(expect).epsilon(1e-14));

    auto [mc, se] = mvn_mc(mvn, 200000, 13, [&](const Eigen::VectorXd& h) {
        return std::cos((h(0) - h(1)) / ell);
    });
    CHECK(std::abs(mc - expect) < 4 * se);
}

TEST_CASE("quartet SE pairing against a generic determinant evaluation") {
    // Independent route: E[exp(-1/2 h^T J h)] with
    // J = (u u^T + w w^T)/l^2, u = e_i - e_j, w = e_m - e_l,
    // evaluated through the generic determinant formula.
    dk::RandomStream rs(21, 0);
    QuartetIndices q{0, 1, 2, 3};
    for (int t = 0; t < 200; ++t) {
        Eigen::MatrixXd K = random_psd(4, rs);
        double ell = rs.uniform(0.4, 2.0);
        Eigen::Vector4d u = Eigen::Vector4d::Zero(), w = Eigen::Vector4d::Zero();
        u(q.i) = 1;
        u(q.j) = -1;
        w(q.m) = 1;
        w(q.l) = -1;
        Eigen::Matrix4d J = (u * u.transpose() + w * w.transpose()) / (ell * ell);
        double generic = 1.0 / std::sqrt((Eigen::Matrix4d::Identity() + K * J).determinant());
        CHECK(dk::fourth_moment_se_pairing(K, ell, q) ==
              doctest::Approx(generic).epsilon(1e-12));
    }

    // Degenerate quartet (i,j,i,j) with unit diagonal and correlation rho
    // collapses to [1 + 4(1-rho)/l^2]^{-1/2}.
    for (double rho : {-0.5, 0.0, 0.4, 0.9}) {
        Eigen::Matrix4d K = Eigen::Matrix4d::Identity();
        K(0, 1) = K(1, 0) = rho;
        double ell = 1.3;
        QuartetIndices qq{0, 1, 0, 1};
        double expect = 1.0 / std::sqrt(1.0 + 4.0 * (1.0 - rho) / (ell * ell));
        CHECK(dk::fourth_moment_se_pairing(K, ell, qq) ==
              doctest::Approx(expect).epsilon(1e-13));
    }
}

TEST_CASE("quartet SE and SC pairings against direct Gaussian MC") {
    dk::RandomStream rs(22, 0);
    Eigen::MatrixXd K = random_psd(4, rs);
    MvnSpec mvn;
    mvn.mean = Eigen::VectorXd::Zero(4);
    mvn.cov = K;
    double ell = 1.1;
    QuartetIndices q{0, 1, 2, 3};

    double se_expect = dk::fourth_moment_se_pairing(K, ell, q);
    auto [mc1, se1] = mvn_mc(mvn, 300000, 14, [&](const Eigen::VectorXd& h) {
        double a = h(0) - h(1), b = h(2) - h(3);
        return std::exp(-(a * a + b * b) / (2 * ell * ell));
    });
    CHECK(std::abs(mc1 - se_expect) < 4 * se1);

    double sc_expect = dk::fourth_moment_sc_pairing(K, ell, q);
    auto [mc2, se2] = mvn_mc(mvn, 300000, 15, [&](const Eigen::VectorXd& h) {
        return std::cos((h(0) - h(1)) / ell) * std::cos((h(2) - h(3)) / ell);
    });
    CHECK(std::abs(mc2 - sc_expect) < 4 * se2);

    // cosh >= 1 makes the joint dominate the product of pair expectations.
    double D01 = K(0, 0) + K(1, 1) - 2 * K(0, 1);
    double D23 = K(2, 2) + K(3, 3) - 2 * K(2, 3);
    double pair_product = std::exp(-(D01 + D23) / (2 * ell * ell));
    CHECK(sc_expect >= pair_product - 1e-15);
}

TEST_CASE("isserlis_fourth sums the three pair partitions") {
    // With pair_joint(a,b,c,d) = k_ab k_cd this must equal the Gaussian
    // fourth moment E[h_i h_j h_m h_l].
    dk::RandomStream rs(23, 0);
    Eigen::MatrixXd K = random_psd(4, rs);
    QuartetIndices q{0, 1, 2, 3};
    auto gauss_pairs = [&](int a, int b, int c, int d) { return K(a, b) * K(c, d); };
    double analytic = dk::isserlis_fourth(gauss_pairs, q);
    CHECK(analytic == doctest::Approx(K(0, 1) * K(2, 3) + K(0, 2) * K(1, 3) +
                                      K(0, 3) * K(1, 2))
                          .epsilon(1e-14));

    MvnSpec mvn;
    mvn.mean = Eigen::VectorXd::Zero(4);
    mvn.cov = K;
    auto [mc, se] = mvn_mc(mvn, 400000, 16, [&](const Eigen::VectorXd& h) {
        return h(0) * h(1) * h(2) * h(3);
    });
    CHECK(std::abs(mc - analytic) < 4 * se);
}

TEST_CASE("ancestral sampling of a leaf reproduces the gram matrix") {
    auto leaf = KernelSpec::leaf(BaseKernel::se(1.2, 0.9));
    // Depth 1 is out of range for the layered sampler.
    Eigen::MatrixXd X = grid({0.0, 0.7, 1.5});
    CHECK_THROWS_AS(dk::ancestral_sample(*leaf, X, 10, 1), dk::invalid_argument_error);

    // Depth 2: covariance of the output equals the effective kernel.
    auto spec = KernelSpec::wrap_se(1.0, 1.0, leaf);
    const int n = 60000;
    Eigen::MatrixXd F = dk::ancestral_sample(*spec, X, n, 31);
    REQUIRE(F.rows() == n);
    REQUIRE(F.cols() == 3);
    for (int i = 0; i < 3; ++i) {
        for (int j = i; j < 3; ++j) {
            double mc = (F.col(i).array() * F.col(j).array()).mean();
            double expect = dk::eval_effective(*spec, X.row(i).transpose(), X.row(j).transpose());
            // Products of bounded outputs: 4 sigma / sqrt(n) with sigma <= 1.
            CHECK(std::abs(mc - expect) < 4.0 / std::sqrt(double(n)));
        }
    }

    // Replicates are keyed by stream, not batch: the first rows of a longer
    // run must reproduce a shorter run exactly.
    Eigen::MatrixXd F_small = dk::ancestral_sample(*spec, X, 50, 31);
    CHECK((F.topRows(50) - F_small).cwiseAbs().maxCoeff() == 0.0);

    auto erf = KernelSpec::three_layer_erf(1, 1, 1, 1, leaf);
    CHECK_THROWS_AS(dk::ancestral_sample(*erf, X, 10, 1), dk::validation_error);
    auto four = KernelSpec::wrap_se(1, 1, KernelSpec::wrap_se(1, 1, KernelSpec::wrap_se(1, 1, leaf)));
    CHECK_THROWS_AS(dk::ancestral_sample(*four, X, 10, 1), dk::invalid_argument_error);
}

TEST_CASE("mc_pair_moment equals the mean of ancestral products") {
    auto spec = KernelSpec::wrap_sc(1.1, 0.8, KernelSpec::leaf(BaseKernel::se(1.0, 1.0)));
    dk::InputPoint x(1), y(1);
    x << 0.2;
    y << 1.4;
    const int n = 1000;
    auto est = dk::mc_pair_moment(*spec, x, y, n, 77);
    CHECK(est.n_samples == n);
    CHECK(est.seed == 77);

    Eigen::MatrixXd X(2, 1);
    X << 0.2, 1.4;
    Eigen::MatrixXd F = dk::ancestral_sample(*spec, X, n, 77);
    double mean = (F.col(0).array() * F.col(1).array()).mean();
    CHECK(est.value == doctest::Approx(mean).epsilon(1e-12));
    CHECK(est.std_error > 0.0);
}

TEST_CASE("mc_quartet_moment matches the analytic fourth moment") {
    auto spec = KernelSpec::wrap_se(1.0, 1.0, KernelSpec::leaf(BaseKernel::se(1.0, 1.0)));
    Eigen::MatrixXd X = grid({0.0, 0.5, 1.0, 2.0});
    QuartetIndices q{0, 1, 2, 3};

    // Analytic fourth moment of the layered process: Isserlis over the SE
    // quartet joints of the inner gram matrix, scaled by the outer wraps.
    Eigen::MatrixXd K(4, 4);
    auto inner = KernelSpec::leaf(BaseKernel::se(1.0, 1.0));
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            K(i, j) = dk::eval_effective(*inner, X.row(i).transpose(), X.row(j).transpose());
    double s2 = 1.0;  // outer sigma^2
    auto joint = [&](int a, int b, int c, int d) {
        return s2 * s2 * dk::fourth_moment_se_pairing(K, 1.0, QuartetIndices{a, b, c, d});
    };
    double analytic = dk::isserlis_fourth(joint, q);

    auto est = dk::mc_quartet_moment(*spec, X, q, 400000, 41);
    CHECK(std::abs(est.value - analytic) < 4 * est.std_error);
}

TEST_CASE("heavy tail report on a two-layer SE kernel") {
    auto spec = KernelSpec::wrap_se(1.0, 1.0, KernelSpec::leaf(BaseKernel::se(1.0, 1.0)));
    Eigen::MatrixXd X = grid({0.0, 0.8, 2.0});
    auto report = dk::heavy_tail_report(*spec, X, 150000, 5);

    // 3 points -> C(3+3,4)... actually index multisets {i<=j<=m<=l}: 15.
    CHECK(report.rows.size() == 15);
    CHECK(report.all_ok);
    for (const auto& row : report.rows) {
        CHECK(row.margin >= -1e-12);           // heavy-tail inequality
        CHECK(row.margin_ok);
        CHECK(row.oracle_ok);                  // MC agrees with analytic_p
        CHECK(row.analytic_p >= row.analytic_q - 1e-12);
    }

    // The same report with corrupted analytic values must fail, proving the
    // MC check has teeth.
    auto bad = dk::heavy_tail_report(*spec, X, 150000, 5, 0.05);
    CHECK_FALSE(bad.all_ok);

    // CSV comes out with the documented header and one line per quartet.
    std::string csv = report.to_csv();
    CHECK(csv.rfind("i,j,m,l,analytic_p,analytic_q,mc_value,mc_stderr,margin,"
                    "analytic_p_single,analytic_q_single",
                    0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 16);
}

TEST_CASE("second_moment_oracle validates the effective kernel by MC") {
    auto spec = KernelSpec::wrap_sc(1.0, 1.0, KernelSpec::leaf(BaseKernel::se(1.0, 1.0)));
    Eigen::MatrixXd X = grid({0.0, 0.5, 1.0, 2.0});
    auto rows = dk::second_moment_oracle(*spec, X, 200000, 6);
    CHECK(rows.size() == 10);  // pairs i <= j over 4 points
    for (const auto& r : rows) {
        CHECK(r.ok);
        CHECK(std::abs(r.mc_value - r.analytic) < 4 * r.mc_stderr);
        double direct = dk::eval_effective(*spec, X.row(r.i).transpose(), X.row(r.j).transpose());
        CHECK(r.analytic == doctest::Approx(direct).epsilon(1e-14));
    }
}

TEST_CASE("sign flip symmetry holds at zero mean and breaks off it") {
    auto spec = KernelSpec::wrap_se(1.0, 1.0, KernelSpec::leaf(BaseKernel::se(1.0, 1.0)));
    Eigen::MatrixXd X = grid({0.0, 1.0, 2.5});
    CHECK(dk::sign_flip_symmetry_check(*spec, X, 50, 9));
    CHECK_FALSE(dk::sign_flip_symmetry_check(*spec, X, 50, 9, 0.5));

    // Also symmetric for SC and NuN wraps (even functions of the latents).
    auto sc = KernelSpec::wrap_sc(1.0, 1.0, KernelSpec::leaf(BaseKernel::se(1.0, 1.0)));
    CHECK(dk::sign_flip_symmetry_check(*sc, X, 25, 10));
}

TEST_CASE("mvn validation") {
    MvnSpec bad;
    bad.mean = Eigen::Vector2d(0, 0);
    bad.cov = (Eigen::Matrix2d() << 1.0, 2.0, 2.0, 1.0).finished();  // indefinite
    CHECK_THROWS_AS(dk::validate(bad), dk::validation_error);

    MvnSpec mismatched;
    mismatched.mean = Eigen::Vector3d(0, 0, 0);
    mismatched.cov = Eigen::Matrix2d::Identity();
    CHECK_THROWS_AS(dk::validate(mismatched), dk::validation_error);
}
