#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>

#include "deepkernel/errors.hpp"
#include "deepkernel/kernel.hpp"
#include "deepkernel/rng.hpp"

using dk::BaseKernel;
using dk::BaseKind;
using dk::InputPoint;

namespace {

InputPoint pt(double v) {
    InputPoint x(1);
    x << v;
    return x;
}

InputPoint pt2(double a, double b) {
    InputPoint x(2);
    x << a, b;
    return x;
}

}  // namespace

TEST_CASE("SE kernel values") {
    auto k = BaseKernel::se(1.0, 1.0);
    // exp(-1/2) at unit separation, unit length scale.
    CHECK(dk::eval_base(k, pt(0.0), pt(1.0)) == doctest::Approx(0.6065306597126334).epsilon(1e-15));
    CHECK(dk::eval_base(k, pt(3.0), pt(3.0)) == doctest::Approx(1.0).epsilon(1e-15));

    auto k2 = BaseKernel::se(2.0, 0.5);
    double r = 0.7;
    double expect = 4.0 * std::exp(-r * r / (2.0 * 0.25));
    CHECK(dk::eval_base(k2, pt(0.0), pt(r)) == doctest::Approx(expect).epsilon(1e-15));

    // Multivariate: only the Euclidean distance matters.
    double d = dk::eval_base(k2, pt2(1.0, 2.0), pt2(1.0 + 0.7 / std::sqrt(2.0), 2.0 + 0.7 / std::sqrt(2.0)));
    CHECK(d == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("SC kernel is squared cosine of half the scaled distance") {
    auto k = BaseKernel::sc(1.5, 0.8);
    double r = 1.3;
    double c = std::cos(r / (2.0 * 0.8));
    CHECK(dk::eval_base(k, pt(0.0), pt(r)) == doctest::Approx(2.25 * c * c).epsilon(1e-15));

    // Period 2*pi*ell in the distance.
    double period = 2.0 * M_PI * 0.8;
    for (double base : {0.0, 0.4, 2.9}) {
        double a = dk::eval_base(k, pt(0.0), pt(base));
        double b = dk::eval_base(k, pt(0.0), pt(base + period));
        CHECK(a == doctest::Approx(b).epsilon(1e-12));
    }

    // Zeros at r = pi * ell.
    CHECK(dk::eval_base(k, pt(0.0), pt(M_PI * 0.8)) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(dk::diag_value(k, pt(5.0)) == doctest::Approx(2.25).epsilon(1e-15));
}

TEST_CASE("Lin kernel is a scaled dot product") {
    auto k = BaseKernel::lin(0.7);
    CHECK(dk::eval_base(k, pt(2.0), pt(-3.0)) == doctest::Approx(0.49 * -6.0).epsilon(1e-15));
    CHECK(dk::eval_base(k, pt2(1.0, 2.0), pt2(3.0, -1.0)) == doctest::Approx(0.49 * 1.0).epsilon(1e-15));
    CHECK(dk::diag_value(k, pt(2.0)) == doctest::Approx(0.49 * 4.0).epsilon(1e-15));
    // Vanishes at the origin, unlike the stationary kinds.
    CHECK(dk::eval_base(k, pt(0.0), pt(5.0)) == 0.0);
}

TEST_CASE("NuN kernel closed form and diagonal") {
    auto k = BaseKernel::nun(1.2, 1.0, 0.4);
    double x = 0.9, y = -1.1;
    double expect = 1.44 * std::exp(-(1.0 * x * x - 2.0 * 0.4 * x * y + 1.0 * y * y) / 2.0);
    CHECK(dk::eval_base(k, pt(x), pt(y)) == doctest::Approx(expect).epsilon(1e-15));

    // diag: sigma^2 exp(-(alpha - beta) |x|^2)
    CHECK(dk::diag_value(k, pt(x)) == doctest::Approx(1.44 * std::exp(-0.6 * x * x)).epsilon(1e-15));
    CHECK(dk::diag_value(k, pt(x)) == doctest::Approx(dk::eval_base(k, pt(x), pt(x))).epsilon(1e-15));

    // Bounded by sigma^2 at the origin and decaying away from it.
    CHECK(dk::diag_value(k, pt(0.0)) == doctest::Approx(1.44).epsilon(1e-15));
    CHECK(dk::diag_value(k, pt(2.0)) < dk::diag_value(k, pt(1.0)));
}

TEST_CASE("Const kernel ignores the inputs") {
    auto k = BaseKernel::constant(0.5);
    CHECK(dk::eval_base(k, pt(-7.0), pt(123.0)) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(dk::diag_value(k, pt2(1.0, 1.0)) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("diag_value matches eval_base on the diagonal for every kind") {
    dk::RandomStream rs(101, 0);
    std::vector<BaseKernel> kernels = {
        BaseKernel::se(1.3, 0.6),    BaseKernel::sc(0.9, 1.7), BaseKernel::lin(1.1),
        BaseKernel::nun(0.8, 1.5, 0.9), BaseKernel::constant(2.0),
    };
    for (const auto& k : kernels) {
        for (int i = 0; i < 20; ++i) {
            InputPoint x = pt2(rs.uniform(-3, 3), rs.uniform(-3, 3));
            CHECK(dk::diag_value(k, x) == doctest::Approx(dk::eval_base(k, x, x)).epsilon(1e-14));
        }
    }
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(dk::validate(BaseKernel::se(0.0, 1.0)), dk::validation_error);
    CHECK_THROWS_AS(dk::validate(BaseKernel::se(1.0, -2.0)), dk::validation_error);
    CHECK_THROWS_AS(dk::validate(BaseKernel::sc(1.0, 0.0)), dk::validation_error);
    CHECK_THROWS_AS(dk::validate(BaseKernel::lin(-1.0)), dk::validation_error);
    CHECK_THROWS_AS(dk::validate(BaseKernel::constant(0.0)), dk::validation_error);
    // NuN needs alpha > beta > 0, strictly.
    CHECK_THROWS_AS(dk::validate(BaseKernel::nun(1.0, 0.5, 0.5)), dk::validation_error);
    CHECK_THROWS_AS(dk::validate(BaseKernel::nun(1.0, 0.5, 0.7)), dk::validation_error);
    CHECK_THROWS_AS(dk::validate(BaseKernel::nun(1.0, 1.0, 0.0)), dk::validation_error);
    CHECK_NOTHROW(dk::validate(BaseKernel::nun(1.0, 1.0, 0.999)));
    CHECK_NOTHROW(dk::validate(BaseKernel::se(0.001, 1000.0)));
}

TEST_CASE("mismatched or empty inputs are rejected") {
    auto k = BaseKernel::se(1.0, 1.0);
    CHECK_THROWS_AS(dk::eval_base(k, pt(0.0), pt2(0.0, 0.0)), dk::invalid_argument_error);
    InputPoint empty(0);
    CHECK_THROWS_AS(dk::eval_base(k, empty, empty), dk::invalid_argument_error);
    CHECK_THROWS_AS(dk::diag_value(k, empty), dk::invalid_argument_error);
}

TEST_CASE("kind names round trip") {
    for (auto kind : {BaseKind::SE, BaseKind::SC, BaseKind::Lin, BaseKind::NuN, BaseKind::Const}) {
        CHECK(dk::base_kind_from_name(dk::base_kind_name(kind)) == kind);
    }
    CHECK_THROWS_AS(dk::base_kind_from_name("Cubic"), dk::validation_error);
}

TEST_CASE("gram matrices are positive semidefinite") {
    // Every kind is a valid covariance; the Gram matrix on random points must
    // admit a Cholesky factorization after a tiny diagonal lift.
    dk::RandomStream rs(77, 0);
    std::vector<BaseKernel> kernels = {
        BaseKernel::se(1.0, 0.7),    BaseKernel::sc(1.2, 0.9), BaseKernel::lin(0.8),
        BaseKernel::nun(1.0, 1.2, 0.6), BaseKernel::constant(1.0),
    };
    const int n = 12;
    for (const auto& k : kernels) {
        std::vector<InputPoint> xs;
        for (int i = 0; i < n; ++i) xs.push_back(pt(rs.uniform(-4, 4)));
        Eigen::MatrixXd g(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) g(i, j) = dk::eval_base(k, xs[i], xs[j]);
        CHECK((g - g.transpose()).cwiseAbs().maxCoeff() == doctest::Approx(0.0).epsilon(1e-14));
        Eigen::MatrixXd lifted = g + 1e-9 * Eigen::MatrixXd::Identity(n, n);
        Eigen::LLT<Eigen::MatrixXd> llt(lifted);
        CHECK(llt.info() == Eigen::Success);
    }
}
