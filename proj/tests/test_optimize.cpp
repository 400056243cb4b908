#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "deepkernel/compose.hpp"
#include "deepkernel/datagen.hpp"
#include "deepkernel/errors.hpp"
#include "deepkernel/gp.hpp"
#include "deepkernel/optimize.hpp"

using dk::BaseKernel;
using dk::Dataset;
using dk::HyperVector;
using dk::KernelSpec;

namespace {

dk::SpecPtr se_in_se(double s1, double l1, double s2, double l2) {
    return KernelSpec::wrap_se(s2, l2, KernelSpec::leaf(BaseKernel::se(s1, l1)));
}

double lml_of(dk::SpecPtr spec, double noise, const Dataset& data) {
    dk::GPModel m;
    m.spec = std::move(spec);
    m.noise_variance = noise;
    m.data = data;
    return dk::log_marginal_likelihood(m);
}

}  // namespace

TEST_CASE("hyper vector naming walks the layers inside out") {
    auto spec = KernelSpec::wrap_se(0.9, 1.3, se_in_se(1.5, 0.8, 1.1, 1.2));
    auto hv = dk::hyper_vector_of(*spec, 0.04);
    std::vector<std::string> expect = {"l1.sigma", "l1.ell", "l2.sigma", "l2.ell",
                                       "l3.sigma", "l3.ell", "noise"};
    CHECK(hv.names == expect);
    CHECK(hv.log_values.size() == 7);
    CHECK(hv.log_values(0) == doctest::Approx(std::log(1.5)).epsilon(1e-15));
    CHECK(hv.log_values(6) == doctest::Approx(std::log(0.04)).epsilon(1e-15));

    // NuN leaves expose alpha/beta instead of ell.
    auto nun = KernelSpec::wrap_nun(1.0, 1.4, 0.6, KernelSpec::leaf(BaseKernel::se(1, 1)));
    auto hv2 = dk::hyper_vector_of(*nun, 0.1);
    std::vector<std::string> expect2 = {"l1.sigma", "l1.ell", "l2.sigma", "l2.alpha",
                                        "l2.beta", "noise"};
    CHECK(hv2.names == expect2);

    // The erf node spans two named layers.
    auto erf = KernelSpec::three_layer_erf(1.2, 0.9, 0.8, 1.1,
                                           KernelSpec::leaf(BaseKernel::se(1, 1)));
    auto hv3 = dk::hyper_vector_of(*erf, 0.1);
    std::vector<std::string> expect3 = {"l1.sigma", "l1.ell", "l2.sigma", "l2.ell",
                                        "l3.sigma", "l3.ell", "noise"};
    CHECK(hv3.names == expect3);
    CHECK(hv3.log_values(2) == doctest::Approx(std::log(0.8)).epsilon(1e-15));  // sigma2
    CHECK(hv3.log_values(4) == doctest::Approx(std::log(1.2)).epsilon(1e-15));  // sigma3
}

TEST_CASE("apply_hyper round trips and rejects mismatches") {
    auto spec = KernelSpec::wrap_sc(0.7, 1.9, KernelSpec::leaf(BaseKernel::nun(1.1, 1.6, 0.5)));
    auto hv = dk::hyper_vector_of(*spec, 0.02);
    double noise = 0.0;
    auto back = dk::apply_hyper(*spec, hv, &noise);
    CHECK(noise == doctest::Approx(0.02).epsilon(1e-15));
    CHECK(dk::to_json(*back) == dk::to_json(*spec));

    // Perturbing one coordinate lands exactly where exp() says.
    hv.log_values(0) += std::log(2.0);
    auto scaled = dk::apply_hyper(*spec, hv, &noise);
    CHECK(scaled->inner->base.sigma == doctest::Approx(2.2).epsilon(1e-14));

    HyperVector wrong = hv;
    wrong.log_values = Eigen::VectorXd::Zero(3);
    wrong.names = {"l1.sigma", "l1.ell", "noise"};
    CHECK_THROWS_AS(dk::apply_hyper(*spec, wrong, &noise), dk::invalid_argument_error);
}

TEST_CASE("optimizer recovers SE hyperparameters from clean draws") {
    auto truth = KernelSpec::leaf(BaseKernel::se(1.5, 0.8));
    Dataset data = dk::gen_from_kernel(*truth, 200, 0.1, 17);
    auto report = dk::optimize(*KernelSpec::leaf(BaseKernel::se(1, 1)), data, 8, 99, 400);

    REQUIRE(report.per_restart.size() == 8);
    CHECK(report.restarts == 8);
    CHECK(std::isfinite(report.best_lml));

    // The fitted kernel should sit near the generator in log space. A GP
    // draw only identifies hyperparameters up to sampling noise, so allow a
    // factor of exp(0.35) on each.
    auto& best = report.best;
    REQUIRE(best.names.size() == 3);
    CHECK(std::abs(best.log_values(0) - std::log(1.5)) < 0.35);
    CHECK(std::abs(best.log_values(1) - std::log(0.8)) < 0.35);
    CHECK(std::abs(best.log_values(2) - std::log(0.01)) < 1.0);  // noise var 0.1^2

    // best_lml is the max over restarts, and the recovered LML beats the
    // unit-parameter starting template.
    double max_lml = -1e300;
    for (const auto& r : report.per_restart) max_lml = std::max(max_lml, r.lml);
    CHECK(report.best_lml == doctest::Approx(max_lml).epsilon(1e-15));
    CHECK(report.best_lml >= lml_of(KernelSpec::leaf(BaseKernel::se(1, 1)), 1e-2, data));

    // The reported spec/noise reproduce the reported LML exactly.
    CHECK(lml_of(report.best_spec, report.best_noise, data) ==
          doctest::Approx(report.best_lml).epsilon(1e-12));
}

TEST_CASE("optimization is deterministic in the seed") {
    Dataset data = dk::gen_two_scale(dk::TwoScaleParams{}, 3);
    auto a = dk::optimize(*se_in_se(1, 1, 1, 1), data, 3, 41, 120);
    auto b = dk::optimize(*se_in_se(1, 1, 1, 1), data, 3, 41, 120);
    CHECK(dk::fit_report_json(a) == dk::fit_report_json(b));

    auto c = dk::optimize(*se_in_se(1, 1, 1, 1), data, 3, 42, 120);
    CHECK(dk::fit_report_json(a) != dk::fit_report_json(c));
}

TEST_CASE("every restart descends from its initial point") {
    Dataset data = dk::gen_from_kernel(*KernelSpec::leaf(BaseKernel::se(1.0, 1.0)), 60, 0.2, 5);
    auto report = dk::optimize(*KernelSpec::leaf(BaseKernel::se(1, 1)), data, 6, 7, 200);
    for (const auto& r : report.per_restart) {
        HyperVector hv;
        hv.names = report.best.names;
        hv.log_values = r.init_log;
        double noise = 0.0;
        auto spec0 = dk::apply_hyper(*KernelSpec::leaf(BaseKernel::se(1, 1)), hv, &noise);
        double lml0 = -1e300;
        try {
            lml0 = lml_of(spec0, noise, data);
        } catch (const dk::numerical_error&) {
            // A start this extreme counts as -inf; any finite end descends.
        }
        if (std::isfinite(lml0)) {
            CHECK(r.lml >= lml0 - 1e-9);
        }
        CHECK(r.iterations > 0);
    }
}

TEST_CASE("chi_at_best matches chi of the winning spec") {
    Dataset data = dk::gen_two_scale(dk::TwoScaleParams{}, 11);
    auto report = dk::optimize(*se_in_se(1, 1, 1, 1), data, 2, 13, 150);
    REQUIRE(report.chi_at_best.has_value());
    CHECK(*report.chi_at_best == doctest::Approx(dk::chi(*report.best_spec)).epsilon(1e-15));

    auto leaf_report =
        dk::optimize(*KernelSpec::leaf(BaseKernel::se(1, 1)), data, 2, 13, 150);
    CHECK_FALSE(leaf_report.chi_at_best.has_value());
}

TEST_CASE("profile_lml traces the noise likelihood on pure noise") {
    Dataset data = dk::gen_pure_noise(120, 0.2, 29);
    std::vector<double> grid;
    for (double g = 0.005; g <= 0.2001; g += 0.005) grid.push_back(g);
    auto curve = dk::profile_lml(*KernelSpec::leaf(BaseKernel::constant(1e-3)), 0.04, data,
                                 "noise", grid);
    REQUIRE(curve.grid.size() == grid.size());
    REQUIRE(curve.lml.size() == grid.size());

    // With a negligible kernel the LML is maximized near the sample variance
    // of the targets (about 0.04 for sd 0.2).
    std::size_t arg = 0;
    for (std::size_t i = 1; i < curve.lml.size(); ++i)
        if (curve.lml[i] > curve.lml[arg]) arg = i;
    CHECK(curve.grid[arg] == doctest::Approx(data.y.squaredNorm() / data.y.size()).epsilon(0.35));

    // A single-point grid reduces to one LML evaluation.
    auto single = dk::profile_lml(*KernelSpec::leaf(BaseKernel::constant(1e-3)), 0.04, data,
                                  "noise", {0.05});
    CHECK(single.lml[0] ==
          doctest::Approx(lml_of(KernelSpec::leaf(BaseKernel::constant(1e-3)), 0.05, data))
              .epsilon(1e-14));

    CHECK_THROWS_AS(dk::profile_lml(*KernelSpec::leaf(BaseKernel::constant(1e-3)), 0.04, data,
                                    "l9.sigma", {0.05}),
                    dk::invalid_argument_error);
}

TEST_CASE("fit report JSON round trips through the parser") {
    Dataset data = dk::gen_from_kernel(*KernelSpec::leaf(BaseKernel::se(1.0, 1.0)), 40, 0.2, 19);
    auto report = dk::optimize(*se_in_se(1, 1, 1, 1), data, 2, 23, 100);
    std::string text = dk::fit_report_json(report);

    auto loaded = dk::fit_report_parse(text);
    CHECK(loaded.best_lml == doctest::Approx(report.best_lml).epsilon(1e-15));
    CHECK(loaded.noise_variance == doctest::Approx(report.best_noise).epsilon(1e-15));
    CHECK(dk::to_json(*loaded.spec) == dk::to_json(*report.best_spec));

    // The report is self-contained: predictions from the parsed spec match
    // predictions from the in-memory result.
    dk::GPModel m1{report.best_spec, report.best_noise, data};
    dk::GPModel m2{loaded.spec, loaded.noise_variance, data};
    auto p1 = dk::posterior_predict(m1, data.X.topRows(5));
    auto p2 = dk::posterior_predict(m2, data.X.topRows(5));
    CHECK((p1.mean - p2.mean).cwiseAbs().maxCoeff() == 0.0);

    CHECK_THROWS_AS(dk::fit_report_parse("{}"), dk::validation_error);
    CHECK_THROWS_AS(dk::fit_report_parse("not json"), dk::validation_error);
}
