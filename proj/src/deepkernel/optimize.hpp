#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "deepkernel/gp.hpp"

namespace dk {

// Trainable parameters of a GP model, stored in log space. Names follow the
// layer order from the inside out: "l1.*" is the leaf, "l2.*" the first wrap
// above it, and so on; the observation-noise variance is "noise". A
// ThreeLayerErf node contributes two layers (its sigma2/ell2 pair, then its
// sigma3/ell3 pair), matching the two GP layers it encodes.
struct HyperVector {
    std::vector<std::string> names;
    Eigen::VectorXd log_values;
};

HyperVector hyper_vector_of(const KernelSpec& spec, double noise_variance);

// Rebuilds a spec shaped like the template with parameters exp(log_values);
// the "noise" entry is returned through noise_out. Throws
// invalid_argument_error if the vector does not match the template.
SpecPtr apply_hyper(const KernelSpec& templ, const HyperVector& hv, double* noise_out);

struct RestartRecord {
    Eigen::VectorXd init_log;
    Eigen::VectorXd final_log;
    double lml = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct FitReport {
    HyperVector best;
    double best_lml = 0.0;
    std::vector<RestartRecord> per_restart;
    std::optional<double> chi_at_best;  // absent for leaf-only specs
    std::uint64_t seed = 0;
    int restarts = 0;
    int budget = 0;
    SpecPtr best_spec;
    double best_noise = 0.0;
};

// Multi-restart maximum marginal likelihood. Each restart draws its initial
// log parameters uniformly from (-10, 10), then runs Nelder-Mead simplex
// descent on the negative LML (reflection 1, expansion 2, contraction 0.5,
// shrink 0.5) until the simplex infinity-norm diameter drops below 1e-6 or
// the evaluation budget is exhausted. A restart that converges onto a
// non-finite plateau is re-launched once from a 0.5-perturbed point. Results
// are deterministic in (seed, restarts, budget) and independent of restart
// execution order. Throws numerical_error if no restart reaches a finite LML.
FitReport optimize(const KernelSpec& templ, const Dataset& data, int restarts,
                   std::uint64_t seed, int budget = 1000);

// LML along a grid for one named parameter, others held at the template's
// values; interior local maxima are reported by grid index.
struct ProfileCurve {
    std::vector<double> grid;  // natural (not log) parameter values
    std::vector<double> lml;
    std::vector<int> maxima;
};
ProfileCurve profile_lml(const KernelSpec& templ, double noise_variance,
                         const Dataset& data, const std::string& param_name,
                         const std::vector<double>& grid);

// FitReport as a self-contained JSON document (includes the optimized
// kernel spec, so predict can run from the report alone).
std::string fit_report_json(const FitReport& report, int indent = 2);
// Parses the "kernel" and "noise_variance" fields back out of a report.
struct LoadedFit {
    SpecPtr spec;
    double noise_variance = 0.0;
    double best_lml = 0.0;
};
LoadedFit fit_report_parse(const std::string& json_text);

}  // namespace dk
