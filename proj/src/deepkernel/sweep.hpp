#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deepkernel/csv.hpp"
#include "deepkernel/optimize.hpp"
#include "deepkernel/rng.hpp"

namespace dk {

// Expressivity sweep: draw datasets from a list of generator kernels with
// randomized hyperparameters, fit the three-layer recursion SE[SE[SE]] to
// each, and record every restart's final log marginal likelihood together
// with the log expressivity of the parameters that restart reached. The
// scatter of (log chi, final LML) pairs is the product; plotting is left to
// the caller.

struct ChiSweepConfig {
    std::vector<SpecPtr> generators;  // empty means default_sweep_generators()
    int n_points = 150;
    int draws_per_generator = 3;
    int restarts = 20;
    // Evaluations per restart. The scatter is only meaningful if each restart
    // actually reaches a local optimum; 300-ish budgets leave endpoints
    // scattered at whatever mid-descent parameters the cap hit.
    int budget = 3000;
    double noise_sd = 0.1;  // observation noise added to each draw
    double x_lo = 0.0, x_hi = 10.0;
    std::uint64_t seed = 0;
};

struct ChiSweepRow {
    std::string generator_kernel;  // label of the data-generating spec
    std::uint64_t draw_seed;       // seed that regenerates the dataset
    int restart = 0;
    double final_lml = 0.0;
    double log_chi = 0.0;  // log chi of the spec this restart converged to
};

// Data generators for the default sweep: the single-wrap compositions whose
// effective kernels are aperiodic (inner SC kernels are excluded because
// they compose to periodic covariances).
std::vector<SpecPtr> default_sweep_generators();

// Generators whose effective kernel has squared-exponential-type locality
// (outer SE or NuN wrap). The SC-outer family shows a shifted transition and
// is kept out of aggregate statistics.
bool se_family_generator(const std::string& label);

// A copy of the spec with every parameter scaled by an independent
// log-uniform factor in [1/2, 2] (pre-order walk, outer parameters before
// inner). A NuN node redraws beta as alpha times uniform(0.3, 0.8) so the
// alpha > beta constraint survives the perturbation.
SpecPtr randomize_spec(const KernelSpec& spec, RandomStream& rs);

// Seed layout: draw q (generator index * draws_per_generator + draw) uses
// seed + 2q for hyperparameter randomization and data generation and
// seed + 2q + 1 for the fit, so no stream is shared between the two stages.
std::vector<ChiSweepRow> chi_sweep(const ChiSweepConfig& config);

CsvTable chi_sweep_table(const std::vector<ChiSweepRow>& rows);

}  // namespace dk
