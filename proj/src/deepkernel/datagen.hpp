#pragma once

#include <cstdint>

#include "deepkernel/gp.hpp"

namespace dk {

// Synthetic 1-D regression datasets. Every generator is a pure function of
// its arguments and the seed.

struct TwoScaleParams {
    int n = 100;
    double x_lo = 0.0, x_hi = 10.0;
    double long_sigma = 1.0, long_ell = 2.0;   // slow component
    double short_sigma = 0.3, short_ell = 0.3; // fast component
    double noise_sd = 0.05;
};

// Sum of two independent SE prior draws at sorted uniform inputs, plus
// Gaussian observation noise. short_sigma = 0 degenerates to a single-scale
// SE dataset.
Dataset gen_two_scale(const TwoScaleParams& params, std::uint64_t seed);

// y ~ N(0, sd^2) at n evenly spaced grid inputs; the regression target is
// the zero function.
Dataset gen_pure_noise(int n, double sd, std::uint64_t seed, double x_lo = 0.0,
                       double x_hi = 1.0);

// One prior draw from an arbitrary spec at sorted uniform inputs, plus
// noise.
Dataset gen_from_kernel(const KernelSpec& spec, int n, double noise_sd,
                        std::uint64_t seed, double x_lo = 0.0, double x_hi = 10.0);

}  // namespace dk
