#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "deepkernel/compose.hpp"

namespace dk {

// Exact Gaussian moment formulas, a ground-truth ancestral sampler for deep
// kernels, and Monte-Carlo estimators that check the analytic results.
//
// Conventions. For h ~ N(v, K):
//   E[exp(-1/2 h^T J h)] = exp(-1/2 v^T A v) / sqrt|I + KJ|, A = J (I+KJ)^{-1}
//   E[exp(u.h)]          = exp(u.v + 1/2 u^T K u)
// Pair specializations (i, j indices into K):
//   E[exp(-(h_i-h_j)^2 / 2l^2)]  = [1 + (k_ii+k_jj-2k_ij)/l^2]^{-1/2}
//   E[cos((h_i-h_j)/l)]          = cos((v_i-v_j)/l) exp((2k_ij-k_ii-k_jj)/2l^2)
// Quartet joints (zero mean), with D_ab = k_aa+k_bb-2k_ab:
//   E[exp(-(h_i-h_j)^2/2l^2 - (h_m-h_l)^2/2l^2)]
//       = [G_ij G_ml - V]^{-1/2},
//         G_ab = 1 + D_ab/l^2,  V = ((k_im+k_jl-k_il-k_jm)/l^2)^2
//   (the rank-2 determinant identity det(I + K(uu^T+ww^T)s)
//    = (1+s u^T K u)(1+s w^T K w) - (s u^T K w)^2 fixes V's scale; the
//    Monte-Carlo oracle and the degenerate quartet case both confirm it)
//   E[cos((h_i-h_j)/l) cos((h_m-h_l)/l)]
//       = exp(-D_ij/2l^2) exp(-D_ml/2l^2) cosh((k_im-k_il-k_jm+k_jl)/l^2)
//   (average of the four sign combinations of the complex exponentials;
//    cosh >= 1 gives the joint >= product-of-pairs inequality)

struct MvnSpec {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

void validate(const MvnSpec& mvn);

struct MomentEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::int64_t n_samples = 0;
    std::uint64_t seed = 0;
};

struct QuartetIndices {
    int i = 0, j = 0, m = 0, l = 0;
};

// E[exp(-1/2 h^T J h)], h ~ mvn. Throws numerical_error when |I + KJ| <= 0
// (the integral diverges; J is too negative for this covariance).
double gauss_quadratic_expectation(const MvnSpec& mvn, const Eigen::MatrixXd& J);

// E[exp(u.h)], h ~ mvn.
double gauss_linear_expectation(const MvnSpec& mvn, const Eigen::VectorXd& u);

// E[cos((h_i - h_j)/l)] for a 2-D mvn (i=0, j=1).
double sc_pair_expectation(const MvnSpec& mvn, double ell);

// Quartet joint expectations over h ~ N(0, K4); see the header comment.
double fourth_moment_se_pairing(const Eigen::MatrixXd& K4, double ell,
                                const QuartetIndices& q);
double fourth_moment_sc_pairing(const Eigen::MatrixXd& K4, double ell,
                                const QuartetIndices& q);

// Sum over the three pair partitions of (i,j,m,l):
//   joint(i,j,m,l) + joint(i,m,j,l) + joint(i,l,j,m).
// With joint(a,b,c,d) = k_ab k_cd this is the Gaussian fourth moment.
double isserlis_fourth(const std::function<double(int, int, int, int)>& pair_joint,
                       const QuartetIndices& q);

// Direct simulation of the layered process: h ~ N(inner_mean, K_leaf(X)),
// then one gram-and-draw per wrap layer, innermost first (each wrap kind
// acts on the scalar latents as the base kernel of the same kind and
// parameters). Returns n rows of final-layer values at the points X.
// Replicate r consumes only stream r of the seed, so results do not depend
// on batching. Depth is limited to 3 layers; ThreeLayerErf has no sampling
// form and is rejected.
Eigen::MatrixXd ancestral_sample(const KernelSpec& spec, const Eigen::MatrixXd& X,
                                 int n, std::uint64_t seed, double inner_mean = 0.0);

// Streaming MC estimate of E[f(x) f(y)] under the layered process.
MomentEstimate mc_pair_moment(const KernelSpec& spec, const InputPoint& x,
                              const InputPoint& y, std::int64_t n, std::uint64_t seed);

// Streaming MC estimate of E[f_i f_j f_m f_l] on the points X.
MomentEstimate mc_quartet_moment(const KernelSpec& spec, const Eigen::MatrixXd& X,
                                 const QuartetIndices& q, std::int64_t n,
                                 std::uint64_t seed);

// Fourth-moment comparison between the layered process p and the moment-
// matched Gaussian q, for every index multiset {i<=j<=m<=l} over X.
//
//   analytic_p  exact fourth moment of p (Isserlis over quartet joints)
//   analytic_q  Gaussian fourth moment of q (Isserlis over pair products)
//   margin      analytic_p - analytic_q (heavy-tail excess, >= 0)
//   mc_value    ancestral MC estimate of the same moment, with std error
//
// The *_single columns repeat both under the alternate pairing-count
// convention in which the two cross pairings enter with combined weight
// one; coincident-pair quartets reduce there to 1 + (k^2) instead of
// 1 + 2(k^2). Reported for comparability, not used in the pass/fail.
struct HeavyTailRow {
    QuartetIndices q;
    double analytic_p = 0.0;
    double analytic_q = 0.0;
    double mc_value = 0.0;
    double mc_stderr = 0.0;
    double margin = 0.0;
    double analytic_p_single = 0.0;
    double analytic_q_single = 0.0;
    bool margin_ok = false;
    bool oracle_ok = false;
};

struct HeavyTailReport {
    std::vector<HeavyTailRow> rows;
    std::int64_t n_samples = 0;
    std::uint64_t seed = 0;
    bool all_ok = false;
    std::string to_csv() const;  // header + one row per quartet
};

// corrupt_delta shifts every analytic_p before comparison; it exists so the
// harness can prove that a wrong analytic value actually fails the report.
HeavyTailReport heavy_tail_report(const KernelSpec& spec, const Eigen::MatrixXd& X,
                                  std::int64_t n, std::uint64_t seed,
                                  double corrupt_delta = 0.0);

// Second-moment oracle: analytic effective kernel vs ancestral MC pair
// covariance at each index pair, within tolerance_se standard errors.
struct PairOracleRow {
    int i = 0, j = 0;
    double analytic = 0.0;
    double mc_value = 0.0;
    double mc_stderr = 0.0;
    bool ok = false;
};
std::vector<PairOracleRow> second_moment_oracle(const KernelSpec& spec,
                                                const Eigen::MatrixXd& X,
                                                std::int64_t n, std::uint64_t seed,
                                                double tolerance_se = 4.0);

// Sign-flip invariance of the layered joint density: for each trial, draw
// (latents, outputs), then compare the joint log density against the one
// with all latent layers negated. True iff every trial matches to 1e-10
// relative. A nonzero inner_mean breaks the symmetry by construction.
bool sign_flip_symmetry_check(const KernelSpec& spec, const Eigen::MatrixXd& X,
                              int trials, std::uint64_t seed, double inner_mean = 0.0);

}  // namespace dk
