#pragma once

#include <Eigen/Core>
#include <string>

namespace dk {

// A single-layer covariance function on R^D.
//
// Kinds and closed forms (sigma, ell, alpha, beta all strictly positive):
//   SE     sigma^2 exp(-|x-y|^2 / 2 ell^2)
//   SC     sigma^2 cos^2(|x-y| / 2 ell)
//   Lin    sigma^2 (x . y)
//   NuN    sigma^2 exp(-(alpha|x|^2 - 2 beta x.y + alpha|y|^2) / 2), alpha > beta
//   Const  sigma^2
//
// SC and NuN act on scalar latent layers in the compositions; for D > 1 the
// scalar difference / products are replaced by |x-y| and norms so symmetry
// is preserved and D = 1 reproduces the scalar definitions exactly.
enum class BaseKind { SE, SC, Lin, NuN, Const };

struct BaseKernel {
    BaseKind kind = BaseKind::SE;
    double sigma = 1.0;
    double ell = 1.0;    // SE, SC
    double alpha = 1.0;  // NuN
    double beta = 0.5;   // NuN

    static BaseKernel se(double sigma, double ell) { return {BaseKind::SE, sigma, ell, 1, 0.5}; }
    static BaseKernel sc(double sigma, double ell) { return {BaseKind::SC, sigma, ell, 1, 0.5}; }
    static BaseKernel lin(double sigma) { return {BaseKind::Lin, sigma, 1, 1, 0.5}; }
    static BaseKernel nun(double sigma, double alpha, double beta) {
        return {BaseKind::NuN, sigma, 1, alpha, beta};
    }
    static BaseKernel constant(double sigma) { return {BaseKind::Const, sigma, 1, 1, 0.5}; }
};

using InputPoint = Eigen::VectorXd;

// Throws validation_error for nonpositive parameters or NuN with alpha <= beta.
void validate(const BaseKernel& kernel);

double eval_base(const BaseKernel& kernel, const InputPoint& x, const InputPoint& y);

// Fast path for k(x,x): sigma^2 for SE/SC/Const, sigma^2 |x|^2 for Lin,
// sigma^2 exp(-(alpha-beta)|x|^2) for NuN. Always equals eval_base(k,x,x).
double diag_value(const BaseKernel& kernel, const InputPoint& x);

const char* base_kind_name(BaseKind kind);
BaseKind base_kind_from_name(const std::string& name);

}  // namespace dk
