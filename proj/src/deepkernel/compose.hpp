#pragma once

#include <memory>
#include <string>

#include "deepkernel/kernel.hpp"

namespace dk {

// A deep kernel is a tree: a base-kernel leaf, or a wrap node that turns an
// inner kernel into the exact second moment of a GP layer driven by it.
//
// Each wrap consumes only the inner values (k_ii, k_jj, k_ij) for the point
// pair at hand, never a full Gram matrix; composition is therefore O(depth)
// per pair. The transforms, with (σ, ℓ, α, β) the wrap's own parameters:
//
//   SE wrap   σ² [1 + (k_ii + k_jj − 2 k_ij)/ℓ²]^{−1/2}
//   NuN wrap  σ² [1 + α(k_ii + k_jj) − 2β k_ij + (α²−β²)(k_ii k_jj − k_ij²)]^{−1/2}
//   SC wrap   (σ²/2) [1 + exp((2 k_ij − k_ii − k_jj)/2ℓ²)]
//
// ThreeLayerErf is the erf-based approximation for a three-layer stack with
// SE second and third layers: it consumes a first-layer leaf evaluation
// directly and encodes both outer layers in one node (parameters sigma3,
// ell3, sigma2, ell2), so it may only wrap a leaf.

enum class WrapKind { SE, SC, NuN, ThreeLayerErf };

struct InnerEval {
    double k_ii = 0.0;
    double k_jj = 0.0;
    double k_ij = 0.0;
};

// Throws validation_error if the 2x2 matrix [[k_ii,k_ij],[k_ij,k_jj]] is not
// PSD beyond roundoff slack.
void validate(const InnerEval& inner);

struct WrapParams {
    double sigma = 1.0;  // for ThreeLayerErf this is sigma3
    double ell = 1.0;    // for ThreeLayerErf this is ell3
    double alpha = 1.0;  // NuN
    double beta = 0.5;   // NuN
    double sigma2 = 1.0; // ThreeLayerErf only
    double ell2 = 1.0;   // ThreeLayerErf only
};

struct KernelSpec;
using SpecPtr = std::shared_ptr<const KernelSpec>;

struct KernelSpec {
    // Exactly one of the two shapes: leaf (inner == nullptr) or wrap.
    bool is_leaf = true;
    BaseKernel base;     // leaf payload
    WrapKind outer = WrapKind::SE;
    WrapParams params;   // wrap payload
    SpecPtr inner;

    static SpecPtr leaf(const BaseKernel& k);
    static SpecPtr wrap(WrapKind outer, const WrapParams& p, SpecPtr inner);
    static SpecPtr wrap_se(double sigma, double ell, SpecPtr inner);
    static SpecPtr wrap_sc(double sigma, double ell, SpecPtr inner);
    static SpecPtr wrap_nun(double sigma, double alpha, double beta, SpecPtr inner);
    static SpecPtr three_layer_erf(double sigma3, double ell3, double sigma2, double ell2,
                                   SpecPtr leaf_inner);
};

// Validates the whole tree (positivity, alpha > beta, erf-over-leaf rule).
void validate(const KernelSpec& spec);

int depth(const KernelSpec& spec);
int wrap_count(const KernelSpec& spec);

// One wrap transform applied to an inner pair evaluation (SE, SC, NuN only;
// ThreeLayerErf goes through eval_three_layer_erf). Result lies in (0, σ²].
double wrap_outer(WrapKind outer, const WrapParams& p, const InnerEval& inner);

// Erf-based three-layer value from a first-layer pair evaluation:
//   v = ell2 / sqrt(2 (k_ii − k_ij))
//   value = σ3²/sqrt(1 + 2 σ2²/ℓ3²) · (1 − erf v) + σ3² · erf v
// The coincident limit k_ij → k_ii returns σ3² analytically (v → ∞).
// Throws validation_error if k_ij > k_ii.
double eval_three_layer_erf(const WrapParams& p, const InnerEval& inner);

// Effective kernel value k_eff(x, y) for the whole tree. The (k_xx, k_yy,
// k_xy) triple is propagated bottom-up through the wraps; the x-x and y-y
// components follow the coincident form of each transform, which is exactly
// what three recursive evaluations at (x,x), (y,y), (x,y) would produce.
double eval_effective(const KernelSpec& spec, const InputPoint& x, const InputPoint& y);

// k_eff(x, x) without forming the pair twice.
double eval_effective_diag(const KernelSpec& spec, const InputPoint& x);

// All three components at once (used by the moment oracles).
InnerEval eval_effective_pair(const KernelSpec& spec, const InputPoint& x, const InputPoint& y);

// Expressivity parameter: the derivative of the normalized output kernel
// with respect to the normalized innermost kernel value at coincidence,
//   chi = d(k_eff/σ_out²) / d(k/σ_in²)  at  k = σ_in².
// Pure-SE wrap chains use the closed form (product of σ_inner²/ℓ_outer² over
// wrap layers); anything else falls back to a one-sided backward finite
// difference with step 1e−6·σ_in², since k = σ_in² is the boundary of the
// PSD domain. Throws invalid_argument_error for a leaf-only spec.
double chi(const KernelSpec& spec);

// E[(df/dx)²]-style curvature diagnostic for 1-D inputs: the limit
//   2 (k_eff(at,at) − k_eff(at−ε/2, at+ε/2)) / ε²
// computed by Richardson extrapolation over shrinking ε. Throws
// numerical_error if the sequence does not behave like a smooth O(ε²)
// family (non-smooth kernel at coincidence).
double expected_sq_derivative(const KernelSpec& spec, const InputPoint& at);

// JSON exchange format, used by the CLI and by FitReport:
//   leaf: {"kind":"leaf","base":"SE","params":{"sigma":..,"ell":..}}
//   wrap: {"kind":"wrap","outer":"SE","params":{..},"inner":{..}}
// Outer names: "SE", "SC", "NuN", "ErfSESESE".
std::string to_json(const KernelSpec& spec, int indent = -1);
SpecPtr spec_from_json(const std::string& text);

// Compact human-readable label, e.g. "SE[SE]" or "NuN[SE]".
std::string describe(const KernelSpec& spec);

}  // namespace dk
