#include "deepkernel/compose.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include <json.hpp>

#include "deepkernel/errors.hpp"

namespace dk {

using nlohmann::json;

void validate(const InnerEval& inner) {
    if (!std::isfinite(inner.k_ii) || !std::isfinite(inner.k_jj) || !std::isfinite(inner.k_ij)) {
        throw validation_error("inner kernel evaluation is not finite");
    }
    if (inner.k_ii < 0.0 || inner.k_jj < 0.0) {
        throw validation_error("inner kernel diagonal is negative");
    }
    // Allow a little roundoff slack on the 2x2 PSD condition.
    const double det = inner.k_ii * inner.k_jj - inner.k_ij * inner.k_ij;
    const double scale = std::max(inner.k_ii * inner.k_jj, 1e-300);
    if (det < -1e-12 * scale) {
        throw validation_error("inner kernel pair violates 2x2 positive semidefiniteness");
    }
}

SpecPtr KernelSpec::leaf(const BaseKernel& k) {
    auto s = std::make_shared<KernelSpec>();
    s->is_leaf = true;
    s->base = k;
    return s;
}

SpecPtr KernelSpec::wrap(WrapKind outer, const WrapParams& p, SpecPtr inner) {
    auto s = std::make_shared<KernelSpec>();
    s->is_leaf = false;
    s->outer = outer;
    s->params = p;
    s->inner = std::move(inner);
    return s;
}

SpecPtr KernelSpec::wrap_se(double sigma, double ell, SpecPtr inner) {
    WrapParams p;
    p.sigma = sigma;
    p.ell = ell;
    return wrap(WrapKind::SE, p, std::move(inner));
}

SpecPtr KernelSpec::wrap_sc(double sigma, double ell, SpecPtr inner) {
    WrapParams p;
    p.sigma = sigma;
    p.ell = ell;
    return wrap(WrapKind::SC, p, std::move(inner));
}

SpecPtr KernelSpec::wrap_nun(double sigma, double alpha, double beta, SpecPtr inner) {
    WrapParams p;
    p.sigma = sigma;
    p.alpha = alpha;
    p.beta = beta;
    return wrap(WrapKind::NuN, p, std::move(inner));
}

SpecPtr KernelSpec::three_layer_erf(double sigma3, double ell3, double sigma2, double ell2,
                                    SpecPtr leaf_inner) {
    WrapParams p;
    p.sigma = sigma3;
    p.ell = ell3;
    p.sigma2 = sigma2;
    p.ell2 = ell2;
    return wrap(WrapKind::ThreeLayerErf, p, std::move(leaf_inner));
}

void validate(const KernelSpec& spec) {
    if (spec.is_leaf) {
        validate(spec.base);
        return;
    }
    if (!spec.inner) {
        throw validation_error("wrap node has no inner kernel");
    }
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw validation_error(std::string("wrap parameter '") + name +
                                   "' must be a positive finite real");
        }
    };
    positive(spec.params.sigma, "sigma");
    switch (spec.outer) {
        case WrapKind::SE:
        case WrapKind::SC:
            positive(spec.params.ell, "ell");
            break;
        case WrapKind::NuN:
            positive(spec.params.alpha, "alpha");
            positive(spec.params.beta, "beta");
            if (!(spec.params.alpha > spec.params.beta)) {
                throw validation_error("NuN wrap requires alpha > beta > 0");
            }
            break;
        case WrapKind::ThreeLayerErf:
            positive(spec.params.ell, "ell3");
            positive(spec.params.sigma2, "sigma2");
            positive(spec.params.ell2, "ell2");
            if (!spec.inner->is_leaf) {
                throw validation_error(
                    "ThreeLayerErf already encodes two outer layers and may only wrap a leaf");
            }
            break;
    }
    validate(*spec.inner);
}

int depth(const KernelSpec& spec) {
    if (spec.is_leaf) return 1;
    // The erf node stands for two stacked SE layers.
    const int own = spec.outer == WrapKind::ThreeLayerErf ? 2 : 1;
    return own + depth(*spec.inner);
}

int wrap_count(const KernelSpec& spec) {
    return spec.is_leaf ? 0 : 1 + wrap_count(*spec.inner);
}

double wrap_outer(WrapKind outer, const WrapParams& p, const InnerEval& inner) {
    validate(inner);
    const double s2 = p.sigma * p.sigma;
    switch (outer) {
        case WrapKind::SE: {
            const double arg = 1.0 + (inner.k_ii + inner.k_jj - 2.0 * inner.k_ij) /
                                         (p.ell * p.ell);
            return s2 / std::sqrt(arg);
        }
        case WrapKind::NuN: {
            const double det = inner.k_ii * inner.k_jj - inner.k_ij * inner.k_ij;
            const double arg = 1.0 + p.alpha * (inner.k_ii + inner.k_jj) -
                               2.0 * p.beta * inner.k_ij +
                               (p.alpha * p.alpha - p.beta * p.beta) * std::max(det, 0.0);
            return s2 / std::sqrt(arg);
        }
        case WrapKind::SC: {
            const double e = (2.0 * inner.k_ij - inner.k_ii - inner.k_jj) /
                             (2.0 * p.ell * p.ell);
            return 0.5 * s2 * (1.0 + std::exp(e));
        }
        case WrapKind::ThreeLayerErf:
            throw invalid_argument_error(
                "ThreeLayerErf is evaluated via eval_three_layer_erf, not wrap_outer");
    }
    throw invalid_argument_error("unknown wrap kind");
}

double eval_three_layer_erf(const WrapParams& p, const InnerEval& inner) {
    validate(inner);
    const double s3sq = p.sigma * p.sigma;
    const double gap = inner.k_ii - inner.k_ij;
    const double scale = std::max(inner.k_ii, 1e-300);
    if (gap < -1e-12 * scale) {
        throw validation_error("three-layer erf form requires k_ij <= k_ii");
    }
    // Coincident limit: v -> infinity, erf(v) -> 1, value -> sigma3^2.
    if (gap <= 0.0) return s3sq;
    const double v = p.ell2 / std::sqrt(2.0 * gap);
    const double e = std::erf(v);
    const double saturated = s3sq / std::sqrt(1.0 + 2.0 * p.sigma2 * p.sigma2 /
                                                        (p.ell * p.ell));
    return saturated * (1.0 - e) + s3sq * e;
}

namespace {

// Apply one node's transform to a full (k_xx, k_yy, k_xy) triple. The
// diagonal components use the transform at a coincident pair, e.g.
// (k_xx, k_xx, k_xx), matching what independent recursive evaluations at
// (x,x) and (y,y) would return.
InnerEval lift_triple(const KernelSpec& node, const InnerEval& in) {
    InnerEval out;
    if (node.outer == WrapKind::ThreeLayerErf) {
        out.k_ii = eval_three_layer_erf(node.params, {in.k_ii, in.k_ii, in.k_ii});
        out.k_jj = eval_three_layer_erf(node.params, {in.k_jj, in.k_jj, in.k_jj});
        out.k_ij = eval_three_layer_erf(node.params, in);
    } else {
        out.k_ii = wrap_outer(node.outer, node.params, {in.k_ii, in.k_ii, in.k_ii});
        out.k_jj = wrap_outer(node.outer, node.params, {in.k_jj, in.k_jj, in.k_jj});
        out.k_ij = wrap_outer(node.outer, node.params, in);
    }
    return out;
}

InnerEval eval_triple(const KernelSpec& spec, const InputPoint& x, const InputPoint& y) {
    if (spec.is_leaf) {
        return {diag_value(spec.base, x), diag_value(spec.base, y),
                eval_base(spec.base, x, y)};
    }
    return lift_triple(spec, eval_triple(*spec.inner, x, y));
}

}  // namespace

double eval_effective(const KernelSpec& spec, const InputPoint& x, const InputPoint& y) {
    return eval_triple(spec, x, y).k_ij;
}

double eval_effective_diag(const KernelSpec& spec, const InputPoint& x) {
    if (spec.is_leaf) return diag_value(spec.base, x);
    InnerEval t = eval_triple(*spec.inner, x, x);
    return lift_triple(spec, t).k_ij;
}

InnerEval eval_effective_pair(const KernelSpec& spec, const InputPoint& x, const InputPoint& y) {
    return eval_triple(spec, x, y);
}

namespace {

// Collect wrap nodes from the outside in; chain.back() touches the leaf.
std::vector<const KernelSpec*> wrap_chain(const KernelSpec& spec) {
    std::vector<const KernelSpec*> chain;
    const KernelSpec* node = &spec;
    while (!node->is_leaf) {
        chain.push_back(node);
        node = node->inner.get();
    }
    return chain;
}

const BaseKernel& innermost_leaf(const KernelSpec& spec) {
    const KernelSpec* node = &spec;
    while (!node->is_leaf) node = node->inner.get();
    return node->base;
}

// Push an inner triple with perturbed k_ij through the wrap stack above the
// leaf; returns the top-level (k_xx, k_yy, k_xy).
InnerEval push_through_wraps(const std::vector<const KernelSpec*>& chain, InnerEval t) {
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
        t = lift_triple(**it, t);
    }
    return t;
}

}  // namespace

double chi(const KernelSpec& spec) {
    if (spec.is_leaf) {
        throw invalid_argument_error("chi is defined only for specs with a wrap layer");
    }
    validate(spec);
    const auto chain = wrap_chain(spec);

    bool all_se = true;
    for (const KernelSpec* n : chain) {
        if (n->outer != WrapKind::SE) {
            all_se = false;
            break;
        }
    }
    if (all_se) {
        // For an SE wrap the normalized derivative at coincidence is
        // sigma_inner^2 / ell_outer^2; layers multiply.
        double result = 1.0;
        for (std::size_t i = 0; i < chain.size(); ++i) {
            const double sigma_inner = (i + 1 < chain.size())
                                           ? chain[i + 1]->params.sigma
                                           : innermost_leaf(spec).sigma;
            const double ell_outer = chain[i]->params.ell;
            result *= (sigma_inner * sigma_inner) / (ell_outer * ell_outer);
        }
        return result;
    }

    // Finite difference on the wrap chain as a function of the innermost
    // kernel value k, holding the inner diagonal fixed at sigma_in^2.
    const double sin2 = innermost_leaf(spec).sigma * innermost_leaf(spec).sigma;
    const double h = 1e-6 * sin2;
    auto top = [&](double k_ij) {
        return push_through_wraps(chain, {sin2, sin2, k_ij}).k_ij;
    };
    const double sout2 = push_through_wraps(chain, {sin2, sin2, sin2}).k_ii;

    // With both diagonals pinned at sigma_in^2, PSD restricts k_ij to
    // [-sigma_in^2, sigma_in^2], so k = sigma_in^2 is the right endpoint of
    // the domain for every wrap kind. Use a second-order backward difference.
    const double dk =
        (3.0 * top(sin2) - 4.0 * top(sin2 - h) + top(sin2 - 2.0 * h)) / (2.0 * h);
    return dk * sin2 / sout2;
}

double expected_sq_derivative(const KernelSpec& spec, const InputPoint& at) {
    if (at.size() != 1) {
        throw invalid_argument_error("expected_sq_derivative requires 1-D inputs");
    }
    validate(spec);

    // Step sizes scale with the innermost length scale when there is one, so
    // the probe separations sit well inside the kernel's smooth core.
    const BaseKernel& leaf = innermost_leaf(spec);
    const double scale =
        (leaf.kind == BaseKind::SE || leaf.kind == BaseKind::SC) ? leaf.ell : 1.0;

    const double k0 = eval_effective_diag(spec, at);
    auto g = [&](double eps) {
        InputPoint a = at, b = at;
        a[0] -= 0.5 * eps;
        b[0] += 0.5 * eps;
        return 2.0 * (k0 - eval_effective(spec, a, b)) / (eps * eps);
    };

    // Three shrinking separations; for a C^4 kernel g(eps) = L + c eps^2 +
    // O(eps^4), so successive differences shrink ~4x and one Richardson step
    // cancels the eps^2 term.
    const double e0 = 1e-3 * scale;
    const double g0 = g(e0);
    const double g1 = g(0.5 * e0);
    const double g2 = g(0.25 * e0);
    const double d01 = g0 - g1;
    const double d12 = g1 - g2;
    const double ref = std::abs(g2);
    // Each g is a k0-sized cancellation divided by eps^2, so roundoff alone
    // contributes about machine-eps * k0 / eps^2 to the differences. Below
    // that level the sequence carries no curvature information (a genuine
    // cusp sits orders of magnitude above it) and g2 is already converged,
    // so the ratio test would only be judging noise.
    const double eps_min = 0.25 * e0;
    const double noise_floor = 256.0 * std::numeric_limits<double>::epsilon() *
                               std::max(std::abs(k0), 1e-300) / (eps_min * eps_min);
    if (std::abs(d12) > std::max(1e-8 * std::max(ref, 1e-300), noise_floor)) {
        const double ratio = d01 / d12;
        if (!(ratio > 2.0 && ratio < 8.0)) {
            throw numerical_error(
                "effective kernel does not look smooth at coincidence; "
                "squared-derivative limit not extrapolated");
        }
    }
    return g2 + d12 / 3.0;  // Richardson step for the O(eps^2) family
}

namespace {

json params_to_json(const KernelSpec& s) {
    json p;
    if (s.is_leaf) {
        p["sigma"] = s.base.sigma;
        switch (s.base.kind) {
            case BaseKind::SE:
            case BaseKind::SC:
                p["ell"] = s.base.ell;
                break;
            case BaseKind::NuN:
                p["alpha"] = s.base.alpha;
                p["beta"] = s.base.beta;
                break;
            default:
                break;
        }
        return p;
    }
    switch (s.outer) {
        case WrapKind::SE:
        case WrapKind::SC:
            p["sigma"] = s.params.sigma;
            p["ell"] = s.params.ell;
            break;
        case WrapKind::NuN:
            p["sigma"] = s.params.sigma;
            p["alpha"] = s.params.alpha;
            p["beta"] = s.params.beta;
            break;
        case WrapKind::ThreeLayerErf:
            p["sigma3"] = s.params.sigma;
            p["ell3"] = s.params.ell;
            p["sigma2"] = s.params.sigma2;
            p["ell2"] = s.params.ell2;
            break;
    }
    return p;
}

json spec_to_json_obj(const KernelSpec& s) {
    json j;
    if (s.is_leaf) {
        j["kind"] = "leaf";
        j["base"] = base_kind_name(s.base.kind);
        j["params"] = params_to_json(s);
        return j;
    }
    j["kind"] = "wrap";
    switch (s.outer) {
        case WrapKind::SE: j["outer"] = "SE"; break;
        case WrapKind::SC: j["outer"] = "SC"; break;
        case WrapKind::NuN: j["outer"] = "NuN"; break;
        case WrapKind::ThreeLayerErf: j["outer"] = "ErfSESESE"; break;
    }
    j["params"] = params_to_json(s);
    j["inner"] = spec_to_json_obj(*s.inner);
    return j;
}

double require_param(const json& p, const char* name) {
    if (!p.contains(name) || !p[name].is_number()) {
        throw validation_error(std::string("kernel params missing numeric '") + name + "'");
    }
    return p[name].get<double>();
}

SpecPtr spec_from_json_obj(const json& j) {
    if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
        throw validation_error("kernel JSON node must be an object with a 'kind' string");
    }
    const std::string kind = j["kind"].get<std::string>();
    const json params = j.value("params", json::object());
    if (kind == "leaf") {
        if (!j.contains("base") || !j["base"].is_string()) {
            throw validation_error("leaf kernel JSON requires a 'base' string");
        }
        BaseKernel b;
        b.kind = base_kind_from_name(j["base"].get<std::string>());
        b.sigma = require_param(params, "sigma");
        switch (b.kind) {
            case BaseKind::SE:
            case BaseKind::SC:
                b.ell = require_param(params, "ell");
                break;
            case BaseKind::NuN:
                b.alpha = require_param(params, "alpha");
                b.beta = require_param(params, "beta");
                break;
            default:
                break;
        }
        return KernelSpec::leaf(b);
    }
    if (kind != "wrap") {
        throw validation_error("kernel JSON 'kind' must be 'leaf' or 'wrap'");
    }
    if (!j.contains("outer") || !j["outer"].is_string()) {
        throw validation_error("wrap kernel JSON requires an 'outer' string");
    }
    if (!j.contains("inner")) {
        throw validation_error("wrap kernel JSON requires an 'inner' node");
    }
    const std::string outer = j["outer"].get<std::string>();
    SpecPtr inner = spec_from_json_obj(j["inner"]);
    WrapParams p;
    if (outer == "SE" || outer == "SC") {
        p.sigma = require_param(params, "sigma");
        p.ell = require_param(params, "ell");
        return KernelSpec::wrap(outer == "SE" ? WrapKind::SE : WrapKind::SC, p,
                                std::move(inner));
    }
    if (outer == "NuN") {
        p.sigma = require_param(params, "sigma");
        p.alpha = require_param(params, "alpha");
        p.beta = require_param(params, "beta");
        return KernelSpec::wrap(WrapKind::NuN, p, std::move(inner));
    }
    if (outer == "ErfSESESE") {
        p.sigma = require_param(params, "sigma3");
        p.ell = require_param(params, "ell3");
        p.sigma2 = require_param(params, "sigma2");
        p.ell2 = require_param(params, "ell2");
        return KernelSpec::wrap(WrapKind::ThreeLayerErf, p, std::move(inner));
    }
    throw validation_error("unknown wrap outer kind '" + outer + "'");
}

}  // namespace

std::string to_json(const KernelSpec& spec, int indent) {
    return spec_to_json_obj(spec).dump(indent);
}

SpecPtr spec_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw validation_error(std::string("kernel JSON parse error: ") + e.what());
    }
    SpecPtr s = spec_from_json_obj(j);
    validate(*s);
    return s;
}

std::string describe(const KernelSpec& spec) {
    if (spec.is_leaf) return base_kind_name(spec.base.kind);
    std::string name;
    switch (spec.outer) {
        case WrapKind::SE: name = "SE"; break;
        case WrapKind::SC: name = "SC"; break;
        case WrapKind::NuN: name = "NuN"; break;
        case WrapKind::ThreeLayerErf: name = "ErfSESESE"; break;
    }
    return name + "[" + describe(*spec.inner) + "]";
}

}  // namespace dk
