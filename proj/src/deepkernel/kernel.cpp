#include "deepkernel/kernel.hpp"

#include <cmath>

#include "deepkernel/errors.hpp"

namespace dk {

void validate(const BaseKernel& k) {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw validation_error(std::string("kernel parameter '") + name +
                                   "' must be a positive finite real");
        }
    };
    positive(k.sigma, "sigma");
    switch (k.kind) {
        case BaseKind::SE:
        case BaseKind::SC:
            positive(k.ell, "ell");
            break;
        case BaseKind::NuN:
            positive(k.alpha, "alpha");
            positive(k.beta, "beta");
            if (!(k.alpha > k.beta)) {
                throw validation_error("NuN kernel requires alpha > beta > 0");
            }
            break;
        case BaseKind::Lin:
        case BaseKind::Const:
            break;
    }
}

namespace {

inline void check_dims(const InputPoint& x, const InputPoint& y) {
    if (x.size() != y.size()) {
        throw invalid_argument_error("kernel arguments have mismatched dimensions");
    }
    if (x.size() == 0) {
        throw invalid_argument_error("kernel arguments must have dimension >= 1");
    }
}

}  // namespace

double eval_base(const BaseKernel& k, const InputPoint& x, const InputPoint& y) {
    check_dims(x, y);
    const double s2 = k.sigma * k.sigma;
    switch (k.kind) {
        case BaseKind::SE: {
            const double d2 = (x - y).squaredNorm();
            return s2 * std::exp(-d2 / (2.0 * k.ell * k.ell));
        }
        case BaseKind::SC: {
            const double c = std::cos((x - y).norm() / (2.0 * k.ell));
            return s2 * c * c;
        }
        case BaseKind::Lin:
            return s2 * x.dot(y);
        case BaseKind::NuN: {
            const double q = k.alpha * x.squaredNorm() - 2.0 * k.beta * x.dot(y) +
                             k.alpha * y.squaredNorm();
            return s2 * std::exp(-0.5 * q);
        }
        case BaseKind::Const:
            return s2;
    }
    throw invalid_argument_error("unknown base kernel kind");
}

double diag_value(const BaseKernel& k, const InputPoint& x) {
    if (x.size() == 0) {
        throw invalid_argument_error("kernel arguments must have dimension >= 1");
    }
    const double s2 = k.sigma * k.sigma;
    switch (k.kind) {
        case BaseKind::SE:
        case BaseKind::SC:
        case BaseKind::Const:
            return s2;
        case BaseKind::Lin:
            return s2 * x.squaredNorm();
        case BaseKind::NuN:
            return s2 * std::exp(-(k.alpha - k.beta) * x.squaredNorm());
    }
    throw invalid_argument_error("unknown base kernel kind");
}

const char* base_kind_name(BaseKind kind) {
    switch (kind) {
        case BaseKind::SE: return "SE";
        case BaseKind::SC: return "SC";
        case BaseKind::Lin: return "Lin";
        case BaseKind::NuN: return "NuN";
        case BaseKind::Const: return "Const";
    }
    return "?";
}

BaseKind base_kind_from_name(const std::string& name) {
    if (name == "SE") return BaseKind::SE;
    if (name == "SC") return BaseKind::SC;
    if (name == "Lin") return BaseKind::Lin;
    if (name == "NuN") return BaseKind::NuN;
    if (name == "Const") return BaseKind::Const;
    throw validation_error("unknown base kernel kind '" + name + "'");
}

}  // namespace dk
