#include "deepkernel/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "deepkernel/csv.hpp"
#include "deepkernel/errors.hpp"
#include "deepkernel/rng.hpp"

namespace dk {

using nlohmann::json;

namespace {

constexpr double kBadValue = 1e300;  // negative LML assigned to invalid regions

// Layer descriptions from the inside out, each a list of parameter suffixes.
struct LayerParams {
    std::string prefix;
    std::vector<std::string> suffixes;
};

std::vector<LayerParams> layer_params(const KernelSpec& spec) {
    std::vector<const KernelSpec*> nodes;  // outermost first
    const KernelSpec* node = &spec;
    while (!node->is_leaf) {
        nodes.push_back(node);
        node = node->inner.get();
    }
    std::vector<LayerParams> layers;
    int layer_no = 1;
    auto add = [&](std::vector<std::string> suffixes) {
        layers.push_back({"l" + std::to_string(layer_no) + ".", std::move(suffixes)});
        ++layer_no;
    };
    switch (node->base.kind) {
        case BaseKind::SE:
        case BaseKind::SC: add({"sigma", "ell"}); break;
        case BaseKind::NuN: add({"sigma", "alpha", "beta"}); break;
        case BaseKind::Lin:
        case BaseKind::Const: add({"sigma"}); break;
    }
    for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
        switch ((*it)->outer) {
            case WrapKind::SE:
            case WrapKind::SC: add({"sigma", "ell"}); break;
            case WrapKind::NuN: add({"sigma", "alpha", "beta"}); break;
            case WrapKind::ThreeLayerErf:
                add({"sigma", "ell"});  // the sigma2/ell2 pair
                add({"sigma", "ell"});  // the sigma3/ell3 pair
                break;
        }
    }
    return layers;
}

std::vector<double> collect_values(const KernelSpec& spec, double noise_variance) {
    std::vector<const KernelSpec*> nodes;
    const KernelSpec* node = &spec;
    while (!node->is_leaf) {
        nodes.push_back(node);
        node = node->inner.get();
    }
    std::vector<double> vals;
    switch (node->base.kind) {
        case BaseKind::SE:
        case BaseKind::SC:
            vals = {node->base.sigma, node->base.ell};
            break;
        case BaseKind::NuN:
            vals = {node->base.sigma, node->base.alpha, node->base.beta};
            break;
        case BaseKind::Lin:
        case BaseKind::Const:
            vals = {node->base.sigma};
            break;
    }
    for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
        const WrapParams& p = (*it)->params;
        switch ((*it)->outer) {
            case WrapKind::SE:
            case WrapKind::SC:
                vals.push_back(p.sigma);
                vals.push_back(p.ell);
                break;
            case WrapKind::NuN:
                vals.push_back(p.sigma);
                vals.push_back(p.alpha);
                vals.push_back(p.beta);
                break;
            case WrapKind::ThreeLayerErf:
                vals.push_back(p.sigma2);
                vals.push_back(p.ell2);
                vals.push_back(p.sigma);
                vals.push_back(p.ell);
                break;
        }
    }
    vals.push_back(noise_variance);
    return vals;
}

SpecPtr rebuild(const KernelSpec& spec, const std::vector<double>& vals,
                std::size_t& pos) {
    if (spec.is_leaf) {
        BaseKernel b = spec.base;
        switch (b.kind) {
            case BaseKind::SE:
            case BaseKind::SC:
                b.sigma = vals[pos++];
                b.ell = vals[pos++];
                break;
            case BaseKind::NuN:
                b.sigma = vals[pos++];
                b.alpha = vals[pos++];
                b.beta = vals[pos++];
                break;
            case BaseKind::Lin:
            case BaseKind::Const:
                b.sigma = vals[pos++];
                break;
        }
        return KernelSpec::leaf(b);
    }
    SpecPtr inner = rebuild(*spec.inner, vals, pos);
    WrapParams p = spec.params;
    switch (spec.outer) {
        case WrapKind::SE:
        case WrapKind::SC:
            p.sigma = vals[pos++];
            p.ell = vals[pos++];
            break;
        case WrapKind::NuN:
            p.sigma = vals[pos++];
            p.alpha = vals[pos++];
            p.beta = vals[pos++];
            break;
        case WrapKind::ThreeLayerErf:
            p.sigma2 = vals[pos++];
            p.ell2 = vals[pos++];
            p.sigma = vals[pos++];
            p.ell = vals[pos++];
            break;
    }
    return KernelSpec::wrap(spec.outer, p, std::move(inner));
}

}  // namespace

HyperVector hyper_vector_of(const KernelSpec& spec, double noise_variance) {
    validate(spec);
    HyperVector hv;
    for (const LayerParams& lp : layer_params(spec)) {
        for (const std::string& s : lp.suffixes) hv.names.push_back(lp.prefix + s);
    }
    hv.names.push_back("noise");
    const std::vector<double> vals = collect_values(spec, noise_variance);
    hv.log_values.resize(static_cast<Eigen::Index>(vals.size()));
    for (std::size_t i = 0; i < vals.size(); ++i) {
        if (!(vals[i] > 0.0)) {
            throw validation_error("hyperparameter '" + hv.names[i] +
                                   "' must be positive to take logs");
        }
        hv.log_values[static_cast<Eigen::Index>(i)] = std::log(vals[i]);
    }
    return hv;
}

SpecPtr apply_hyper(const KernelSpec& templ, const HyperVector& hv, double* noise_out) {
    const HyperVector ref = hyper_vector_of(templ, 1.0);
    if (hv.names != ref.names ||
        hv.log_values.size() != static_cast<Eigen::Index>(hv.names.size())) {
        throw invalid_argument_error("hyper vector does not match the kernel template");
    }
    std::vector<double> vals(hv.names.size());
    for (std::size_t i = 0; i < vals.size(); ++i) {
        vals[i] = std::exp(hv.log_values[static_cast<Eigen::Index>(i)]);
    }
    std::size_t pos = 0;
    SpecPtr spec = rebuild(templ, vals, pos);
    if (noise_out) *noise_out = vals.back();
    validate(*spec);
    return spec;
}

namespace {

struct Objective {
    const KernelSpec& templ;
    const Dataset& data;
    std::vector<std::string> names;
    int evals = 0;

    // Negative LML; invalid or non-finite regions return kBadValue so the
    // simplex walks away from them.
    double operator()(const Eigen::VectorXd& x) {
        ++evals;
        HyperVector hv{names, x};
        try {
            double noise = 0.0;
            SpecPtr spec = apply_hyper(templ, hv, &noise);
            GPModel model{spec, noise, data};
            const double lml = log_marginal_likelihood(model);
            if (!std::isfinite(lml)) return kBadValue;
            return -lml;
        } catch (const std::exception&) {
            return kBadValue;
        }
    }
};

struct SimplexResult {
    Eigen::VectorXd x;
    double f = kBadValue;
    int iterations = 0;
    bool converged = false;
};

// Standard Nelder-Mead with the usual coefficient set; stops when the
// simplex infinity-norm diameter is below tol or budget evaluations have
// been spent (budget is shared with the caller across re-launches).
SimplexResult nelder_mead(Objective& obj, const Eigen::VectorXd& x0, double step,
                          double tol, int budget) {
    const int d = static_cast<int>(x0.size());
    const int n_vert = d + 1;
    std::vector<Eigen::VectorXd> xs(n_vert, x0);
    std::vector<double> fs(n_vert);
    for (int i = 1; i < n_vert; ++i) xs[i][i - 1] += step;
    for (int i = 0; i < n_vert; ++i) fs[i] = obj(xs[i]);

    SimplexResult res;
    auto order = [&]() {
        std::vector<int> idx(n_vert);
        for (int i = 0; i < n_vert; ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fs[a] < fs[b]; });
        std::vector<Eigen::VectorXd> xs2(n_vert);
        std::vector<double> fs2(n_vert);
        for (int i = 0; i < n_vert; ++i) {
            xs2[i] = xs[idx[i]];
            fs2[i] = fs[idx[i]];
        }
        xs.swap(xs2);
        fs.swap(fs2);
    };

    while (obj.evals < budget) {
        order();
        double diameter = 0.0;
        for (int i = 1; i < n_vert; ++i) {
            diameter = std::max(diameter, (xs[i] - xs[0]).lpNorm<Eigen::Infinity>());
        }
        if (diameter < tol) {
            res.converged = true;
            break;
        }
        ++res.iterations;

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
        for (int i = 0; i < d; ++i) centroid += xs[i];
        centroid /= static_cast<double>(d);

        const Eigen::VectorXd xr = centroid + (centroid - xs[d]);  // reflection
        const double fr = obj(xr);
        if (fr < fs[0]) {
            const Eigen::VectorXd xe = centroid + 2.0 * (centroid - xs[d]);
            const double fe = obj(xe);
            if (fe < fr) {
                xs[d] = xe;
                fs[d] = fe;
            } else {
                xs[d] = xr;
                fs[d] = fr;
            }
        } else if (fr < fs[d - 1]) {
            xs[d] = xr;
            fs[d] = fr;
        } else {
            const Eigen::VectorXd xc =
                centroid + 0.5 * ((fr < fs[d] ? xr : xs[d]) - centroid);
            const double fc = obj(xc);
            if (fc < std::min(fr, fs[d])) {
                xs[d] = xc;
                fs[d] = fc;
            } else {
                for (int i = 1; i < n_vert; ++i) {  // shrink toward the best
                    xs[i] = xs[0] + 0.5 * (xs[i] - xs[0]);
                    fs[i] = obj(xs[i]);
                }
            }
        }
    }
    order();
    res.x = xs[0];
    res.f = fs[0];
    return res;
}

}  // namespace

FitReport optimize(const KernelSpec& templ, const Dataset& data, int restarts,
                   std::uint64_t seed, int budget) {
    validate(templ);
    validate(data);
    if (restarts < 1) throw invalid_argument_error("restarts must be >= 1");
    if (budget < 100) throw invalid_argument_error("budget must be >= 100 evaluations");

    const HyperVector ref = hyper_vector_of(templ, 1.0);
    const int d = static_cast<int>(ref.names.size());

    FitReport report;
    report.seed = seed;
    report.restarts = restarts;
    report.budget = budget;

    for (int r = 0; r < restarts; ++r) {
        RandomStream stream(seed, static_cast<std::uint64_t>(r) + 1);
        Eigen::VectorXd x0(d);
        for (int i = 0; i < d; ++i) x0[i] = stream.uniform(-10.0, 10.0);

        Objective obj{templ, data, ref.names};
        SimplexResult best = nelder_mead(obj, x0, 1.0, 1e-6, budget);
        if (best.converged && best.f >= kBadValue) {
            // Converged onto a non-finite plateau (e.g. the collapsed-signal
            // ridge); nudge and retry with whatever budget remains.
            Eigen::VectorXd x1 = best.x;
            for (int i = 0; i < d; ++i) {
                x1[i] += (stream.uniform() < 0.5 ? -0.5 : 0.5);
            }
            const SimplexResult second = nelder_mead(obj, x1, 1.0, 1e-6, budget);
            if (second.f < best.f) best = second;
        }

        RestartRecord rec;
        rec.init_log = x0;
        rec.final_log = best.x;
        rec.lml = (best.f >= kBadValue) ? -std::numeric_limits<double>::infinity()
                                        : -best.f;
        rec.iterations = best.iterations;
        rec.converged = best.converged;
        report.per_restart.push_back(std::move(rec));
    }

    int best_idx = -1;
    for (std::size_t i = 0; i < report.per_restart.size(); ++i) {
        if (!std::isfinite(report.per_restart[i].lml)) continue;
        if (best_idx < 0 || report.per_restart[i].lml > report.per_restart[best_idx].lml) {
            best_idx = static_cast<int>(i);
        }
    }
    if (best_idx < 0) {
        throw numerical_error("no restart reached a finite marginal likelihood");
    }

    report.best = HyperVector{ref.names, report.per_restart[best_idx].final_log};
    report.best_lml = report.per_restart[best_idx].lml;
    report.best_spec = apply_hyper(templ, report.best, &report.best_noise);
    if (!report.best_spec->is_leaf) {
        report.chi_at_best = chi(*report.best_spec);
    }
    return report;
}

ProfileCurve profile_lml(const KernelSpec& templ, double noise_variance,
                         const Dataset& data, const std::string& param_name,
                         const std::vector<double>& grid) {
    const HyperVector base = hyper_vector_of(templ, noise_variance);
    const auto it = std::find(base.names.begin(), base.names.end(), param_name);
    if (it == base.names.end()) {
        throw invalid_argument_error("unknown hyperparameter '" + param_name + "'");
    }
    const Eigen::Index pos = it - base.names.begin();

    ProfileCurve curve;
    curve.grid = grid;
    for (double v : grid) {
        if (!(v > 0.0)) throw invalid_argument_error("profile grid values must be positive");
        HyperVector hv = base;
        hv.log_values[pos] = std::log(v);
        double noise = 0.0;
        SpecPtr spec = apply_hyper(templ, hv, &noise);
        GPModel model{spec, noise, data};
        curve.lml.push_back(log_marginal_likelihood(model));
    }
    for (std::size_t i = 1; i + 1 < curve.lml.size(); ++i) {
        if (curve.lml[i] > curve.lml[i - 1] && curve.lml[i] > curve.lml[i + 1]) {
            curve.maxima.push_back(static_cast<int>(i));
        }
    }
    return curve;
}

namespace {

json vector_to_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

}  // namespace

std::string fit_report_json(const FitReport& report, int indent) {
    json j;
    j["schema"] = "dgpk-fit-report/1";
    j["seed"] = report.seed;
    j["restarts"] = report.restarts;
    j["budget"] = report.budget;
    j["best_lml"] = report.best_lml;
    j["noise_variance"] = report.best_noise;
    j["kernel"] = json::parse(to_json(*report.best_spec));
    j["chi_at_best"] =
        report.chi_at_best ? json(*report.chi_at_best) : json(nullptr);
    j["hyperparameters"] = {{"names", report.best.names},
                            {"log_values", vector_to_json(report.best.log_values)}};
    json restarts = json::array();
    for (const RestartRecord& r : report.per_restart) {
        restarts.push_back({{"init_log", vector_to_json(r.init_log)},
                            {"final_log", vector_to_json(r.final_log)},
                            {"lml", std::isfinite(r.lml) ? json(r.lml) : json(nullptr)},
                            {"iterations", r.iterations},
                            {"converged", r.converged}});
    }
    j["per_restart"] = std::move(restarts);
    j["jitter_ladder"] = jitter_ladder();
    return j.dump(indent);
}

LoadedFit fit_report_parse(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw validation_error(std::string("fit report JSON parse error: ") + e.what());
    }
    if (!j.contains("kernel") || !j.contains("noise_variance")) {
        throw validation_error("fit report JSON lacks 'kernel' or 'noise_variance'");
    }
    LoadedFit out;
    out.spec = spec_from_json(j["kernel"].dump());
    out.noise_variance = j["noise_variance"].get<double>();
    out.best_lml = j.value("best_lml", 0.0);
    return out;
}

}  // namespace dk
