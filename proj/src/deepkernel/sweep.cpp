#include "deepkernel/sweep.hpp"

#include <cmath>

#include "deepkernel/datagen.hpp"
#include "deepkernel/errors.hpp"

namespace dk {
namespace {

constexpr std::uint64_t kStreamHyper = 11;  // clear of the datagen streams 0..3

double log_uniform_factor(RandomStream& rs) {
    static const double kLog2 = std::log(2.0);
    return std::exp(rs.uniform(-kLog2, kLog2));
}

SpecPtr recursion_template() {
    return KernelSpec::wrap_se(
        1.0, 1.0, KernelSpec::wrap_se(1.0, 1.0, KernelSpec::leaf(BaseKernel::se(1.0, 1.0))));
}

}  // namespace

std::vector<SpecPtr> default_sweep_generators() {
    SpecPtr se_leaf = KernelSpec::leaf(BaseKernel::se(1.0, 1.0));
    // A linear leaf over x in [0, 10]; sigma 0.3 keeps the composed
    // correlation decaying across the window without saturating the wrap.
    SpecPtr lin_leaf = KernelSpec::leaf(BaseKernel::lin(0.3));
    return {
        KernelSpec::wrap_se(1.0, 1.0, se_leaf),
        KernelSpec::wrap_sc(1.0, 1.0, se_leaf),
        KernelSpec::wrap_se(1.0, 1.0, lin_leaf),
        KernelSpec::wrap_sc(1.0, 1.0, lin_leaf),
        KernelSpec::wrap_nun(1.0, 1.0, 0.5, se_leaf),
    };
}

bool se_family_generator(const std::string& label) {
    return label.rfind("SE[", 0) == 0 || label.rfind("NuN[", 0) == 0;
}

SpecPtr randomize_spec(const KernelSpec& spec, RandomStream& rs) {
    if (spec.is_leaf) {
        BaseKernel b = spec.base;
        b.sigma *= log_uniform_factor(rs);
        switch (b.kind) {
            case BaseKind::SE:
            case BaseKind::SC:
                b.ell *= log_uniform_factor(rs);
                break;
            case BaseKind::NuN:
                b.alpha *= log_uniform_factor(rs);
                b.beta = b.alpha * rs.uniform(0.3, 0.8);
                break;
            case BaseKind::Lin:
            case BaseKind::Const:
                break;
        }
        return KernelSpec::leaf(b);
    }
    WrapParams p = spec.params;
    p.sigma *= log_uniform_factor(rs);
    switch (spec.outer) {
        case WrapKind::SE:
        case WrapKind::SC:
            p.ell *= log_uniform_factor(rs);
            break;
        case WrapKind::NuN:
            p.alpha *= log_uniform_factor(rs);
            p.beta = p.alpha * rs.uniform(0.3, 0.8);
            break;
        case WrapKind::ThreeLayerErf:
            p.ell *= log_uniform_factor(rs);
            p.sigma2 *= log_uniform_factor(rs);
            p.ell2 *= log_uniform_factor(rs);
            break;
    }
    return KernelSpec::wrap(spec.outer, p, randomize_spec(*spec.inner, rs));
}

std::vector<ChiSweepRow> chi_sweep(const ChiSweepConfig& config) {
    if (config.n_points <= 0) throw invalid_argument_error("n_points must be positive");
    if (config.draws_per_generator <= 0)
        throw invalid_argument_error("draws_per_generator must be positive");
    const std::vector<SpecPtr> generators =
        config.generators.empty() ? default_sweep_generators() : config.generators;

    const SpecPtr templ = recursion_template();
    const HyperVector ref = hyper_vector_of(*templ, 1.0);

    std::vector<ChiSweepRow> rows;
    std::uint64_t q = 0;
    for (const SpecPtr& generator : generators) {
        const std::string label = describe(*generator);
        for (int d = 0; d < config.draws_per_generator; ++d, ++q) {
            const std::uint64_t draw_seed = config.seed + 2 * q;
            RandomStream hyper_stream(draw_seed, kStreamHyper);
            SpecPtr drawn = randomize_spec(*generator, hyper_stream);
            const Dataset data = gen_from_kernel(*drawn, config.n_points, config.noise_sd,
                                                 draw_seed, config.x_lo, config.x_hi);

            const FitReport fit = optimize(*templ, data, config.restarts, draw_seed + 1,
                                           config.budget);
            for (std::size_t r = 0; r < fit.per_restart.size(); ++r) {
                const RestartRecord& rec = fit.per_restart[r];
                ChiSweepRow row;
                row.generator_kernel = label;
                row.draw_seed = draw_seed;
                row.restart = static_cast<int>(r);
                row.final_lml = rec.lml;
                HyperVector hv{ref.names, rec.final_log};
                double noise = 0.0;
                row.log_chi = std::log(chi(*apply_hyper(*templ, hv, &noise)));
                rows.push_back(std::move(row));
            }
        }
    }
    return rows;
}

CsvTable chi_sweep_table(const std::vector<ChiSweepRow>& rows) {
    CsvTable table;
    table.header = {"generator_kernel", "draw_seed", "restart", "final_lml", "log_chi"};
    table.rows.reserve(rows.size());
    for (const ChiSweepRow& r : rows) {
        table.rows.push_back({r.generator_kernel, std::to_string(r.draw_seed),
                              std::to_string(r.restart), format_double(r.final_lml),
                              format_double(r.log_chi)});
    }
    return table;
}

}  // namespace dk
