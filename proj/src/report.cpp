#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "microhmc/diagnose.hpp"

namespace microhmc {

DiagnosticReport build_report(const std::vector<ChainTrace>& traces, const TargetModel& model,
                              const SamplerConfig& cfg) {
    if (traces.empty()) {
        throw std::invalid_argument("build_report needs at least one trace");
    }
    DiagnosticReport r;
    r.model_name = std::string(model.name());
    r.dim = model.dim();
    r.num_chains = traces.size();
    r.num_samples = traces.front().infos.size();
    r.target_accept = cfg.target_accept;
    r.reference = gaussian_euclidean_reference(model.dim());

    std::vector<EnergyTrace> energy_traces;
    std::vector<std::vector<double>> energies;
    std::vector<double> centered_pool;
    std::vector<double> delta_pool;
    std::vector<double> delta_k_pool;
    double ess_total = 0.0;
    double transitions_total = 0.0;
    bool ess_defined = true;
    std::size_t total_transitions = 0;
    std::size_t depth_hits = 0;

    for (const auto& trace : traces) {
        auto et = EnergyTrace::from_chain(trace);
        ChainSummary cs;
        cs.step_size = trace.step_size;
        double accept_sum = 0.0;
        for (const auto& info : trace.infos) {
            cs.divergences += info.divergent ? 1 : 0;
            cs.max_depth_hits += info.tree_depth >= cfg.max_tree_depth ? 1 : 0;
            accept_sum += info.accept_stat;
        }
        cs.mean_accept_stat = trace.infos.empty() ? 0.0 : accept_sum / static_cast<double>(trace.infos.size());
        if (et.energies.size() >= 2) {
            cs.bfmi = bfmi(et.energies);
        }
        if (et.energies.size() >= 10) {
            const auto ess = effective_sample_size(et.energies);
            if (ess) {
                cs.ess_per_transition = std::min(1.0, *ess / static_cast<double>(et.energies.size()));
                ess_total += *ess;
                transitions_total += static_cast<double>(et.energies.size());
            } else {
                ess_defined = false;
            }
        } else {
            ess_defined = false;
        }

        r.divergences += cs.divergences;
        depth_hits += cs.max_depth_hits;
        total_transitions += trace.infos.size();

        const double mean_e = sample_moments(et.energies).mean;
        for (double e : et.energies) {
            centered_pool.push_back(e - mean_e);
        }
        delta_pool.insert(delta_pool.end(), et.deltas.begin(), et.deltas.end());
        delta_k_pool.insert(delta_k_pool.end(), et.resample_deltas.begin(), et.resample_deltas.end());

        energies.push_back(et.energies);
        energy_traces.push_back(std::move(et));
        r.chains.push_back(cs);
    }

    if (std::all_of(energies.begin(), energies.end(), [](const auto& e) { return e.size() >= 2; })) {
        r.pooled_bfmi = pooled_bfmi(energies);
    }
    if (ess_defined && transitions_total > 0.0) {
        r.ess_per_transition = std::min(1.0, ess_total / transitions_total);
    }

    const bool equal_lengths = std::all_of(energies.begin(), energies.end(),
                                           [&](const auto& e) { return e.size() == energies.front().size(); });
    if (equal_lengths && energies.front().size() >= 4) {
        r.energy_rhat = split_rhat(energies);
    }

    const auto& names = model.parameter_names();
    for (std::size_t j = 0; j < names.size(); ++j) {
        ParameterSummary ps;
        ps.name = names[j];
        std::vector<std::vector<double>> columns;
        std::vector<double> pooled;
        for (const auto& trace : traces) {
            const auto col = trace.draws.col(static_cast<Eigen::Index>(j));
            columns.emplace_back(col.data(), col.data() + col.size());
            pooled.insert(pooled.end(), col.data(), col.data() + col.size());
        }
        const auto mom = sample_moments(pooled);
        ps.mean = mom.mean;
        ps.sd = std::sqrt(mom.variance);
        if (equal_lengths && columns.front().size() >= 4) {
            ps.rhat = split_rhat(columns);
        }
        r.parameters.push_back(std::move(ps));
    }

    r.divergence_rate = total_transitions > 0 ? static_cast<double>(r.divergences) / total_transitions : 0.0;
    r.max_depth_hit_rate = total_transitions > 0 ? static_cast<double>(depth_hits) / total_transitions : 0.0;
    r.unreliable = r.divergence_rate > kUnreliableDivergenceRate;

    r.energy = sample_moments(centered_pool);
    r.delta_energy = sample_moments(delta_pool);
    r.resample_delta_k = sample_moments(delta_k_pool);
    if (r.energy.variance > 0.0) {
        r.reference_bfmi_proxy = r.reference.expected_conditional_variance / r.energy.variance;
    }

    r.histograms = energy_histograms(energy_traces);
    const auto ref = r.reference;
    std::function<double(double)> energy_ref;
    if (model.name() == "gaussian_iid") {
        energy_ref = [ref](double x) { return ref.centered_gaussian_energy_density(x); };
    }
    r.energy_overlay = overlay(r.histograms.centered_energy, energy_ref);
    r.delta_energy_overlay = overlay(r.histograms.delta_energy, [ref](double x) { return ref.delta_k_density(x); });
    return r;
}

namespace {

std::string show(const Diagnostic& d) { return d ? fmt::format("{:.4f}", *d) : std::string("undefined"); }

}  // namespace

std::string render_report(const DiagnosticReport& r) {
    std::string out;
    auto line = [&out](const std::string& s) {
        out += s;
        out += '\n';
    };

    line(fmt::format("model: {}", r.model_name));
    line(fmt::format("unconstrained dimension: {}", r.dim));
    line(fmt::format("chains: {}", r.num_chains));
    line(fmt::format("samples per chain: {}", r.num_samples));
    line(fmt::format("target acceptance: {}", r.target_accept));
    if (r.unreliable) {
        line(fmt::format("status: UNRELIABLE (divergence rate {:.4f}% exceeds {:.1f}%; diagnostics below are suspect)",
                         100.0 * r.divergence_rate, 100.0 * kUnreliableDivergenceRate));
    } else {
        line("status: OK");
    }
    line("");

    line("energy diagnostics");
    line(fmt::format("  BFMI (pooled): {}", show(r.pooled_bfmi)));
    line(fmt::format("  ESS/T(E) (pooled): {}", show(r.ess_per_transition)));
    line(fmt::format("  split R-hat(E): {}", show(r.energy_rhat)));
    line(fmt::format("  reference BFMI proxy D/Var(E): {}", show(r.reference_bfmi_proxy)));
    line(fmt::format("  E - mean(E): variance {:.4f}, excess kurtosis {:.4f}", r.energy.variance,
                     r.energy.excess_kurtosis));
    line(fmt::format("  delta E: mean {:.4f}, variance {:.4f}, excess kurtosis {:.4f}", r.delta_energy.mean,
                     r.delta_energy.variance, r.delta_energy.excess_kurtosis));
    line(fmt::format("  resampling delta K: mean {:.4f}, variance {:.4f}", r.resample_delta_k.mean,
                     r.resample_delta_k.variance));
    if (r.histograms.low_sample_warning) {
        line("  warning: fewer than 100 transitions in the energy histograms");
    }
    line("");

    line(fmt::format("Gaussian-Euclidean reference (D = {})", r.reference.dim));
    line(fmt::format("  resampled K: mean {:g}, variance {:g}", r.reference.kinetic_mean, r.reference.kinetic_variance));
    line(fmt::format("  resampling delta K: mean {:g}, variance {:g}", r.reference.delta_k_mean,
                     r.reference.delta_k_variance));
    line(fmt::format("  standard Gaussian target E: mean {:g}, variance {:g}", r.reference.gaussian_energy_mean,
                     r.reference.gaussian_energy_variance));
    line("");

    line("per chain");
    for (std::size_t k = 0; k < r.chains.size(); ++k) {
        const auto& c = r.chains[k];
        line(fmt::format("  chain {}: BFMI {}, ESS/T(E) {}, divergences {}, max-depth hits {}, mean accept {:.4f}, "
                         "step size {:.6g}",
                         k + 1, show(c.bfmi), show(c.ess_per_transition), c.divergences, c.max_depth_hits,
                         c.mean_accept_stat, c.step_size));
    }
    line("");

    line(fmt::format("divergences: {} ({:.4f}%)", r.divergences, 100.0 * r.divergence_rate));
    line(fmt::format("max tree depth hit rate: {:.4f}%", 100.0 * r.max_depth_hit_rate));
    line("");

    line("parameters (name, mean, sd, split R-hat)");
    for (const auto& p : r.parameters) {
        line(fmt::format("  {} {:.4f} {:.4f} {}", p.name, p.mean, p.sd, show(p.rhat)));
    }
    return out;
}

std::string render_overlay_tsv(const std::vector<OverlayRow>& rows) {
    std::string out = "bin_left\tbin_right\tdensity\treference_density\n";
    for (const auto& row : rows) {
        out += fmt::format("{:.17g}\t{:.17g}\t{:.17g}\t{}\n", row.bin_left, row.bin_right, row.density,
                           row.reference_density ? fmt::format("{:.17g}", *row.reference_density) : "NA");
    }
    return out;
}

}  // namespace microhmc
