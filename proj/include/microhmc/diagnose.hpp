#ifndef MICROHMC_DIAGNOSE_HPP
#define MICROHMC_DIAGNOSE_HPP

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "microhmc/model.hpp"
#include "microhmc/sample.hpp"

namespace microhmc {

/// A diagnostic value, or nothing when the estimator is undefined for the
/// input (zero variance and the like).
using Diagnostic = std::optional<double>;

/// Energy history of one chain.
struct EnergyTrace {
    std::vector<double> energies;          // E_0..E_N
    std::vector<double> deltas;            // E_n - E_{n-1}, n = 1..N
    std::vector<double> resample_deltas;   // kinetic change from each momentum draw

    /// Builds the trace from a chain; deltas are recomputed from energies.
    static EnergyTrace from_chain(const ChainTrace& chain);
};

/// Energy-based fraction of missing information:
///   sum_{n=1}^N (E_n - E_{n-1})^2 / sum_{n=0}^N (E_n - mean E)^2.
/// Throws std::invalid_argument for fewer than two values; undefined when the
/// energies are constant.
Diagnostic bfmi(std::span<const double> energies);

/// Same ratio pooled over chains: summed numerators over summed per-chain
/// centered sums of squares.
Diagnostic pooled_bfmi(const std::vector<std::vector<double>>& energies);

/// Effective sample size of a single series from its autocorrelations, with
/// Geyer's initial monotone positive-pair truncation. Throws for fewer than
/// 10 values; undefined for a constant series.
Diagnostic effective_sample_size(std::span<const double> series);

/// effective_sample_size / N, clamped to (0, 1].
Diagnostic ess_per_transition(std::span<const double> series);

/// Split potential scale reduction over 2 * chains half-chains. A single
/// chain is split in two. Chains must share a length of at least 4.
Diagnostic split_rhat(const std::vector<std::vector<double>>& chains);

struct SampleMoments {
    double mean = 0.0;
    double variance = 0.0;  // n - 1 denominator
    double excess_kurtosis = 0.0;
};

SampleMoments sample_moments(std::span<const double> xs);

struct Histogram {
    std::vector<double> bin_edges;  // counts.size() + 1 ascending edges
    std::vector<std::size_t> counts;
    std::vector<double> densities;  // counts / (total * width)

    std::size_t total() const;
    double bin_width() const { return bin_edges.size() > 1 ? bin_edges[1] - bin_edges[0] : 0.0; }
};

/// Histogram of `xs` on a grid of the given width anchored at zero.
Histogram make_histogram(std::span<const double> xs, double width);

/// Freedman-Diaconis width 2 IQR n^(-1/3), falling back to a Scott-style
/// width or 1 for degenerate data.
double freedman_diaconis_width(std::span<const double> xs);

struct EnergyHistograms {
    Histogram centered_energy;  // E - mean E
    Histogram delta_energy;     // E_n - E_{n-1}
    /// Fewer than 100 transitions went into the histograms.
    bool low_sample_warning = false;
};

/// Histograms of centered energies and energy differences sharing one bin
/// width (Freedman-Diaconis on the pooled values). Energies are centered per
/// chain before pooling.
EnergyHistograms energy_histograms(const std::vector<EnergyTrace>& traces);
EnergyHistograms energy_histograms(const EnergyTrace& trace);

/// Reference moments for a Gaussian-Euclidean momentum distribution in D
/// dimensions, and the marginal energy of a D-dimensional standard Gaussian
/// target under it.
struct GaussianEuclideanReference {
    std::size_t dim = 0;
    // Resampled kinetic energy: scaled chi^2 with D degrees, i.e. Gamma(D/2, 1).
    double kinetic_mean = 0.0;
    double kinetic_variance = 0.0;
    // Kinetic change induced by resampling: approximately N(0, D).
    double delta_k_mean = 0.0;
    double delta_k_variance = 0.0;
    // Expected conditional energy variance; numerator of the reference
    // BFMI proxy D / Var(E).
    double expected_conditional_variance = 0.0;
    // Gaussian target energy: scaled chi^2 with 2D degrees, i.e. Gamma(D, 1).
    double gaussian_energy_mean = 0.0;
    double gaussian_energy_variance = 0.0;

    double kinetic_density(double k) const;
    double delta_k_density(double dk) const;
    double gaussian_energy_density(double e) const;
    /// Density of E - D for the Gaussian target.
    double centered_gaussian_energy_density(double centered) const;
};

GaussianEuclideanReference gaussian_euclidean_reference(std::size_t dim);

/// One row of an overlay table.
struct OverlayRow {
    double bin_left;
    double bin_right;
    double density;
    std::optional<double> reference_density;
};

/// Histogram rows paired with a reference density evaluated at bin centers.
std::vector<OverlayRow> overlay(const Histogram& h, const std::function<double(double)>& reference);

struct ChainSummary {
    Diagnostic bfmi;
    Diagnostic ess_per_transition;
    std::size_t divergences = 0;
    std::size_t max_depth_hits = 0;
    double mean_accept_stat = 0.0;
    double step_size = 0.0;
};

struct ParameterSummary {
    std::string name;
    double mean = 0.0;
    double sd = 0.0;
    Diagnostic rhat;
};

struct DiagnosticReport {
    std::string model_name;
    std::size_t dim = 0;
    std::size_t num_chains = 0;
    std::size_t num_samples = 0;
    double target_accept = 0.0;

    std::vector<ChainSummary> chains;
    Diagnostic pooled_bfmi;
    /// Pooled ESS over pooled transitions.
    Diagnostic ess_per_transition;
    Diagnostic energy_rhat;
    std::vector<ParameterSummary> parameters;

    std::size_t divergences = 0;
    double divergence_rate = 0.0;
    double max_depth_hit_rate = 0.0;

    SampleMoments energy;           // pooled centered energies
    SampleMoments delta_energy;     // pooled E_n - E_{n-1}
    SampleMoments resample_delta_k;
    /// D / Var(E).
    Diagnostic reference_bfmi_proxy;
    GaussianEuclideanReference reference;

    EnergyHistograms histograms;
    std::vector<OverlayRow> energy_overlay;
    std::vector<OverlayRow> delta_energy_overlay;

    /// Divergence rate above 0.1%: the remaining diagnostics are suspect.
    bool unreliable = false;
};

/// Divergence rate above which a report is flagged unreliable.
inline constexpr double kUnreliableDivergenceRate = 0.001;

/// Aggregates every diagnostic over the chains. Throws std::invalid_argument
/// when `traces` is empty.
DiagnosticReport build_report(const std::vector<ChainTrace>& traces, const TargetModel& model,
                              const SamplerConfig& cfg);

/// Plain-text rendering of a report. Deterministic for a given report.
std::string render_report(const DiagnosticReport& report);

/// Tab-separated overlay table: bin_left, bin_right, density, reference_density.
std::string render_overlay_tsv(const std::vector<OverlayRow>& rows);

}  // namespace microhmc

#endif  // MICROHMC_DIAGNOSE_HPP
