#include "microhmc/diagnose.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

namespace microhmc {

EnergyTrace EnergyTrace::from_chain(const ChainTrace& chain) {
    EnergyTrace t;
    t.energies = chain.energies();
    t.deltas.reserve(chain.infos.size());
    t.resample_deltas.reserve(chain.infos.size());
    for (std::size_t n = 1; n < t.energies.size(); ++n) {
        t.deltas.push_back(t.energies[n] - t.energies[n - 1]);
    }
    for (const auto& info : chain.infos) {
        t.resample_deltas.push_back(info.resample_delta_k);
    }
    return t;
}

namespace {

double mean_of(std::span<const double> xs) {
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

// The centered sum of squares is kept scaled by n^2, with deviations taken as
// n * E - sum E, so exactly representable inputs stay exact.
struct BfmiSums {
    double numerator = 0.0;
    double scaled_denominator = 0.0;
    double scale = 1.0;

    double denominator() const { return scaled_denominator / scale; }
};

BfmiSums bfmi_sums(std::span<const double> energies) {
    if (energies.size() < 2) {
        throw std::invalid_argument(fmt::format("bfmi needs at least 2 energies, got {}", energies.size()));
    }
    BfmiSums s;
    const auto count = static_cast<double>(energies.size());
    const double sum = std::accumulate(energies.begin(), energies.end(), 0.0);
    s.scale = count * count;
    for (std::size_t n = 0; n < energies.size(); ++n) {
        const double dev = count * energies[n] - sum;
        s.scaled_denominator += dev * dev;
        if (n > 0) {
            const double diff = energies[n] - energies[n - 1];
            s.numerator += diff * diff;
        }
    }
    return s;
}

}  // namespace

Diagnostic bfmi(std::span<const double> energies) {
    const auto s = bfmi_sums(energies);
    if (!(s.scaled_denominator > 0.0)) {
        return std::nullopt;
    }
    return s.numerator * s.scale / s.scaled_denominator;
}

Diagnostic pooled_bfmi(const std::vector<std::vector<double>>& energies) {
    if (energies.empty()) {
        throw std::invalid_argument("pooled_bfmi needs at least one chain");
    }
    double numerator = 0.0;
    double denominator = 0.0;
    for (const auto& e : energies) {
        const auto s = bfmi_sums(e);
        numerator += s.numerator;
        denominator += s.denominator();
    }
    if (!(denominator > 0.0)) {
        return std::nullopt;
    }
    return numerator / denominator;
}

Diagnostic effective_sample_size(std::span<const double> series) {
    const std::size_t n = series.size();
    if (n < 10) {
        throw std::invalid_argument(fmt::format("effective sample size needs at least 10 values, got {}", n));
    }
    const double mean = mean_of(series);
    std::vector<double> centered(n);
    std::transform(series.begin(), series.end(), centered.begin(), [mean](double x) { return x - mean; });

    auto autocov = [&](std::size_t lag) {
        double acc = 0.0;
        for (std::size_t t = 0; t + lag < n; ++t) {
            acc += centered[t] * centered[t + lag];
        }
        return acc / static_cast<double>(n);
    };

    const double c0 = autocov(0);
    if (!(c0 > 0.0)) {
        return std::nullopt;
    }

    // Initial positive sequence of pair sums, made monotone as it is built.
    double tau = -1.0;
    double prev_pair = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k + 1 < n; k += 2) {
        double pair = (autocov(k) + autocov(k + 1)) / c0;
        if (!(pair > 0.0)) {
            break;
        }
        pair = std::min(pair, prev_pair);
        prev_pair = pair;
        tau += 2.0 * pair;
    }
    const double nd = static_cast<double>(n);
    const double ess_cap = nd * std::log10(nd);
    if (!(tau > 0.0)) {
        return ess_cap;
    }
    return std::min(nd / tau, ess_cap);
}

Diagnostic ess_per_transition(std::span<const double> series) {
    const auto ess = effective_sample_size(series);
    if (!ess) {
        return std::nullopt;
    }
    return std::min(1.0, *ess / static_cast<double>(series.size()));
}

Diagnostic split_rhat(const std::vector<std::vector<double>>& chains) {
    if (chains.empty()) {
        throw std::invalid_argument("split_rhat needs at least one chain");
    }
    const std::size_t len = chains.front().size();
    for (const auto& c : chains) {
        if (c.size() != len) {
            throw std::invalid_argument("split_rhat chains must have equal lengths");
        }
    }
    if (len < 4) {
        throw std::invalid_argument(fmt::format("split_rhat needs chains of length at least 4, got {}", len));
    }

    const std::size_t half = len / 2;
    std::vector<double> means;
    std::vector<double> vars;
    for (const auto& c : chains) {
        for (std::span<const double> part :
             {std::span<const double>(c.data(), half), std::span<const double>(c.data() + len - half, half)}) {
            const double m = mean_of(part);
            double ss = 0.0;
            for (double x : part) {
                ss += (x - m) * (x - m);
            }
            means.push_back(m);
            vars.push_back(ss / static_cast<double>(half - 1));
        }
    }

    const double n = static_cast<double>(half);
    const double m = static_cast<double>(means.size());
    const double W = std::accumulate(vars.begin(), vars.end(), 0.0) / m;
    const double grand = std::accumulate(means.begin(), means.end(), 0.0) / m;
    double b_over_n = 0.0;
    for (double mu : means) {
        b_over_n += (mu - grand) * (mu - grand);
    }
    b_over_n /= (m - 1.0);
    if (!(W > 0.0)) {
        return std::nullopt;
    }
    const double var_plus = (n - 1.0) / n * W + b_over_n;
    return std::sqrt(var_plus / W);
}

SampleMoments sample_moments(std::span<const double> xs) {
    SampleMoments out;
    if (xs.empty()) {
        return out;
    }
    const double n = static_cast<double>(xs.size());
    out.mean = mean_of(xs);
    double m2 = 0.0;
    double m4 = 0.0;
    for (double x : xs) {
        const double d2 = (x - out.mean) * (x - out.mean);
        m2 += d2;
        m4 += d2 * d2;
    }
    out.variance = xs.size() > 1 ? m2 / (n - 1.0) : 0.0;
    m2 /= n;
    m4 /= n;
    out.excess_kurtosis = m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;
    return out;
}

std::size_t Histogram::total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }

Histogram make_histogram(std::span<const double> xs, double width) {
    if (!(width > 0.0)) {
        throw std::invalid_argument("histogram bin width must be positive");
    }
    Histogram h;
    if (xs.empty()) {
        h.bin_edges = {0.0, width};
        h.counts = {0};
        h.densities = {0.0};
        return h;
    }
    const auto [lo_it, hi_it] = std::minmax_element(xs.begin(), xs.end());
    const double lo = std::floor(*lo_it / width) * width;
    const auto bins = static_cast<std::size_t>(std::floor((*hi_it - lo) / width)) + 1;

    h.counts.assign(bins, 0);
    for (double x : xs) {
        auto idx = static_cast<std::size_t>(std::floor((x - lo) / width));
        h.counts[std::min(idx, bins - 1)] += 1;
    }
    h.bin_edges.resize(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i) {
        h.bin_edges[i] = lo + static_cast<double>(i) * width;
    }
    const double scale = 1.0 / (static_cast<double>(xs.size()) * width);
    h.densities.resize(bins);
    for (std::size_t i = 0; i < bins; ++i) {
        h.densities[i] = static_cast<double>(h.counts[i]) * scale;
    }
    return h;
}

double freedman_diaconis_width(std::span<const double> xs) {
    if (xs.size() < 2) {
        return 1.0;
    }
    std::vector<double> sorted(xs.begin(), xs.end());
    std::sort(sorted.begin(), sorted.end());
    auto quantile = [&](double p) {
        const double pos = p * static_cast<double>(sorted.size() - 1);
        const auto i = static_cast<std::size_t>(std::floor(pos));
        const double frac = pos - static_cast<double>(i);
        return i + 1 < sorted.size() ? sorted[i] * (1.0 - frac) + sorted[i + 1] * frac : sorted[i];
    };
    const double iqr = quantile(0.75) - quantile(0.25);
    const double n_cbrt = std::cbrt(static_cast<double>(sorted.size()));
    double width = 2.0 * iqr / n_cbrt;
    if (!(width > 0.0)) {
        const double sd = std::sqrt(sample_moments(sorted).variance);
        width = sd > 0.0 ? 3.49 * sd / n_cbrt : 1.0;
    }
    // Keep heavy-tailed samples to a bounded table.
    constexpr double kMaxBins = 5000.0;
    const double range = sorted.back() - sorted.front();
    return std::max(width, range / kMaxBins);
}

EnergyHistograms energy_histograms(const std::vector<EnergyTrace>& traces) {
    std::vector<double> centered;
    std::vector<double> deltas;
    for (const auto& t : traces) {
        if (t.energies.empty()) {
            continue;
        }
        const double m = mean_of(t.energies);
        for (double e : t.energies) {
            centered.push_back(e - m);
        }
        deltas.insert(deltas.end(), t.deltas.begin(), t.deltas.end());
    }
    std::vector<double> pooled = centered;
    pooled.insert(pooled.end(), deltas.begin(), deltas.end());
    const double width = freedman_diaconis_width(pooled);

    EnergyHistograms out;
    out.centered_energy = make_histogram(centered, width);
    out.delta_energy = make_histogram(deltas, width);
    out.low_sample_warning = deltas.size() < 100;
    return out;
}

EnergyHistograms energy_histograms(const EnergyTrace& trace) {
    return energy_histograms(std::vector<EnergyTrace>{trace});
}

namespace {

double gamma_density(double x, double shape) {
    if (!(x > 0.0)) {
        return 0.0;
    }
    return std::exp((shape - 1.0) * std::log(x) - x - std::lgamma(shape));
}

double normal_density(double x, double mean, double variance) {
    const double z = x - mean;
    return std::exp(-0.5 * z * z / variance) / std::sqrt(2.0 * std::numbers::pi * variance);
}

}  // namespace

double GaussianEuclideanReference::kinetic_density(double k) const {
    return gamma_density(k, 0.5 * static_cast<double>(dim));
}

double GaussianEuclideanReference::delta_k_density(double dk) const {
    return normal_density(dk, delta_k_mean, delta_k_variance);
}

double GaussianEuclideanReference::gaussian_energy_density(double e) const {
    return gamma_density(e, static_cast<double>(dim));
}

double GaussianEuclideanReference::centered_gaussian_energy_density(double centered) const {
    return gaussian_energy_density(centered + gaussian_energy_mean);
}

GaussianEuclideanReference gaussian_euclidean_reference(std::size_t dim) {
    if (dim == 0) {
        throw std::invalid_argument("reference dimension must be at least 1");
    }
    const double D = static_cast<double>(dim);
    GaussianEuclideanReference r;
    r.dim = dim;
    r.kinetic_mean = 0.5 * D;
    r.kinetic_variance = 0.5 * D;
    r.delta_k_mean = 0.0;
    r.delta_k_variance = D;
    r.expected_conditional_variance = D;
    r.gaussian_energy_mean = D;
    r.gaussian_energy_variance = D;
    return r;
}

std::vector<OverlayRow> overlay(const Histogram& h, const std::function<double(double)>& reference) {
    std::vector<OverlayRow> rows;
    rows.reserve(h.counts.size());
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
        OverlayRow row{h.bin_edges[i], h.bin_edges[i + 1], h.densities[i], std::nullopt};
        if (reference) {
            row.reference_density = reference(0.5 * (row.bin_left + row.bin_right));
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace microhmc
