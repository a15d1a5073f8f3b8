#ifndef MICROHMC_SAMPLE_HPP
#define MICROHMC_SAMPLE_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "microhmc/integrate.hpp"
#include "microhmc/model.hpp"
#include "microhmc/phase.hpp"
#include "microhmc/random.hpp"

namespace microhmc {

enum class MetricMode { unit, diagonal_adapt };

struct SamplerConfig {
    std::size_t num_warmup = 1000;
    std::size_t num_samples = 1000;
    int max_tree_depth = 10;
    double target_accept = 0.8;
    std::uint64_t seed = 0;
    std::size_t chains = 4;
    MetricMode metric_mode = MetricMode::diagonal_adapt;
    /// Initial step size handed to the step-size search.
    double initial_step_size = 1.0;
    double divergence_threshold = 1000.0;
    /// Fixed metric; when set, only the step size is adapted.
    std::optional<EuclideanMetric> metric;
    bool save_warmup = false;
    /// Worker threads used by run_chains; 0 means one per chain.
    std::size_t threads = 0;

    /// Throws std::invalid_argument on out-of-range values.
    void validate() const;
};

struct TransitionInfo {
    /// H at the accepted state.
    double energy = 0.0;
    /// energy minus the previous transition's energy.
    double delta_energy = 0.0;
    /// K(fresh momentum) - K(momentum of the previous accepted state).
    double resample_delta_k = 0.0;
    bool divergent = false;
    int tree_depth = 0;
    double step_size = 0.0;
    double accept_stat = 0.0;
    int n_leapfrog = 0;
};

struct ChainTrace {
    std::size_t chain_id = 0;
    /// num_samples x num_params, constrained parameter values.
    Eigen::MatrixXd draws;
    std::vector<TransitionInfo> infos;
    /// Energy of the transition preceding the first sample (last warmup
    /// transition, or the initial state when there is no warmup).
    double initial_energy = 0.0;
    Eigen::MatrixXd warmup_draws;
    std::vector<TransitionInfo> warmup_infos;
    double step_size = 0.0;
    Vector inverse_metric;

    /// E_0..E_N: initial_energy followed by every sampled energy.
    std::vector<double> energies() const;
};

/// Thrown when warmup drives the step size below 1e-10.
class AdaptationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Wraps a failure in one chain of run_chains().
class ChainError : public std::runtime_error {
public:
    ChainError(std::size_t chain_id, const std::string& what, bool adaptation_failure);
    std::size_t chain_id() const noexcept { return chain_id_; }
    /// True when the underlying failure was an AdaptationError.
    bool adaptation_failure() const noexcept { return adaptation_failure_; }

private:
    std::size_t chain_id_;
    bool adaptation_failure_;
};

/// Mutable per-chain sampler state carried between transitions.
struct ChainState {
    Vector q;
    /// Momentum of the last accepted state, for the resampling kinetic change.
    Vector p;
    double energy = 0.0;
};

struct TransitionResult {
    ChainState state;
    TransitionInfo info;
    /// Accepted phase-space point (momentum included) for checks.
    PhaseState accepted;
};

/// One Hamiltonian transition: resample momentum, grow a trajectory by
/// repeated doubling until a U-turn, the depth limit or a divergence, then
/// select a point with probability proportional to exp(-H) and drop its
/// momentum.
TransitionResult transition(const ChainState& state, double step_size, int max_tree_depth,
                            double divergence_threshold, const TargetModel& model, const EuclideanMetric& metric,
                            RandomStream& rng);

/// Dual-averaging step size adaptation.
class DualAveraging {
public:
    explicit DualAveraging(double target_accept, double gamma = 0.05, double t0 = 10.0, double kappa = 0.75);

    /// Restarts the averages around mu = log(10 * step_size).
    void restart(double step_size);

    /// Feeds one acceptance statistic and returns the next step size.
    double learn(double accept_stat);

    /// Step size to freeze after warmup.
    double final_step_size() const;

private:
    double delta_;
    double gamma_;
    double t0_;
    double kappa_;
    double mu_ = 0.0;
    double s_bar_ = 0.0;
    double x_bar_ = 0.0;
    double counter_ = 0.0;
};

/// Diagonal metric from per-coordinate variances of `draws` (rows are
/// draws), shrunk toward 1e-3: (n/(n+5)) var + 1e-3 (5/(n+5)). The result's
/// inverse mass diagonal holds those regularized variances. Falls back to the
/// unit metric with fewer than `min_draws` rows.
EuclideanMetric adapt_metric(const Eigen::MatrixXd& draws, std::size_t min_draws = 10);

/// Warmup schedule: an initial step-size-only buffer, doubling metric
/// windows, and a terminal step-size-only buffer.
class WindowedSchedule {
public:
    WindowedSchedule(std::size_t num_warmup, std::size_t init_buffer = 75, std::size_t term_buffer = 150,
                     std::size_t base_window = 25);

    /// Whether iteration `iter` contributes a draw to the current metric window.
    bool in_window(std::size_t iter) const;
    /// Whether the metric window closes at iteration `iter`.
    bool window_end(std::size_t iter) const;
    /// Advance past a closed window.
    void next_window(std::size_t iter);

    std::size_t init_buffer() const { return init_buffer_; }
    std::size_t term_buffer() const { return term_buffer_; }

private:
    std::size_t num_warmup_;
    std::size_t init_buffer_;
    std::size_t term_buffer_;
    std::size_t window_size_;
    std::size_t next_end_;
    bool enabled_ = true;
};

/// Heuristic initial step size: doubles or halves `step_size` until a single
/// leapfrog step's acceptance crosses 0.8.
double find_initial_step_size(const Vector& q, double step_size, const TargetModel& model,
                              const EuclideanMetric& metric, RandomStream& rng);

/// Runs warmup and sampling for one chain on its own stream.
ChainTrace run_chain(const TargetModel& model, const SamplerConfig& cfg, std::size_t chain_id);

/// Runs `cfg.chains` independent chains, possibly on several threads.
/// Results do not depend on thread count or scheduling.
std::vector<ChainTrace> run_chains(const TargetModel& model, const SamplerConfig& cfg);

}  // namespace microhmc

#endif  // MICROHMC_SAMPLE_HPP
