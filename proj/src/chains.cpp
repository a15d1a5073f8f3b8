#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

#include <fmt/format.h>

#include "microhmc/sample.hpp"

namespace microhmc {

void SamplerConfig::validate() const {
    if (!(target_accept > 0.0 && target_accept < 1.0)) {
        throw std::invalid_argument(fmt::format("target acceptance {} must lie in (0, 1)", target_accept));
    }
    if (num_samples < 1) {
        throw std::invalid_argument("num_samples must be at least 1");
    }
    if (chains < 1) {
        throw std::invalid_argument("chains must be at least 1");
    }
    if (max_tree_depth < 1) {
        throw std::invalid_argument("max_tree_depth must be at least 1");
    }
    if (!(initial_step_size > 0.0) || !std::isfinite(initial_step_size)) {
        throw std::invalid_argument("initial step size must be positive and finite");
    }
    if (!(divergence_threshold > 0.0)) {
        throw std::invalid_argument("divergence threshold must be positive");
    }
}

std::vector<double> ChainTrace::energies() const {
    std::vector<double> out;
    out.reserve(infos.size() + 1);
    out.push_back(initial_energy);
    for (const auto& info : infos) {
        out.push_back(info.energy);
    }
    return out;
}

ChainError::ChainError(std::size_t chain_id, const std::string& what, bool adaptation_failure)
    : std::runtime_error(fmt::format("chain {}: {}", chain_id + 1, what)),
      chain_id_(chain_id),
      adaptation_failure_(adaptation_failure) {}

namespace {

constexpr double kMinStepSize = 1e-10;

void check_step_size(double eps, const TargetModel& model) {
    if (!(eps >= kMinStepSize)) {
        throw AdaptationError(
            fmt::format("step size {:g} collapsed below {:g} during warmup of model '{}'", eps, kMinStepSize,
                        model.name()));
    }
}

}  // namespace

ChainTrace run_chain(const TargetModel& model, const SamplerConfig& cfg, std::size_t chain_id) {
    cfg.validate();
    const auto dim = static_cast<Eigen::Index>(model.dim());
    if (cfg.metric && cfg.metric->dim() != model.dim()) {
        throw DimensionMismatch("fixed metric", model.dim(), cfg.metric->dim());
    }

    RandomStream rng(cfg.seed, static_cast<std::uint32_t>(chain_id));

    EuclideanMetric metric = cfg.metric ? *cfg.metric : EuclideanMetric::unit(model.dim());
    const bool adapt_metric_enabled = cfg.metric_mode == MetricMode::diagonal_adapt && !cfg.metric;

    ChainState state;
    state.q.resize(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        state.q[i] = rng.uniform(-2.0, 2.0);
    }
    state.p = metric.sample_momentum(rng);
    state.energy = hamiltonian(metric, make_state(model, state.q, state.p));

    ChainTrace trace;
    trace.chain_id = chain_id;

    double eps = cfg.initial_step_size;
    if (cfg.num_warmup > 0) {
        eps = find_initial_step_size(state.q, eps, model, metric, rng);
        check_step_size(eps, model);
    }

    DualAveraging step_adapter(cfg.target_accept);
    step_adapter.restart(eps);
    WindowedSchedule schedule(cfg.num_warmup);
    std::vector<Vector> window;

    if (cfg.save_warmup) {
        trace.warmup_draws.resize(static_cast<Eigen::Index>(cfg.num_warmup), dim);
        trace.warmup_infos.reserve(cfg.num_warmup);
    }

    for (std::size_t iter = 0; iter < cfg.num_warmup; ++iter) {
        auto res = transition(state, eps, cfg.max_tree_depth, cfg.divergence_threshold, model, metric, rng);
        state = std::move(res.state);
        if (cfg.save_warmup) {
            trace.warmup_draws.row(static_cast<Eigen::Index>(iter)) = model.constrain_point(state.q).transpose();
            trace.warmup_infos.push_back(res.info);
        }

        eps = step_adapter.learn(res.info.accept_stat);
        check_step_size(eps, model);

        if (adapt_metric_enabled) {
            if (schedule.in_window(iter)) {
                window.push_back(state.q);
            }
            if (schedule.window_end(iter)) {
                schedule.next_window(iter);
                Eigen::MatrixXd block(static_cast<Eigen::Index>(window.size()), dim);
                for (std::size_t r = 0; r < window.size(); ++r) {
                    block.row(static_cast<Eigen::Index>(r)) = window[r].transpose();
                }
                metric = adapt_metric(block);
                window.clear();
                eps = find_initial_step_size(state.q, eps, model, metric, rng);
                check_step_size(eps, model);
                step_adapter.restart(eps);
            }
        }
    }
    if (cfg.num_warmup > 0) {
        eps = step_adapter.final_step_size();
        check_step_size(eps, model);
    }

    trace.initial_energy = state.energy;
    trace.step_size = eps;
    trace.inverse_metric = metric.inverse_mass_diagonal();
    trace.draws.resize(static_cast<Eigen::Index>(cfg.num_samples), dim);
    trace.infos.reserve(cfg.num_samples);

    for (std::size_t iter = 0; iter < cfg.num_samples; ++iter) {
        auto res = transition(state, eps, cfg.max_tree_depth, cfg.divergence_threshold, model, metric, rng);
        state = std::move(res.state);
        trace.draws.row(static_cast<Eigen::Index>(iter)) = model.constrain_point(state.q).transpose();
        trace.infos.push_back(res.info);
    }
    return trace;
}

std::vector<ChainTrace> run_chains(const TargetModel& model, const SamplerConfig& cfg) {
    cfg.validate();
    const std::size_t n = cfg.chains;
    const std::size_t workers = std::min(n, cfg.threads == 0 ? n : cfg.threads);

    std::vector<ChainTrace> traces(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};

    auto work = [&] {
        for (std::size_t k = next.fetch_add(1); k < n; k = next.fetch_add(1)) {
            try {
                traces[k] = run_chain(model, cfg, k);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };

    if (workers <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back(work);
        }
    }

    for (std::size_t k = 0; k < n; ++k) {
        if (!errors[k]) {
            continue;
        }
        try {
            std::rethrow_exception(errors[k]);
        } catch (const AdaptationError& e) {
            throw ChainError(k, e.what(), true);
        } catch (const std::exception& e) {
            throw ChainError(k, e.what(), false);
        }
    }
    return traces;
}

}  // namespace microhmc
