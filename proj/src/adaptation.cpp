#include <algorithm>
#include <cmath>
#include <limits>

#include "microhmc/sample.hpp"

namespace microhmc {

DualAveraging::DualAveraging(double target_accept, double gamma, double t0, double kappa)
    : delta_(target_accept), gamma_(gamma), t0_(t0), kappa_(kappa) {}

void DualAveraging::restart(double step_size) {
    mu_ = std::log(10.0 * step_size);
    counter_ = 0.0;
    s_bar_ = 0.0;
    x_bar_ = 0.0;
}

double DualAveraging::learn(double accept_stat) {
    counter_ += 1.0;
    accept_stat = std::min(1.0, accept_stat);

    const double eta = 1.0 / (counter_ + t0_);
    s_bar_ = (1.0 - eta) * s_bar_ + eta * (delta_ - accept_stat);

    const double x = mu_ - s_bar_ * std::sqrt(counter_) / gamma_;
    const double x_eta = std::pow(counter_, -kappa_);
    x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
    return std::exp(x);
}

double DualAveraging::final_step_size() const { return std::exp(x_bar_); }

EuclideanMetric adapt_metric(const Eigen::MatrixXd& draws, std::size_t min_draws) {
    const auto n = static_cast<std::size_t>(draws.rows());
    const auto dim = static_cast<std::size_t>(draws.cols());
    if (n < std::max<std::size_t>(min_draws, 2)) {
        return EuclideanMetric::unit(dim);
    }
    const Eigen::RowVectorXd mean = draws.colwise().mean();
    const Eigen::VectorXd var =
        ((draws.rowwise() - mean).array().square().colwise().sum() / static_cast<double>(n - 1)).transpose();
    const double nd = static_cast<double>(n);
    const Eigen::VectorXd regularized = (nd / (nd + 5.0)) * var.array() + 1e-3 * (5.0 / (nd + 5.0));
    return EuclideanMetric::from_inverse_diagonal(regularized);
}

WindowedSchedule::WindowedSchedule(std::size_t num_warmup, std::size_t init_buffer, std::size_t term_buffer,
                                   std::size_t base_window)
    : num_warmup_(num_warmup), init_buffer_(init_buffer), term_buffer_(term_buffer), window_size_(base_window) {
    if (num_warmup < 20) {
        enabled_ = false;
        next_end_ = 0;
        return;
    }
    if (init_buffer + base_window + term_buffer > num_warmup) {
        init_buffer_ = static_cast<std::size_t>(0.15 * static_cast<double>(num_warmup));
        term_buffer_ = static_cast<std::size_t>(0.1 * static_cast<double>(num_warmup));
        window_size_ = num_warmup - (init_buffer_ + term_buffer_);
    }
    next_end_ = init_buffer_ + window_size_ - 1;
}

bool WindowedSchedule::in_window(std::size_t iter) const {
    return enabled_ && iter >= init_buffer_ && iter < num_warmup_ - term_buffer_ && iter != num_warmup_;
}

bool WindowedSchedule::window_end(std::size_t iter) const {
    return enabled_ && iter == next_end_ && iter != num_warmup_;
}

void WindowedSchedule::next_window(std::size_t iter) {
    const std::size_t last = num_warmup_ - term_buffer_ - 1;
    if (next_end_ == last) {
        return;
    }
    window_size_ *= 2;
    next_end_ = iter + window_size_;
    // Stretch the window to the terminal buffer when the next one would not fit.
    if (next_end_ != last && next_end_ + 2 * window_size_ >= num_warmup_ - term_buffer_) {
        next_end_ = last;
    }
}

double find_initial_step_size(const Vector& q, double step_size, const TargetModel& model,
                              const EuclideanMetric& metric, RandomStream& rng) {
    const double log_target = std::log(0.8);

    auto trial = [&](double eps) {
        PhaseState z = make_state(model, q, metric.sample_momentum(rng));
        const double H0 = hamiltonian(metric, z);
        leapfrog_step_inplace(z, eps, model, metric);
        double h = hamiltonian(metric, z);
        if (std::isnan(h)) {
            h = std::numeric_limits<double>::infinity();
        }
        return H0 - h;
    };

    const int direction = trial(step_size) > log_target ? 1 : -1;
    while (true) {
        const double delta_h = trial(step_size);
        if (direction == 1 && !(delta_h > log_target)) {
            break;
        }
        if (direction == -1 && !(delta_h < log_target)) {
            break;
        }
        step_size = direction == 1 ? 2.0 * step_size : 0.5 * step_size;
        if (step_size > 1e7) {
            throw AdaptationError("step size search diverged above 1e7; posterior may be improper");
        }
        if (step_size < 1e-10) {
            throw AdaptationError("step size search collapsed below 1e-10");
        }
    }
    return step_size;
}

}  // namespace microhmc
