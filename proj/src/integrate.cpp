#include "microhmc/integrate.hpp"

#include <cmath>
#include <stdexcept>

namespace microhmc {

void IntegratorConfig::validate() const {
    if (!(step_size > 0.0) || !std::isfinite(step_size)) {
        throw std::invalid_argument("integrator step size must be positive and finite");
    }
    if (!(divergence_threshold > 0.0)) {
        throw std::invalid_argument("divergence threshold must be positive");
    }
}

void leapfrog_step_inplace(PhaseState& s, double eps, const TargetModel& model, const EuclideanMetric& m) {
    s.p.noalias() -= 0.5 * eps * s.gradV;
    s.q.noalias() += eps * m.grad_kinetic(s.p);
    s.V = model.potential_and_gradient_unchecked(s.q, s.gradV);
    s.p.noalias() -= 0.5 * eps * s.gradV;
}

PhaseState leapfrog_step(const PhaseState& s, double eps, const TargetModel& model, const EuclideanMetric& m) {
    if (static_cast<std::size_t>(s.q.size()) != model.dim()) {
        throw DimensionMismatch("leapfrog_step", model.dim(), static_cast<std::size_t>(s.q.size()));
    }
    PhaseState out = s;
    leapfrog_step_inplace(out, eps, model, m);
    return out;
}

bool is_divergent(double H0, double H, const IntegratorConfig& cfg) {
    if (!std::isfinite(H)) {
        return true;
    }
    return H - H0 > cfg.divergence_threshold;
}

}  // namespace microhmc
