#ifndef MICROHMC_INTEGRATE_HPP
#define MICROHMC_INTEGRATE_HPP

#include "microhmc/model.hpp"
#include "microhmc/phase.hpp"

namespace microhmc {

struct IntegratorConfig {
    double step_size = 1.0;
    /// Energy error above which a trajectory is declared divergent.
    double divergence_threshold = 1000.0;

    /// Throws std::invalid_argument unless both values are finite and positive.
    void validate() const;
};

/// One leapfrog step of size `eps` (negative integrates backwards in time):
/// half kick, drift, half kick. Evaluates the gradient once, reusing the one
/// cached in `s`. A non-finite V or gradient at the new position is left in
/// the returned state for the caller to treat as a divergence.
PhaseState leapfrog_step(const PhaseState& s, double eps, const TargetModel& model, const EuclideanMetric& m);

/// In-place variant used by the sampler's inner loop.
void leapfrog_step_inplace(PhaseState& s, double eps, const TargetModel& model, const EuclideanMetric& m);

/// True when H exceeds H0 by more than the threshold or H is not finite.
bool is_divergent(double H0, double H, const IntegratorConfig& cfg);

}  // namespace microhmc

#endif  // MICROHMC_INTEGRATE_HPP
