#include <cmath>
#include <limits>

#include "microhmc/sample.hpp"

namespace microhmc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(double a, double b) {
    if (a == kNegInf) {
        return b;
    }
    if (b == kNegInf) {
        return a;
    }
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Both endpoint velocities must point along the summed momentum.
bool no_u_turn(const Vector& p_sharp_minus, const Vector& p_sharp_plus, const Vector& rho) {
    return p_sharp_plus.dot(rho) > 0.0 && p_sharp_minus.dot(rho) > 0.0;
}

// Recursive doubling with multinomial sampling inside subtrees and extra
// U-turn checks across the merged halves.
class TreeBuilder {
public:
    TreeBuilder(const TargetModel& model, const EuclideanMetric& metric, RandomStream& rng, double step_size,
                double H0, double divergence_threshold)
        : model_(model), metric_(metric), rng_(rng), eps_(step_size), H0_(H0), max_delta_h_(divergence_threshold) {}

    // Extends z by 2^depth leapfrog steps in direction `sign`.
    bool build(PhaseState& z, int depth, PhaseState& z_propose, Vector& p_sharp_beg, Vector& p_sharp_end, Vector& rho,
               Vector& p_beg, Vector& p_end, double sign, double& log_sum_weight) {
        if (depth == 0) {
            leapfrog_step_inplace(z, sign * eps_, model_, metric_);
            ++n_leapfrog;
            double h = hamiltonian(metric_, z);
            if (std::isnan(h)) {
                h = std::numeric_limits<double>::infinity();
            }
            if (h - H0_ > max_delta_h_) {
                divergent = true;
            }
            log_sum_weight = log_sum_exp(log_sum_weight, H0_ - h);
            sum_metro_prob += H0_ - h > 0.0 ? 1.0 : std::exp(H0_ - h);
            z_propose = z;
            p_sharp_beg = metric_.grad_kinetic(z.p);
            p_sharp_end = p_sharp_beg;
            rho += z.p;
            p_beg = z.p;
            p_end = p_beg;
            return !divergent;
        }

        const auto dim = z.q.size();

        double log_sum_weight_init = kNegInf;
        Vector p_init_end(dim);
        Vector p_sharp_init_end(dim);
        Vector rho_init = Vector::Zero(dim);
        if (!build(z, depth - 1, z_propose, p_sharp_beg, p_sharp_init_end, rho_init, p_beg, p_init_end, sign,
                   log_sum_weight_init)) {
            return false;
        }

        PhaseState z_propose_final = z;
        double log_sum_weight_final = kNegInf;
        Vector p_final_beg(dim);
        Vector p_sharp_final_beg(dim);
        Vector rho_final = Vector::Zero(dim);
        if (!build(z, depth - 1, z_propose_final, p_sharp_final_beg, p_sharp_end, rho_final, p_final_beg, p_end, sign,
                   log_sum_weight_final)) {
            return false;
        }

        const double log_sum_weight_subtree = log_sum_exp(log_sum_weight_init, log_sum_weight_final);
        log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);

        if (log_sum_weight_final > log_sum_weight_subtree) {
            z_propose = std::move(z_propose_final);
        } else if (rng_.uniform() < std::exp(log_sum_weight_final - log_sum_weight_subtree)) {
            z_propose = std::move(z_propose_final);
        }

        const Vector rho_subtree = rho_init + rho_final;
        rho += rho_subtree;

        bool persist = no_u_turn(p_sharp_beg, p_sharp_end, rho_subtree);
        persist = persist && no_u_turn(p_sharp_beg, p_sharp_final_beg, rho_init + p_final_beg);
        persist = persist && no_u_turn(p_sharp_init_end, p_sharp_end, rho_final + p_init_end);
        return persist;
    }

    int n_leapfrog = 0;
    double sum_metro_prob = 0.0;
    bool divergent = false;

private:
    const TargetModel& model_;
    const EuclideanMetric& metric_;
    RandomStream& rng_;
    double eps_;
    double H0_;
    double max_delta_h_;
};

}  // namespace

TransitionResult transition(const ChainState& state, double step_size, int max_tree_depth,
                            double divergence_threshold, const TargetModel& model, const EuclideanMetric& metric,
                            RandomStream& rng) {
    // Lift: fresh momentum at the current position.
    Vector p0 = metric.sample_momentum(rng);
    const double resample_delta_k = metric.kinetic_energy(p0) - metric.kinetic_energy(state.p);
    PhaseState z = make_state(model, state.q, std::move(p0));

    const auto dim = z.q.size();
    PhaseState z_fwd = z;
    PhaseState z_bck = z;
    PhaseState z_sample = z;
    PhaseState z_propose = z;

    Vector p_fwd_fwd = z.p;
    Vector p_sharp_fwd_fwd = metric.grad_kinetic(z.p);
    Vector p_fwd_bck = z.p;
    Vector p_sharp_fwd_bck = p_sharp_fwd_fwd;
    Vector p_bck_fwd = z.p;
    Vector p_sharp_bck_fwd = p_sharp_fwd_fwd;
    Vector p_bck_bck = z.p;
    Vector p_sharp_bck_bck = p_sharp_fwd_fwd;

    Vector rho = z.p;
    double log_sum_weight = 0.0;
    const double H0 = hamiltonian(metric, z);

    TreeBuilder builder(model, metric, rng, step_size, H0, divergence_threshold);
    int depth = 0;

    // Flow: doubling until termination.
    while (depth < max_tree_depth) {
        Vector rho_fwd = Vector::Zero(dim);
        Vector rho_bck = Vector::Zero(dim);
        bool valid_subtree = false;
        double log_sum_weight_subtree = kNegInf;

        if (rng.uniform() > 0.5) {
            z = z_fwd;
            rho_bck = rho;
            p_bck_fwd = p_fwd_bck;
            p_sharp_bck_fwd = p_sharp_fwd_bck;
            valid_subtree = builder.build(z, depth, z_propose, p_sharp_fwd_bck, p_sharp_fwd_fwd, rho_fwd, p_fwd_bck,
                                          p_fwd_fwd, 1.0, log_sum_weight_subtree);
            z_fwd = z;
        } else {
            z = z_bck;
            rho_fwd = rho;
            p_fwd_bck = p_bck_fwd;
            p_sharp_fwd_bck = p_sharp_bck_fwd;
            valid_subtree = builder.build(z, depth, z_propose, p_sharp_bck_fwd, p_sharp_bck_bck, rho_bck, p_bck_fwd,
                                          p_bck_bck, -1.0, log_sum_weight_subtree);
            z_bck = z;
        }

        if (!valid_subtree) {
            break;
        }
        ++depth;

        // Biased progressive sampling favours the newer subtree.
        if (log_sum_weight_subtree > log_sum_weight) {
            z_sample = z_propose;
        } else if (rng.uniform() < std::exp(log_sum_weight_subtree - log_sum_weight)) {
            z_sample = z_propose;
        }
        log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);

        rho = rho_bck + rho_fwd;
        bool persist = no_u_turn(p_sharp_bck_bck, p_sharp_fwd_fwd, rho);
        persist = persist && no_u_turn(p_sharp_bck_bck, p_sharp_fwd_bck, rho_bck + p_fwd_bck);
        persist = persist && no_u_turn(p_sharp_bck_fwd, p_sharp_fwd_fwd, rho_fwd + p_bck_fwd);
        if (!persist) {
            break;
        }
    }

    TransitionResult result;
    result.info.tree_depth = depth;
    result.info.n_leapfrog = builder.n_leapfrog;
    result.info.divergent = builder.divergent;
    result.info.step_size = step_size;
    result.info.accept_stat =
        builder.n_leapfrog > 0 ? builder.sum_metro_prob / static_cast<double>(builder.n_leapfrog) : 0.0;
    result.info.energy = hamiltonian(metric, z_sample);
    result.info.delta_energy = result.info.energy - state.energy;
    result.info.resample_delta_k = resample_delta_k;

    // Projection keeps the position; the momentum is only retained for the
    // next transition's resampling bookkeeping.
    result.state.q = z_sample.q;
    result.state.p = z_sample.p;
    result.state.energy = result.info.energy;
    result.accepted = std::move(z_sample);
    return result;
}

}  // namespace microhmc
