#ifndef MICROHMC_PHASE_HPP
#define MICROHMC_PHASE_HPP

#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "microhmc/model.hpp"
#include "microhmc/random.hpp"

namespace microhmc {

enum class MetricKind { unit, diagonal, dense };

/// Constant mass matrix M of a Gaussian-Euclidean momentum distribution,
/// p ~ N(0, M), K(p) = 1/2 p^T M^{-1} p. The 1/2 log|M| term is constant and
/// omitted everywhere.
class EuclideanMetric {
public:
    static EuclideanMetric unit(std::size_t dim);

    /// `mass_diagonal` entries must be finite and strictly positive.
    static EuclideanMetric diagonal(Vector mass_diagonal);

    /// `mass` must be symmetric (to 1e-12) and positive definite.
    static EuclideanMetric dense(Eigen::MatrixXd mass);

    /// Diagonal metric whose inverse mass (the momentum-space "covariance" of
    /// positions) is `inverse_mass_diagonal`. This is the form warmup
    /// adaptation produces.
    static EuclideanMetric from_inverse_diagonal(const Vector& inverse_mass_diagonal);

    MetricKind kind() const { return kind_; }
    std::size_t dim() const { return dim_; }

    /// Diagonal of M (for dense metrics, the matrix diagonal).
    Vector mass_diagonal() const;
    /// Diagonal of M^{-1}.
    Vector inverse_mass_diagonal() const;

    double kinetic_energy(const Vector& p) const;
    /// Velocity M^{-1} p.
    Vector grad_kinetic(const Vector& p) const;
    Vector sample_momentum(RandomStream& rng) const;

private:
    EuclideanMetric() = default;

    void check(std::string_view op, const Vector& p) const;

    MetricKind kind_ = MetricKind::unit;
    std::size_t dim_ = 0;
    Vector mass_diag_;
    Vector inv_mass_diag_;
    Vector sqrt_mass_diag_;
    Eigen::MatrixXd mass_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
};

inline double kinetic_energy(const EuclideanMetric& m, const Vector& p) { return m.kinetic_energy(p); }
inline Vector grad_kinetic(const EuclideanMetric& m, const Vector& p) { return m.grad_kinetic(p); }
inline Vector sample_momentum(const EuclideanMetric& m, RandomStream& rng) { return m.sample_momentum(rng); }

/// Serialized form of a diagonal metric: whitespace/comma separated mass
/// diagonal values, `#` comments allowed.
std::string format_metric(const EuclideanMetric& m);
EuclideanMetric parse_metric(std::string_view text);

/// Point (q, p) of phase space with the potential and its gradient cached
/// for q.
struct PhaseState {
    Vector q;
    Vector p;
    double V = 0.0;
    Vector gradV;
};

/// Builds a coherent state by evaluating the model at q.
PhaseState make_state(const TargetModel& model, Vector q, Vector p);

/// H = K(p) + V(q).
inline double hamiltonian(const EuclideanMetric& m, const PhaseState& s) { return m.kinetic_energy(s.p) + s.V; }

}  // namespace microhmc

#endif  // MICROHMC_PHASE_HPP
