#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "doctest.h"
#include "microhmc/integrate.hpp"

using namespace microhmc;

namespace {

// V = 0 everywhere.
class FlatModel final : public TargetModel {
public:
    explicit FlatModel(std::size_t dim) : names_(dim, "x"), transforms_(dim) {}
    std::string_view name() const override { return "flat"; }
    std::size_t dim() const override { return names_.size(); }
    const std::vector<std::string>& parameter_names() const override { return names_; }
    const std::vector<ConstraintTransform>& transforms() const override { return transforms_; }
    double potential_unchecked(const Vector&) const override { return 0.0; }
    double potential_and_gradient_unchecked(const Vector& q, Vector& grad) const override {
        grad = Vector::Zero(q.size());
        return 0.0;
    }

private:
    std::vector<std::string> names_;
    std::vector<ConstraintTransform> transforms_;
};

// Counts gradient evaluations of a standard Gaussian; NaN past |q| > 50.
class CountingModel final : public TargetModel {
public:
    explicit CountingModel(std::size_t dim) : names_(dim, "x"), transforms_(dim) {}
    std::string_view name() const override { return "counting"; }
    std::size_t dim() const override { return names_.size(); }
    const std::vector<std::string>& parameter_names() const override { return names_; }
    const std::vector<ConstraintTransform>& transforms() const override { return transforms_; }
    double potential_unchecked(const Vector& q) const override { return 0.5 * q.squaredNorm(); }
    double potential_and_gradient_unchecked(const Vector& q, Vector& grad) const override {
        ++calls;
        grad = q;
        if (q.cwiseAbs().maxCoeff() > 50.0) {
            grad.setConstant(std::numeric_limits<double>::quiet_NaN());
            return std::numeric_limits<double>::quiet_NaN();
        }
        return 0.5 * q.squaredNorm();
    }
    mutable int calls = 0;

private:
    std::vector<std::string> names_;
    std::vector<ConstraintTransform> transforms_;
};

}  // namespace

TEST_CASE("pure drift on a flat potential") {
    FlatModel flat(2);
    auto m = EuclideanMetric::unit(2);
    auto s = make_state(flat, Vector{{1.0, 2.0}}, Vector{{0.5, -1.0}});
    auto out = leapfrog_step(s, 0.2, flat, m);
    CHECK(out.q[0] == doctest::Approx(1.1).epsilon(1e-15));
    CHECK(out.q[1] == doctest::Approx(1.8).epsilon(1e-15));
    CHECK(out.p == s.p);
}

TEST_CASE("harmonic oscillator single step by hand") {
    auto model = make_model(spec::GaussianIid{1});
    auto m = EuclideanMetric::unit(1);
    auto s = make_state(*model, Vector{{1.0}}, Vector{{0.0}});
    // p_half = 0 - 0.05 * 1 = -0.05; q' = 1 + 0.1 * -0.05 = 0.995;
    // p' = -0.05 - 0.05 * 0.995 = -0.09975.
    auto out = leapfrog_step(s, 0.1, *model, m);
    CHECK(out.q[0] == doctest::Approx(0.995).epsilon(1e-14));
    CHECK(out.p[0] == doctest::Approx(-0.09975).epsilon(1e-14));
    CHECK(out.V == doctest::Approx(0.5 * 0.995 * 0.995).epsilon(1e-14));
    CHECK(out.gradV[0] == out.q[0]);
}

TEST_CASE("one gradient evaluation per step") {
    CountingModel model(3);
    auto m = EuclideanMetric::unit(3);
    auto s = make_state(model, Vector{{0.1, 0.2, 0.3}}, Vector{{1.0, 0.0, -1.0}});
    model.calls = 0;
    for (int i = 0; i < 25; ++i) {
        leapfrog_step_inplace(s, 0.1, model, m);
    }
    CHECK(model.calls == 25);
}

TEST_CASE("non-finite energies become divergences") {
    CountingModel model(1);
    auto m = EuclideanMetric::unit(1);
    auto s = make_state(model, Vector{{49.0}}, Vector{{100.0}});
    const double H0 = hamiltonian(m, s);
    auto out = leapfrog_step(s, 0.1, model, m);
    CHECK_FALSE(std::isfinite(out.V));
    CHECK(is_divergent(H0, hamiltonian(m, out), IntegratorConfig{}));
}

TEST_CASE("divergence threshold") {
    IntegratorConfig cfg;
    CHECK(cfg.divergence_threshold == 1000.0);
    CHECK_FALSE(is_divergent(3.0, 3.0, cfg));
    CHECK(is_divergent(0.0, std::numeric_limits<double>::infinity(), cfg));
    CHECK(is_divergent(0.0, std::numeric_limits<double>::quiet_NaN(), cfg));
    CHECK(is_divergent(0.0, 1000.5, cfg));
    CHECK_FALSE(is_divergent(0.0, 1000.0, cfg));
    CHECK_FALSE(is_divergent(0.0, -5000.0, cfg));

    CHECK_THROWS_AS((IntegratorConfig{0.0, 1000.0}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((IntegratorConfig{0.1, -1.0}.validate()), std::invalid_argument);
    CHECK_NOTHROW((IntegratorConfig{0.1, 1000.0}.validate()));
}

TEST_CASE("momentum-flip reversibility") {
    EightSchoolsData data{{28, 8, -3, 7, -1, 1, 18, 12}, {15, 10, 16, 11, 9, 11, 10, 18}};
    std::vector<ModelPtr> models = {make_model(spec::GaussianIid{4}), make_model(spec::CauchyIid{4}),
                                    make_model(spec::EightSchoolsCentered{data}),
                                    make_model(spec::EightSchoolsNoncentered{data})};
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::uniform_real_distribution<double> eps_dist(0.01, 0.2);
    for (const auto& model : models) {
        CAPTURE(model->name());
        const auto D = static_cast<Eigen::Index>(model->dim());
        Vector mass(D);
        for (auto& x : mass) {
            x = std::exp(u(rng) / 2.0);
        }
        auto metric = EuclideanMetric::diagonal(mass);
        for (int trial = 0; trial < 25; ++trial) {
            Vector q(D);
            Vector p(D);
            for (Eigen::Index i = 0; i < D; ++i) {
                q[i] = u(rng);
                p[i] = u(rng);
            }
            const double eps = eps_dist(rng);
            auto s = make_state(*model, q, p);
            auto fwd = leapfrog_step(s, eps, *model, metric);
            fwd.p = -fwd.p;
            auto back = leapfrog_step(fwd, eps, *model, metric);
            back.p = -back.p;
            CHECK((back.q - q).cwiseAbs().maxCoeff() < 1e-10);
            CHECK((back.p - p).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
}

TEST_CASE("energy error shrinks at second order") {
    auto model = make_model(spec::GaussianIid{10});
    auto metric = EuclideanMetric::unit(10);
    RandomStream rng(31);
    const Vector q0 = Vector::LinSpaced(10, -1.5, 1.5);
    const Vector p0 = sample_momentum(metric, rng);

    auto max_error = [&](double eps) {
        auto s = make_state(*model, q0, p0);
        const double H0 = hamiltonian(metric, s);
        const int steps = static_cast<int>(std::lround(2.0 * std::numbers::pi / eps));
        double worst = 0.0;
        for (int i = 0; i < steps; ++i) {
            leapfrog_step_inplace(s, eps, *model, metric);
            worst = std::max(worst, std::abs(hamiltonian(metric, s) - H0));
        }
        return worst;
    };
    const double ratio = max_error(0.2) / max_error(0.1);
    CAPTURE(ratio);
    CHECK(ratio >= 3.0);
    CHECK(ratio <= 5.0);
}

TEST_CASE("leapfrog map preserves phase-space volume") {
    // Jacobian of one step by central differences over the 2D coordinates.
    std::vector<ModelPtr> models = {make_model(spec::GaussianIid{3}), make_model(spec::CauchyIid{3})};
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (const auto& model : models) {
        const auto D = static_cast<Eigen::Index>(model->dim());
        auto metric = EuclideanMetric::diagonal(Vector::LinSpaced(D, 0.5, 2.0));
        for (int trial = 0; trial < 100; ++trial) {
            Vector x(2 * D);
            for (auto& v : x) {
                v = u(rng);
            }
            auto step = [&](const Vector& z) {
                auto s = make_state(*model, z.head(D), z.tail(D));
                auto out = leapfrog_step(s, 0.15, *model, metric);
                Vector r(2 * D);
                r << out.q, out.p;
                return r;
            };
            Eigen::MatrixXd J(2 * D, 2 * D);
            const double h = 1e-6;
            for (Eigen::Index k = 0; k < 2 * D; ++k) {
                Vector plus = x;
                Vector minus = x;
                plus[k] += h;
                minus[k] -= h;
                J.col(k) = (step(plus) - step(minus)) / (2.0 * h);
            }
            CHECK(std::abs(J.determinant() - 1.0) < 1e-6);
        }
    }
}
