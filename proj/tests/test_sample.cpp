#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "microhmc/sample.hpp"

using namespace microhmc;

namespace {

EightSchoolsData classic_data() {
    return {{28, 8, -3, 7, -1, 1, 18, 12}, {15, 10, 16, 11, 9, 11, 10, 18}};
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// A Gaussian so stiff that no representable step size is stable.
class StiffModel final : public TargetModel {
public:
    StiffModel() : names_{"x"}, transforms_(1) {}
    std::string_view name() const override { return "stiff"; }
    std::size_t dim() const override { return 1; }
    const std::vector<std::string>& parameter_names() const override { return names_; }
    const std::vector<ConstraintTransform>& transforms() const override { return transforms_; }
    double potential_unchecked(const Vector& q) const override { return 0.5e30 * q.squaredNorm(); }
    double potential_and_gradient_unchecked(const Vector& q, Vector& grad) const override {
        grad = 1e30 * q;
        return potential_unchecked(q);
    }

private:
    std::vector<std::string> names_;
    std::vector<ConstraintTransform> transforms_;
};

double mean_accept(const std::vector<ChainTrace>& traces) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& t : traces) {
        for (const auto& info : t.infos) {
            sum += info.accept_stat;
            ++n;
        }
    }
    return sum / static_cast<double>(n);
}

bool same_traces(const ChainTrace& a, const ChainTrace& b) {
    if (a.draws != b.draws || a.infos.size() != b.infos.size() || a.step_size != b.step_size) {
        return false;
    }
    for (std::size_t i = 0; i < a.infos.size(); ++i) {
        if (a.infos[i].energy != b.infos[i].energy || a.infos[i].n_leapfrog != b.infos[i].n_leapfrog) {
            return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("transition is deterministic and records coherent info") {
    auto model = make_model(spec::EightSchoolsNoncentered{classic_data()});
    auto metric = EuclideanMetric::diagonal(Vector::LinSpaced(10, 0.5, 2.0));
    ChainState start;
    start.q = Vector::LinSpaced(10, -1.0, 1.0);
    start.p = Vector::Zero(10);
    start.energy = 3.0;

    RandomStream a(5, 0);
    RandomStream b(5, 0);
    auto r1 = transition(start, 0.3, 10, 1000.0, *model, metric, a);
    auto r2 = transition(start, 0.3, 10, 1000.0, *model, metric, b);
    CHECK(r1.state.q == r2.state.q);
    CHECK(r1.info.energy == r2.info.energy);
    CHECK(r1.info.n_leapfrog == r2.info.n_leapfrog);

    ChainState s = start;
    RandomStream rng(77, 3);
    for (int i = 0; i < 200; ++i) {
        auto r = transition(s, 0.3, 6, 1000.0, *model, metric, rng);
        CHECK(r.info.tree_depth <= 6);
        CHECK(r.info.n_leapfrog <= (1 << 6));
        CHECK(r.info.accept_stat >= 0.0);
        CHECK(r.info.accept_stat <= 1.0);
        CHECK(std::abs(r.info.energy - hamiltonian(metric, r.accepted)) <= 1e-12 * std::max(1.0, std::abs(r.info.energy)));
        CHECK(r.info.delta_energy == r.info.energy - s.energy);
        CHECK(r.info.step_size == 0.3);
        CHECK(r.accepted.q == r.state.q);
        s = r.state;
    }
}

TEST_CASE("divergent trajectories stop and keep a valid state") {
    auto model = make_model(spec::EightSchoolsCentered{classic_data()});
    auto metric = EuclideanMetric::unit(10);
    ChainState s;
    s.q = Vector::Zero(10);
    s.q[1] = -4.0;  // tau ~ 0.018: the funnel neck.
    s.p = Vector::Zero(10);
    RandomStream rng(1);
    int divergent = 0;
    for (int i = 0; i < 50; ++i) {
        auto r = transition(s, 1.5, 10, 1000.0, *model, metric, rng);
        divergent += r.info.divergent ? 1 : 0;
        CHECK(std::isfinite(r.info.energy));
        CHECK(r.state.q.allFinite());
        s = r.state;
    }
    CHECK(divergent > 0);
}

TEST_CASE("dual averaging converges on a threshold acceptance oracle") {
    for (double target : {0.05, 0.7, 3.0}) {
        DualAveraging da(0.8);
        double eps = 1.0;
        da.restart(eps);
        for (int i = 0; i < 5000; ++i) {
            eps = da.learn(eps < target ? 1.0 : 0.0);
        }
        CAPTURE(target);
        CHECK(std::abs(da.final_step_size() - target) < 0.1 * target);
    }
}

TEST_CASE("metric adaptation from known variances") {
    RandomStream rng(123);
    const Vector sd{{1.0, 2.0, 3.0}};
    Eigen::MatrixXd draws(10000, 3);
    for (Eigen::Index i = 0; i < draws.rows(); ++i) {
        for (Eigen::Index j = 0; j < 3; ++j) {
            draws(i, j) = 5.0 + sd[j] * rng.normal();
        }
    }
    const auto m = adapt_metric(draws);
    const Vector inv = m.inverse_mass_diagonal();
    CHECK(m.kind() == MetricKind::diagonal);
    for (int j = 0; j < 3; ++j) {
        CHECK(std::abs(inv[j] - sd[j] * sd[j]) < 0.1 * sd[j] * sd[j]);
    }

    Eigen::MatrixXd constant = Eigen::MatrixXd::Constant(40, 2, 1.5);
    const Vector floor = adapt_metric(constant).inverse_mass_diagonal();
    CHECK(floor[0] > 0.0);
    CHECK(floor[0] == doctest::Approx(1e-3 * 5.0 / 45.0));

    CHECK(adapt_metric(Eigen::MatrixXd::Random(9, 4)).kind() == MetricKind::unit);
    CHECK(adapt_metric(Eigen::MatrixXd::Random(9, 4)).dim() == 4);
}

TEST_CASE("warmup windows double and end before the terminal buffer") {
    WindowedSchedule s(1000);
    std::vector<std::size_t> ends;
    std::size_t in_window = 0;
    for (std::size_t it = 0; it < 1000; ++it) {
        in_window += s.in_window(it) ? 1 : 0;
        if (s.window_end(it)) {
            ends.push_back(it);
            s.next_window(it);
        }
    }
    CHECK(ends == std::vector<std::size_t>{99, 149, 249, 449, 849});
    CHECK(in_window == 1000 - 75 - 150);

    WindowedSchedule small(100);
    CHECK(small.init_buffer() == 15);
    CHECK(small.term_buffer() == 10);

    WindowedSchedule none(10);
    for (std::size_t it = 0; it < 10; ++it) {
        CHECK_FALSE(none.in_window(it));
        CHECK_FALSE(none.window_end(it));
    }
}

TEST_CASE("sampler config validation") {
    SamplerConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.target_accept = 1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.target_accept = 0.8;
    cfg.num_samples = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.num_samples = 10;
    cfg.chains = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("run_chains reproducibility and substream isolation") {
    auto model = make_model(spec::GaussianIid{5});
    SamplerConfig cfg;
    cfg.num_warmup = 150;
    cfg.num_samples = 200;
    cfg.seed = 2983157687ULL;
    cfg.chains = 4;

    const auto a = run_chains(*model, cfg);
    const auto b = run_chains(*model, cfg);
    REQUIRE(a.size() == 4);
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(same_traces(a[k], b[k]));
        CHECK(a[k].chain_id == k);
        CHECK(a[k].draws.rows() == 200);
        CHECK(a[k].draws.cols() == 5);
        CHECK(a[k].infos.size() == 200);
    }
    CHECK_FALSE(same_traces(a[0], a[1]));

    SamplerConfig serial = cfg;
    serial.threads = 1;
    const auto c = run_chains(*model, serial);
    for (std::size_t k = 0; k < 4; ++k) {
        CHECK(same_traces(a[k], c[k]));
    }

    SamplerConfig one = cfg;
    one.chains = 1;
    const auto d = run_chains(*model, one);
    REQUIRE(d.size() == 1);
    CHECK(same_traces(a[0], d[0]));
}

TEST_CASE("energy trace links across transitions") {
    auto model = make_model(spec::GaussianIid{3});
    SamplerConfig cfg;
    cfg.num_warmup = 100;
    cfg.num_samples = 300;
    cfg.chains = 1;
    cfg.save_warmup = true;
    const auto t = run_chains(*model, cfg).front();
    const auto e = t.energies();
    REQUIRE(e.size() == 301);
    CHECK(e.front() == t.warmup_infos.back().energy);
    for (std::size_t n = 0; n < t.infos.size(); ++n) {
        CHECK(t.infos[n].delta_energy == doctest::Approx(e[n + 1] - e[n]).epsilon(1e-12));
    }
    CHECK(t.warmup_draws.rows() == 100);
}

TEST_CASE("adaptation collapse aborts with the model name and chain index") {
    StiffModel stiff;
    SamplerConfig cfg;
    cfg.num_warmup = 50;
    cfg.num_samples = 10;
    cfg.chains = 2;
    try {
        run_chains(stiff, cfg);
        FAIL("expected ChainError");
    } catch (const ChainError& e) {
        CHECK(e.adaptation_failure());
        CHECK(e.chain_id() == 0);
        CHECK(std::string(e.what()).find("chain 1") != std::string::npos);
    }

    auto model = make_model(spec::GaussianIid{3});
    cfg.metric = EuclideanMetric::unit(2);
    CHECK_THROWS_AS(run_chains(*model, cfg), ChainError);
}

TEST_CASE("one-dimensional Gaussian moments") {
    auto model = make_model(spec::GaussianIid{1});
    SamplerConfig cfg;
    cfg.num_samples = 10000;
    cfg.seed = 9;
    const auto traces = run_chains(*model, cfg);
    std::vector<double> xs;
    for (const auto& t : traces) {
        xs.insert(xs.end(), t.draws.data(), t.draws.data() + t.draws.size());
    }
    const double n = static_cast<double>(xs.size());
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double var = 0.0;
    for (double x : xs) {
        var += (x - mean) * (x - mean);
    }
    var /= n - 1.0;
    CHECK(std::abs(mean) < 3.0 * std::sqrt(1.0 / n));
    CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("quantiles of a two-dimensional Gaussian") {
    auto model = make_model(spec::GaussianIid{2});
    SamplerConfig cfg;
    cfg.num_samples = 10000;
    cfg.seed = 4242;
    const auto traces = run_chains(*model, cfg);
    for (Eigen::Index j = 0; j < 2; ++j) {
        std::vector<double> col;
        for (const auto& t : traces) {
            const auto c = t.draws.col(j);
            col.insert(col.end(), c.data(), c.data() + c.size());
        }
        std::sort(col.begin(), col.end());
        for (int k = 1; k <= 9; ++k) {
            const double prob = k / 10.0;
            const auto idx = static_cast<std::size_t>(prob * static_cast<double>(col.size()));
            CHECK(std::abs(normal_cdf(col[idx]) - prob) < 0.02);
        }
    }
}

TEST_CASE("step size adaptation hits the target acceptance") {
    auto model = make_model(spec::GaussianIid{100});
    SamplerConfig cfg;
    cfg.num_samples = 1000;
    cfg.seed = 2983157687ULL;
    const auto nominal = run_chains(*model, cfg);
    const double acc = mean_accept(nominal);
    CAPTURE(acc);
    CHECK(acc >= 0.75);
    CHECK(acc <= 0.85);

    std::size_t depth_hits = 0;
    std::size_t total = 0;
    for (const auto& t : nominal) {
        for (const auto& info : t.infos) {
            depth_hits += info.tree_depth >= cfg.max_tree_depth ? 1 : 0;
            ++total;
        }
    }
    CHECK(static_cast<double>(depth_hits) <= 0.001 * static_cast<double>(total));

    SamplerConfig strict = cfg;
    strict.target_accept = 0.99;
    const auto small = run_chains(*model, strict);
    for (std::size_t k = 0; k < nominal.size(); ++k) {
        CHECK(small[k].step_size < nominal[k].step_size);
    }
}

TEST_CASE("centered eight schools diverges at the default target") {
    auto model = make_model(spec::EightSchoolsCentered{classic_data()});
    SamplerConfig cfg;
    cfg.num_samples = 2000;
    cfg.seed = 483892929;
    std::size_t divergences = 0;
    for (const auto& t : run_chains(*model, cfg)) {
        for (const auto& info : t.infos) {
            divergences += info.divergent ? 1 : 0;
        }
        CHECK(t.draws.col(1).minCoeff() > 0.0);
    }
    CHECK(divergences > 0);
}
