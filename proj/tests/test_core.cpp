#include "physflow/core.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace physflow;

TEST_SUITE("core") {

TEST_CASE("triangular FD closure from vf, w, kj") {
    const auto fd = make_triangular_fd(60.0, 15.0, 150.0);
    CHECK(fd.kc == doctest::Approx(30.0));
    CHECK(fd.qc == doctest::Approx(1800.0));

    const auto sym = make_triangular_fd(60.0, 60.0, 100.0);
    CHECK(sym.kc == doctest::Approx(50.0));

    CHECK_THROWS_AS(make_triangular_fd(65.0, 14.0, 0.0), ValidationError);
    CHECK_THROWS_AS(make_triangular_fd(65.0, 14.0, -3.0), ValidationError);
    CHECK_THROWS_AS(make_triangular_fd(0.0, 14.0, 100.0), ValidationError);
}

TEST_CASE("closure identities hold for random parameters") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> speed(5.0, 120.0), jam(50.0, 600.0);
    for (int i = 0; i < 200; ++i) {
        const auto fd = make_triangular_fd(speed(rng), speed(rng), jam(rng));
        CHECK(fd.qc == doctest::Approx(fd.vf * fd.kc).epsilon(1e-12));
        CHECK(fd.qc == doctest::Approx(fd.w * (fd.kj - fd.kc)).epsilon(1e-12));
        CHECK_NOTHROW(fd.validate());
    }
}

TEST_CASE("flow, demand and supply") {
    const auto fd = make_triangular_fd(60.0, 15.0, 150.0);
    CHECK(flow_at_density(fd, 0.0) == 0.0);
    CHECK(flow_at_density(fd, 30.0) == doctest::Approx(1800.0));
    CHECK(flow_at_density(fd, 150.0) == doctest::Approx(0.0));
    CHECK(demand(fd, 0.0) == 0.0);
    CHECK(supply(fd, 0.0) == doctest::Approx(1800.0));
    CHECK(demand(fd, 150.0) == doctest::Approx(1800.0));
    CHECK(supply(fd, 150.0) == doctest::Approx(0.0));
    CHECK(demand(fd, 30.0) == doctest::Approx(1800.0));
    CHECK(supply(fd, 30.0) == doctest::Approx(1800.0));
    CHECK_THROWS_AS(flow_at_density(fd, 151.0), DomainError);

    for (int i = 0; i <= 1000; ++i) {
        const double k = fd.kj * i / 1000.0;
        CHECK(std::min(demand(fd, k), supply(fd, k)) == doctest::Approx(flow_at_density(fd, k)).epsilon(1e-12));
    }
}

TEST_CASE("cumulative curves from flows and back") {
    const std::vector<double> f{10, 20, 30};
    auto c = cumulative_from_flows(f, 0.0, 300.0);
    CHECK(c.counts == std::vector<double>{0, 10, 30, 60});
    CHECK(flows_from_cumulative(c) == f);

    CHECK(cumulative_from_flows(std::vector<double>{}, 0.0, 300.0).counts == std::vector<double>{0});
    CHECK(cumulative_from_flows(std::vector<double>{5, 5, 5, 5}, 0.0, 300.0).counts ==
          std::vector<double>{0, 5, 10, 15, 20});

    CumulativeCurve zero{0.0, 300.0, {0, 0, 0}};
    CHECK(flows_from_cumulative(zero) == std::vector<double>{0, 0});
    CumulativeCurve neg{0.0, 300.0, {-3, 2, 9}};
    CHECK(flows_from_cumulative(neg) == std::vector<double>{5, 7});
}

TEST_CASE("roundtrip is exact when the running sum is") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> count(0, 600);
    std::vector<double> ints(5000), quarters(5000);
    for (auto& v : ints) v = count(rng);
    for (auto& v : quarters) v = count(rng) * 0.25;
    CHECK(flows_from_cumulative(cumulative_from_flows(ints, 0.0, 300.0)) == ints);
    CHECK(flows_from_cumulative(cumulative_from_flows(quarters, 0.0, 300.0)) == quarters);

    // Arbitrary doubles: differencing a rounded running sum is off by at most an ulp of the sum.
    std::uniform_real_distribution<double> flow(0.0, 500.0);
    std::vector<double> f(2000);
    for (auto& v : f) v = flow(rng);
    const auto c = cumulative_from_flows(f, 0.0, 300.0);
    const auto back = flows_from_cumulative(c);
    for (std::size_t i = 0; i < f.size(); ++i) {
        CHECK(std::abs(back[i] - f[i]) <= 2.0 * std::numeric_limits<double>::epsilon() * c.counts[i + 1]);
    }
}

TEST_CASE("eval_cumulative interpolates and clamps") {
    CumulativeCurve c{0.0, 300.0, {0, 10}};
    CHECK(eval_cumulative(c, 150.0) == doctest::Approx(5.0));
    CHECK(eval_cumulative(c, -100.0) == 0.0);
    CHECK(eval_cumulative(c, 1000.0) == 10.0);
    CumulativeCurve c3{0.0, 300.0, {0, 10, 30}};
    CHECK(eval_cumulative(c3, 450.0) == doctest::Approx(20.0));

    double prev = -1.0;
    for (double t = -50.0; t < 700.0; t += 7.3) {
        const double v = eval_cumulative(c3, t);
        CHECK(v >= prev);
        prev = v;
    }
}

TEST_CASE("detector series and geometry validation") {
    DetectorSeries s{"S1", 0.0, 0, 300, {{10, 0.1, 60}, {-1, 0.1, 60}}};
    CHECK_THROWS_AS(s.validate(), ValidationError);
    s.records[1].flow = 5;
    s.records[1].occupancy = 1.5;
    CHECK_THROWS_AS(s.validate(), ValidationError);

    SectionGeometry g{{{"A", 0.0}, {"B", 1.0}}};
    CHECK_NOTHROW(g.validate());
    CHECK(g.index_of("B") == 1);
    CHECK_THROWS_AS(g.at("C"), ValidationError);
    SectionGeometry bad{{{"A", 1.0}, {"B", 1.0}}};
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}

}
