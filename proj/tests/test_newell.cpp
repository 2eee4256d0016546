#include "physflow/newell.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace physflow;

namespace {

CumulativeCurve constant_curve(double per_interval, std::size_t intervals) {
    return cumulative_from_flows(std::vector<double>(intervals, per_interval), 0.0, 300.0);
}

DetectorSeries random_series(const std::string& id, double position, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> flow(50.0, 450.0);
    DetectorSeries s;
    s.station_id = id;
    s.position = position;
    s.t0 = 1'600'000'000;
    for (std::size_t i = 0; i < n; ++i) s.records.push_back({flow(rng), 0.1, 60.0});
    return s;
}

std::vector<RelativePosition> positions(bool first_up, bool second_up) {
    return {{first_up ? Side::SourceUpstreamOfTarget : Side::SourceDownstreamOfTarget, 0.4},
            {second_up ? Side::SourceUpstreamOfTarget : Side::SourceDownstreamOfTarget, 0.7}};
}

} // namespace

TEST_SUITE("newell") {

TEST_CASE("free-flow downstream shift reads the past") {
    const auto c = constant_curve(10.0, 6);
    const auto s = ff_shift_downstream(c, 0.5, 60.0);
    CHECK(s.same_grid(c));
    CHECK(s.counts[1] == doctest::Approx(9.0)); // N(270)
    CHECK(s.counts[0] == 0.0);                  // clamped before the record
    const auto tiny = ff_shift_downstream(c, 1e-9, 60.0);
    for (std::size_t i = 0; i < c.counts.size(); ++i) CHECK(tiny.counts[i] == doctest::Approx(c.counts[i]));
}

TEST_CASE("free-flow upstream shift reads the future") {
    const auto c = constant_curve(10.0, 6);
    const auto s = ff_shift_upstream(c, 0.3, 65.0);
    const double shift = 0.3 / 65.0 * 3600.0;
    CHECK(shift == doctest::Approx(16.615).epsilon(1e-4));
    CHECK(s.counts[1] == doctest::Approx(10.0 * (300.0 + shift) / 300.0));
    CHECK(s.counts.back() == c.counts.back()); // clamped past the record
}

TEST_CASE("congested shifts carry d kj and d/w") {
    const auto c = constant_curve(10.0, 10);
    const auto up = congested_shift_upstream(c, 0.3, 14.0, 200.0);
    const double lag = 0.3 / 14.0 * 3600.0;
    CHECK(up.counts[5] == doctest::Approx(eval_cumulative(c, 1500.0 - lag) + 60.0));
    CHECK(0.5 / 14.0 * 3600.0 == doctest::Approx(128.571).epsilon(1e-5));

    const auto down = congested_shift_downstream(c, 0.3, 14.0, 200.0);
    CHECK(down.counts[5] == doctest::Approx(eval_cumulative(c, 1500.0 + lag) - 60.0));

    // Exact inverse on the region where neither shift clamps. With a whole-interval
    // shift (d/w = 300 s) both reads land on knots, so no re-interpolation enters.
    std::vector<double> f(40);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = 100.0 + 40.0 * std::sin(0.3 * i);
    const auto curve = cumulative_from_flows(f, 0.0, 300.0);
    const double d_knot = 14.0 * 300.0 / 3600.0;
    const auto back =
        congested_shift_downstream(congested_shift_upstream(curve, d_knot, 14.0, 200.0), d_knot, 14.0, 200.0);
    for (std::size_t i = 1; i + 1 < curve.counts.size(); ++i) {
        CHECK(back.counts[i] == doctest::Approx(curve.counts[i]).epsilon(1e-12));
    }
    // Off-knot shifts are exact wherever the curve is linear.
    const auto lin = constant_curve(17.0, 20);
    const auto lin_back = congested_shift_downstream(congested_shift_upstream(lin, 0.3, 14.0, 200.0), 0.3, 14.0, 200.0);
    for (std::size_t i = 1; i + 1 < lin.counts.size(); ++i) {
        CHECK(lin_back.counts[i] == doctest::Approx(lin.counts[i]).epsilon(1e-12));
    }
    CHECK_THROWS_AS(congested_shift_upstream(curve, 0.0, 14.0, 200.0), ValidationError);
}

TEST_CASE("shifts preserve constant flow and telescope") {
    const auto c = constant_curve(25.0, 30);
    for (const auto& s : {ff_shift_downstream(c, 1.1, 65.0), ff_shift_upstream(c, 0.4, 65.0),
                          congested_shift_upstream(c, 0.6, 14.0, 450.0),
                          congested_shift_downstream(c, 0.6, 14.0, 450.0)}) {
        const auto f = flows_from_cumulative(s);
        for (std::size_t i = 2; i + 2 < f.size(); ++i) CHECK(f[i] == doctest::Approx(25.0));
        double sum = 0.0;
        for (double v : f) sum += v;
        CHECK(sum == doctest::Approx(s.counts.back() - s.counts.front()));
    }
}

TEST_CASE("newell_min") {
    const auto lo = constant_curve(10.0, 5);
    const auto hi = constant_curve(12.0, 5);
    CHECK(newell_min(lo, hi).counts == lo.counts);
    CHECK(newell_min(hi, hi).counts == hi.counts);
    CumulativeCurve other{100.0, 300.0, lo.counts};
    CHECK_THROWS_AS(newell_min(lo, other), ValidationError);
}

TEST_CASE("relative positions") {
    const auto up = relative_position(1.0, 1.5);
    CHECK(up.upstream());
    CHECK(up.d == doctest::Approx(0.5));
    const auto down = relative_position(2.0, 1.5);
    CHECK_FALSE(down.upstream());
    CHECK(down.d == doctest::Approx(0.5));
    CHECK_THROWS_AS(relative_position(1.0, 1.0), ValidationError);
}

TEST_CASE("channel plans") {
    // Case A: one upstream and one downstream source.
    CHECK(channel_plan(FeatureVariant::Hybrid, positions(true, false)).size() == 3);
    // Case C: both downstream.
    CHECK(channel_plan(FeatureVariant::Hybrid, positions(false, false)).size() == 4);
    // Case B: both upstream.
    CHECK_THROWS_AS(channel_plan(FeatureVariant::Hybrid, positions(true, true)), UnsupportedVariant);
    CHECK_THROWS_AS(channel_plan(FeatureVariant::PhysicsFC, positions(true, true)), UnsupportedVariant);
    const auto ext = channel_plan(FeatureVariant::PhysicsFC, positions(true, true), {true});
    CHECK(ext.size() == 2);
    CHECK(ext[0].kind == EstimatorKind::CongestedDownstream);

    for (bool a : {true, false}) {
        for (bool b : {true, false}) {
            const auto p = positions(a, b);
            CHECK(channel_plan(FeatureVariant::Regular, p).size() == 2);
            CHECK(channel_plan(FeatureVariant::PhysicsFF, p).size() == 2);
            if (a && b) continue;
            CHECK(channel_plan(FeatureVariant::PhysicsFC, p).size() == 2);
            CHECK(channel_plan(FeatureVariant::Hybrid, p).size() == 2 + (a ? 0u : 1u) + (b ? 0u : 1u));
        }
    }
    CHECK(parse_variant("PhysicsFF") == FeatureVariant::PhysicsFF);
    CHECK_THROWS_AS(parse_variant("physics"), ValidationError);
}

TEST_CASE("feature tensors") {
    const auto s1 = random_series("S1", 0.0, 60, 1);
    const auto s4 = random_series("S4", 1.3, 60, 2);
    const auto fd = make_triangular_fd(65.0, 14.0, 450.0);
    const double target = 0.5;
    std::vector<FeatureSource> src{{&s1, relative_position(0.0, target)}, {&s4, relative_position(1.3, target)}};

    const Timestamp t_end = s1.t0 + 40 * 300;
    const auto hybrid = build_feature_tensor(FeatureVariant::Hybrid, src, fd, 10, t_end);
    CHECK(hybrid.channels == 3);
    CHECK(hybrid.lag == 10);
    CHECK(hybrid.values.size() == 30);
    CHECK(hybrid.row_labels[0].source_id == "S1");
    CHECK(hybrid.row_labels[0].kind == EstimatorKind::FreeFlowDownstream);
    CHECK(hybrid.row_labels[2].kind == EstimatorKind::CongestedUpstream);

    SUBCASE("regular channels are the raw flows") {
        const auto reg = build_feature_tensor(FeatureVariant::Regular, src, fd, 10, t_end);
        for (std::size_t t = 0; t < 10; ++t) {
            CHECK(reg.at(0, t) == doctest::Approx(s1.records[30 + t].flow));
            CHECK(reg.at(1, t) == doctest::Approx(s4.records[30 + t].flow));
        }
    }

    SUBCASE("past-reading channels match the standalone shift") {
        const auto ff = flows_from_cumulative(ff_shift_downstream(cumulative_from_flows(s1), 0.5, fd.vf));
        const auto fc = flows_from_cumulative(congested_shift_upstream(cumulative_from_flows(s4), 0.8, fd.w, fd.kj));
        for (std::size_t t = 0; t < 10; ++t) {
            CHECK(hybrid.at(0, t) == doctest::Approx(ff[30 + t]));
            CHECK(hybrid.at(2, t) == doctest::Approx(fc[30 + t]));
        }
    }

    SUBCASE("windows never see data after their end") {
        auto s4_late = s4;
        for (std::size_t i = 40; i < s4_late.size(); ++i) s4_late.records[i].flow = 0.0;
        std::vector<FeatureSource> late{{&s1, src[0].position}, {&s4_late, src[1].position}};
        for (auto v : {FeatureVariant::Regular, FeatureVariant::PhysicsFF, FeatureVariant::PhysicsFC,
                       FeatureVariant::Hybrid}) {
            CHECK(build_feature_tensor(v, src, fd, 10, t_end).values ==
                  build_feature_tensor(v, late, fd, 10, t_end).values);
        }
    }

    CHECK_THROWS_AS(build_feature_tensor(FeatureVariant::Regular, src, fd, 10, t_end + 7), ValidationError);
    CHECK_THROWS_AS(build_feature_tensor(FeatureVariant::Regular, src, fd, 10, s1.t0 + 5 * 300), ValidationError);
}

TEST_CASE("constant flow maps to constant features in every window") {
    DetectorSeries a{"A", 0.0, 0, 300, std::vector<DetectorRecord>(50, {30.0, 0.1, 65.0})};
    DetectorSeries b{"B", 2.0, 0, 300, std::vector<DetectorRecord>(50, {30.0, 0.1, 65.0})};
    const auto fd = make_triangular_fd(65.0, 14.0, 450.0);
    for (double target : {1.0, -1.0, 3.0}) {
        std::vector<FeatureSource> src{{&a, relative_position(0.0, target)}, {&b, relative_position(2.0, target)}};
        for (auto v : kAllVariants) {
            const FeatureOptions opt{true};
            std::vector<RelativePosition> pos{src[0].position, src[1].position};
            if (v == FeatureVariant::Hybrid && pos[0].upstream() && pos[1].upstream()) continue;
            FeatureBuilder fb(v, src, fd, 10, opt);
            // The longest backward read is 3 mi / w = 771 s; later windows never touch the record start.
            for (std::size_t end = 14; end <= 50; end += 12) {
                for (double x : fb.window(end).values) CHECK(x == doctest::Approx(30.0));
            }
        }
    }
}

}
