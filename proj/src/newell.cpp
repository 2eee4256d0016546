#include "physflow/newell.hpp"

#include <algorithm>
#include <cmath>

namespace physflow {

namespace {

double travel_seconds(double d, double speed) { return d / speed * 3600.0; }

void require_positive(double v, const char* field) {
    if (!(v > 0.0)) throw ValidationError(field, "must be positive");
}

CumulativeCurve shifted(const CumulativeCurve& src, double time_shift, double offset) {
    CumulativeCurve out;
    out.t0 = src.t0;
    out.dt = src.dt;
    out.counts.resize(src.counts.size());
    for (std::size_t i = 0; i < src.counts.size(); ++i) {
        const double t = src.t0 + src.dt * static_cast<double>(i);
        out.counts[i] = eval_cumulative(src, t - time_shift) + offset;
    }
    return out;
}

std::string describe(const std::vector<RelativePosition>& positions) {
    std::string s;
    for (std::size_t i = 0; i < positions.size(); ++i) {
        if (i) s += ", ";
        s += "source" + std::to_string(i + 1) + (positions[i].upstream() ? " upstream" : " downstream");
        s += " d=" + std::to_string(positions[i].d);
    }
    return s;
}

} // namespace

CumulativeCurve ff_shift_downstream(const CumulativeCurve& source, double d, double vf) {
    require_positive(d, "d");
    require_positive(vf, "vf");
    return shifted(source, travel_seconds(d, vf), 0.0);
}

CumulativeCurve ff_shift_upstream(const CumulativeCurve& source, double d, double vf) {
    require_positive(d, "d");
    require_positive(vf, "vf");
    return shifted(source, -travel_seconds(d, vf), 0.0);
}

CumulativeCurve congested_shift_upstream(const CumulativeCurve& source, double d, double w, double kj) {
    require_positive(d, "d");
    require_positive(w, "w");
    require_positive(kj, "kj");
    return shifted(source, travel_seconds(d, w), d * kj);
}

CumulativeCurve congested_shift_downstream(const CumulativeCurve& source, double d, double w,
                                           double kj) {
    require_positive(d, "d");
    require_positive(w, "w");
    require_positive(kj, "kj");
    return shifted(source, -travel_seconds(d, w), -d * kj);
}

CumulativeCurve newell_min(const CumulativeCurve& ff, const CumulativeCurve& cong) {
    if (!ff.same_grid(cong)) throw ValidationError("cong", "curves do not share a time grid");
    CumulativeCurve out = ff;
    for (std::size_t i = 0; i < out.counts.size(); ++i) {
        out.counts[i] = std::min(ff.counts[i], cong.counts[i]);
    }
    return out;
}

RelativePosition relative_position(double source_mi, double target_mi) {
    if (source_mi == target_mi) {
        throw ValidationError("position", "source and target coincide");
    }
    RelativePosition p;
    p.side = source_mi < target_mi ? Side::SourceUpstreamOfTarget : Side::SourceDownstreamOfTarget;
    p.d = std::abs(target_mi - source_mi);
    return p;
}

std::string_view to_string(FeatureVariant v) {
    switch (v) {
    case FeatureVariant::Regular: return "Regular";
    case FeatureVariant::PhysicsFF: return "PhysicsFF";
    case FeatureVariant::PhysicsFC: return "PhysicsFC";
    case FeatureVariant::Hybrid: return "Hybrid";
    }
    return "?";
}

FeatureVariant parse_variant(std::string_view name) {
    for (auto v : kAllVariants) {
        if (to_string(v) == name) return v;
    }
    throw ValidationError("variant", "unknown variant '" + std::string(name) + "'");
}

std::string_view to_string(EstimatorKind k) {
    switch (k) {
    case EstimatorKind::Raw: return "raw";
    case EstimatorKind::FreeFlowDownstream: return "ff_downstream";
    case EstimatorKind::FreeFlowUpstream: return "ff_upstream";
    case EstimatorKind::CongestedUpstream: return "congested_upstream";
    case EstimatorKind::CongestedDownstream: return "congested_downstream";
    }
    return "?";
}

std::vector<ChannelSpec> channel_plan(FeatureVariant variant, const std::vector<RelativePosition>& positions,
                                      const FeatureOptions& options) {
    if (positions.size() != 2) {
        throw ValidationError("sources", "exactly 2 sources are supported, got " +
                                             std::to_string(positions.size()));
    }
    for (const auto& p : positions) require_positive(p.d, "d");

    const bool all_up = positions[0].upstream() && positions[1].upstream();
    const bool all_down = !positions[0].upstream() && !positions[1].upstream();
    auto ff_kind = [](const RelativePosition& p) {
        return p.upstream() ? EstimatorKind::FreeFlowDownstream : EstimatorKind::FreeFlowUpstream;
    };

    std::vector<ChannelSpec> plan;
    switch (variant) {
    case FeatureVariant::Regular:
        for (std::size_t s = 0; s < 2; ++s) plan.push_back({s, EstimatorKind::Raw});
        break;
    case FeatureVariant::PhysicsFF:
        for (std::size_t s = 0; s < 2; ++s) plan.push_back({s, ff_kind(positions[s])});
        break;
    case FeatureVariant::PhysicsFC:
        if (all_up) {
            if (!options.allow_upstream_congested) {
                throw UnsupportedVariant(describe(positions),
                                         "PhysicsFC with both sources upstream needs the "
                                         "upstream-congested extension");
            }
            for (std::size_t s = 0; s < 2; ++s) plan.push_back({s, EstimatorKind::CongestedDownstream});
        } else if (all_down) {
            for (std::size_t s = 0; s < 2; ++s) plan.push_back({s, EstimatorKind::CongestedUpstream});
        } else {
            for (std::size_t s = 0; s < 2; ++s) {
                plan.push_back({s, positions[s].upstream() ? EstimatorKind::FreeFlowDownstream
                                                           : EstimatorKind::CongestedUpstream});
            }
        }
        break;
    case FeatureVariant::Hybrid:
        if (all_up) {
            throw UnsupportedVariant(describe(positions),
                                     "Hybrid needs at least one source downstream of the target");
        }
        for (std::size_t s = 0; s < 2; ++s) {
            plan.push_back({s, ff_kind(positions[s])});
            if (!positions[s].upstream()) plan.push_back({s, EstimatorKind::CongestedUpstream});
        }
        break;
    }
    return plan;
}

FeatureBuilder::FeatureBuilder(FeatureVariant variant, std::vector<FeatureSource> sources,
                               const TriangularFD& fd, std::size_t lag, FeatureOptions options)
    : variant_(variant), sources_(std::move(sources)), fd_(fd), lag_(lag) {
    if (lag_ < 1) throw ValidationError("lag", "must be at least 1");
    std::vector<RelativePosition> positions;
    for (const auto& s : sources_) {
        if (!s.series) throw ValidationError("sources", "null series");
        positions.push_back(s.position);
    }
    plan_ = channel_plan(variant_, positions, options);
    if (variant_ != FeatureVariant::Regular) fd_.validate();

    const auto& first = *sources_.front().series;
    for (const auto& s : sources_) {
        const auto& ser = *s.series;
        if (ser.t0 != first.t0 || ser.dt != first.dt || ser.size() != first.size()) {
            throw ValidationError("sources", "source '" + ser.station_id +
                                                 "' is not on the same time grid as '" +
                                                 first.station_id + "'");
        }
        curves_.push_back(cumulative_from_flows(ser));
    }
    for (const auto& c : plan_) labels_.push_back({sources_[c.source].series->station_id, c.kind});
}

double FeatureBuilder::estimate_at(std::size_t channel, std::size_t knot, std::size_t end_knot) const {
    const auto& spec = plan_[channel];
    const auto& curve = curves_[spec.source];
    const double d = sources_[spec.source].position.d;
    const double t = curve.t0 + curve.dt * static_cast<double>(knot);
    const double t_avail = curve.t0 + curve.dt * static_cast<double>(end_knot);
    // Past the window end the curve continues at the latest observed interval's rate.
    const double rate = (curve.counts[end_knot] - curve.counts[end_knot - 1]) / curve.dt;
    auto read = [&](double when) {
        if (when <= t_avail) return eval_cumulative(curve, when);
        return curve.counts[end_knot] + rate * (when - t_avail);
    };

    switch (spec.kind) {
    case EstimatorKind::Raw: return curve.counts[knot];
    case EstimatorKind::FreeFlowDownstream: return read(t - travel_seconds(d, fd_.vf));
    case EstimatorKind::FreeFlowUpstream: return read(t + travel_seconds(d, fd_.vf));
    case EstimatorKind::CongestedUpstream: return read(t - travel_seconds(d, fd_.w)) + d * fd_.kj;
    case EstimatorKind::CongestedDownstream: return read(t + travel_seconds(d, fd_.w)) - d * fd_.kj;
    }
    return 0.0;
}

void FeatureBuilder::window_into(std::size_t end_knot, std::span<double> out) const {
    if (end_knot < lag_ || end_knot >= knots()) {
        throw ValidationError("t_end", "window end knot " + std::to_string(end_knot) +
                                           " outside [" + std::to_string(lag_) + ", " +
                                           std::to_string(knots() - 1) + "]");
    }
    if (out.size() != plan_.size() * lag_) throw ShapeError("window_into: output size mismatch");
    const std::size_t first = end_knot - lag_;
    for (std::size_t c = 0; c < plan_.size(); ++c) {
        double prev = estimate_at(c, first, end_knot);
        for (std::size_t i = 0; i < lag_; ++i) {
            const double next = estimate_at(c, first + i + 1, end_knot);
            out[c * lag_ + i] = next - prev;
            prev = next;
        }
    }
}

FeatureTensor FeatureBuilder::window(std::size_t end_knot) const {
    FeatureTensor t;
    t.channels = plan_.size();
    t.lag = lag_;
    t.values.resize(t.channels * t.lag);
    t.row_labels = labels_;
    window_into(end_knot, t.values);
    return t;
}

FeatureTensor FeatureBuilder::window_at(Timestamp t_end) const {
    const auto& ser = *sources_.front().series;
    const Timestamp rel = t_end - ser.t0;
    if (rel < 0 || rel % ser.dt != 0) {
        throw ValidationError("t_end", "not aligned with the source time grid");
    }
    return window(static_cast<std::size_t>(rel / ser.dt));
}

FeatureTensor build_feature_tensor(FeatureVariant variant, const std::vector<FeatureSource>& sources,
                                   const TriangularFD& fd, std::size_t lag, Timestamp t_end,
                                   const FeatureOptions& options) {
    return FeatureBuilder(variant, sources, fd, lag, options).window_at(t_end);
}

} // namespace physflow
