#ifndef PHYSFLOW_NEWELL_HPP
#define PHYSFLOW_NEWELL_HPP

#include "physflow/core.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace physflow {

// ---------------------------------------------------------------------------
// Shift estimators. All four map a source cumulative curve onto the same time
// grid at a target location `d` miles away. Reads outside the source record
// clamp to the first/last knot.
// ---------------------------------------------------------------------------

/// Target downstream of source, free flow: N(t, B) = N(t - d/vf, A).
CumulativeCurve ff_shift_downstream(const CumulativeCurve& source, double d, double vf);
/// Target upstream of source, free flow: N(t, B) = N(t + d/vf, A).
CumulativeCurve ff_shift_upstream(const CumulativeCurve& source, double d, double vf);
/// Target upstream of source, congested: N(t, Y) = N(t - d/w, X) + d kj.
CumulativeCurve congested_shift_upstream(const CumulativeCurve& source, double d, double w,
                                         double kj);
/// Target downstream of source, congested (inverse of the above):
/// N(t, B) = N(t + d/w, X) - d kj. May produce negative knots.
CumulativeCurve congested_shift_downstream(const CumulativeCurve& source, double d, double w,
                                           double kj);

/// Pointwise minimum of two curves on a common grid.
CumulativeCurve newell_min(const CumulativeCurve& ff, const CumulativeCurve& cong);

// ---------------------------------------------------------------------------
// Feature construction
// ---------------------------------------------------------------------------

enum class Side { SourceUpstreamOfTarget, SourceDownstreamOfTarget };

struct RelativePosition {
    Side side = Side::SourceUpstreamOfTarget;
    double d = 0.0; // mi, > 0

    bool upstream() const noexcept { return side == Side::SourceUpstreamOfTarget; }
};

/// Relative position of a source at `source_mi` seen from a target at `target_mi`.
RelativePosition relative_position(double source_mi, double target_mi);

enum class FeatureVariant { Regular, PhysicsFF, PhysicsFC, Hybrid };

std::string_view to_string(FeatureVariant v);
FeatureVariant parse_variant(std::string_view name);
inline constexpr FeatureVariant kAllVariants[] = {FeatureVariant::Regular, FeatureVariant::PhysicsFC,
                                                  FeatureVariant::PhysicsFF, FeatureVariant::Hybrid};

enum class EstimatorKind {
    Raw,                 // observed source flow
    FreeFlowDownstream,  // target downstream of source, free-flow characteristic
    FreeFlowUpstream,    // target upstream of source, free-flow characteristic
    CongestedUpstream,   // target upstream of source, congested characteristic
    CongestedDownstream, // target downstream of source, inverse congested shift
};

std::string_view to_string(EstimatorKind k);

struct ChannelLabel {
    std::string source_id;
    EstimatorKind kind = EstimatorKind::Raw;
};

struct FeatureOptions {
    /// Permits congested channels for sources upstream of the target.
    bool allow_upstream_congested = false;
};

struct ChannelSpec {
    std::size_t source = 0; // index into the source list
    EstimatorKind kind = EstimatorKind::Raw;
};

/**
 * Channels emitted for a variant given where each source sits relative to the
 * target. Throws UnsupportedVariant when the combination is undefined:
 * Hybrid with both sources upstream, or PhysicsFC with both sources upstream
 * unless `allow_upstream_congested`.
 */
std::vector<ChannelSpec> channel_plan(FeatureVariant variant,
                                      const std::vector<RelativePosition>& positions,
                                      const FeatureOptions& options = {});

/// Channels x lag matrix of 5-min flows, row-major.
struct FeatureTensor {
    std::size_t channels = 0;
    std::size_t lag = 0;
    std::vector<double> values;
    std::vector<ChannelLabel> row_labels;

    double at(std::size_t c, std::size_t t) const { return values[c * lag + t]; }
};

struct FeatureSource {
    const DetectorSeries* series = nullptr;
    RelativePosition position;
};

/**
 * Builds feature windows for one target location. Cumulative curves of the
 * sources are computed once; each window only sees source data up to its end
 * time. Reads past the end hold the latest observed flow: the curve is
 * extended at the rate of the last interval.
 */
class FeatureBuilder {
public:
    FeatureBuilder(FeatureVariant variant, std::vector<FeatureSource> sources, const TriangularFD& fd,
                   std::size_t lag, FeatureOptions options = {});

    std::size_t channels() const noexcept { return plan_.size(); }
    std::size_t lag() const noexcept { return lag_; }
    const std::vector<ChannelLabel>& labels() const noexcept { return labels_; }

    /// Window whose last interval ends at knot index `end_knot` (needs end_knot >= lag).
    FeatureTensor window(std::size_t end_knot) const;
    /// Writes the window into `out` (channels * lag values).
    void window_into(std::size_t end_knot, std::span<double> out) const;
    /// Same window addressed by absolute end time; must fall on the common grid.
    FeatureTensor window_at(Timestamp t_end) const;

    std::size_t knots() const noexcept { return curves_.front().counts.size(); }

private:
    double estimate_at(std::size_t channel, std::size_t knot, std::size_t end_knot) const;

    FeatureVariant variant_;
    std::vector<FeatureSource> sources_;
    TriangularFD fd_;
    std::size_t lag_;
    std::vector<ChannelSpec> plan_;
    std::vector<ChannelLabel> labels_;
    std::vector<CumulativeCurve> curves_;
};

FeatureTensor build_feature_tensor(FeatureVariant variant, const std::vector<FeatureSource>& sources,
                                   const TriangularFD& fd, std::size_t lag, Timestamp t_end,
                                   const FeatureOptions& options = {});

} // namespace physflow

#endif
