#ifndef EDGECAST_QOC_HPP
#define EDGECAST_QOC_HPP

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace edgecast::qoc {

/// Retention level of a stream. Reference frames and non-video packets
/// are always kept; differential_keep is the fraction of differential
/// packets retained.
struct StreamQuality {
    double differential_keep = 1.0;  // in [0,1]; 1.0 is full quality

    static StreamQuality full() { return {1.0}; }
    friend bool operator==(StreamQuality a, StreamQuality b) {
        return a.differential_keep == b.differential_keep;
    }
};

/// Per-(stream, process) quality requirements. Absent entry means the
/// process does not use the stream.
struct QualityMatrix {
    std::size_t num_streams = 0;
    std::size_t num_processes = 0;
    std::map<std::pair<std::size_t, std::size_t>, StreamQuality> omega;

    std::optional<StreamQuality> at(std::size_t stream, std::size_t process) const {
        auto it = omega.find({stream, process});
        if (it == omega.end()) return std::nullopt;
        return it->second;
    }
};

enum class DropStrategy { Uniform, Differential };

/// Loss-percentage -> detection-rate rows, sorted ascending by loss.
struct DetectionTable {
    struct Row {
        double loss_percent;
        double uniform;
        double differential;
    };
    std::vector<Row> rows;

    /// The built-in published mapping.
    static DetectionTable builtin();
    /// Parse a plain-text table: one row per line, columns
    /// loss_percent uniform differential; '#' starts a comment.
    static DetectionTable load(const std::string& path);

    void validate() const;  // throws on unsorted or non-dominant rows
};

/// Affine per-stream bandwidth model: S(Q) = ref_rate + keep * diff_rate,
/// both in bits/s.
struct RateModel {
    double ref_rate = 0;   // reference-frame + non-video bits/s
    double diff_rate = 0;  // differential bits/s at full quality

    double bitrate(StreamQuality q) const {
        return ref_rate + q.differential_keep * diff_rate;
    }
    /// Fraction of full-quality traffic carried by differential packets.
    double differential_share() const {
        double total = ref_rate + diff_rate;
        return total > 0 ? diff_rate / total : 0.0;
    }
};

/// Residual differential-drop fraction applied at the edge, per
/// (stream, egress), relative to the arriving (already thinned) stream.
struct SuppressionMatrix {
    std::map<std::pair<std::size_t, std::size_t>, double> delta;

    double at(std::size_t stream, std::size_t egress) const {
        auto it = delta.find({stream, egress});
        return it == delta.end() ? 0.0 : it->second;
    }
};

struct EmptyRequirement : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Infeasible : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Naive per-process streaming cost: M times the full-quality bitrate sum.
double bandwidth_full(std::span<const RateModel> rates, std::size_t num_processes);

/// Union of per-process requirements on one stream: the least-suppressed
/// quality any consumer needs (element-wise max of differential_keep).
StreamQuality effective_quality(std::span<const StreamQuality> omega_row);

/// Bandwidth reduction from transmitting at effective instead of full
/// quality, summed over streams.
double bandwidth_saved(std::span<const RateModel> rates,
                       std::span<const StreamQuality> q_eff);

/// Detection rate at a loss percentage: exact at rows, piecewise linear
/// between, clamped outside the table range.
double detection_lookup(double loss_percent, DropStrategy strategy,
                        const DetectionTable& table);

/// Largest loss percentage whose interpolated detection rate still meets
/// the threshold. Throws Infeasible when the threshold exceeds the
/// zero-loss (first-row) detection rate.
double max_tolerable_loss(double threshold, DropStrategy strategy,
                          const DetectionTable& table);

struct QocRequirement {
    double threshold;  // minimum detection rate delta_j
    DropStrategy strategy = DropStrategy::Differential;
};

struct Solution {
    QualityMatrix omega;
    std::vector<StreamQuality> q_eff;  // per stream
    SuppressionMatrix delta;
};

/// Turn per-(stream, process) detection thresholds into per-pair retention
/// fractions, the per-stream effective quality, and the residual edge
/// suppression factors.
Solution solve_min_bandwidth(
    const std::map<std::pair<std::size_t, std::size_t>, QocRequirement>& thresholds,
    const DetectionTable& table, std::size_t num_streams, std::size_t num_processes);

} // namespace edgecast::qoc

#endif
