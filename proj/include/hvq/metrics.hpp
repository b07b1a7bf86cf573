#pragma once

#include <optional>
#include <string>
#include <vector>

namespace hvq {

struct Segment {
    int label = 0;
    int start = 0;
    int length = 0;
};

// Maximal constant runs, in order.
std::vector<Segment> extract_segments(const std::vector<int>& labels);

// Per-video frame labelings for one activity; mask[v][t] false excludes the
// frame from evaluation (background). An empty mask evaluates everything.
using Labeling = std::vector<std::vector<int>>;
using FrameMask = std::vector<std::vector<char>>;

struct Matching {
    std::vector<int> pred_to_gt;  // -1 = matched to no class
    double total_overlap = 0.0;
};

// Overlap counts between predicted clusters and ground-truth classes over
// all videos of one activity, solved as a maximum-weight one-to-one
// assignment on the zero-padded square matrix. Predicted clusters matched to
// padding map to no class.
Matching hungarian_match(const Labeling& pred, const Labeling& gt, const FrameMask* mask = nullptr);

double mof(const Labeling& pred, const Labeling& gt, const std::vector<int>& mapping,
           const FrameMask* mask = nullptr);

struct PRF {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Segment-level scores under the >50% frame-overlap criterion: a ground-truth
// segment counts as recalled iff more than half of its unmasked frames carry
// its class after mapping; a predicted segment counts as precise iff more
// than half of its unmasked frames lie on ground-truth frames of its mapped
// class.
PRF precision_recall_f1(const Labeling& pred, const Labeling& gt, const std::vector<int>& mapping,
                        const FrameMask* mask = nullptr);

// Segment-length counts in right-open bins of `bin_width` frames.
std::vector<double> length_histogram(const std::vector<Segment>& segments, int bin_width,
                                     int num_bins);

// Jensen-Shannon distance with base-2 logarithms; inputs must share support
// and each sum to 1. 0*log(0) terms contribute 0.
double jsdist(const std::vector<double>& p, const std::vector<double>& q);

// Builds the two normalized histograms on a shared support (enough bins for
// the longest segment of either list) and returns their distance.
double jsdist_segments(const std::vector<Segment>& a, const std::vector<Segment>& b,
                       int bin_width = 20);

struct ActivityMetrics {
    std::string activity;
    double mof = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::optional<double> jsd;
    std::vector<int> mapping;
    long frames = 0;  // unmasked frames
    long total_frames = 0;
};

struct MetricsReport {
    std::vector<ActivityMetrics> per_activity;
    // Macro (unweighted) means over activities; frame-weighted variants are
    // reported alongside for transparency.
    double mof = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::optional<double> jsd;  // frame-weighted per Eq. 8; absent when masking
    double mof_frame_weighted = 0.0;
    double f1_frame_weighted = 0.0;
};

struct ActivityEval {
    std::string name;
    Labeling pred;
    Labeling gt;
    std::optional<int> background_label;  // gt index to mask out
};

struct EvalOptions {
    bool report_jsd = true;  // forced off when any activity masks background
};

MetricsReport evaluate(const std::vector<ActivityEval>& activities, const EvalOptions& options);

}  // namespace hvq
