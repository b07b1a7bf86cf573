#include "hvq/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "hvq/error.hpp"
#include "hvq/hungarian.hpp"

namespace hvq {

std::vector<Segment> extract_segments(const std::vector<int>& labels) {
    if (labels.empty()) throw DataError("extract_segments: empty labeling");
    std::vector<Segment> segments;
    int start = 0;
    for (size_t t = 1; t <= labels.size(); ++t) {
        if (t == labels.size() || labels[t] != labels[start]) {
            segments.push_back({labels[start], start, static_cast<int>(t) - start});
            start = static_cast<int>(t);
        }
    }
    return segments;
}

namespace {

void check_aligned(const Labeling& pred, const Labeling& gt, const FrameMask* mask) {
    if (pred.size() != gt.size())
        throw DataError("metrics: prediction and ground truth have different video counts");
    for (size_t v = 0; v < pred.size(); ++v)
        if (pred[v].size() != gt[v].size())
            throw DataError("metrics: length mismatch on video " + std::to_string(v) + " (" +
                            std::to_string(pred[v].size()) + " vs " +
                            std::to_string(gt[v].size()) + " frames)");
    if (mask && mask->size() != pred.size())
        throw DataError("metrics: mask does not cover all videos");
}

bool frame_on(const FrameMask* mask, size_t v, size_t t) {
    return mask == nullptr || (*mask)[v][t] != 0;
}

int max_label(const Labeling& labeling) {
    int mx = -1;
    for (const auto& video : labeling)
        for (int l : video) mx = std::max(mx, l);
    return mx;
}

}  // namespace

Matching hungarian_match(const Labeling& pred, const Labeling& gt, const FrameMask* mask) {
    check_aligned(pred, gt, mask);
    const int n_pred = max_label(pred) + 1;
    const int n_gt = max_label(gt) + 1;
    if (n_pred < 1 || n_gt < 1) throw DataError("hungarian_match: empty labelings");
    const int n = std::max(n_pred, n_gt);

    std::vector<std::vector<double>> overlap(n, std::vector<double>(n, 0.0));
    for (size_t v = 0; v < pred.size(); ++v)
        for (size_t t = 0; t < pred[v].size(); ++t)
            if (frame_on(mask, v, t)) overlap[pred[v][t]][gt[v][t]] += 1.0;

    const std::vector<int> row_to_col = max_weight_assignment(overlap);
    Matching m;
    m.pred_to_gt.assign(n_pred, -1);
    for (int k = 0; k < n_pred; ++k) {
        const int c = row_to_col[k];
        if (c >= 0 && c < n_gt) {
            m.pred_to_gt[k] = c;
            m.total_overlap += overlap[k][c];
        }
    }
    return m;
}

double mof(const Labeling& pred, const Labeling& gt, const std::vector<int>& mapping,
           const FrameMask* mask) {
    check_aligned(pred, gt, mask);
    long correct = 0, total = 0;
    for (size_t v = 0; v < pred.size(); ++v)
        for (size_t t = 0; t < pred[v].size(); ++t) {
            if (!frame_on(mask, v, t)) continue;
            ++total;
            const int k = pred[v][t];
            if (k < static_cast<int>(mapping.size()) && mapping[k] == gt[v][t]) ++correct;
        }
    if (total == 0) throw DataError("mof: no unmasked frames");
    return static_cast<double>(correct) / static_cast<double>(total);
}

PRF precision_recall_f1(const Labeling& pred, const Labeling& gt, const std::vector<int>& mapping,
                        const FrameMask* mask) {
    check_aligned(pred, gt, mask);
    long gt_total = 0, gt_hit = 0, pred_total = 0, pred_hit = 0;
    for (size_t v = 0; v < pred.size(); ++v) {
        for (const Segment& s : extract_segments(gt[v])) {
            long frames = 0, good = 0;
            for (int t = s.start; t < s.start + s.length; ++t) {
                if (!frame_on(mask, v, t)) continue;
                ++frames;
                const int k = pred[v][t];
                if (k < static_cast<int>(mapping.size()) && mapping[k] == s.label) ++good;
            }
            if (frames == 0) continue;
            ++gt_total;
            if (2 * good > frames) ++gt_hit;
        }
        for (const Segment& s : extract_segments(pred[v])) {
            const int mapped = s.label < static_cast<int>(mapping.size()) ? mapping[s.label] : -1;
            long frames = 0, good = 0;
            for (int t = s.start; t < s.start + s.length; ++t) {
                if (!frame_on(mask, v, t)) continue;
                ++frames;
                if (mapped >= 0 && gt[v][t] == mapped) ++good;
            }
            if (frames == 0) continue;
            ++pred_total;
            if (2 * good > frames) ++pred_hit;
        }
    }
    PRF out;
    out.recall = gt_total > 0 ? static_cast<double>(gt_hit) / gt_total : 0.0;
    out.precision = pred_total > 0 ? static_cast<double>(pred_hit) / pred_total : 0.0;
    out.f1 = out.precision + out.recall > 0.0
                 ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
                 : 0.0;
    return out;
}

std::vector<double> length_histogram(const std::vector<Segment>& segments, int bin_width,
                                     int num_bins) {
    if (segments.empty()) throw DataError("length_histogram: no segments");
    if (bin_width < 1) throw ConfigError("length_histogram: bin_width must be >= 1");
    std::vector<double> counts(num_bins, 0.0);
    for (const Segment& s : segments) {
        const int bin = s.length / bin_width;
        if (bin >= num_bins) throw DataError("length_histogram: segment exceeds histogram support");
        counts[bin] += 1.0;
    }
    return counts;
}

double jsdist(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw DataError("jsdist: support mismatch");
    auto kl = [](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (size_t i = 0; i < a.size(); ++i) {
            if (a[i] <= 0.0) continue;
            s += a[i] * std::log2(a[i] / b[i]);
        }
        return s;
    };
    std::vector<double> m(p.size());
    for (size_t i = 0; i < p.size(); ++i) m[i] = 0.5 * (p[i] + q[i]);
    const double js = 0.5 * (kl(p, m) + kl(q, m));
    return std::sqrt(std::max(0.0, js));
}

double jsdist_segments(const std::vector<Segment>& a, const std::vector<Segment>& b,
                       int bin_width) {
    int max_len = 0;
    for (const Segment& s : a) max_len = std::max(max_len, s.length);
    for (const Segment& s : b) max_len = std::max(max_len, s.length);
    const int bins = max_len / bin_width + 1;  // shared right-open support
    std::vector<double> ha = length_histogram(a, bin_width, bins);
    std::vector<double> hb = length_histogram(b, bin_width, bins);
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    for (double& v : ha) v /= na;
    for (double& v : hb) v /= nb;
    return jsdist(ha, hb);
}

MetricsReport evaluate(const std::vector<ActivityEval>& activities, const EvalOptions& options) {
    if (activities.empty()) throw DataError("evaluate: no activities");
    MetricsReport report;
    bool masked_anywhere = false;
    double mof_sum = 0.0, prec_sum = 0.0, rec_sum = 0.0;
    double frames_total = 0.0, mof_weighted = 0.0, f1_weighted = 0.0;
    double jsd_weight_total = 0.0, jsd_weighted = 0.0;

    for (const ActivityEval& act : activities) {
        FrameMask mask;
        const FrameMask* mask_ptr = nullptr;
        if (act.background_label) {
            masked_anywhere = true;
            mask.resize(act.gt.size());
            for (size_t v = 0; v < act.gt.size(); ++v) {
                mask[v].resize(act.gt[v].size());
                for (size_t t = 0; t < act.gt[v].size(); ++t)
                    mask[v][t] = act.gt[v][t] == *act.background_label ? 0 : 1;
            }
            mask_ptr = &mask;
        }

        ActivityMetrics am;
        am.activity = act.name;
        Matching match = hungarian_match(act.pred, act.gt, mask_ptr);
        am.mapping = match.pred_to_gt;
        am.mof = mof(act.pred, act.gt, match.pred_to_gt, mask_ptr);
        const PRF prf = precision_recall_f1(act.pred, act.gt, match.pred_to_gt, mask_ptr);
        am.precision = prf.precision;
        am.recall = prf.recall;
        am.f1 = prf.f1;
        for (const auto& video : act.gt) am.total_frames += static_cast<long>(video.size());
        if (mask_ptr) {
            for (const auto& video : mask)
                for (char on : video) am.frames += on ? 1 : 0;
        } else {
            am.frames = am.total_frames;
        }

        if (options.report_jsd && !act.background_label) {
            double sum = 0.0;
            for (size_t v = 0; v < act.pred.size(); ++v)
                sum += jsdist_segments(extract_segments(act.pred[v]), extract_segments(act.gt[v]));
            am.jsd = sum / static_cast<double>(act.pred.size());
            jsd_weighted += *am.jsd * static_cast<double>(am.total_frames);
            jsd_weight_total += static_cast<double>(am.total_frames);
        }

        mof_sum += am.mof;
        prec_sum += am.precision;
        rec_sum += am.recall;
        mof_weighted += am.mof * static_cast<double>(am.frames);
        f1_weighted += am.f1 * static_cast<double>(am.frames);
        frames_total += static_cast<double>(am.frames);
        report.per_activity.push_back(std::move(am));
    }

    const double n = static_cast<double>(activities.size());
    report.mof = mof_sum / n;
    report.precision = prec_sum / n;
    report.recall = rec_sum / n;
    report.f1 = report.precision + report.recall > 0.0
                    ? 2.0 * report.precision * report.recall / (report.precision + report.recall)
                    : 0.0;
    report.mof_frame_weighted = frames_total > 0.0 ? mof_weighted / frames_total : 0.0;
    report.f1_frame_weighted = frames_total > 0.0 ? f1_weighted / frames_total : 0.0;
    if (options.report_jsd && !masked_anywhere && jsd_weight_total > 0.0)
        report.jsd = jsd_weighted / jsd_weight_total;
    return report;
}

}  // namespace hvq
