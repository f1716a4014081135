#include "regimevol/segment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "regimevol/csv.hpp"

namespace regimevol::segment {

namespace {

// Midranks of the pooled sample (ties get the average rank).
std::vector<double> midranks(const std::vector<double>& pooled) {
    const std::size_t n = pooled.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return pooled[i] < pooled[j]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;  // average of 1-based ranks
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

MoodResult mood_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 3 || b.size() < 3) {
        throw std::invalid_argument("mood_test: both samples need at least 3 values");
    }
    std::vector<double> pooled;
    pooled.reserve(a.size() + b.size());
    pooled.insert(pooled.end(), a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    const auto [mn, mx] = std::minmax_element(pooled.begin(), pooled.end());
    if (*mn == *mx) {
        return MoodResult{0.0, 1.0, true};
    }
    const auto ranks = midranks(pooled);
    const double m = static_cast<double>(a.size());
    const double n = static_cast<double>(b.size());
    const double N = m + n;
    double stat = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = ranks[i] - (N + 1.0) / 2.0;
        stat += d * d;
    }
    const double mean = m * (N * N - 1.0) / 12.0;
    const double var = m * n * (N + 1.0) * (N * N - 4.0) / 180.0;
    const double z = (stat - mean) / std::sqrt(var);
    const double p = std::erfc(std::abs(z) / std::sqrt(2.0));
    return MoodResult{z, p, false};
}

SegmentSet detect_changepoints(std::span<const double> y, const ChangePointOptions& options) {
    const std::size_t T = y.size();
    const std::size_t w = options.window;
    if (w < 3) {
        throw std::invalid_argument("detect_changepoints: window must be >= 3");
    }
    if (T < 2 * w) {
        throw std::invalid_argument("detect_changepoints: series length " + std::to_string(T) +
                                    " shorter than 2*window = " + std::to_string(2 * w));
    }

    struct Candidate {
        std::size_t t;
        double p;
    };
    std::vector<Candidate> candidates;
    for (std::size_t t = w; t + w <= T; ++t) {
        const auto res = mood_test(y.subspan(t - w, w), y.subspan(t, w));
        if (!res.degenerate && res.p_value < options.alpha) {
            candidates.push_back({t, res.p_value});
        }
    }

    // one winner per run of consecutive candidate indices
    std::vector<Candidate> winners;
    for (std::size_t i = 0; i < candidates.size();) {
        std::size_t j = i;
        Candidate best = candidates[i];
        while (j + 1 < candidates.size() && candidates[j + 1].t == candidates[j].t + 1) {
            ++j;
            if (candidates[j].p < best.p) best = candidates[j];
        }
        winners.push_back(best);
        i = j + 1;
    }

    // greedy acceptance by significance, keeping every segment >= min_len
    std::sort(winners.begin(), winners.end(), [](const Candidate& a, const Candidate& b) {
        return a.p != b.p ? a.p < b.p : a.t < b.t;
    });
    std::vector<std::size_t> accepted;
    const std::size_t min_len = std::max<std::size_t>(options.min_len, 1);
    for (const auto& c : winners) {
        if (c.t < min_len || c.t + min_len > T) continue;
        bool ok = true;
        for (std::size_t cut : accepted) {
            const std::size_t gap = cut > c.t ? cut - c.t : c.t - cut;
            if (gap < min_len) {
                ok = false;
                break;
            }
        }
        if (ok) accepted.push_back(c.t);
    }
    std::sort(accepted.begin(), accepted.end());

    SegmentSet set;
    set.boundaries = accepted;
    set.min_len = options.min_len;
    std::size_t start = 0;
    for (std::size_t cut : accepted) {
        set.segments.push_back({start, cut});
        start = cut;
    }
    set.segments.push_back({start, T});
    return set;
}

void dump_segments(const SegmentSet& set, const std::vector<std::string>& dates,
                   const std::string& path) {
    csv::Writer w(path);
    w.row({"segment_id", "start_date", "end_date", "length"});
    for (std::size_t i = 0; i < set.segments.size(); ++i) {
        const auto& s = set.segments[i];
        w.row({std::to_string(i), dates.at(s.begin), dates.at(s.end - 1),
               std::to_string(s.length())});
    }
    w.close();
}

}  // namespace regimevol::segment
