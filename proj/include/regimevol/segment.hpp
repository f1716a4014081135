#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace regimevol::segment {

struct MoodResult {
    double statistic = 0.0;  // z-value of the normal approximation
    double p_value = 1.0;    // two-sided
    bool degenerate = false; // all pooled values identical
};

// Mood's two-sample scale test on midranks:
//   M = sum_{i in a} (R_i - (N+1)/2)^2,  mu = m(N^2-1)/12,
//   var = m n (N+1)(N^2-4)/180.
MoodResult mood_test(std::span<const double> a, std::span<const double> b);

struct IndexRange {
    std::size_t begin = 0;  // inclusive
    std::size_t end = 0;    // exclusive

    std::size_t length() const { return end - begin; }
};

struct SegmentSet {
    std::vector<std::size_t> boundaries;  // strictly increasing cut indices in (0, T)
    std::vector<IndexRange> segments;     // partition of [0, T)
    std::size_t min_len = 0;
};

struct ChangePointOptions {
    std::size_t window = 21;   // one trading month per side
    double alpha = 0.01;
    std::size_t min_len = 30;  // shortest admissible segment
};

// Tests y[t-w..t) against y[t..t+w) at every interior t; candidates with
// p < alpha are grouped into runs of consecutive t, each run keeps its most
// significant point, and winners are accepted greedily (ascending p) subject
// to the minimum segment length.
SegmentSet detect_changepoints(std::span<const double> y, const ChangePointOptions& options);

void dump_segments(const SegmentSet& set, const std::vector<std::string>& dates,
                   const std::string& path);

}  // namespace regimevol::segment
