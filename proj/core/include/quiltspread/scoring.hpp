#pragma once

#include "quiltspread/interference.hpp"

#include <string>
#include <vector>

namespace qs {

struct CoverageScore {
    double value = 0;            // 0..100
    double exposed_fraction = 0; // non-head body area left uncovered
    bool operating = false;      // manipulator active forces the score to 0
};

/// 100 when every non-head body cell is covered; scales linearly with the
/// covered fraction of the non-head body; 0 while operating.
/// Throws std::invalid_argument when the non-head body is empty.
CoverageScore score(const Mask& infant, const Mask& head, const Mask& covered, bool operating);

/// Head disk from keypoints: centered on the nose, radius 1.5x the
/// nose-to-ear distance.
Mask head_region(const Keypoints& kps, int width, int height);

struct TimelineFrame {
    Mask infant, head, covered;
    bool operating = false;
};

std::vector<CoverageScore> score_timeline(const std::vector<TimelineFrame>& episode);

/// CSV columns: step, value, operating, exposed_fraction.
void write_score_csv(const std::string& path, const std::vector<CoverageScore>& series);

} // namespace qs
