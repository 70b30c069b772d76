#include "quiltspread/scoring.hpp"

#include <cmath>
#include <fstream>

namespace qs {

CoverageScore score(const Mask& infant, const Mask& head, const Mask& covered, bool operating) {
    if (infant.width != head.width || infant.height != head.height || infant.width != covered.width ||
        infant.height != covered.height)
        throw std::invalid_argument("mask dimensions differ");
    long body = 0, body_covered = 0;
    for (int y = 0; y < infant.height; ++y) {
        for (int x = 0; x < infant.width; ++x) {
            if (!infant.at(x, y) || head.at(x, y)) continue;
            ++body;
            if (covered.at(x, y)) ++body_covered;
        }
    }
    if (body == 0) throw std::invalid_argument("non-head body region is empty");
    CoverageScore s;
    s.exposed_fraction = 1.0 - static_cast<double>(body_covered) / static_cast<double>(body);
    s.operating = operating;
    s.value = operating ? 0.0 : 100.0 * static_cast<double>(body_covered) / static_cast<double>(body);
    return s;
}

Mask head_region(const Keypoints& kps, int width, int height) {
    if (!kps.nose.visible) throw MissingKeypointError("nose");
    double ear_dist = 0;
    if (kps.left_ear.visible) ear_dist = std::max(ear_dist, norm(kps.left_ear.p - kps.nose.p));
    if (kps.right_ear.visible) ear_dist = std::max(ear_dist, norm(kps.right_ear.p - kps.nose.p));
    if (ear_dist == 0) throw MissingKeypointError("left_ear or right_ear");
    double r = 1.5 * ear_dist;
    Mask m(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            if (norm(Point{static_cast<double>(x), static_cast<double>(y)} - kps.nose.p) <= r) m.set(x, y);
    return m;
}

std::vector<CoverageScore> score_timeline(const std::vector<TimelineFrame>& episode) {
    std::vector<CoverageScore> series;
    series.reserve(episode.size());
    for (const TimelineFrame& f : episode) series.push_back(score(f.infant, f.head, f.covered, f.operating));
    return series;
}

void write_score_csv(const std::string& path, const std::vector<CoverageScore>& series) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "step,value,operating,exposed_fraction\n";
    for (std::size_t i = 0; i < series.size(); ++i)
        f << i << "," << series[i].value << "," << (series[i].operating ? 1 : 0) << ","
          << series[i].exposed_fraction << "\n";
}

} // namespace qs
