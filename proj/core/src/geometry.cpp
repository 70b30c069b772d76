#include "quiltspread/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace qs {

double cross(const Point& o, const Point& a, const Point& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

double dot(const Point& a, const Point& b) { return a.x * b.x + a.y * b.y; }
double norm(const Point& p) { return std::sqrt(p.x * p.x + p.y * p.y); }

std::vector<Point> convex_hull(std::vector<Point> pts) {
    std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const Point& a, const Point& b) { return a.x == b.x && a.y == b.y; }),
              pts.end());
    if (pts.size() <= 2) return pts;
    std::vector<Point> hull(2 * pts.size());
    std::size_t k = 0;
    for (const Point& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
        hull[k++] = p;
    }
    std::size_t lower = k + 1;
    for (auto it = pts.rbegin(); it != pts.rend(); ++it) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], *it) <= 0) --k;
        hull[k++] = *it;
    }
    hull.resize(k - 1);
    if (hull.size() < 3) { // collinear set
        auto [mn, mx] = std::minmax_element(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
            return a.x < b.x || (a.x == b.x && a.y < b.y);
        });
        return {*mn, *mx};
    }
    return hull;
}

double polygon_area(const std::vector<Point>& poly) {
    if (poly.size() < 3) return 0.0;
    double a = 0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Point& p = poly[i];
        const Point& q = poly[(i + 1) % poly.size()];
        a += p.x * q.y - q.x * p.y;
    }
    return std::abs(a) * 0.5;
}

bool point_in_convex(const std::vector<Point>& hull, const Point& p, double eps) {
    if (hull.empty()) return false;
    if (hull.size() == 1) return norm(p - hull[0]) <= eps;
    if (hull.size() == 2) {
        Point d = hull[1] - hull[0];
        double len2 = dot(d, d);
        if (len2 == 0) return norm(p - hull[0]) <= eps;
        double t = std::clamp(dot(p - hull[0], d) / len2, 0.0, 1.0);
        return norm(p - (hull[0] + d * t)) <= eps;
    }
    for (std::size_t i = 0; i < hull.size(); ++i)
        if (cross(hull[i], hull[(i + 1) % hull.size()], p) < -eps) return false;
    return true;
}

std::vector<Point> convex_clip(const std::vector<Point>& subject, const std::vector<Point>& clip) {
    if (subject.size() < 3 || clip.size() < 3) return {};
    std::vector<Point> output = subject;
    for (std::size_t i = 0; i < clip.size() && !output.empty(); ++i) {
        const Point& a = clip[i];
        const Point& b = clip[(i + 1) % clip.size()];
        std::vector<Point> input;
        input.swap(output);
        for (std::size_t j = 0; j < input.size(); ++j) {
            const Point& p = input[j];
            const Point& q = input[(j + 1) % input.size()];
            double sp = cross(a, b, p);
            double sq = cross(a, b, q);
            auto intersect = [&]() {
                double t = sp / (sp - sq);
                return p + (q - p) * t;
            };
            if (sp >= 0) {
                output.push_back(p);
                if (sq < 0) output.push_back(intersect());
            } else if (sq >= 0) {
                output.push_back(intersect());
            }
        }
    }
    return output;
}

} // namespace qs
