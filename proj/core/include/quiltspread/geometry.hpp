#pragma once

#include <vector>

namespace qs {

struct Point {
    double x = 0, y = 0;

    Point operator+(const Point& o) const { return {x + o.x, y + o.y}; }
    Point operator-(const Point& o) const { return {x - o.x, y - o.y}; }
    Point operator*(double s) const { return {x * s, y * s}; }
};

double cross(const Point& o, const Point& a, const Point& b);
double dot(const Point& a, const Point& b);
double norm(const Point& p);

/// Andrew monotone chain; returns CCW hull without repeated endpoint.
/// Collinear input collapses to 2 (or 1) points.
std::vector<Point> convex_hull(std::vector<Point> pts);

/// Shoelace area (hull order assumed CCW; returns absolute value).
double polygon_area(const std::vector<Point>& poly);

bool point_in_convex(const std::vector<Point>& hull, const Point& p, double eps = 1e-9);

/// Sutherland-Hodgman clip of `subject` by convex CCW polygon `clip`.
std::vector<Point> convex_clip(const std::vector<Point>& subject, const std::vector<Point>& clip);

} // namespace qs
