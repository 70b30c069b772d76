#include "quiltspread/interference.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

namespace qs {

std::size_t Mask::count() const {
    return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [](std::uint8_t v) { return v != 0; }));
}

std::vector<Point> Mask::member_points() const {
    std::vector<Point> pts;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            if (at(x, y)) pts.push_back({static_cast<double>(x), static_cast<double>(y)});
    return pts;
}

Point body_axis_direction(const Keypoints& kps) {
    std::string missing;
    if (!kps.nose.visible) missing += "nose ";
    if (!kps.left_shoulder.visible) missing += "left_shoulder ";
    if (!kps.right_shoulder.visible) missing += "right_shoulder ";
    if (!missing.empty()) throw MissingKeypointError(missing);
    Point shoulder = kps.right_shoulder.p - kps.left_shoulder.p;
    double len = norm(shoulder);
    if (len < 1e-9) throw MissingKeypointError("distinct shoulders");
    Point perp{-shoulder.y / len, shoulder.x / len};
    Point ref;
    if (kps.left_hip.visible || kps.right_hip.visible) {
        Point hip_sum{};
        int n = 0;
        if (kps.left_hip.visible) { hip_sum = hip_sum + kps.left_hip.p; ++n; }
        if (kps.right_hip.visible) { hip_sum = hip_sum + kps.right_hip.p; ++n; }
        ref = hip_sum * (1.0 / n) - kps.nose.p;
    } else {
        ref = (kps.left_shoulder.p + kps.right_shoulder.p) * 0.5 - kps.nose.p;
    }
    if (dot(perp, ref) < 0) perp = perp * -1.0;
    return perp;
}

std::pair<std::vector<Point>, std::vector<Point>> sample_axis_points(const Keypoints& kps, const Mask& infant,
                                                                     double interval) {
    if (interval <= 0) throw std::invalid_argument("sampling interval must be positive");
    Point dir = body_axis_direction(kps);
    std::vector<Point> p_in, p_out;
    Point p = kps.nose.p;
    while (p.x >= 0 && p.x < infant.width && p.y >= 0 && p.y < infant.height) {
        bool inside = infant.at(static_cast<int>(std::lround(p.x)), static_cast<int>(std::lround(p.y)));
        (inside ? p_in : p_out).push_back(p);
        p = p + dir * interval;
    }
    return {p_in, p_out};
}

namespace {

double segment_fallback_fraction(const std::vector<Point>& inner, const std::vector<Point>& outer_hull) {
    if (inner.empty()) return 0.0;
    if (inner.size() == 1) return point_in_convex(outer_hull, inner[0]) ? 1.0 : 0.0;
    const int n_samples = 200;
    int inside = 0;
    for (int i = 0; i < n_samples; ++i) {
        double t = static_cast<double>(i) / (n_samples - 1);
        Point p = inner.front() + (inner.back() - inner.front()) * t;
        if (point_in_convex(outer_hull, p)) ++inside;
    }
    return static_cast<double>(inside) / n_samples;
}

} // namespace

double envelopment_fraction(const std::vector<Point>& inner, const Mask& outer) {
    if (inner.empty()) throw std::invalid_argument("inner point set is empty");
    std::vector<Point> outer_hull = convex_hull(outer.member_points());
    if (outer_hull.size() < 3) return 0.0;
    std::vector<Point> inner_hull = convex_hull(inner);
    if (inner_hull.size() < 3) return segment_fallback_fraction(inner_hull, outer_hull);
    double inner_area = polygon_area(inner_hull);
    if (inner_area < 1e-12) return segment_fallback_fraction(inner_hull, outer_hull);
    double overlap = polygon_area(convex_clip(inner_hull, outer_hull));
    return std::clamp(overlap / inner_area, 0.0, 1.0);
}

double envelopment_fraction(const Mask& inner, const Mask& outer) {
    return envelopment_fraction(inner.member_points(), outer);
}

namespace {

std::vector<const Keypoint*> limb_keypoints(const Keypoints& kps, LimbClass cls, Side side) {
    if (cls == LimbClass::Upper)
        return side == Side::Left ? std::vector<const Keypoint*>{&kps.left_elbow, &kps.left_wrist}
                                  : std::vector<const Keypoint*>{&kps.right_elbow, &kps.right_wrist};
    return side == Side::Left ? std::vector<const Keypoint*>{&kps.left_knee, &kps.left_ankle}
                              : std::vector<const Keypoint*>{&kps.right_knee, &kps.right_ankle};
}

} // namespace

InterferenceReport detect(const SceneMasks& masks, const Keypoints& kps, double threshold) {
    if (masks.infant.width != masks.quilt.width || masks.infant.height != masks.quilt.height)
        throw std::invalid_argument("infant and quilt masks have different dimensions");
    for (const LimbMask& lm : masks.limbs)
        if (lm.mask.width != masks.infant.width || lm.mask.height != masks.infant.height)
            throw std::invalid_argument("limb mask dimensions differ from the scene");

    InterferenceReport best;
    for (const LimbMask& lm : masks.limbs) {
        auto kp = limb_keypoints(kps, lm.limb_class, lm.side);
        std::vector<const Keypoint*> visible;
        for (const Keypoint* k : kp)
            if (k->visible) visible.push_back(k);
        if (visible.empty()) continue; // no limb points detected
        // case 1: limb points sitting inside the quilt mask are excluded
        bool all_inside = std::all_of(visible.begin(), visible.end(), [&](const Keypoint* k) {
            return masks.quilt.at(static_cast<int>(std::lround(k->p.x)), static_cast<int>(std::lround(k->p.y)));
        });
        if (all_inside) continue;
        if (lm.mask.count() == 0) continue;
        double frac = envelopment_fraction(lm.mask, masks.quilt);
        if (frac > best.envelopment) {
            best.envelopment = frac;
            best.limb_class = lm.limb_class;
            best.side = lm.side;
            // interference raster: limb pixels under the quilt hull
            std::vector<Point> quilt_hull = convex_hull(masks.quilt.member_points());
            Mask inter(masks.infant.width, masks.infant.height);
            for (int y = 0; y < inter.height; ++y)
                for (int x = 0; x < inter.width; ++x)
                    if (lm.mask.at(x, y) &&
                        point_in_convex(quilt_hull, {static_cast<double>(x), static_cast<double>(y)}))
                        inter.set(x, y);
            best.interference = std::move(inter);
        }
    }
    best.detected = best.envelopment >= threshold;
    return best;
}

namespace {

const LimbMask* find_limb(const SceneMasks& masks, LimbClass cls, Side side) {
    for (const LimbMask& lm : masks.limbs)
        if (lm.limb_class == cls && lm.side == side) return &lm;
    return nullptr;
}

Point centroid(const std::vector<Point>& pts) {
    Point c{};
    for (const Point& p : pts) c = c + p;
    return c * (1.0 / static_cast<double>(pts.size()));
}

Point nearest_mask_point(const Mask& m, const Point& target) {
    double best = 1e300;
    Point bp{};
    bool found = false;
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            if (!m.at(x, y)) continue;
            Point p{static_cast<double>(x), static_cast<double>(y)};
            double d = norm(p - target);
            if (d < best) { best = d; bp = p; found = true; }
        }
    }
    if (!found) throw std::runtime_error("quilt mask is empty");
    return bp;
}

} // namespace

ResolutionPlan resolve(const InterferenceReport& report, const SceneMasks& masks, const Keypoints& kps,
                       const ResolveConfig& cfg) {
    if (!report.detected) return {};
    Point axis = body_axis_direction(kps);
    const LimbMask* limb = find_limb(masks, report.limb_class, report.side);
    if (!limb || limb->mask.count() == 0) throw std::runtime_error("limb mask unavailable for the reported limb");
    std::vector<Point> limb_pts = limb->mask.member_points();
    Point limb_centroid = centroid(limb_pts);

    ResolutionPlan plan;
    if (report.limb_class == LimbClass::Upper) {
        plan.strategy = "upper-limb";
        const Keypoint& shoulder = report.side == Side::Left ? kps.left_shoulder : kps.right_shoulder;
        const Keypoint& elbow = report.side == Side::Left ? kps.left_elbow : kps.right_elbow;
        const Keypoint& wrist = report.side == Side::Left ? kps.left_wrist : kps.right_wrist;
        Point arm_from = shoulder.visible ? shoulder.p : (elbow.visible ? elbow.p : limb_centroid);
        Point arm_to = wrist.visible ? wrist.p : (elbow.visible ? elbow.p : limb_centroid);
        Point arm_dir = arm_to - arm_from;
        double arm_len = norm(arm_dir);
        if (arm_len < 1e-9) arm_dir = axis; else arm_dir = arm_dir * (1.0 / arm_len);
        Point perp{-arm_dir.y, arm_dir.x};

        // lowest visible arm extent along the body axis
        Point lowest = limb_pts.front();
        double best_proj = -1e300;
        for (const Point& p : limb_pts) {
            double proj = dot(p, axis);
            if (proj > best_proj) { best_proj = proj; lowest = p; }
        }

        // quilt points on both sides of the arm line, nearest to the limb
        for (int side_sign : {+1, -1}) {
            double best_d = 1e300;
            Point start{};
            bool found = false;
            for (int y = 0; y < masks.quilt.height; ++y) {
                for (int x = 0; x < masks.quilt.width; ++x) {
                    if (!masks.quilt.at(x, y)) continue;
                    Point p{static_cast<double>(x), static_cast<double>(y)};
                    double s = cross(arm_from, arm_to, p);
                    if (side_sign > 0 ? s <= 0 : s >= 0) continue;
                    double d = norm(p - limb_centroid);
                    if (d < best_d) { best_d = d; start = p; found = true; }
                }
            }
            if (!found)
                throw std::runtime_error(std::string("no quilt point available on the ") +
                                         (side_sign > 0 ? "positive" : "negative") + " side of the arm");
            Point end = lowest + axis * cfg.clear_margin + perp * (side_sign * cfg.side_offset);
            plan.actions.push_back({start, end});
        }
    } else {
        plan.strategy = "lower-limb";
        Point inter_centroid =
            report.interference.count() > 0 ? centroid(report.interference.member_points()) : limb_centroid;
        Point start = nearest_mask_point(masks.quilt, inter_centroid);
        double extent = 0;
        for (const Point& p : limb_pts) extent = std::max(extent, dot(p - start, axis));
        plan.actions.push_back({start, start + axis * (extent + cfg.clear_margin)});
    }
    return plan;
}

SceneMasks apply_plan(const SceneMasks& masks, const ResolutionPlan& plan) {
    if (plan.actions.empty()) return masks;
    Point delta{};
    for (const DragAction& a : plan.actions) delta = delta + (a.end - a.start);
    delta = delta * (1.0 / static_cast<double>(plan.actions.size()));
    int dx = static_cast<int>(std::lround(delta.x));
    int dy = static_cast<int>(std::lround(delta.y));
    SceneMasks out = masks;
    Mask shifted(masks.quilt.width, masks.quilt.height);
    for (int y = 0; y < masks.quilt.height; ++y)
        for (int x = 0; x < masks.quilt.width; ++x)
            if (masks.quilt.at(x, y)) shifted.set(x + dx, y + dy);
    out.quilt = std::move(shifted);
    return out;
}

std::pair<ResolutionPlan, double> resolve_until_clear(SceneMasks masks, const Keypoints& kps, double threshold,
                                                      int max_iterations, const ResolveConfig& cfg) {
    InterferenceReport report = detect(masks, kps, threshold);
    ResolutionPlan combined;
    if (!report.detected) return {combined, report.envelopment};
    combined.strategy = report.limb_class == LimbClass::Upper ? "upper-limb" : "lower-limb";
    const LimbClass cls = report.limb_class;
    const Side side = report.side;
    double frac = report.envelopment;
    for (int it = 0; it < max_iterations && frac >= threshold; ++it) {
        ResolutionPlan p = resolve(report, masks, kps, cfg);
        combined.actions.insert(combined.actions.end(), p.actions.begin(), p.actions.end());
        masks = apply_plan(masks, p);
        const LimbMask* limb = find_limb(masks, cls, side);
        frac = masks.quilt.count() == 0 ? 0.0 : envelopment_fraction(limb->mask, masks.quilt);
        report.envelopment = std::max(frac, threshold); // keep the report valid for the next resolve
        report.detected = true;
    }
    return {combined, frac};
}

namespace {

void fill_ellipse(Mask& m, Point c, double rx, double ry) {
    for (int y = std::max(0, static_cast<int>(c.y - ry)); y <= std::min(m.height - 1, static_cast<int>(c.y + ry)); ++y)
        for (int x = std::max(0, static_cast<int>(c.x - rx)); x <= std::min(m.width - 1, static_cast<int>(c.x + rx)); ++x) {
            double nx = (x - c.x) / rx, ny = (y - c.y) / ry;
            if (nx * nx + ny * ny <= 1.0) m.set(x, y);
        }
}

void fill_capsule(Mask& m, Point a, Point b, double r) {
    Point d = b - a;
    double len2 = dot(d, d);
    int x0 = static_cast<int>(std::min(a.x, b.x) - r), x1 = static_cast<int>(std::max(a.x, b.x) + r);
    int y0 = static_cast<int>(std::min(a.y, b.y) - r), y1 = static_cast<int>(std::max(a.y, b.y) + r);
    for (int y = std::max(0, y0); y <= std::min(m.height - 1, y1); ++y)
        for (int x = std::max(0, x0); x <= std::min(m.width - 1, x1); ++x) {
            Point p{static_cast<double>(x), static_cast<double>(y)};
            double t = len2 > 0 ? std::clamp(dot(p - a, d) / len2, 0.0, 1.0) : 0.0;
            if (norm(p - (a + d * t)) <= r) m.set(x, y);
        }
}

void fill_rect(Mask& m, int x0, int y0, int x1, int y1) {
    for (int y = std::max(0, y0); y <= std::min(m.height - 1, y1); ++y)
        for (int x = std::max(0, x0); x <= std::min(m.width - 1, x1); ++x) m.set(x, y);
}

} // namespace

SynthScene synth_scene(const SynthSceneSpec& spec, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> jitter(-6, 6);
    const int jx = jitter(rng), jy = jitter(rng);

    SynthScene scene;
    scene.family = spec.family;
    scene.interference_expected = spec.family != SceneFamily::NoInterference;

    const int W = spec.width, H = spec.height;
    Keypoints& k = scene.keypoints;
    auto kp = [](double x, double y) { return Keypoint{{x, y}, true}; };
    k.nose = kp(128, 40);
    k.left_eye = kp(120, 34);  k.right_eye = kp(136, 34);
    k.left_ear = kp(110, 40);  k.right_ear = kp(146, 40);
    k.left_shoulder = kp(98, 72);  k.right_shoulder = kp(158, 72);
    k.left_elbow = kp(66, 105);    k.right_elbow = kp(190, 105);
    k.left_wrist = kp(44, 130);    k.right_wrist = kp(212, 130);
    k.left_hip = kp(108, 195);     k.right_hip = kp(148, 195);
    k.left_knee = kp(112, 235);    k.right_knee = kp(144, 235);
    k.left_ankle = kp(106, 265);   k.right_ankle = kp(150, 265);

    Mask infant(W, H);
    fill_ellipse(infant, {128, 40}, 22, 22);   // head
    fill_ellipse(infant, {128, 140}, 38, 80);  // torso
    auto arm = [&](Mask& m, const Keypoint& s, const Keypoint& e, const Keypoint& w) {
        fill_capsule(m, s.p, e.p, 9);
        fill_capsule(m, e.p, w.p, 9);
    };
    arm(infant, k.left_shoulder, k.left_elbow, k.left_wrist);
    arm(infant, k.right_shoulder, k.right_elbow, k.right_wrist);
    fill_capsule(infant, k.left_hip.p, k.left_knee.p, 10);
    fill_capsule(infant, k.left_knee.p, k.left_ankle.p, 10);
    fill_capsule(infant, k.right_hip.p, k.right_knee.p, 10);
    fill_capsule(infant, k.right_knee.p, k.right_ankle.p, 10);

    std::vector<LimbMask> limbs;
    auto limb_mask = [&](LimbClass cls, Side side, Point a, Point b, double r) {
        Mask m(W, H);
        fill_capsule(m, a, b, r);
        limbs.push_back({cls, side, std::move(m)});
    };
    limb_mask(LimbClass::Upper, Side::Left, k.left_elbow.p, k.left_wrist.p, 9);
    limb_mask(LimbClass::Upper, Side::Right, k.right_elbow.p, k.right_wrist.p, 9);
    limb_mask(LimbClass::Lower, Side::Left, k.left_knee.p, k.left_ankle.p, 10);
    limb_mask(LimbClass::Lower, Side::Right, k.right_knee.p, k.right_ankle.p, 10);

    Mask quilt(W, H);
    switch (spec.family) {
        case SceneFamily::NoInterference:
            fill_rect(quilt, 92 + jx, 150 + jy, 164 + jx, 212 + jy);
            break;
        case SceneFamily::UpperLimb:
            // spans the whole right forearm even at extreme jitter
            fill_rect(quilt, 150 + jx, 85 + jy, 240 + jx, 185 + jy);
            break;
        case SceneFamily::LowerLimb:
            fill_rect(quilt, 105 + jx, 215 + jy, 185 + jx, 258 + jy);
            break;
    }
    // the limb lies on top of the quilt, so limb pixels never belong to it
    for (const LimbMask& lm : limbs)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                if (lm.mask.at(x, y)) quilt.set(x, y, false);

    scene.masks = {std::move(infant), std::move(quilt), std::move(limbs)};
    return scene;
}

void write_mask_pgm(const Mask& m, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "P5\n" << m.width << " " << m.height << "\n255\n";
    f.write(reinterpret_cast<const char*>(m.data.data()), static_cast<std::streamsize>(m.data.size()));
}

Mask read_mask_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    std::string magic;
    int w, h, maxval;
    f >> magic >> w >> h >> maxval;
    if (magic != "P5" || w <= 0 || h <= 0) throw std::runtime_error("not a P5 PGM: " + path);
    f.get();
    Mask m(w, h);
    f.read(reinterpret_cast<char*>(m.data.data()), static_cast<std::streamsize>(m.data.size()));
    if (!f) throw std::runtime_error("truncated PGM: " + path);
    for (auto& v : m.data) v = v ? 255 : 0;
    return m;
}

namespace {
void put_kp(nlohmann::json& j, const char* name, const Keypoint& k) {
    j[name] = {k.p.x, k.p.y, k.visible ? 1 : 0};
}
Keypoint get_kp(const nlohmann::json& j, const char* name) {
    if (!j.contains(name)) return {};
    const auto& a = j.at(name);
    return {{a.at(0).get<double>(), a.at(1).get<double>()}, a.at(2).get<int>() != 0};
}
} // namespace

void write_keypoints_json(const Keypoints& k, const std::string& path) {
    nlohmann::json j;
    put_kp(j, "nose", k.nose);
    put_kp(j, "left_eye", k.left_eye);       put_kp(j, "right_eye", k.right_eye);
    put_kp(j, "left_ear", k.left_ear);       put_kp(j, "right_ear", k.right_ear);
    put_kp(j, "left_shoulder", k.left_shoulder); put_kp(j, "right_shoulder", k.right_shoulder);
    put_kp(j, "left_elbow", k.left_elbow);   put_kp(j, "right_elbow", k.right_elbow);
    put_kp(j, "left_wrist", k.left_wrist);   put_kp(j, "right_wrist", k.right_wrist);
    put_kp(j, "left_hip", k.left_hip);       put_kp(j, "right_hip", k.right_hip);
    put_kp(j, "left_knee", k.left_knee);     put_kp(j, "right_knee", k.right_knee);
    put_kp(j, "left_ankle", k.left_ankle);   put_kp(j, "right_ankle", k.right_ankle);
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << j.dump(2) << "\n";
}

Keypoints read_keypoints_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open: " + path);
    nlohmann::json j = nlohmann::json::parse(f);
    Keypoints k;
    k.nose = get_kp(j, "nose");
    k.left_eye = get_kp(j, "left_eye");       k.right_eye = get_kp(j, "right_eye");
    k.left_ear = get_kp(j, "left_ear");       k.right_ear = get_kp(j, "right_ear");
    k.left_shoulder = get_kp(j, "left_shoulder"); k.right_shoulder = get_kp(j, "right_shoulder");
    k.left_elbow = get_kp(j, "left_elbow");   k.right_elbow = get_kp(j, "right_elbow");
    k.left_wrist = get_kp(j, "left_wrist");   k.right_wrist = get_kp(j, "right_wrist");
    k.left_hip = get_kp(j, "left_hip");       k.right_hip = get_kp(j, "right_hip");
    k.left_knee = get_kp(j, "left_knee");     k.right_knee = get_kp(j, "right_knee");
    k.left_ankle = get_kp(j, "left_ankle");   k.right_ankle = get_kp(j, "right_ankle");
    return k;
}

} // namespace qs
