#pragma once

#include "quiltspread/geometry.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace qs {

struct Mask {
    int width = 0, height = 0;
    std::vector<std::uint8_t> data; // nonzero = member

    Mask() = default;
    Mask(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0) {}

    bool at(int x, int y) const {
        if (x < 0 || x >= width || y < 0 || y >= height) return false;
        return data[static_cast<std::size_t>(y) * width + x] != 0;
    }
    void set(int x, int y, bool on = true) {
        if (x < 0 || x >= width || y < 0 || y >= height) return;
        data[static_cast<std::size_t>(y) * width + x] = on ? 255 : 0;
    }
    std::size_t count() const;
    std::vector<Point> member_points() const; // pixel centers
};

enum class LimbClass { Upper, Lower };
enum class Side { Left, Right };

struct LimbMask {
    LimbClass limb_class;
    Side side;
    Mask mask;
};

struct SceneMasks {
    Mask infant;
    Mask quilt;
    std::vector<LimbMask> limbs;
};

struct Keypoint {
    Point p;
    bool visible = false;
};

struct Keypoints {
    Keypoint nose, left_eye, right_eye, left_ear, right_ear;
    Keypoint left_shoulder, right_shoulder, left_elbow, right_elbow, left_wrist, right_wrist;
    Keypoint left_hip, right_hip, left_knee, right_knee, left_ankle, right_ankle;
};

struct MissingKeypointError : std::runtime_error {
    explicit MissingKeypointError(const std::string& names)
        : std::runtime_error("required keypoints missing: " + names) {}
};

struct InterferenceReport {
    bool detected = false;
    LimbClass limb_class = LimbClass::Upper;
    Side side = Side::Left;
    double envelopment = 0.0;
    Mask interference; // limb-and-quilt overlap raster
};

struct DragAction {
    Point start, end;
};

struct ResolutionPlan {
    std::vector<DragAction> actions;
    std::string strategy; // "upper-limb" or "lower-limb"
};

/// Body-axis ray samples from the nose toward the feet (perpendicular to the
/// shoulder segment), classified by infant-mask membership.
/// Requires nose and both shoulders; throws MissingKeypointError naming the
/// absentees.
std::pair<std::vector<Point>, std::vector<Point>> sample_axis_points(const Keypoints& kps, const Mask& infant,
                                                                     double interval);

/// Unit direction of the body axis, head to feet.
Point body_axis_direction(const Keypoints& kps);

/// area(hull(inner) ∩ hull(outer members)) / area(hull(inner)), by polygon
/// clipping. Collinear inner sets fall back to a sampled segment fraction.
double envelopment_fraction(const std::vector<Point>& inner, const Mask& outer);
double envelopment_fraction(const Mask& inner, const Mask& outer);

struct DetectConfig {
    double threshold = 0.3;
    double sampling_interval = 8.0;
};

InterferenceReport detect(const SceneMasks& masks, const Keypoints& kps, double threshold = 0.3);

struct ResolveConfig {
    double side_offset = 18.0;  // outward offset of upper-limb drag targets
    double clear_margin = 15.0; // extra travel past the limb hull
};

/// Pre-defined resolution motions: two side drags for an upper limb, one
/// axial drag for a lower limb. Action starts always lie on the quilt mask.
ResolutionPlan resolve(const InterferenceReport& report, const SceneMasks& masks, const Keypoints& kps,
                       const ResolveConfig& cfg = {});

/// Geometric replay: translate the quilt mask by the mean drag displacement.
SceneMasks apply_plan(const SceneMasks& masks, const ResolutionPlan& plan);

/// resolve + replay until the triggering limb's envelopment drops below
/// threshold or the iteration cap is hit. Returns the concatenated plan and
/// the final envelopment fraction.
std::pair<ResolutionPlan, double> resolve_until_clear(SceneMasks masks, const Keypoints& kps, double threshold,
                                                      int max_iterations = 5, const ResolveConfig& cfg = {});

enum class SceneFamily { NoInterference, UpperLimb, LowerLimb };

struct SynthSceneSpec {
    SceneFamily family = SceneFamily::NoInterference;
    int width = 256, height = 288;
};

struct SynthScene {
    SceneMasks masks;
    Keypoints keypoints;
    SceneFamily family;
    bool interference_expected;
};

/// Deterministic synthetic fixture: ellipse body, capsule limbs, rectangle
/// quilt with seeded jitter.
SynthScene synth_scene(const SynthSceneSpec& spec, std::uint64_t seed);

// Mask files are P5 PGM (nonzero = member); keypoints are a JSON map
// name -> [x, y, visible].
void write_mask_pgm(const Mask& m, const std::string& path);
Mask read_mask_pgm(const std::string& path);
void write_keypoints_json(const Keypoints& kps, const std::string& path);
Keypoints read_keypoints_json(const std::string& path);

} // namespace qs
