#include "signstream/synthetic.hpp"

#include <array>
#include <cmath>
#include <numbers>

#include "signstream/alphabet.hpp"
#include "signstream/error.hpp"

namespace signstream::synthetic {

namespace {

using landmarks::HandPoints;
using landmarks::Point3;

struct FingerGeometry {
  Point3 mcp;
  std::array<double, 3> lengths;
};

// index, middle, ring, pinky
constexpr std::array<FingerGeometry, 4> kFingers{{
    {{0.30, -0.95, 0.0}, {0.42, 0.25, 0.20}},
    {{0.00, -1.00, 0.0}, {0.46, 0.28, 0.22}},
    {{-0.27, -0.93, 0.0}, {0.42, 0.26, 0.20}},
    {{-0.50, -0.80, 0.0}, {0.33, 0.20, 0.18}},
}};

constexpr Point3 kThumbCmc{0.22, -0.22, 0.0};

struct HandShape {
  std::array<double, 4> curl;    // 0 extended .. 1 fully curled
  std::array<double, 4> spread;  // radians, positive toward the index side
  Point3 thumb_tip;
  double roll = 0.0;             // in-plane rotation about the wrist
};

constexpr std::array<double, 4> kNatural{0.08, 0.0, -0.08, -0.16};
constexpr std::array<double, 4> kTogether{0.0, 0.0, 0.0, 0.0};
constexpr std::array<double, 4> kFist{1.0, 1.0, 1.0, 1.0};

HandShape shape_for(char letter) {
  switch (letter) {
    case 'A': return {kFist, kNatural, {0.50, -0.60, -0.10}};
    case 'B': return {{0, 0, 0, 0}, kTogether, {0.05, -0.55, -0.10}};
    case 'C': return {{0.45, 0.45, 0.45, 0.45}, kTogether, {0.45, -0.55, -0.35}};
    case 'D': return {{0.0, 0.7, 0.7, 0.7}, kNatural, {0.05, -0.85, -0.35}};
    case 'E': return {{0.75, 0.75, 0.75, 0.75}, kTogether, {0.02, -0.50, -0.22}};
    case 'F': return {{0.6, 0.0, 0.0, 0.0}, {0.08, 0.0, -0.12, -0.25}, {0.32, -1.00, -0.30}};
    case 'G': return {{0.0, 1.0, 1.0, 1.0}, kNatural, {0.50, -0.85, -0.05}, std::numbers::pi / 2};
    case 'H': return {{0.0, 0.0, 1.0, 1.0}, kTogether, {0.15, -0.75, -0.30}, std::numbers::pi / 2};
    case 'I': return {{1.0, 1.0, 1.0, 0.0}, kNatural, {0.00, -0.70, -0.35}};
    case 'K': return {{0.0, 0.35, 1.0, 1.0}, {0.15, -0.15, 0.0, 0.0}, {0.12, -1.25, -0.20}};
    case 'L': return {{0.0, 1.0, 1.0, 1.0}, kNatural, {0.75, -0.45, 0.0}};
    case 'M': return {kFist, kNatural, {-0.38, -0.50, -0.45}};
    case 'N': return {kFist, kNatural, {-0.13, -0.45, -0.50}};
    case 'O': return {{0.55, 0.55, 0.55, 0.55}, kTogether, {0.10, -0.95, -0.45}};
    case 'P': return {{0.0, 0.35, 1.0, 1.0}, {0.15, -0.15, 0.0, 0.0}, {0.12, -1.25, -0.20}, 2.4};
    case 'Q': return {{0.0, 1.0, 1.0, 1.0}, kNatural, {0.50, -0.85, -0.05}, 2.7};
    case 'R': return {{0.0, 0.0, 1.0, 1.0}, {-0.12, 0.12, 0.0, 0.0}, {0.00, -0.70, -0.35}};
    case 'S': return {kFist, kNatural, {0.07, -0.58, -0.42}};
    case 'T': return {kFist, kNatural, {0.23, -1.00, -0.30}};
    case 'U': return {{0.0, 0.0, 1.0, 1.0}, kTogether, {0.00, -0.70, -0.35}};
    case 'V': return {{0.0, 0.0, 1.0, 1.0}, {0.25, -0.25, 0.0, 0.0}, {0.00, -0.70, -0.35}};
    case 'W': return {{0.0, 0.0, 0.0, 1.0}, {0.25, 0.0, -0.25, 0.0}, {-0.30, -0.75, -0.30}};
    case 'X': return {{0.55, 1.0, 1.0, 1.0}, kNatural, {0.10, -0.72, -0.35}};
    case 'Y': return {{1.0, 1.0, 1.0, 0.0}, {0.08, 0.0, -0.08, -0.30}, {0.70, -0.40, 0.0}};
    default: break;
  }
  throw Error(ErrorCode::InvalidArgument, std::string("no static hand shape for '") + letter + "'");
}

Point3 lerp(const Point3& a, const Point3& b, double t) { return a + t * (b - a); }

}  // namespace

HandPoints canonical_hand(char letter) {
  const HandShape shape = shape_for(letter);
  HandPoints pts{};
  pts[0] = {0.0, 0.0, 0.0};

  pts[1] = kThumbCmc;
  pts[2] = lerp(kThumbCmc, shape.thumb_tip, 0.38) + Point3{0.08, 0.0, -0.02};
  pts[3] = lerp(kThumbCmc, shape.thumb_tip, 0.70) + Point3{0.04, 0.0, -0.02};
  pts[4] = shape.thumb_tip;

  constexpr std::array<double, 3> kJointGain{1.40, 1.75, 1.20};
  const Point3 palm_normal{0.0, 0.0, -1.0};
  for (std::size_t f = 0; f < 4; ++f) {
    const auto& geom = kFingers[f];
    const Point3 base_dir{std::sin(shape.spread[f]), -std::cos(shape.spread[f]), 0.0};
    const std::size_t first = 5 + 4 * f;
    pts[first] = geom.mcp;
    double theta = 0.0;
    for (std::size_t seg = 0; seg < 3; ++seg) {
      theta += shape.curl[f] * kJointGain[seg];
      const Point3 dir = std::cos(theta) * base_dir + std::sin(theta) * palm_normal;
      pts[first + seg + 1] = pts[first + seg] + geom.lengths[seg] * dir;
    }
  }

  if (shape.roll != 0.0) {
    const double c = std::cos(shape.roll);
    const double s = std::sin(shape.roll);
    for (auto& p : pts) p = {c * p.x - s * p.y, s * p.x + c * p.y, p.z};
  }
  return pts;
}

landmarks::RawHandFrame sample_hand(char letter, std::mt19937_64& rng, const Placement& placement) {
  HandPoints pts = canonical_hand(letter);
  if (placement.jitter_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, placement.jitter_sigma);
    for (auto& p : pts) p = p + Point3{noise(rng), noise(rng), noise(rng)};
  }
  double scale = 0.15;
  Point3 offset{0.5, 0.7, 0.0};
  if (placement.randomize) {
    std::uniform_real_distribution<double> s(0.08, 0.30);
    std::uniform_real_distribution<double> xy(0.25, 0.75);
    std::uniform_real_distribution<double> z(-0.05, 0.05);
    scale = s(rng);
    offset = {xy(rng), xy(rng), z(rng)};
  }
  landmarks::RawHandFrame frame;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    frame.points[i] = offset + scale * pts[i];
    if (placement.left_hand) frame.points[i].x = 1.0 - frame.points[i].x;
  }
  frame.handedness = placement.left_hand ? landmarks::Handedness::Left : landmarks::Handedness::Right;
  return frame;
}

std::vector<landmarks::LabeledFrame> make_dataset(std::size_t per_class, double jitter_sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<landmarks::LabeledFrame> samples;
  samples.reserve(per_class * kNumClasses);
  Placement placement;
  placement.jitter_sigma = jitter_sigma;
  for (char letter : kRecognitionAlphabet) {
    for (std::size_t i = 0; i < per_class; ++i) samples.push_back({letter, sample_hand(letter, rng, placement)});
  }
  return samples;
}

std::vector<nn::LabeledFeatures> to_features(const std::vector<landmarks::LabeledFrame>& samples,
                                             landmarks::FeatureLayout layout) {
  std::vector<nn::LabeledFeatures> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    out.push_back({landmarks::extract_features(landmarks::prepare(s.frame), layout), *letter_to_class(s.label)});
  }
  return out;
}

retrieval::PoseSequence pose_clip(std::string_view key, std::size_t frames, std::size_t points, double fps) {
  const std::uint64_t h = retrieval::fnv1a64(key);
  const double phase = static_cast<double>(h % 1000) / 1000.0 * 2.0 * std::numbers::pi;
  const double amplitude = 0.02 + static_cast<double>((h >> 20) % 100) / 2000.0;
  retrieval::PoseSequence seq;
  seq.fps = fps;
  seq.frames.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    const double t = frames > 1 ? static_cast<double>(f) / static_cast<double>(frames - 1) : 0.0;
    auto& pts = seq.frames[f].points;
    pts.resize(points);
    for (std::size_t p = 0; p < points; ++p) {
      const double u = static_cast<double>(p) / static_cast<double>(points);
      const double wave = std::sin(2.0 * std::numbers::pi * (t + u) + phase);
      pts[p] = {0.5 + 0.3 * std::cos(2.0 * std::numbers::pi * u) + amplitude * wave,
                0.5 + 0.3 * std::sin(2.0 * std::numbers::pi * u) + amplitude * std::cos(phase + 3.0 * t),
                0.05 * wave, 1.0};
    }
  }
  return seq;
}

}  // namespace signstream::synthetic
