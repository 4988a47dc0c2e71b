#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace signstream::landmarks {

inline constexpr std::size_t kNumLandmarks = 21;

// Indices into the 21-point hand layout.
namespace idx {
inline constexpr std::size_t kWrist = 0;
inline constexpr std::size_t kThumbTip = 4;
inline constexpr std::size_t kIndexMcp = 5;
inline constexpr std::size_t kIndexTip = 8;
inline constexpr std::size_t kMiddleMcp = 9;
inline constexpr std::size_t kMiddleTip = 12;
inline constexpr std::size_t kRingMcp = 13;
inline constexpr std::size_t kRingTip = 16;
inline constexpr std::size_t kPinkyMcp = 17;
inline constexpr std::size_t kPinkyTip = 20;
}  // namespace idx

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Point3&, const Point3&) = default;
};

Point3 operator+(const Point3& a, const Point3& b);
Point3 operator-(const Point3& a, const Point3& b);
Point3 operator*(double s, const Point3& p);
double distance(const Point3& a, const Point3& b);

using HandPoints = std::array<Point3, kNumLandmarks>;

enum class Handedness { Left, Right };

// One detected hand in extractor coordinates (x, y roughly image space,
// z relative depth).
struct RawHandFrame {
  HandPoints points{};
  Handedness handedness = Handedness::Right;
  std::int64_t timestamp_ms = 0;

  friend bool operator==(const RawHandFrame&, const RawHandFrame&) = default;
};

// Wrist at the origin, wrist to middle-finger MCP has unit length.
struct NormalizedHandFrame {
  HandPoints points{};

  friend bool operator==(const NormalizedHandFrame&, const NormalizedHandFrame&) = default;
};

enum class FeatureLayout {
  Flat2D,        // 42 values, z dropped
  PointCloud3D,  // 21 x 3 in landmark order
};

struct FeatureVector {
  FeatureLayout layout = FeatureLayout::PointCloud3D;
  std::vector<double> values;

  static std::size_t expected_size(FeatureLayout layout);
};

// A frame record as carried on the wire and in frame logs. `frame` is empty
// when the extractor saw no hand.
struct FrameRecord {
  std::int64_t t = 0;
  Handedness handedness = Handedness::Right;
  std::optional<RawHandFrame> frame;
};

inline constexpr double kDegenerateBoneLength = 1e-6;
inline constexpr double kMaxNormalizedMagnitude = 100.0;

// Parses {"landmarks": [[x,y,z] x 21], "handedness": "left"|"right", "t": ms}.
// Landmarks must be present and non-null.
RawHandFrame parse_raw_frame(const nlohmann::json& payload);

// Same record, but a null "landmarks" field yields an absent frame.
FrameRecord parse_frame_record(const nlohmann::json& payload);

nlohmann::json to_json(const RawHandFrame& frame);
nlohmann::json to_json(const FrameRecord& record);

std::string_view to_string(Handedness h);
Handedness parse_handedness(std::string_view text);

// Left hands are mirrored (x -> -x) into the right-hand canonical form.
RawHandFrame canonicalize_handedness(const RawHandFrame& frame);

// Translate wrist to origin and scale by the wrist to middle-MCP bone length.
NormalizedHandFrame normalize(const RawHandFrame& frame);

FeatureVector extract_features(const NormalizedHandFrame& frame, FeatureLayout layout);

// Convenience for the inference path: canonicalize, normalize.
NormalizedHandFrame prepare(const RawHandFrame& frame);

struct LabeledFrame {
  char label = 'A';
  RawHandFrame frame;
};

// Newline-delimited {"label": "A".."Y", "landmarks": [[x,y,z] x 21]} records.
std::vector<LabeledFrame> load_dataset(const std::filesystem::path& path);
void save_dataset(const std::filesystem::path& path, const std::vector<LabeledFrame>& samples);
std::vector<LabeledFrame> parse_dataset(std::istream& in);

}  // namespace signstream::landmarks
