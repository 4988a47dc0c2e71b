#include "signstream/landmarks.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "signstream/alphabet.hpp"
#include "signstream/error.hpp"

namespace signstream::landmarks {

using nlohmann::json;

Point3 operator+(const Point3& a, const Point3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
Point3 operator-(const Point3& a, const Point3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
Point3 operator*(double s, const Point3& p) { return {s * p.x, s * p.y, s * p.z}; }

double distance(const Point3& a, const Point3& b) {
  const Point3 d = a - b;
  return std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z);
}

std::size_t FeatureVector::expected_size(FeatureLayout layout) {
  return layout == FeatureLayout::Flat2D ? kNumLandmarks * 2 : kNumLandmarks * 3;
}

std::string_view to_string(Handedness h) { return h == Handedness::Left ? "left" : "right"; }

Handedness parse_handedness(std::string_view text) {
  if (text == "left" || text == "Left") return Handedness::Left;
  if (text == "right" || text == "Right") return Handedness::Right;
  throw Error(ErrorCode::InvalidArgument, "handedness must be \"left\" or \"right\"");
}

namespace {

const json& require(const json& payload, const char* key) {
  if (!payload.is_object()) throw Error(ErrorCode::MissingField, "frame record is not an object");
  auto it = payload.find(key);
  if (it == payload.end()) throw Error(ErrorCode::MissingField, std::string("missing \"") + key + "\"");
  return *it;
}

HandPoints parse_points(const json& landmarks) {
  if (!landmarks.is_array() || landmarks.size() != kNumLandmarks) {
    throw Error(ErrorCode::WrongArity, "expected 21 landmarks");
  }
  HandPoints points;
  for (std::size_t i = 0; i < kNumLandmarks; ++i) {
    const json& triple = landmarks[i];
    if (!triple.is_array() || triple.size() != 3) {
      throw Error(ErrorCode::WrongArity, "landmark " + std::to_string(i) + " is not an [x,y,z] triple");
    }
    std::array<double, 3> c{};
    for (std::size_t k = 0; k < 3; ++k) {
      if (!triple[k].is_number()) {
        throw Error(ErrorCode::NonFinite, "landmark " + std::to_string(i) + " has a non-numeric coordinate");
      }
      c[k] = triple[k].get<double>();
      if (!std::isfinite(c[k])) {
        throw Error(ErrorCode::NonFinite, "landmark " + std::to_string(i) + " has a non-finite coordinate");
      }
    }
    points[i] = {c[0], c[1], c[2]};
  }
  return points;
}

std::pair<Handedness, std::int64_t> parse_header(const json& payload) {
  const json& hand = require(payload, "handedness");
  if (!hand.is_string()) throw Error(ErrorCode::MissingField, "\"handedness\" must be a string");
  const json& t = require(payload, "t");
  if (!t.is_number_integer() || t.get<std::int64_t>() < 0) {
    throw Error(ErrorCode::MissingField, "\"t\" must be a non-negative integer");
  }
  Handedness h;
  try {
    h = parse_handedness(hand.get<std::string>());
  } catch (const Error&) {
    throw Error(ErrorCode::MissingField, "\"handedness\" must be \"left\" or \"right\"");
  }
  return {h, t.get<std::int64_t>()};
}

json points_to_json(const HandPoints& points) {
  json arr = json::array();
  for (const auto& p : points) arr.push_back({p.x, p.y, p.z});
  return arr;
}

}  // namespace

RawHandFrame parse_raw_frame(const json& payload) {
  const json& landmarks = require(payload, "landmarks");
  if (landmarks.is_null()) throw Error(ErrorCode::MissingField, "\"landmarks\" is null");
  auto [hand, t] = parse_header(payload);
  return RawHandFrame{parse_points(landmarks), hand, t};
}

FrameRecord parse_frame_record(const json& payload) {
  const json& landmarks = require(payload, "landmarks");
  auto [hand, t] = parse_header(payload);
  FrameRecord record{t, hand, std::nullopt};
  if (!landmarks.is_null()) record.frame = RawHandFrame{parse_points(landmarks), hand, t};
  return record;
}

json to_json(const RawHandFrame& frame) {
  return json{{"landmarks", points_to_json(frame.points)},
              {"handedness", to_string(frame.handedness)},
              {"t", frame.timestamp_ms}};
}

json to_json(const FrameRecord& record) {
  return json{{"landmarks", record.frame ? points_to_json(record.frame->points) : json(nullptr)},
              {"handedness", to_string(record.handedness)},
              {"t", record.t}};
}

RawHandFrame canonicalize_handedness(const RawHandFrame& frame) {
  if (frame.handedness == Handedness::Right) return frame;
  RawHandFrame mirrored = frame;
  for (auto& p : mirrored.points) p.x = -p.x;
  mirrored.handedness = Handedness::Right;
  return mirrored;
}

NormalizedHandFrame normalize(const RawHandFrame& frame) {
  const Point3 origin = frame.points[idx::kWrist];
  const double bone = distance(frame.points[idx::kMiddleMcp], origin);
  if (!(bone > kDegenerateBoneLength)) {
    throw Error(ErrorCode::DegenerateFrame, "reference bone length below threshold");
  }
  NormalizedHandFrame out;
  for (std::size_t i = 0; i < kNumLandmarks; ++i) {
    const Point3 d = frame.points[i] - origin;
    out.points[i] = {d.x / bone, d.y / bone, d.z / bone};
    for (double c : {out.points[i].x, out.points[i].y, out.points[i].z}) {
      if (!std::isfinite(c) || std::abs(c) > kMaxNormalizedMagnitude) {
        throw Error(ErrorCode::DegenerateFrame, "normalized coordinate out of range");
      }
    }
  }
  return out;
}

FeatureVector extract_features(const NormalizedHandFrame& frame, FeatureLayout layout) {
  FeatureVector fv{layout, {}};
  fv.values.reserve(FeatureVector::expected_size(layout));
  for (const auto& p : frame.points) {
    fv.values.push_back(p.x);
    fv.values.push_back(p.y);
    if (layout == FeatureLayout::PointCloud3D) fv.values.push_back(p.z);
  }
  return fv;
}

NormalizedHandFrame prepare(const RawHandFrame& frame) { return normalize(canonicalize_handedness(frame)); }

std::vector<LabeledFrame> parse_dataset(std::istream& in) {
  std::vector<LabeledFrame> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::FormatError, "line " + std::to_string(line_no) + ": " + e.what());
    }
    const json& label = require(record, "label");
    if (!label.is_string() || label.get<std::string>().size() != 1 ||
        !is_recognizable_letter(label.get<std::string>()[0])) {
      throw Error(ErrorCode::LabelOutOfRange, "line " + std::to_string(line_no) + ": label must be A..Y excluding J");
    }
    RawHandFrame frame;
    frame.points = parse_points(require(record, "landmarks"));
    samples.push_back({label.get<std::string>()[0], frame});
  }
  return samples;
}

std::vector<LabeledFrame> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open dataset " + path.string());
  return parse_dataset(in);
}

void save_dataset(const std::filesystem::path& path, const std::vector<LabeledFrame>& samples) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write dataset " + path.string());
  for (const auto& s : samples) {
    out << json{{"label", std::string(1, s.label)}, {"landmarks", points_to_json(s.frame.points)}}.dump() << '\n';
  }
}

}  // namespace signstream::landmarks
