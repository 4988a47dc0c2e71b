#include "signstream/retrieval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "signstream/error.hpp"

namespace signstream::retrieval {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Embeddings

EmbeddingVector unit_normalized(std::vector<double> values) {
  double sq = 0.0;
  for (double v : values) sq += v * v;
  const double norm = std::sqrt(sq);
  if (!(norm > 0.0) || !std::isfinite(norm)) throw Error(ErrorCode::InvalidArgument, "cannot normalize a zero or non-finite vector");
  for (double& v : values) v /= norm;
  return EmbeddingVector{std::move(values)};
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.values.size() != b.values.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                std::to_string(a.values.size()) + " vs " + std::to_string(b.values.size()));
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) dot += a.values[i] * b.values[i];
  return std::clamp(dot, -1.0, 1.0);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

HashedNGramProvider::HashedNGramProvider(std::size_t dimension) : dimension_(dimension) {
  if (dimension_ == 0) throw Error(ErrorCode::InvalidArgument, "embedding dimension must be positive");
}

EmbeddingVector HashedNGramProvider::embed(std::string_view text) const {
  if (text.empty()) throw Error(ErrorCode::InvalidArgument, "cannot embed empty text");
  std::string padded = "#";
  for (char c : text) padded.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
  padded.push_back('#');

  std::vector<double> acc(dimension_, 0.0);
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    const std::uint64_t h = fnv1a64(std::string_view(padded).substr(i, 3));
    acc[h % dimension_] += ((h >> 32) & 1u) ? -1.0 : 1.0;
  }
  if (std::all_of(acc.begin(), acc.end(), [](double v) { return v == 0.0; })) {
    // Every trigram cancelled out; fall back to a single whole-text bucket.
    acc[fnv1a64(padded) % dimension_] = 1.0;
  }
  return unit_normalized(std::move(acc));
}

void FileBackedProvider::add(std::string token, std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::FormatError, "empty embedding for " + token);
  if (dimension_ == 0) dimension_ = values.size();
  if (values.size() != dimension_) {
    throw Error(ErrorCode::DimensionMismatch, "embedding for " + token + " has dimension " + std::to_string(values.size()));
  }
  table_[std::move(token)] = unit_normalized(std::move(values));
}

FileBackedProvider FileBackedProvider::parse(std::istream& in, std::string descriptor) {
  FileBackedProvider p;
  p.descriptor_ = std::move(descriptor);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw Error(ErrorCode::FormatError, "embedding table line " + std::to_string(line_no) + ": expected token<TAB>floats");
    }
    std::vector<double> values;
    const char* p0 = line.data() + tab + 1;
    const char* end = line.data() + line.size();
    while (p0 < end) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(p0, end, v);
      if (ec != std::errc() || !std::isfinite(v)) {
        throw Error(ErrorCode::FormatError, "embedding table line " + std::to_string(line_no) + ": bad number");
      }
      values.push_back(v);
      p0 = ptr;
      if (p0 < end) {
        if (*p0 != ',') throw Error(ErrorCode::FormatError, "embedding table line " + std::to_string(line_no) + ": expected ','");
        ++p0;
      }
    }
    p.add(line.substr(0, tab), std::move(values));
  }
  return p;
}

FileBackedProvider FileBackedProvider::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open embedding table " + path.string());
  return parse(in, "file:" + path.string());
}

EmbeddingVector FileBackedProvider::embed(std::string_view text) const {
  auto it = table_.find(std::string(text));
  if (it == table_.end()) throw Error(ErrorCode::UnknownToken, std::string(text));
  return it->second;
}

std::unique_ptr<EmbeddingProvider> make_provider(std::string_view spec) {
  if (spec == "hashed") return std::make_unique<HashedNGramProvider>();
  if (spec.starts_with("hashed:")) {
    const auto dim = std::stoul(std::string(spec.substr(7)));
    return std::make_unique<HashedNGramProvider>(dim);
  }
  if (spec.starts_with("file:")) return std::make_unique<FileBackedProvider>(FileBackedProvider::load(std::string(spec.substr(5))));
  if (spec.starts_with("remote:")) {
    const std::string rest(spec.substr(7));
    const auto hash = rest.rfind('#');
    if (hash == std::string::npos) throw Error(ErrorCode::InvalidArgument, "remote provider needs <url>#<dimension>");
    return std::make_unique<RemoteProvider>(rest.substr(0, hash), std::stoul(rest.substr(hash + 1)));
  }
  throw Error(ErrorCode::InvalidArgument, "unknown embedding provider: " + std::string(spec));
}

// ---------------------------------------------------------------------------
// Store

SkeletonLayout SkeletonLayout::for_point_count(std::size_t points) {
  if (points == 75) return {"upper-body+hands", 75};
  if (points == 543) return {"holistic", 543};
  return {"custom", points};
}

PoseStore::PoseStore(StoreManifest manifest, std::vector<PoseEntry> entries, std::map<char, PoseSequence> letter_poses)
    : manifest_(std::move(manifest)), entries_(std::move(entries)), letter_poses_(std::move(letter_poses)) {
  manifest_.count = entries_.size();
  validate();
}

const PoseSequence& PoseStore::letter_pose(char letter) const {
  auto it = letter_poses_.find(letter);
  if (it == letter_poses_.end()) throw Error(ErrorCode::UnsupportedCharacter, std::string("no pose for letter ") + letter);
  return it->second;
}

const PoseEntry* PoseStore::find(std::string_view gloss) const {
  for (const auto& e : entries_) {
    if (e.gloss == gloss) return &e;
  }
  return nullptr;
}

namespace {

void validate_sequence(const PoseSequence& seq, const StoreManifest& manifest, const std::string& what) {
  if (seq.frames.empty()) throw Error(ErrorCode::FormatError, what + " has no frames");
  if (seq.fps != manifest.fps) throw Error(ErrorCode::FpsMismatch, what);
  for (const auto& f : seq.frames) {
    if (f.points.size() != manifest.layout.points) throw Error(ErrorCode::LayoutMismatch, what);
    for (const auto& p : f.points) {
      if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || !std::isfinite(p[2]) || !(p[3] >= 0.0 && p[3] <= 1.0)) {
        throw Error(ErrorCode::FormatError, what + " has a non-finite coordinate or visibility outside [0,1]");
      }
    }
  }
}

}  // namespace

void PoseStore::validate() const {
  if (manifest_.format_version != kStoreFormatVersion) throw Error(ErrorCode::VersionMismatch, "store format version");
  if (manifest_.count != entries_.size()) throw Error(ErrorCode::FormatError, "manifest count does not match entries");
  if (!(manifest_.fps > 0.0)) throw Error(ErrorCode::FormatError, "fps must be positive");
  for (char c = 'A'; c <= 'Z'; ++c) {
    auto it = letter_poses_.find(c);
    if (it == letter_poses_.end()) throw Error(ErrorCode::MissingLetterPose, std::string("letter ") + c);
    validate_sequence(it->second, manifest_, std::string("letter ") + c);
  }
  std::set<std::string_view> seen;
  for (const auto& e : entries_) {
    if (!seen.insert(e.gloss).second) throw Error(ErrorCode::DuplicateGloss, e.gloss);
    if (e.embedding.dimension() != manifest_.dimension) throw Error(ErrorCode::DimensionMismatch, "entry " + e.gloss);
    double sq = 0.0;
    for (double v : e.embedding.values) sq += v * v;
    if (!(std::abs(std::sqrt(sq) - 1.0) <= kUnitNormTolerance)) {
      throw Error(ErrorCode::FormatError, "embedding for " + e.gloss + " is not unit norm");
    }
    validate_sequence(e.sequence, manifest_, "entry " + e.gloss);
  }
}

std::optional<Match> query(const PoseStore& store, const EmbeddingVector& v, double threshold) {
  if (store.entries().empty()) throw Error(ErrorCode::EmptyStore, "pose store has no entries");
  const PoseEntry* best = nullptr;
  double best_sim = 0.0;
  for (const auto& e : store.entries()) {
    const double sim = cosine_similarity(v, e.embedding);
    if (!best || sim > best_sim || (sim == best_sim && e.gloss < best->gloss)) {
      best = &e;
      best_sim = sim;
    }
  }
  if (best_sim < threshold) return std::nullopt;
  return Match{best, best_sim};
}

// ---------------------------------------------------------------------------
// Stitching

PoseSequence stitch(const std::vector<const PoseSequence*>& sequences, int transition_frames) {
  if (sequences.empty()) throw Error(ErrorCode::InvalidArgument, "nothing to stitch");
  if (transition_frames < 0) throw Error(ErrorCode::InvalidArgument, "transition_frames must be >= 0");
  const PoseSequence& head = *sequences.front();
  const std::size_t points = head.point_count();
  std::size_t total = 0;
  for (const PoseSequence* s : sequences) {
    if (s->frames.empty()) throw Error(ErrorCode::InvalidArgument, "cannot stitch an empty sequence");
    if (s->fps != head.fps) throw Error(ErrorCode::FpsMismatch, "sequences differ in fps");
    for (const auto& f : s->frames) {
      if (f.points.size() != points) throw Error(ErrorCode::LayoutMismatch, "sequences differ in point count");
    }
    total += s->frames.size();
  }
  PoseSequence out;
  out.fps = head.fps;
  out.frames.reserve(total + (sequences.size() - 1) * static_cast<std::size_t>(transition_frames));
  for (std::size_t k = 0; k < sequences.size(); ++k) {
    if (k > 0) {
      const PoseFrame& last = out.frames.back();
      const PoseFrame& first = sequences[k]->frames.front();
      for (int j = 1; j <= transition_frames; ++j) {
        const double alpha = static_cast<double>(j) / static_cast<double>(transition_frames + 1);
        PoseFrame f;
        f.points.resize(points);
        for (std::size_t p = 0; p < points; ++p) {
          for (std::size_t c = 0; c < 4; ++c) {
            const double a = last.points[p][c];
            const double b = first.points[p][c];
            f.points[p][c] = std::clamp(a + alpha * (b - a), std::min(a, b), std::max(a, b));
          }
        }
        out.frames.push_back(std::move(f));
      }
    }
    out.frames.insert(out.frames.end(), sequences[k]->frames.begin(), sequences[k]->frames.end());
  }
  return out;
}

PoseSequence stitch(const std::vector<PoseSequence>& sequences, int transition_frames) {
  std::vector<const PoseSequence*> ptrs;
  ptrs.reserve(sequences.size());
  for (const auto& s : sequences) ptrs.push_back(&s);
  return stitch(ptrs, transition_frames);
}

PoseSequence fingerspell(std::string_view gloss, const PoseStore& store, int transition_frames) {
  if (gloss.empty()) throw Error(ErrorCode::InvalidArgument, "cannot fingerspell an empty gloss");
  std::vector<const PoseSequence*> parts;
  for (char c : gloss) {
    if (c < 'A' || c > 'Z') throw Error(ErrorCode::UnsupportedCharacter, std::string("cannot fingerspell '") + c + "'");
    parts.push_back(&store.letter_pose(c));
  }
  return stitch(parts, transition_frames);
}

std::string_view to_string(Source source) { return source == Source::Retrieved ? "retrieved" : "fingerspelled"; }

ProductionResult produce(std::string_view text, const PoseStore& store, gloss::Translator& translator,
                         const EmbeddingProvider& provider, const ProductionOptions& options) {
  ProductionResult result;
  result.sequence.fps = store.manifest().fps;
  const gloss::GlossSequence gloss = translator.translate(text);
  if (gloss.tokens.empty()) {
    result.empty_gloss = true;
    return result;
  }
  std::vector<const PoseSequence*> parts;
  for (const auto& token : gloss.tokens) {
    RetrievalResult r;
    r.gloss = token;
    std::optional<Match> match;
    try {
      match = query(store, provider.embed(token), options.threshold);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UnknownToken) throw;
    }
    if (match) {
      r.source = Source::Retrieved;
      r.matched = std::make_pair(match->entry->gloss, match->similarity);
      r.sequence = match->entry->sequence;
    } else {
      r.source = Source::Fingerspelled;
      std::string letters;
      std::copy_if(token.begin(), token.end(), std::back_inserter(letters), [](char c) { return c >= 'A' && c <= 'Z'; });
      if (!letters.empty()) r.sequence = fingerspell(letters, store, options.transition_frames);
    }
    result.glosses.push_back(std::move(r));
  }
  for (const auto& r : result.glosses) {
    if (!r.sequence.frames.empty()) parts.push_back(&r.sequence);
  }
  if (!parts.empty()) result.sequence = stitch(parts, options.transition_frames);
  return result;
}

// ---------------------------------------------------------------------------
// Persistence

void append_double(std::string& out, double value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
  if (ec != std::errc()) throw Error(ErrorCode::FormatError, "cannot format number");
  out.append(buf, ptr);
}

std::string frames_to_json(const std::vector<PoseFrame>& frames) {
  std::string out = "[";
  for (std::size_t f = 0; f < frames.size(); ++f) {
    if (f) out.push_back(',');
    out.push_back('[');
    const auto& pts = frames[f].points;
    for (std::size_t p = 0; p < pts.size(); ++p) {
      if (p) out.push_back(',');
      out.push_back('[');
      for (std::size_t c = 0; c < 4; ++c) {
        if (c) out.push_back(',');
        append_double(out, pts[p][c]);
      }
      out.push_back(']');
    }
    out.push_back(']');
  }
  out.push_back(']');
  return out;
}

namespace {

std::string vector_to_json(const std::vector<double>& values) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out.push_back(',');
    append_double(out, values[i]);
  }
  out.push_back(']');
  return out;
}

std::vector<PoseFrame> parse_frames(const json& frames, const std::string& what) {
  if (!frames.is_array() || frames.empty()) throw Error(ErrorCode::FormatError, what + ": \"frames\" must be a non-empty array");
  std::vector<PoseFrame> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    if (!f.is_array()) throw Error(ErrorCode::FormatError, what + ": frame is not an array");
    PoseFrame frame;
    frame.points.reserve(f.size());
    for (const auto& p : f) {
      if (!p.is_array() || p.size() != 4) throw Error(ErrorCode::FormatError, what + ": point must be [x,y,z,v]");
      PosePoint pt{};
      for (std::size_t c = 0; c < 4; ++c) {
        if (!p[c].is_number()) throw Error(ErrorCode::FormatError, what + ": non-numeric coordinate");
        pt[c] = p[c].get<double>();
      }
      frame.points.push_back(pt);
    }
    out.push_back(std::move(frame));
  }
  return out;
}

template <typename Fn>
void for_each_jsonl(std::istream& in, const std::string& what, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::FormatError, what + " line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!record.is_object()) throw Error(ErrorCode::FormatError, what + " line " + std::to_string(line_no) + ": not an object");
    fn(record, what + " line " + std::to_string(line_no));
  }
}

std::string normalized_gloss(const json& record, const std::string& where) {
  auto it = record.find("gloss");
  if (it == record.end() || !it->is_string() || it->get<std::string>().empty()) {
    throw Error(ErrorCode::FormatError, where + ": missing \"gloss\"");
  }
  std::string g = it->get<std::string>();
  for (char& c : g) {
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
    if (!((c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-')) {
      throw Error(ErrorCode::FormatError, where + ": gloss must use A-Z, 0-9 and '-'");
    }
  }
  return g;
}

char letter_key(const json& record, const std::string& where) {
  auto it = record.find("letter");
  if (it == record.end() || !it->is_string() || it->get<std::string>().size() != 1) {
    throw Error(ErrorCode::FormatError, where + ": \"letter\" must be a single character");
  }
  char c = it->get<std::string>()[0];
  if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  if (c < 'A' || c > 'Z') throw Error(ErrorCode::FormatError, where + ": letter must be A-Z");
  return c;
}

std::optional<double> record_fps(const json& record) {
  auto it = record.find("fps");
  if (it == record.end()) return std::nullopt;
  if (!it->is_number()) throw Error(ErrorCode::FormatError, "\"fps\" must be a number");
  return it->get<double>();
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return in;
}

}  // namespace

PoseStore build_store(std::istream& entries_in, std::istream& letters_in, const EmbeddingProvider& provider,
                      const BuildOptions& options) {
  std::optional<double> fps = options.fps;
  auto settle_fps = [&](const json& record) {
    const auto f = record_fps(record);
    if (!fps) fps = f;
    if (f && options.fps && *f != *options.fps) throw Error(ErrorCode::FpsMismatch, "input fps differs from requested fps");
    if (f && *f != *fps) throw Error(ErrorCode::FpsMismatch, "inputs disagree on fps");
  };

  std::vector<PoseEntry> entries;
  std::set<std::string> seen;
  for_each_jsonl(entries_in, "entries", [&](const json& record, const std::string& where) {
    PoseEntry e;
    e.gloss = normalized_gloss(record, where);
    if (!seen.insert(e.gloss).second) throw Error(ErrorCode::DuplicateGloss, e.gloss);
    settle_fps(record);
    e.sequence.frames = parse_frames(record.value("frames", json()), where);
    if (auto it = record.find("embedding"); it != record.end()) {
      if (!it->is_array()) throw Error(ErrorCode::FormatError, where + ": \"embedding\" must be an array");
      auto values = it->get<std::vector<double>>();
      if (values.size() != provider.dimension()) throw Error(ErrorCode::DimensionMismatch, where);
      e.embedding = unit_normalized(std::move(values));
    } else {
      e.embedding = provider.embed(e.gloss);
    }
    entries.push_back(std::move(e));
  });

  std::map<char, PoseSequence> letters;
  for_each_jsonl(letters_in, "letters", [&](const json& record, const std::string& where) {
    const char c = letter_key(record, where);
    if (letters.contains(c)) throw Error(ErrorCode::FormatError, where + ": duplicate letter " + std::string(1, c));
    settle_fps(record);
    letters[c].frames = parse_frames(record.value("frames", json()), where);
  });
  for (char c = 'A'; c <= 'Z'; ++c) {
    if (!letters.contains(c)) throw Error(ErrorCode::MissingLetterPose, std::string("letter ") + c);
  }

  StoreManifest manifest;
  manifest.dimension = provider.dimension();
  manifest.fps = fps.value_or(kDefaultFps);
  manifest.layout = SkeletonLayout::for_point_count(letters.begin()->second.point_count());
  if (options.layout_name) manifest.layout.name = *options.layout_name;
  manifest.provider = provider.descriptor();
  for (auto& e : entries) e.sequence.fps = manifest.fps;
  for (auto& [c, seq] : letters) seq.fps = manifest.fps;
  return PoseStore(std::move(manifest), std::move(entries), std::move(letters));
}

PoseStore build_store(const std::filesystem::path& entries_file, const std::filesystem::path& letters_file,
                      const EmbeddingProvider& provider, const BuildOptions& options) {
  auto entries = open_in(entries_file);
  auto letters = open_in(letters_file);
  return build_store(entries, letters, provider, options);
}

void save_store(const PoseStore& store, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& m = store.manifest();
  {
    std::string manifest = "{\"format_version\":" + std::to_string(m.format_version) +
                           ",\"dimension\":" + std::to_string(m.dimension) + ",\"layout\":{\"name\":" +
                           json(m.layout.name).dump() + ",\"points\":" + std::to_string(m.layout.points) + "},\"fps\":";
    append_double(manifest, m.fps);
    manifest += ",\"count\":" + std::to_string(m.count) + ",\"provider\":" + json(m.provider).dump() + "}\n";
    std::ofstream out(dir / "manifest.json");
    if (!out) throw Error(ErrorCode::IoError, "cannot write manifest in " + dir.string());
    out << manifest;
  }
  {
    std::ofstream out(dir / "entries.jsonl");
    if (!out) throw Error(ErrorCode::IoError, "cannot write entries in " + dir.string());
    for (const auto& e : store.entries()) {
      out << "{\"gloss\":" << json(e.gloss).dump() << ",\"embedding\":" << vector_to_json(e.embedding.values)
          << ",\"frames\":" << frames_to_json(e.sequence.frames) << "}\n";
    }
  }
  {
    std::ofstream out(dir / "letters.jsonl");
    if (!out) throw Error(ErrorCode::IoError, "cannot write letters in " + dir.string());
    for (const auto& [c, seq] : store.letter_poses()) {
      out << "{\"letter\":\"" << c << "\",\"frames\":" << frames_to_json(seq.frames) << "}\n";
    }
  }
}

PoseStore load_store(const std::filesystem::path& dir) {
  json manifest_json;
  {
    auto in = open_in(dir / "manifest.json");
    try {
      in >> manifest_json;
    } catch (const json::exception& e) {
      throw Error(ErrorCode::FormatError, std::string("manifest.json: ") + e.what());
    }
  }
  StoreManifest m;
  try {
    m.format_version = manifest_json.at("format_version").get<std::uint32_t>();
    if (m.format_version != kStoreFormatVersion) {
      throw Error(ErrorCode::VersionMismatch, "store format version " + std::to_string(m.format_version));
    }
    m.dimension = manifest_json.at("dimension").get<std::size_t>();
    const json& layout = manifest_json.at("layout");
    m.layout.name = layout.at("name").get<std::string>();
    m.layout.points = layout.at("points").get<std::size_t>();
    m.fps = manifest_json.at("fps").get<double>();
    m.count = manifest_json.at("count").get<std::size_t>();
    m.provider = manifest_json.value("provider", std::string());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string("manifest.json: ") + e.what());
  }

  std::vector<PoseEntry> entries;
  {
    auto in = open_in(dir / "entries.jsonl");
    for_each_jsonl(in, "entries", [&](const json& record, const std::string& where) {
      PoseEntry e;
      e.gloss = normalized_gloss(record, where);
      auto it = record.find("embedding");
      if (it == record.end() || !it->is_array()) throw Error(ErrorCode::FormatError, where + ": missing embedding");
      e.embedding.values = it->get<std::vector<double>>();
      e.sequence.frames = parse_frames(record.value("frames", json()), where);
      e.sequence.fps = m.fps;
      entries.push_back(std::move(e));
    });
  }
  std::map<char, PoseSequence> letters;
  {
    auto in = open_in(dir / "letters.jsonl");
    for_each_jsonl(in, "letters", [&](const json& record, const std::string& where) {
      const char c = letter_key(record, where);
      if (letters.contains(c)) throw Error(ErrorCode::FormatError, where + ": duplicate letter");
      letters[c] = PoseSequence{parse_frames(record.value("frames", json()), where), m.fps};
    });
  }
  if (entries.size() != m.count) throw Error(ErrorCode::FormatError, "manifest count does not match entries.jsonl");
  return PoseStore(std::move(m), std::move(entries), std::move(letters));
}

}  // namespace signstream::retrieval
