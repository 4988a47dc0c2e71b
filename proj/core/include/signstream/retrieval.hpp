#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "signstream/gloss.hpp"

namespace signstream::retrieval {

inline constexpr std::size_t kDefaultEmbeddingDimension = 384;
inline constexpr double kDefaultThreshold = 0.6;
inline constexpr int kDefaultTransitionFrames = 8;
inline constexpr double kDefaultFps = 30.0;
inline constexpr double kUnitNormTolerance = 1e-9;

struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dimension() const { return values.size(); }
  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

// Scales to unit L2 norm; throws InvalidArgument on a zero or non-finite vector.
EmbeddingVector unit_normalized(std::vector<double> values);

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual EmbeddingVector embed(std::string_view text) const = 0;
  virtual std::size_t dimension() const = 0;
  // Identifier recorded in store manifests ("hashed", "file:<path>", "remote:<url>").
  virtual std::string descriptor() const = 0;
};

// Deterministic offline encoder: character trigrams of the lowercased text
// (padded with '#' boundary markers) hashed with 64-bit FNV-1a into
// `dimension` buckets, sign from hash bit 32, then L2-normalized.
class HashedNGramProvider final : public EmbeddingProvider {
 public:
  explicit HashedNGramProvider(std::size_t dimension = kDefaultEmbeddingDimension);
  EmbeddingVector embed(std::string_view text) const override;
  std::size_t dimension() const override { return dimension_; }
  std::string descriptor() const override { return "hashed"; }

 private:
  std::size_t dimension_;
};

std::uint64_t fnv1a64(std::string_view bytes);

// Precomputed token -> vector table ("token<TAB>f1,f2,...").
class FileBackedProvider final : public EmbeddingProvider {
 public:
  static FileBackedProvider load(const std::filesystem::path& path);
  static FileBackedProvider parse(std::istream& in, std::string descriptor = "file:<memory>");

  void add(std::string token, std::vector<double> values);
  EmbeddingVector embed(std::string_view text) const override;
  std::size_t dimension() const override { return dimension_; }
  std::string descriptor() const override { return descriptor_; }

 private:
  std::unordered_map<std::string, EmbeddingVector> table_;
  std::size_t dimension_ = 0;
  std::string descriptor_ = "file:<memory>";
};

// HTTP embedding endpoint: POST {"input": text} -> {"embedding": [...]}.
class RemoteProvider final : public EmbeddingProvider {
 public:
  RemoteProvider(std::string url, std::size_t dimension, int timeout_ms = 5000);
  EmbeddingVector embed(std::string_view text) const override;
  std::size_t dimension() const override { return dimension_; }
  std::string descriptor() const override { return "remote:" + url_; }

 private:
  std::string url_;
  std::size_t dimension_;
  int timeout_ms_;
};

// Parses "hashed", "hashed:<dim>", "file:<path>" or "remote:<url>#<dim>".
std::unique_ptr<EmbeddingProvider> make_provider(std::string_view spec);

// (x, y, z, visibility)
using PosePoint = std::array<double, 4>;

struct PoseFrame {
  std::vector<PosePoint> points;
  friend bool operator==(const PoseFrame&, const PoseFrame&) = default;
};

struct PoseSequence {
  std::vector<PoseFrame> frames;
  double fps = kDefaultFps;

  std::size_t point_count() const { return frames.empty() ? 0 : frames.front().points.size(); }
  friend bool operator==(const PoseSequence&, const PoseSequence&) = default;
};

struct SkeletonLayout {
  std::string name = "upper-body+hands";
  std::size_t points = 75;

  static SkeletonLayout for_point_count(std::size_t points);
  friend bool operator==(const SkeletonLayout&, const SkeletonLayout&) = default;
};

struct PoseEntry {
  std::string gloss;
  EmbeddingVector embedding;
  PoseSequence sequence;
  friend bool operator==(const PoseEntry&, const PoseEntry&) = default;
};

inline constexpr std::uint32_t kStoreFormatVersion = 1;

struct StoreManifest {
  std::uint32_t format_version = kStoreFormatVersion;
  std::size_t dimension = kDefaultEmbeddingDimension;
  SkeletonLayout layout;
  double fps = kDefaultFps;
  std::size_t count = 0;
  std::string provider;  // descriptor of the provider that produced the embeddings
  friend bool operator==(const StoreManifest&, const StoreManifest&) = default;
};

class PoseStore {
 public:
  PoseStore() = default;
  PoseStore(StoreManifest manifest, std::vector<PoseEntry> entries, std::map<char, PoseSequence> letter_poses);

  const StoreManifest& manifest() const { return manifest_; }
  const std::vector<PoseEntry>& entries() const { return entries_; }
  const std::map<char, PoseSequence>& letter_poses() const { return letter_poses_; }
  const PoseSequence& letter_pose(char letter) const;
  const PoseEntry* find(std::string_view gloss) const;

  // Throws DuplicateGloss, MissingLetterPose, LayoutMismatch, FpsMismatch,
  // DimensionMismatch or FormatError.
  void validate() const;

  friend bool operator==(const PoseStore&, const PoseStore&) = default;

 private:
  StoreManifest manifest_;
  std::vector<PoseEntry> entries_;
  std::map<char, PoseSequence> letter_poses_;
};

struct Match {
  const PoseEntry* entry = nullptr;
  double similarity = 0.0;
};

// Exhaustive scan for the most similar entry; ties go to the
// lexicographically smaller gloss. Empty when the best is below threshold.
std::optional<Match> query(const PoseStore& store, const EmbeddingVector& v, double threshold);

// Concatenates sequences with T linearly interpolated frames at each junction.
PoseSequence stitch(const std::vector<const PoseSequence*>& sequences, int transition_frames);
PoseSequence stitch(const std::vector<PoseSequence>& sequences, int transition_frames);

// Stitches the stored letter poses for every character of `gloss` (A-Z only).
PoseSequence fingerspell(std::string_view gloss, const PoseStore& store, int transition_frames);

enum class Source { Retrieved, Fingerspelled };
std::string_view to_string(Source source);

struct RetrievalResult {
  std::string gloss;
  std::optional<std::pair<std::string, double>> matched;  // (entry gloss, similarity)
  Source source = Source::Fingerspelled;
  PoseSequence sequence;
};

struct ProductionResult {
  PoseSequence sequence;
  std::vector<RetrievalResult> glosses;
  bool empty_gloss = false;
};

struct ProductionOptions {
  double threshold = kDefaultThreshold;
  int transition_frames = kDefaultTransitionFrames;
};

// Text -> gloss -> per-token retrieval or fingerspelling -> one stitched sequence.
ProductionResult produce(std::string_view text, const PoseStore& store, gloss::Translator& translator,
                         const EmbeddingProvider& provider, const ProductionOptions& options = {});

struct BuildOptions {
  std::optional<double> fps;  // defaults to the fps in the input files, else 30
  std::optional<std::string> layout_name;
};

// entries: jsonl {"gloss", "frames", optional "embedding", optional "fps"};
// letters: jsonl {"letter", "frames", optional "fps"}.
PoseStore build_store(const std::filesystem::path& entries_file, const std::filesystem::path& letters_file,
                      const EmbeddingProvider& provider, const BuildOptions& options = {});
PoseStore build_store(std::istream& entries, std::istream& letters, const EmbeddingProvider& provider,
                      const BuildOptions& options = {});

// Directory with manifest.json, entries.jsonl and letters.jsonl; floats are
// written with 17 significant digits so numeric fields round-trip exactly.
void save_store(const PoseStore& store, const std::filesystem::path& dir);
PoseStore load_store(const std::filesystem::path& dir);

// JSON text for a frame list: [[[x,y,z,v] x P] x F], 17 significant digits.
std::string frames_to_json(const std::vector<PoseFrame>& frames);
void append_double(std::string& out, double value);

}  // namespace signstream::retrieval
