#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "signstream/landmarks.hpp"

namespace signstream::recognizer {

struct RecognizerConfig {
  int debounce_frames = 5;   // K: identical frames needed to commit a letter
  int absence_frames = 10;   // A: hand-absent frames that end a word
  static constexpr int max_consecutive_repeat = 2;
  double confidence_floor = 0.5;
  bool correction_enabled = true;

  void validate() const;
};

struct Classification {
  char letter = 'A';
  double confidence = 0.0;

  friend bool operator==(const Classification&, const Classification&) = default;
};

// Geometric constants for the {A, M, N, S, T} rules, in normalized
// (wrist-to-middle-MCP = 1) units on the right-hand canonical frame.
inline constexpr double kThumbIndexTouchDistance = 0.35;

// Resolves the commonly confused closed-fist letters from thumb position.
// Other argmax letters pass through unchanged.
Classification disambiguate(std::span<const double> probs, const landmarks::NormalizedHandFrame& frame);

struct LetterCommitted {
  char letter;
  double confidence;
  friend bool operator==(const LetterCommitted&, const LetterCommitted&) = default;
};
struct SpaceCommitted {
  friend bool operator==(const SpaceCommitted&, const SpaceCommitted&) = default;
};
struct WordFinalized {
  std::string raw;
  std::string corrected;
  friend bool operator==(const WordFinalized&, const WordFinalized&) = default;
};

using RecognitionEvent = std::variant<LetterCommitted, SpaceCommitted, WordFinalized>;

struct TranscriptState {
  std::optional<char> pending_letter;
  int run_count = 0;
  int absence_count = 0;
  // Committed letters with ' ' marking word boundaries.
  std::string committed;
  int consecutive_repeat_of_last = 0;
  // Confidence of the frame that most recently extended the pending run.
  double pending_confidence = 0.0;

  friend bool operator==(const TranscriptState&, const TranscriptState&) = default;
};

// Word -> frequency table for the offline corrector. Words are uppercase A-Z.
class Dictionary {
 public:
  Dictionary() = default;

  static Dictionary load(const std::filesystem::path& path);
  static Dictionary parse(std::istream& in);

  void add(std::string word, std::uint64_t frequency);
  bool contains(std::string_view word) const;
  std::uint64_t frequency(std::string_view word) const;
  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }

  const std::vector<std::pair<std::string, std::uint64_t>>& entries() const { return words_; }

 private:
  std::vector<std::pair<std::string, std::uint64_t>> words_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Unrestricted Damerau-Levenshtein distance (insertions, deletions,
// substitutions, adjacent transpositions; substrings may be edited again
// after a transposition).
std::size_t damerau_levenshtein(std::string_view a, std::string_view b);

inline constexpr std::size_t kMaxCorrectionDistance = 2;

// Dictionary word closest to `word` within distance 2; ties go to the more
// frequent word, then the lexicographically smaller. Unknown words with no
// candidate are returned unchanged.
std::string spell_correct(std::string_view word, const Dictionary& dictionary);

// Optional sentence-level corrector (e.g. a hosted language model).
class SentenceCorrector {
 public:
  virtual ~SentenceCorrector() = default;
  virtual std::string correct(std::string_view sentence) = 0;
};

// POST {"text": sentence} to `url`, expects {"text": corrected}. Throws
// signstream::Error (Timeout, RemoteFailure, MalformedReply).
class HttpSentenceCorrector final : public SentenceCorrector {
 public:
  explicit HttpSentenceCorrector(std::string url, int timeout_ms = 5000);
  std::string correct(std::string_view sentence) override;

 private:
  std::string url_;
  int timeout_ms_;
};

struct StepResult {
  TranscriptState state;
  std::vector<RecognitionEvent> events;
};

// Pure transition. `observation` is empty when no hand was detected.
StepResult step(const TranscriptState& state, const RecognizerConfig& cfg,
                const std::optional<Classification>& observation, const Dictionary* dictionary = nullptr);

// Joins committed words (flushing a pending run that reached K), applies
// word-level correction when enabled, single-space separated.
std::string finalize(const TranscriptState& state, const RecognizerConfig& cfg,
                     const Dictionary* dictionary = nullptr);

// Stateful convenience wrapper around step()/finalize() for one session.
class Recognizer {
 public:
  explicit Recognizer(RecognizerConfig cfg = {}, std::shared_ptr<const Dictionary> dictionary = nullptr);

  std::vector<RecognitionEvent> push(const std::optional<Classification>& observation);
  std::string transcript() const;
  const TranscriptState& state() const { return state_; }
  const RecognizerConfig& config() const { return cfg_; }

 private:
  RecognizerConfig cfg_;
  std::shared_ptr<const Dictionary> dictionary_;
  TranscriptState state_;
};

}  // namespace signstream::recognizer
