#include "signstream/recognizer.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <istream>
#include <sstream>

#include "signstream/alphabet.hpp"
#include "signstream/error.hpp"
#include "signstream/nn.hpp"

namespace signstream::recognizer {

void RecognizerConfig::validate() const {
  if (debounce_frames < 1) throw Error(ErrorCode::InvalidArgument, "debounce_frames must be >= 1");
  if (absence_frames < 1) throw Error(ErrorCode::InvalidArgument, "absence_frames must be >= 1");
  if (!(confidence_floor >= 0.0 && confidence_floor <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "confidence_floor must lie in [0, 1]");
  }
}

// ---------------------------------------------------------------------------
// {A, M, N, S, T}

namespace {

constexpr std::string_view kClosedFistLetters = "AMNST";

bool in_closed_fist_set(char c) { return kClosedFistLetters.find(c) != std::string_view::npos; }

std::optional<char> closed_fist_rule(const landmarks::NormalizedHandFrame& frame) {
  namespace li = landmarks::idx;
  const double tx = frame.points[li::kThumbTip].x;
  const double ix = frame.points[li::kIndexMcp].x;
  const double mx = frame.points[li::kMiddleMcp].x;
  const double rx = frame.points[li::kRingMcp].x;
  // Knuckles must run ring < middle < index along x for the thumb position to mean anything.
  if (!(rx < mx && mx < ix)) return std::nullopt;
  if (tx > ix) return 'A';
  if (tx == ix) return std::nullopt;
  if (tx < rx) return 'M';
  if (tx == rx) return std::nullopt;
  if (tx < mx) return 'N';
  if (tx == mx) return std::nullopt;
  // Thumb lies between the middle and index knuckles: S when it wraps the
  // front of the fist, T when tucked beside the index finger.
  if (landmarks::distance(frame.points[li::kThumbTip], frame.points[li::kIndexTip]) >= kThumbIndexTouchDistance) {
    return std::nullopt;
  }
  const double mid = 0.5 * (ix + mx);
  if (tx < mid) return 'S';
  if (tx > mid) return 'T';
  return std::nullopt;
}

}  // namespace

Classification disambiguate(std::span<const double> probs, const landmarks::NormalizedHandFrame& frame) {
  if (probs.size() != kNumClasses) throw Error(ErrorCode::ShapeMismatch, "expected 24 class probabilities");
  const std::size_t best = nn::argmax(probs);
  const char letter = class_to_letter(best);
  const Classification fallback{letter, probs[best]};
  if (!in_closed_fist_set(letter)) return fallback;
  const auto chosen = closed_fist_rule(frame);
  if (!chosen) return fallback;
  double mass = 0.0;
  for (char c : kClosedFistLetters) mass += probs[*letter_to_class(c)];
  return {*chosen, std::min(mass, 1.0)};
}

// ---------------------------------------------------------------------------
// Dictionary and correction

void Dictionary::add(std::string word, std::uint64_t frequency) {
  if (word.empty() || !std::all_of(word.begin(), word.end(), [](char c) { return c >= 'A' && c <= 'Z'; })) {
    throw Error(ErrorCode::FormatError, "dictionary words must be uppercase A-Z: \"" + word + "\"");
  }
  if (auto it = index_.find(word); it != index_.end()) {
    words_[it->second].second = frequency;
    return;
  }
  index_.emplace(word, words_.size());
  words_.emplace_back(std::move(word), frequency);
}

bool Dictionary::contains(std::string_view word) const { return index_.contains(std::string(word)); }

std::uint64_t Dictionary::frequency(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? 0 : words_[it->second].second;
}

Dictionary Dictionary::parse(std::istream& in) {
  Dictionary dict;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw Error(ErrorCode::FormatError, "dictionary line " + std::to_string(line_no) + ": expected WORD<TAB>frequency");
    }
    std::uint64_t freq = 0;
    try {
      std::size_t used = 0;
      freq = std::stoull(line.substr(tab + 1), &used);
      if (used != line.size() - tab - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error(ErrorCode::FormatError, "dictionary line " + std::to_string(line_no) + ": bad frequency");
    }
    dict.add(line.substr(0, tab), freq);
  }
  return dict;
}

Dictionary Dictionary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open dictionary " + path.string());
  return parse(in);
}

std::size_t damerau_levenshtein(std::string_view a, std::string_view b) {
  const std::size_t la = a.size();
  const std::size_t lb = b.size();
  const std::size_t inf = la + lb;
  const std::size_t cols = lb + 2;
  std::vector<std::size_t> d((la + 2) * cols);
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * cols + j]; };
  std::array<std::size_t, 256> last_row{};  // last row (1-based) where each byte occurred in a

  at(0, 0) = inf;
  for (std::size_t i = 0; i <= la; ++i) {
    at(i + 1, 0) = inf;
    at(i + 1, 1) = i;
  }
  for (std::size_t j = 0; j <= lb; ++j) {
    at(0, j + 1) = inf;
    at(1, j + 1) = j;
  }
  for (std::size_t i = 1; i <= la; ++i) {
    std::size_t last_match_col = 0;
    for (std::size_t j = 1; j <= lb; ++j) {
      const std::size_t i1 = last_row[static_cast<unsigned char>(b[j - 1])];
      const std::size_t j1 = last_match_col;
      const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
      if (cost == 0) last_match_col = j;
      at(i + 1, j + 1) = std::min({at(i, j) + cost, at(i + 1, j) + 1, at(i, j + 1) + 1,
                                   at(i1, j1) + (i - i1 - 1) + 1 + (j - j1 - 1)});
    }
    last_row[static_cast<unsigned char>(a[i - 1])] = i;
  }
  return at(la + 1, lb + 1);
}

std::string spell_correct(std::string_view word, const Dictionary& dictionary) {
  if (word.empty() || dictionary.contains(word)) return std::string(word);
  const std::pair<std::string, std::uint64_t>* best = nullptr;
  std::size_t best_dist = kMaxCorrectionDistance + 1;
  for (const auto& entry : dictionary.entries()) {
    const auto& candidate = entry.first;
    const std::size_t len_gap = candidate.size() > word.size() ? candidate.size() - word.size()
                                                               : word.size() - candidate.size();
    if (len_gap > kMaxCorrectionDistance) continue;
    const std::size_t dist = damerau_levenshtein(word, candidate);
    if (dist > kMaxCorrectionDistance) continue;
    const bool better = !best || dist < best_dist ||
                        (dist == best_dist && (entry.second > best->second ||
                                               (entry.second == best->second && candidate < best->first)));
    if (better) {
      best = &entry;
      best_dist = dist;
    }
  }
  return best ? best->first : std::string(word);
}

// ---------------------------------------------------------------------------
// Transcript state machine

namespace {

std::string correct_word(const std::string& raw, const RecognizerConfig& cfg, const Dictionary* dictionary) {
  if (!cfg.correction_enabled || !dictionary || dictionary->empty()) return raw;
  return spell_correct(raw, *dictionary);
}

std::string trailing_word(const std::string& committed) {
  const auto space = committed.find_last_of(' ');
  return space == std::string::npos ? committed : committed.substr(space + 1);
}

// Number of times `letter` would appear consecutively at the end of the
// current word if appended.
int repeat_if_appended(const TranscriptState& s, char letter) {
  if (!s.committed.empty() && s.committed.back() == letter) return s.consecutive_repeat_of_last + 1;
  return 1;
}

}  // namespace

StepResult step(const TranscriptState& state, const RecognizerConfig& cfg,
                const std::optional<Classification>& observation, const Dictionary* dictionary) {
  StepResult result{state, {}};
  TranscriptState& s = result.state;

  if (!observation) {
    // Saturate one past A so the boundary fires exactly once per absence.
    s.absence_count = std::min(s.absence_count + 1, cfg.absence_frames + 1);
    if (s.absence_count == cfg.absence_frames) {
      if (!s.committed.empty() && s.committed.back() != ' ') {
        const std::string raw = trailing_word(s.committed);
        s.committed.push_back(' ');
        s.consecutive_repeat_of_last = 0;
        result.events.emplace_back(SpaceCommitted{});
        result.events.emplace_back(WordFinalized{raw, correct_word(raw, cfg, dictionary)});
      }
      s.pending_letter.reset();
      s.run_count = 0;
    }
    return result;
  }

  if (!is_recognizable_letter(observation->letter)) {
    throw Error(ErrorCode::InvalidArgument, std::string("not a recognizable letter: ") + observation->letter);
  }
  if (observation->confidence < cfg.confidence_floor) return result;

  s.absence_count = 0;
  if (s.pending_letter == observation->letter) {
    s.run_count += 1;
  } else {
    s.pending_letter = observation->letter;
    s.run_count = 1;
  }
  s.pending_confidence = observation->confidence;

  if (s.run_count >= cfg.debounce_frames) {
    s.run_count = 0;
    const int repeat = repeat_if_appended(s, observation->letter);
    if (repeat <= RecognizerConfig::max_consecutive_repeat) {
      s.committed.push_back(observation->letter);
      s.consecutive_repeat_of_last = repeat;
      result.events.emplace_back(LetterCommitted{observation->letter, observation->confidence});
    }
  }
  return result;
}

std::string finalize(const TranscriptState& state, const RecognizerConfig& cfg, const Dictionary* dictionary) {
  std::string text = state.committed;
  if (state.pending_letter && state.run_count >= cfg.debounce_frames &&
      repeat_if_appended(state, *state.pending_letter) <= RecognizerConfig::max_consecutive_repeat) {
    text.push_back(*state.pending_letter);
  }
  std::istringstream words(text);
  std::string word;
  std::string out;
  while (words >> word) {
    if (!out.empty()) out.push_back(' ');
    out += correct_word(word, cfg, dictionary);
  }
  return out;
}

Recognizer::Recognizer(RecognizerConfig cfg, std::shared_ptr<const Dictionary> dictionary)
    : cfg_(cfg), dictionary_(std::move(dictionary)) {
  cfg_.validate();
}

std::vector<RecognitionEvent> Recognizer::push(const std::optional<Classification>& observation) {
  auto r = step(state_, cfg_, observation, dictionary_.get());
  state_ = std::move(r.state);
  return std::move(r.events);
}

std::string Recognizer::transcript() const { return finalize(state_, cfg_, dictionary_.get()); }

}  // namespace signstream::recognizer
