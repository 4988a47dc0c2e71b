// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gradcheck.hpp"
#include "signstream/alphabet.hpp"
#include "signstream/gloss.hpp"
#include "signstream/landmarks.hpp"
#include "signstream/nn.hpp"
#include "signstream/recognizer.hpp"
#include "signstream/retrieval.hpp"
#include "signstream/server.hpp"
#include "signstream/synthetic.hpp"
#include "support.hpp"

using namespace signstream;
using nlohmann::json;

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double limit_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

// Shared between the training, replay and latency criteria.
nn::Network g_model;

// ---------------------------------------------------------------------------

Outcome normalization_invariance() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> log_scale(std::log(1e-3), std::log(1e3));
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto hand = rng() % 2 ? landmarks::Handedness::Left : landmarks::Handedness::Right;
    const auto frame = testkit::random_frame(rng, hand);
    landmarks::Point3 t;
    do {
      t = {10 * unit(rng), 10 * unit(rng), 10 * unit(rng)};
    } while (std::sqrt(t.x * t.x + t.y * t.y + t.z * t.z) > 10.0);
    const double s = std::exp(log_scale(rng));
    auto moved = frame;
    for (auto& p : moved.points) p = t + s * p;
    const auto a = landmarks::prepare(frame);
    const auto b = landmarks::prepare(moved);
    for (std::size_t k = 0; k < landmarks::kNumLandmarks; ++k) {
      worst = std::max({worst, std::abs(a.points[k].x - b.points[k].x), std::abs(a.points[k].y - b.points[k].y),
                        std::abs(a.points[k].z - b.points[k].z)});
    }
  }
  return {worst < 1e-9, fmt("1000 frames, max deviation %.3g (< 1e-9)", worst)};
}

Outcome gradient_correctness() {
  std::mt19937_64 rng(202);
  std::normal_distribution<double> bias(0.0, 0.1);
  double worst = 0.0;
  std::size_t checked = 0, kinks = 0, params = 0;
  int instances = 0;
  for (auto kind : {nn::NetworkKind::PointNetLite, nn::NetworkKind::DenseBaseline}) {
    for (int i = 0; i < 10; ++i, ++instances) {
      auto net = nn::make_network(kind, 1000 + i);
      for (auto* layers : {&net.point_layers, &net.head_layers}) {
        for (auto& l : *layers) {
          for (auto& b : l.bias) b = bias(rng);
        }
      }
      const auto x = landmarks::extract_features(landmarks::prepare(testkit::random_frame(rng)), net.input_layout());
      const auto r = testkit::check_gradients(net, x, rng() % kNumClasses);
      worst = std::max(worst, r.max_rel_error);
      checked += r.checked;
      kinks += r.kinks;
      params += net.parameter_count();
    }
  }
  return {worst < 1e-4 && checked + kinks == params,
          fmt("%d networks, %zu parameters checked, %zu skipped at ReLU/max kinks, max rel error %.3g (< 1e-4)",
              instances, checked, kinks, worst)};
}

Outcome permutation_invariance() {
  std::mt19937_64 rng(303);
  const auto net = nn::make_network(nn::NetworkKind::PointNetLite, 303);
  std::size_t mismatches = 0;
  for (int i = 0; i < 100; ++i) {
    const auto x = landmarks::extract_features(landmarks::prepare(testkit::random_frame(rng)),
                                               landmarks::FeatureLayout::PointCloud3D);
    const auto ref = nn::forward(net, x);
    std::vector<std::size_t> perm(landmarks::kNumLandmarks);
    std::iota(perm.begin(), perm.end(), 0);
    for (int j = 0; j < 20; ++j) {
      std::shuffle(perm.begin(), perm.end(), rng);
      auto y = x;
      for (std::size_t p = 0; p < perm.size(); ++p) {
        for (std::size_t c = 0; c < 3; ++c) y.values[3 * p + c] = x.values[3 * perm[p] + c];
      }
      mismatches += nn::forward(net, y) != ref;
    }
  }
  return {mismatches == 0, fmt("100 inputs x 20 permutations, %zu logit vectors differ (bit-exact)", mismatches)};
}

Outcome desk_training() {
  const auto data =
      synthetic::to_features(synthetic::make_dataset(200, 0.02, 7), landmarks::FeatureLayout::PointCloud3D);
  nn::TrainConfig cfg;  // lr 0.0005, batch 64, 100 epochs
  cfg.seed = 7;
  const auto r = nn::train(data, cfg, nn::make_network(nn::NetworkKind::PointNetLite, 7));
  g_model = r.network;
  const auto& last = r.history.back();
  const bool params_ok = cfg.learning_rate == 0.0005 && cfg.batch_size == 64 && cfg.epochs == 100;
  return {params_ok && last.validation_accuracy >= 0.99,
          fmt("24x200 samples, sigma 0.02, lr %.4g, batch %d, %d epochs: train %.4f, validation %.4f (>= 0.99)",
              cfg.learning_rate, cfg.batch_size, cfg.epochs, last.train_accuracy, last.validation_accuracy)};
}

Outcome recognizer_rules() {
  using namespace recognizer;
  std::vector<std::string> failures;
  auto run = [](std::string_view script, const RecognizerConfig& cfg, const Dictionary* d) {
    TranscriptState s;
    std::vector<RecognitionEvent> events;
    for (char c : script) {
      std::optional<Classification> o;
      if (c != '_') o = Classification{c, 0.9};
      auto r = step(s, cfg, o, d);
      s = r.state;
      events.insert(events.end(), r.events.begin(), r.events.end());
    }
    return std::make_pair(s, events);
  };
  Dictionary dict;
  dict.add("HELLO", 100);
  dict.add("HELP", 50);
  RecognizerConfig k3;
  k3.debounce_frames = 3;
  k3.absence_frames = 2;
  {
    const auto [s, ev] = run("HHHEEELLLLLL__", k3, &dict);
    const std::vector<RecognitionEvent> want{LetterCommitted{'H', 0.9}, LetterCommitted{'E', 0.9},
                                             LetterCommitted{'L', 0.9}, LetterCommitted{'L', 0.9},
                                             SpaceCommitted{},          WordFinalized{"HELL", "HELLO"}};
    if (ev != want) failures.push_back("HELL log");
  }
  {
    const auto [s, ev] = run("LLLLLLLLL", k3, nullptr);
    if (s.committed != "LL" || ev.size() != 2) failures.push_back("repeat cap");
  }
  {
    const auto [s, ev] = run("HH", RecognizerConfig{}, nullptr);
    if (!ev.empty() || !finalize(s, RecognizerConfig{}).empty()) failures.push_back("below debounce");
  }
  if (spell_correct("HELO", dict) != "HELLO" || spell_correct("QZXQ", dict) != "QZXQ") failures.push_back("spell");

  std::mt19937_64 rng(404);
  const std::string letters = "ABELST";
  std::size_t violations = 0;
  for (int log = 0; log < 10000; ++log) {
    RecognizerConfig cfg;
    cfg.debounce_frames = 1 + static_cast<int>(rng() % 5);
    cfg.absence_frames = 1 + static_cast<int>(rng() % 5);
    cfg.correction_enabled = false;
    std::vector<std::optional<Classification>> frames;
    const std::size_t runs = rng() % 120;
    for (std::size_t i = 0; i < runs; ++i) {
      std::optional<Classification> o;
      if (rng() % 5) o = Classification{letters[rng() % letters.size()], (rng() % 11) / 10.0};
      frames.insert(frames.end(), 1 + rng() % 6, o);  // runs make commits likely
    }
    auto replay = [&] {
      TranscriptState s;
      std::size_t seen = 0, commits = 0;
      for (const auto& o : frames) {
        auto out = step(s, cfg, o);
        s = out.state;
        ++seen;
        for (const auto& e : out.events) commits += std::holds_alternative<LetterCommitted>(e);
        if (commits > seen) ++violations;  // x >= y
      }
      return s;
    };
    const auto s = replay();
    if (!(replay() == s)) ++violations;
    const std::string t = finalize(s, cfg);
    if (t.find("  ") != std::string::npos || (!t.empty() && (t.front() == ' ' || t.back() == ' '))) ++violations;
    for (std::size_t i = 2; i < t.size(); ++i) violations += t[i] != ' ' && t[i] == t[i - 1] && t[i] == t[i - 2];
  }
  std::string detail = fmt("scripted logs %s; 10^4 fuzzed logs, %zu invariant violations",
                           failures.empty() ? "reproduce" : "FAILED", violations);
  for (const auto& f : failures) detail += " [" + f + "]";
  return {failures.empty() && violations == 0, detail};
}

Outcome retrieval_oracle() {
  using namespace retrieval;
  std::mt19937_64 rng(505);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> log_size(0.0, std::log(1024.0));
  const std::size_t dim = 384;
  auto random_unit = [&] {
    std::vector<double> v(dim);
    for (auto& x : v) x = normal(rng);
    return unit_normalized(std::move(v));
  };
  std::map<char, PoseSequence> letters;
  for (char c = 'A'; c <= 'Z'; ++c) letters[c] = testkit::constant_clip(1, 1, 0.0);
  StoreManifest manifest;
  manifest.dimension = dim;
  manifest.layout = SkeletonLayout::for_point_count(1);
  const PoseSequence clip = testkit::constant_clip(1, 1, 0.0);

  std::size_t mismatches = 0, queries = 0, ties = 0, largest = 0;
  for (int s = 0; s < 1000; ++s) {
    const auto n = std::min<std::size_t>(1024, static_cast<std::size_t>(std::exp(log_size(rng))));
    largest = std::max(largest, n);
    std::vector<PoseEntry> entries;
    entries.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      // duplicated embeddings under different glosses force exact ties
      EmbeddingVector e = (i > 0 && rng() % 8 == 0) ? entries[rng() % i].embedding : random_unit();
      entries.push_back({"G" + std::to_string(rng() % 1000000) + "-" + std::to_string(i), std::move(e), clip});
    }
    const PoseStore store(manifest, std::move(entries), letters);
    for (int q = 0; q < 100; ++q, ++queries) {
      const EmbeddingVector v = q % 2 ? store.entries()[rng() % n].embedding : random_unit();
      const double threshold = std::uniform_real_distribution<double>(-0.2, 1.0)(rng);
      // oracle: full similarity table, then the smallest gloss among the maxima
      std::vector<double> sims(n);
      for (std::size_t i = 0; i < n; ++i) {
        double dot = 0.0;
        const auto& w = store.entries()[i].embedding.values;
        for (std::size_t d = 0; d < dim; ++d) dot += v.values[d] * w[d];
        sims[i] = std::clamp(dot, -1.0, 1.0);
      }
      const double best = *std::max_element(sims.begin(), sims.end());
      const std::string* gloss = nullptr;
      std::size_t at_best = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (sims[i] != best) continue;
        ++at_best;
        if (!gloss || store.entries()[i].gloss < *gloss) gloss = &store.entries()[i].gloss;
      }
      ties += at_best > 1;
      const auto got = query(store, v, threshold);
      const bool want_hit = best >= threshold;
      if (got.has_value() != want_hit || (got && (got->entry->gloss != *gloss || got->similarity != best))) ++mismatches;
    }
  }
  return {mismatches == 0, fmt("1000 stores (1..%zu entries, dim 384) x 100 queries, %zu tied maxima, %zu mismatches",
                               largest, ties, mismatches)};
}

Outcome stitching() {
  using namespace retrieval;
  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::size_t length_errors = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 6, points = 1 + rng() % 8;
    const int t = static_cast<int>(rng() % 10);
    std::vector<PoseSequence> seqs(n);
    std::size_t total = 0;
    for (auto& s : seqs) {
      s.frames.resize(1 + rng() % 12);
      total += s.frames.size();
      for (auto& f : s.frames) {
        f.points.resize(points);
        for (auto& p : f.points) p = {u(rng), u(rng), u(rng), (u(rng) + 5.0) / 10.0};
      }
    }
    const auto out = stitch(seqs, t);
    if (out.frames.size() != total + (n - 1) * static_cast<std::size_t>(t)) {
      ++length_errors;
      continue;
    }
    std::size_t at = 0;
    for (std::size_t k = 0; k + 1 < n; ++k) {
      at += seqs[k].frames.size();
      const auto& a = seqs[k].frames.back();
      const auto& b = seqs[k + 1].frames.front();
      for (int j = 1; j <= t; ++j) {
        const double w = static_cast<double>(j) / (t + 1);
        for (std::size_t p = 0; p < points; ++p) {
          for (std::size_t c = 0; c < 4; ++c) {
            const double want = a.points[p][c] + w * (b.points[p][c] - a.points[p][c]);
            worst = std::max(worst, std::abs(out.frames[at + j - 1].points[p][c] - want));
            if (2 * j == t + 1) {
              worst = std::max(worst, std::abs(out.frames[at + j - 1].points[p][c] - 0.5 * (a.points[p][c] + b.points[p][c])));
            }
          }
        }
      }
      at += t;
    }
  }
  return {length_errors == 0 && worst < 1e-12,
          fmt("1000 inputs, %zu length errors, max junction deviation %.3g (< 1e-12)", length_errors, worst)};
}

Outcome gloss_rules() {
  const auto example = gloss::translate_rule_based("I am going to the store tomorrow").tokens;
  const bool example_ok = example == std::vector<std::string>{"TOMORROW", "I", "GO", "STORE"};
  const auto& lists = gloss::WordLists::defaults();
  std::vector<std::string> vocab{"i", "you", "we", "she", "he", "they", "the", "a", "an", "is", "am", "are", "was",
                                 "were", "be", "been", "being", "do", "does", "did", "to", "store", "school", "home",
                                 "go", "going", "went", "goes", "eat", "eating", "ate", "want", "wants", "book",
                                 "tomorrow", "yesterday", "today", "now", "later", "tonight", "happy", "cat", "running"};
  std::mt19937_64 rng(707);
  std::size_t not_idempotent = 0, stop_words = 0;
  for (int i = 0; i < 1000; ++i) {
    std::string text;
    const std::size_t words = 1 + rng() % 12;
    for (std::size_t w = 0; w < words; ++w) text += vocab[rng() % vocab.size()] + (rng() % 7 ? " " : ", ");
    const auto once = gloss::translate_rule_based(text).tokens;
    std::string joined;
    for (const auto& t : once) joined += t + " ";
    not_idempotent += gloss::translate_rule_based(joined).tokens != once;
    for (const auto& t : once) {
      std::string lower;
      for (char c : t) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      stop_words += lists.articles.contains(lower) || lists.copulas.contains(lower);
    }
  }
  return {example_ok && not_idempotent == 0 && stop_words == 0,
          fmt("example %s; 1000 sentences, %zu not idempotent, %zu article/copula tokens",
              example_ok ? "TOMORROW I GO STORE" : "WRONG", not_idempotent, stop_words)};
}

server::Artifacts replay_artifacts() {
  server::Artifacts a;
  a.model = std::make_shared<const nn::Network>(g_model);
  auto dict = std::make_shared<recognizer::Dictionary>();
  dict->add("HELLO", 900);
  dict->add("HELP", 700);
  a.dictionary = dict;
  auto provider = std::make_shared<retrieval::HashedNGramProvider>();
  a.store = std::make_shared<const retrieval::PoseStore>(testkit::small_store({"HELLO", "STORE", "GO"}, *provider, 75));
  a.provider = provider;
  return a;
}

std::string frame_json(char letter, std::int64_t t, std::mt19937_64& rng) {
  landmarks::FrameRecord rec;
  rec.t = t;
  rec.frame = synthetic::sample_hand(letter, rng);
  auto j = landmarks::to_json(rec);
  j["type"] = "frame";
  return j.dump();
}

std::string absent_json(std::int64_t t) {
  return json{{"type", "frame"}, {"t", t}, {"handedness", "right"}, {"landmarks", nullptr}}.dump();
}

Outcome protocol_replay() {
  std::vector<std::string> log{R"({"type":"hello","protocol_version":1,"mode":"dual"})"};
  std::mt19937_64 rng(808);
  std::int64_t t = 0;
  for (char c : std::string("HELLO")) {
    for (int i = 0; i < 8; ++i) log.push_back(frame_json(c, t += 33, rng));
    for (int i = 0; i < 3; ++i) log.push_back(absent_json(t += 33));
  }
  for (int i = 0; i < 12; ++i) log.push_back(absent_json(t += 33));
  log.push_back("{broken");
  log.push_back(R"({"type":"produce","text":"hello"})");

  server::GatewayConfig cfg;
  cfg.frame_rate_cap = 0;  // the clock is frozen, so a cap would shed the tail of the log
  std::vector<std::string> first;
  std::size_t differing = 0;
  std::string transcript, source, word;
  for (int run = 0; run < 5; ++run) {
    server::Gateway gw(cfg, replay_artifacts(), [] { return std::int64_t{0}; });
    const auto id = *gw.open_session().session;
    std::vector<std::string> out;
    for (const auto& m : log) {
      auto r = gw.handle(id, m);
      out.insert(out.end(), r.outbound.begin(), r.outbound.end());
    }
    for (auto& m : gw.close_session(id)) out.push_back(m);
    if (run == 0) {
      first = out;
      if (std::getenv("SIGNSTREAM_ACCEPTANCE_VERBOSE")) {
        for (const auto& m : out) std::printf("    %.160s\n", m.c_str());
      }
      for (const auto& m : out) {
        const auto j = json::parse(m);
        if (j["type"] == "transcript") transcript = j["text"];
        if (j["type"] == "word") word = j["corrected"];
        if (j["type"] == "pose_sequence") source = j["glosses"][0]["source"];
      }
    } else {
      differing += out != first;
    }
  }
  return {differing == 0 && source == "retrieved" && word == "HELLO",
          fmt("%zu inbound -> %zu outbound messages, %zu of 4 reruns differ; transcript \"%s\"; produce(hello) %s",
              log.size(), first.size(), differing, transcript.c_str(), source.c_str())};
}

Outcome latency() {
  server::GatewayConfig cfg;
  cfg.frame_rate_cap = 0;
  server::Gateway gw(cfg, replay_artifacts(), [] { return std::int64_t{0}; });
  const auto id = *gw.open_session().session;
  gw.handle(id, R"({"type":"hello","protocol_version":1,"mode":"recognition"})");
  std::mt19937_64 rng(909);
  std::vector<std::string> stream;
  std::int64_t t = 0;
  while (stream.size() < 10000) {
    const std::size_t run = 3 + rng() % 10;
    const bool absent = rng() % 6 == 0;
    const char letter = kRecognitionAlphabet[rng() % kNumClasses];
    for (std::size_t i = 0; i < run && stream.size() < 10000; ++i) {
      stream.push_back(absent ? absent_json(t += 33) : frame_json(letter, t += 33, rng));
    }
  }
  std::vector<double> ms;
  ms.reserve(stream.size());
  for (const auto& m : stream) {
    const auto a = std::chrono::steady_clock::now();
    auto r = gw.handle(id, m);
    const auto b = std::chrono::steady_clock::now();
    ms.push_back(std::chrono::duration<double, std::milli>(b - a).count());
  }
  const double mean = std::accumulate(ms.begin(), ms.end(), 0.0) / ms.size();
  std::sort(ms.begin(), ms.end());
  const double p99 = ms[static_cast<std::size_t>(0.99 * (ms.size() - 1))];
  return {mean < 2.0 && p99 < 10.0, fmt("10^4 frames: mean %.3f ms (< 2), p99 %.3f ms (< 10), max %.3f ms", mean, p99,
                                        ms.back())};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"normalization invariance", 5, normalization_invariance},
      {"gradient correctness", 60, gradient_correctness},
      {"permutation invariance", 5, permutation_invariance},
      {"desk-scale training", 180, desk_training},
      {"recognizer rules", 30, recognizer_rules},
      {"retrieval oracle equivalence", 60, retrieval_oracle},
      {"stitching", 10, stitching},
      {"gloss rules", 5, gloss_rules},
      {"protocol replay", 10, protocol_replay},
      {"latency budget", 60, latency},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool ok = o.ok && secs < c.limit_s;
    failed += !ok;
    std::printf("%s  %-30s %s [%.2f s, limit %.0f s]\n", ok ? "PASS" : "FAIL", c.name.c_str(), o.detail.c_str(), secs,
                c.limit_s);
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed ? 1 : 0;
}
