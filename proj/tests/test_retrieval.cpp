#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "signstream/error.hpp"
#include "signstream/retrieval.hpp"
#include "support.hpp"

using namespace signstream;
using namespace signstream::retrieval;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::IoError;
}

EmbeddingVector random_unit(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(dim);
  for (auto& x : v) x = n(rng);
  return unit_normalized(std::move(v));
}

EmbeddingVector basis(std::size_t dim, std::size_t i) {
  std::vector<double> v(dim, 0.0);
  v[i] = 1.0;
  return {v};
}

// One-hot embedding per token.
FileBackedProvider one_hot_provider(const std::vector<std::string>& tokens, std::size_t dim) {
  FileBackedProvider p;
  for (std::size_t i = 0; i < tokens.size(); ++i) p.add(tokens[i], basis(dim, i).values);
  return p;
}

PoseStore store_with(std::vector<PoseEntry> entries, std::size_t dim, std::size_t points = 3) {
  std::map<char, PoseSequence> letters;
  for (char c = 'A'; c <= 'Z'; ++c) letters[c] = testkit::constant_clip(1 + (c - 'A') % 4, points, (c - 'A') / 26.0);
  StoreManifest m;
  m.dimension = dim;
  m.layout = SkeletonLayout::for_point_count(points);
  return PoseStore(m, std::move(entries), std::move(letters));
}

// Independent argmax: collect every best-scoring gloss, take the smallest.
std::optional<std::pair<std::string, double>> oracle(const PoseStore& store, const EmbeddingVector& q, double thr) {
  std::vector<double> sims;
  for (const auto& e : store.entries()) {
    double dot = 0.0;
    for (std::size_t i = 0; i < q.values.size(); ++i) dot += q.values[i] * e.embedding.values[i];
    sims.push_back(std::min(1.0, std::max(-1.0, dot)));
  }
  const double best = *std::max_element(sims.begin(), sims.end());
  std::string gloss;
  for (std::size_t i = 0; i < sims.size(); ++i) {
    if (sims[i] == best && (gloss.empty() || store.entries()[i].gloss < gloss)) gloss = store.entries()[i].gloss;
  }
  if (best < thr) return std::nullopt;
  return std::make_pair(gloss, best);
}

}  // namespace

TEST(Embedding, HashedIsDeterministicAndUnit) {
  HashedNGramProvider p;
  EXPECT_EQ(p.dimension(), 384u);
  EXPECT_EQ(p.embed("go"), p.embed("go"));
  EXPECT_EQ(p.embed("GO"), p.embed("go"));
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    std::string w(1 + rng() % 10, 'a');
    for (auto& c : w) c = static_cast<char>('a' + rng() % 26);
    const auto v = p.embed(w);
    double sq = 0.0;
    for (double x : v.values) sq += x * x;
    ASSERT_NEAR(std::sqrt(sq), 1.0, 1e-9) << w;
  }
}

TEST(Embedding, HashedMatchesHandComputedBuckets) {
  // "go" -> trigrams "#go", "go#"; each lands in one bucket with a sign.
  const std::size_t dim = 64;
  std::vector<double> want(dim, 0.0);
  for (std::string g : {"#go", "go#"}) {
    const auto h = fnv1a64(g);
    want[h % dim] += (h >> 32) & 1 ? -1.0 : 1.0;
  }
  EXPECT_EQ(HashedNGramProvider(dim).embed("go"), unit_normalized(want));
}

TEST(Embedding, Fnv1aReferenceValues) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ull);
}

TEST(Embedding, FileBacked) {
  std::istringstream in("GO\t1,0,0\nSTORE\t0,3,4\n");
  const auto p = FileBackedProvider::parse(in);
  EXPECT_EQ(p.dimension(), 3u);
  EXPECT_EQ(p.embed("STORE").values, (std::vector<double>{0.0, 0.6, 0.8}));
  EXPECT_EQ(code_of([&] { p.embed("ZZZZZ"); }), ErrorCode::UnknownToken);
  std::istringstream ragged("GO\t1,0,0\nSTORE\t0,1\n");
  EXPECT_THROW(FileBackedProvider::parse(ragged), Error);
}

TEST(Embedding, ProviderSpecs) {
  EXPECT_EQ(make_provider("hashed")->dimension(), 384u);
  EXPECT_EQ(make_provider("hashed:32")->dimension(), 32u);
  EXPECT_THROW(make_provider("magic"), Error);
  EXPECT_THROW(unit_normalized({0.0, 0.0}), Error);
}

TEST(Cosine, Examples) {
  const EmbeddingVector a{{1.0, 0.0}};
  EXPECT_EQ(cosine_similarity(a, a), 1.0);
  EXPECT_EQ(cosine_similarity(a, EmbeddingVector{{0.0, 1.0}}), 0.0);
  EXPECT_NEAR(cosine_similarity(unit_normalized({1.0, 1.0}), a), std::sqrt(0.5), 1e-9);
  EXPECT_EQ(code_of([&] { cosine_similarity(a, EmbeddingVector{{1.0, 0.0, 0.0}}); }), ErrorCode::DimensionMismatch);
}

TEST(Query, SelfMatchAndBelowThreshold) {
  std::mt19937_64 rng(2);
  std::vector<PoseEntry> entries;
  for (std::string g : {"GO", "STORE", "HOME"}) {
    entries.push_back({g, random_unit(rng, 16), testkit::constant_clip(2, 3, 0.5)});
  }
  const auto store = store_with(entries, 16);
  const auto m = query(store, store.entries()[1].embedding, 0.99);
  ASSERT_TRUE(m);
  EXPECT_EQ(m->entry->gloss, "STORE");
  EXPECT_NEAR(m->similarity, 1.0, 1e-15);

  auto ortho = store_with({{"X", basis(4, 0), testkit::constant_clip(1, 3, 0.0)},
                           {"Y", basis(4, 1), testkit::constant_clip(1, 3, 0.0)}},
                          4);
  EXPECT_FALSE(query(ortho, basis(4, 2), 0.5));
  EXPECT_EQ(code_of([&] { query(store_with({}, 4), basis(4, 0), 0.5); }), ErrorCode::EmptyStore);
}

TEST(Query, TiesGoToSmallerGloss) {
  const auto store = store_with({{"ZETA", basis(4, 0), testkit::constant_clip(1, 3, 0.0)},
                                 {"ALPHA", basis(4, 0), testkit::constant_clip(1, 3, 0.0)},
                                 {"MID", basis(4, 1), testkit::constant_clip(1, 3, 0.0)}},
                                4);
  EXPECT_EQ(query(store, basis(4, 0), 0.0)->entry->gloss, "ALPHA");
}

TEST(Query, MatchesBruteForceOracle) {
  std::mt19937_64 rng(3);
  for (int s = 0; s < 200; ++s) {
    const std::size_t dim = 2 + rng() % 16;
    const std::size_t n = 1 + rng() % 40;
    std::vector<PoseEntry> entries;
    for (std::size_t i = 0; i < n; ++i) {
      // every fourth entry duplicates an earlier embedding to force ties
      auto emb = (i % 4 == 3) ? entries[rng() % i].embedding : random_unit(rng, dim);
      entries.push_back({"G" + std::to_string(rng() % 100000) + "_" + std::to_string(i), emb,
                         testkit::constant_clip(1, 3, 0.0)});
    }
    const auto store = store_with(entries, dim);
    for (int q = 0; q < 20; ++q) {
      const auto v = (q % 3 == 0) ? store.entries()[rng() % n].embedding : random_unit(rng, dim);
      const double thr = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
      const auto got = query(store, v, thr);
      const auto want = oracle(store, v, thr);
      ASSERT_EQ(got.has_value(), want.has_value());
      if (got) {
        ASSERT_EQ(got->entry->gloss, want->first);
        ASSERT_EQ(got->similarity, want->second);
      }
    }
  }
}

TEST(Stitch, Examples) {
  const auto a = testkit::constant_clip(10, 3, 0.1);
  EXPECT_EQ(stitch(std::vector<PoseSequence>{a}, 4), a);

  PoseSequence p = testkit::constant_clip(1, 2, 0.0), q = testkit::constant_clip(1, 2, 1.0);
  p.frames[0].points[1] = {0.2, -0.4, 3.0, 0.0};
  q.frames[0].points[1] = {0.6, 0.4, -1.0, 1.0};
  const auto mid = stitch(std::vector<PoseSequence>{p, q}, 1);
  ASSERT_EQ(mid.frames.size(), 3u);
  for (std::size_t pt = 0; pt < 2; ++pt) {
    for (std::size_t c = 0; c < 4; ++c) {
      EXPECT_NEAR(mid.frames[1].points[pt][c], 0.5 * (p.frames[0].points[pt][c] + q.frames[0].points[pt][c]), 1e-12);
    }
  }

  const auto three = stitch(std::vector<PoseSequence>{testkit::constant_clip(10, 3, 0), testkit::constant_clip(5, 3, 1),
                                                      testkit::constant_clip(8, 3, 0)},
                            4);
  EXPECT_EQ(three.frames.size(), 31u);
}

TEST(Stitch, InterpolationWeights) {
  const auto s = stitch(std::vector<PoseSequence>{testkit::constant_clip(2, 1, 0.0), testkit::constant_clip(2, 1, 1.0)},
                        4);
  ASSERT_EQ(s.frames.size(), 8u);
  for (int j = 1; j <= 4; ++j) EXPECT_NEAR(s.frames[1 + j].points[0][0], j / 5.0, 1e-15);
}

TEST(Stitch, Errors) {
  const auto a = testkit::constant_clip(2, 3, 0.0);
  auto b = testkit::constant_clip(2, 4, 0.0);
  EXPECT_EQ(code_of([&] { stitch(std::vector<PoseSequence>{a, b}, 2); }), ErrorCode::LayoutMismatch);
  b = testkit::constant_clip(2, 3, 0.0, 25.0);
  EXPECT_EQ(code_of([&] { stitch(std::vector<PoseSequence>{a, b}, 2); }), ErrorCode::FpsMismatch);
  EXPECT_THROW(stitch(std::vector<PoseSequence>{}, 2), Error);
  EXPECT_THROW(stitch(std::vector<PoseSequence>{a, a}, -1), Error);
}

TEST(Stitch, RandomPropertyCheck) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 5, points = 1 + rng() % 4;
    const int t = static_cast<int>(rng() % 6);
    std::vector<PoseSequence> seqs(n);
    std::size_t total = 0;
    for (auto& s : seqs) {
      s.frames.resize(1 + rng() % 6);
      total += s.frames.size();
      for (auto& f : s.frames) {
        f.points.resize(points);
        for (auto& p : f.points) p = {u(rng), u(rng), u(rng), (u(rng) + 2.0) / 4.0};
      }
    }
    const auto out = stitch(seqs, t);
    ASSERT_EQ(out.frames.size(), total + (n - 1) * t);
    std::size_t at = 0;
    for (std::size_t k = 0; k < n; ++k) {
      for (const auto& f : seqs[k].frames) ASSERT_EQ(out.frames[at++], f);
      if (k + 1 == n) break;
      const auto& last = seqs[k].frames.back();
      const auto& first = seqs[k + 1].frames.front();
      for (int j = 0; j < t; ++j, ++at) {
        for (std::size_t p = 0; p < points; ++p) {
          for (std::size_t c = 0; c < 4; ++c) {
            const double lo = std::min(last.points[p][c], first.points[p][c]);
            const double hi = std::max(last.points[p][c], first.points[p][c]);
            const double v = out.frames[at].points[p][c];
            ASSERT_GE(v, lo);
            ASSERT_LE(v, hi);
          }
        }
      }
    }
  }
}

TEST(Fingerspell, Lengths) {
  const auto store = store_with({}, 4);
  EXPECT_EQ(fingerspell("A", store, 4), store.letter_pose('A'));
  EXPECT_EQ(fingerspell("AB", store, 4).frames.size(), store.letter_pose('A').frames.size() + 4 +
                                                           store.letter_pose('B').frames.size());
  EXPECT_EQ(fingerspell("JZ", store, 0).frames.size(), 2u + 2u);
  EXPECT_EQ(code_of([&] { fingerspell("A1", store, 4); }), ErrorCode::UnsupportedCharacter);
  EXPECT_THROW(fingerspell("", store, 4), Error);
}

TEST(Produce, ExactHitsAreRetrieved) {
  const std::vector<std::string> tokens{"TOMORROW", "I", "GO", "STORE"};
  const auto provider = one_hot_provider(tokens, 8);
  const auto store = testkit::small_store(tokens, provider);
  gloss::RuleBasedTranslator translator;
  const auto r = produce("I am going to the store tomorrow", store, translator, provider, {0.6, 3});
  ASSERT_EQ(r.glosses.size(), 4u);
  std::size_t total = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(r.glosses[i].gloss, tokens[i]);
    EXPECT_EQ(r.glosses[i].source, Source::Retrieved);
    EXPECT_EQ(r.glosses[i].matched->first, tokens[i]);
    EXPECT_EQ(r.glosses[i].matched->second, 1.0);
    total += r.glosses[i].sequence.frames.size();
  }
  EXPECT_EQ(r.sequence.frames.size(), total + 3 * 3);
  EXPECT_FALSE(r.empty_gloss);
}

TEST(Produce, UnknownTokensAreFingerspelled) {
  const auto provider = one_hot_provider({"GO"}, 4);
  const auto store = testkit::small_store({"GO"}, provider);
  gloss::RuleBasedTranslator translator;
  const auto r = produce("cab", store, translator, provider, {0.6, 2});
  ASSERT_EQ(r.glosses.size(), 1u);
  EXPECT_EQ(r.glosses[0].source, Source::Fingerspelled);
  EXPECT_FALSE(r.glosses[0].matched);
  // C=3, A=1, B=2 frames plus two junctions of 2
  EXPECT_EQ(r.sequence.frames.size(), 3u + 1u + 2u + 2u * 2u);
}

TEST(Produce, HashedProviderNeverFailsOnUnknownWords) {
  HashedNGramProvider provider(64);
  const auto store = testkit::small_store({"HELLO", "STORE"}, provider);
  gloss::RuleBasedTranslator translator;
  const auto r = produce("hello qwxz friend", store, translator, provider);
  ASSERT_EQ(r.glosses.size(), 3u);
  EXPECT_EQ(r.glosses[0].source, Source::Retrieved);
  EXPECT_EQ(r.glosses[1].source, Source::Fingerspelled);
}

TEST(Produce, EmptyGloss) {
  HashedNGramProvider provider(16);
  const auto store = testkit::small_store({"HELLO"}, provider);
  gloss::RuleBasedTranslator translator;
  const auto r = produce("the a an", store, translator, provider);
  EXPECT_TRUE(r.empty_gloss);
  EXPECT_TRUE(r.sequence.frames.empty());
  EXPECT_TRUE(r.glosses.empty());
}

TEST(Store, ValidationErrors) {
  HashedNGramProvider provider(8);
  const auto clip = testkit::constant_clip(2, 3, 0.0);
  EXPECT_EQ(code_of([&] {
              store_with({{"GO", provider.embed("GO"), clip}, {"GO", provider.embed("GO"), clip}}, 8);
            }),
            ErrorCode::DuplicateGloss);
  EXPECT_EQ(code_of([&] {
              std::map<char, PoseSequence> letters;
              for (char c = 'A'; c < 'Z'; ++c) letters[c] = clip;
              StoreManifest m;
              m.dimension = 8;
              m.layout = SkeletonLayout::for_point_count(3);
              PoseStore(m, {}, letters);
            }),
            ErrorCode::MissingLetterPose);
  EXPECT_EQ(code_of([&] { store_with({{"GO", provider.embed("GO"), testkit::constant_clip(2, 4, 0.0)}}, 8); }),
            ErrorCode::LayoutMismatch);
  EXPECT_EQ(code_of([&] { store_with({{"GO", HashedNGramProvider(9).embed("GO"), clip}}, 8); }),
            ErrorCode::DimensionMismatch);
}

TEST(Store, BuildFromJsonl) {
  HashedNGramProvider provider(16);
  std::string letters;
  for (char c = 'A'; c <= 'Z'; ++c) {
    letters += std::string("{\"letter\":\"") + c + "\",\"frames\":[[[0,0,0,1],[1,1,1,1]]]}\n";
  }
  std::istringstream entries(
      "{\"gloss\":\"go\",\"frames\":[[[0,0,0,1],[0.5,0.5,0,1]],[[0,0,0,1],[0.5,0.5,0,0.5]]]}\n"
      "{\"gloss\":\"STORE\",\"frames\":[[[0,0,0,1],[0.5,0.5,0,1]]]}\n");
  std::istringstream letter_in(letters);
  const auto store = build_store(entries, letter_in, provider);
  EXPECT_EQ(store.manifest().count, 2u);
  EXPECT_EQ(store.manifest().provider, "hashed");
  ASSERT_NE(store.find("GO"), nullptr);
  EXPECT_EQ(store.find("GO")->embedding, provider.embed("GO"));
  EXPECT_EQ(store.find("GO")->sequence.frames.size(), 2u);

  std::istringstream dup("{\"gloss\":\"GO\",\"frames\":[[[0,0,0,1],[0,0,0,1]]]}\n{\"gloss\":\"GO\",\"frames\":[[[0,0,0,1],[0,0,0,1]]]}\n");
  std::istringstream letter_in2(letters);
  EXPECT_EQ(code_of([&] { build_store(dup, letter_in2, provider); }), ErrorCode::DuplicateGloss);

  std::istringstream ok("{\"gloss\":\"GO\",\"frames\":[[[0,0,0,1],[0,0,0,1]]]}\n");
  std::istringstream few(letters.substr(0, letters.rfind("{\"letter\"")));
  EXPECT_EQ(code_of([&] { build_store(ok, few, provider); }), ErrorCode::MissingLetterPose);

  std::istringstream bad("{\"gloss\":\"GO\"}\n");
  std::istringstream letter_in3(letters);
  EXPECT_EQ(code_of([&] { build_store(bad, letter_in3, provider); }), ErrorCode::FormatError);
}

TEST(Store, SaveLoadRoundTripIsBitExact) {
  HashedNGramProvider provider(32);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto store = testkit::small_store({"HELLO", "GO", "STORE"}, provider, 4);
  std::vector<PoseEntry> entries = store.entries();
  for (auto& e : entries) {
    for (auto& f : e.sequence.frames) {
      for (auto& p : f.points) p = {u(rng) / 3.0, u(rng) * 1e-7, u(rng) * 1e5, 0.1};
    }
  }
  store = PoseStore(store.manifest(), entries, store.letter_poses());
  const auto dir = std::filesystem::temp_directory_path() / "signstream_store_test";
  std::filesystem::remove_all(dir);
  save_store(store, dir);
  EXPECT_TRUE(std::filesystem::exists(dir / "manifest.json"));
  EXPECT_EQ(load_store(dir), store);
  std::filesystem::remove_all(dir);
  EXPECT_THROW(load_store(dir), Error);
}

TEST(Serialization, SeventeenDigits) {
  std::string s;
  append_double(s, 0.1);
  EXPECT_EQ(s, "0.10000000000000001");
  EXPECT_EQ(frames_to_json({PoseFrame{{{1.0, 0.5, 0.0, 1.0}}}}), "[[[1,0.5,0,1]]]");
}
