#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "signstream/landmarks.hpp"
#include "signstream/retrieval.hpp"

namespace signstream::testkit {

inline landmarks::RawHandFrame random_frame(std::mt19937_64& rng,
                                            landmarks::Handedness hand = landmarks::Handedness::Right) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  landmarks::RawHandFrame f;
  f.handedness = hand;
  do {
    for (auto& p : f.points) p = {u(rng), u(rng), u(rng) * 0.2 - 0.1};
  } while (landmarks::distance(f.points[0], f.points[9]) < 0.05);
  return f;
}

inline retrieval::PoseSequence constant_clip(std::size_t frames, std::size_t points, double value, double fps = 30.0) {
  retrieval::PoseSequence s;
  s.fps = fps;
  s.frames.assign(frames, retrieval::PoseFrame{std::vector<retrieval::PosePoint>(points, {value, value, value, 1.0})});
  return s;
}

// Letter clips are 1-4 frames long (cycling from A); entries are embedded by `provider`.
inline retrieval::PoseStore small_store(const std::vector<std::string>& glosses,
                                        const retrieval::EmbeddingProvider& provider, std::size_t points = 3) {
  std::map<char, retrieval::PoseSequence> letters;
  for (char c = 'A'; c <= 'Z'; ++c) {
    letters[c] = constant_clip(1 + static_cast<std::size_t>(c - 'A') % 4, points, (c - 'A') / 26.0);
  }
  std::vector<retrieval::PoseEntry> entries;
  for (std::size_t i = 0; i < glosses.size(); ++i) {
    entries.push_back({glosses[i], provider.embed(glosses[i]), constant_clip(5 + i % 3, points, 0.5)});
  }
  retrieval::StoreManifest m;
  m.dimension = provider.dimension();
  m.layout = retrieval::SkeletonLayout::for_point_count(points);
  m.provider = provider.descriptor();
  return retrieval::PoseStore(m, std::move(entries), std::move(letters));
}

}  // namespace signstream::testkit
