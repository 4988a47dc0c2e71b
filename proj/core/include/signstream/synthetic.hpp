#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "signstream/landmarks.hpp"
#include "signstream/nn.hpp"
#include "signstream/retrieval.hpp"

// Procedural stand-ins for real landmark and pose corpora: one articulated
// hand shape per static letter and smooth skeletal pose clips.
namespace signstream::synthetic {

// Right hand for `letter` in the canonical frame: wrist at the origin,
// middle MCP at (0, -1, 0), fingers toward -y, index side toward +x.
landmarks::HandPoints canonical_hand(char letter);

struct Placement {
  double jitter_sigma = 0.02;  // Gaussian noise on canonical coordinates
  bool randomize = true;       // random image-space scale and translation
  bool left_hand = false;      // emit the mirrored hand labelled Left
};

// Canonical shape plus jitter, mapped into extractor-like image coordinates.
landmarks::RawHandFrame sample_hand(char letter, std::mt19937_64& rng, const Placement& placement = {});

// `per_class` samples for each of the 24 static letters.
std::vector<landmarks::LabeledFrame> make_dataset(std::size_t per_class, double jitter_sigma, std::uint64_t seed);

std::vector<nn::LabeledFeatures> to_features(const std::vector<landmarks::LabeledFrame>& samples,
                                             landmarks::FeatureLayout layout);

// Deterministic clip for a letter or gloss with `points` skeleton points.
retrieval::PoseSequence pose_clip(std::string_view key, std::size_t frames, std::size_t points = 75,
                                  double fps = retrieval::kDefaultFps);

}  // namespace signstream::synthetic
