#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "signstream/alphabet.hpp"
#include "signstream/landmarks.hpp"

namespace signstream::nn {

using landmarks::FeatureLayout;
using landmarks::FeatureVector;

enum class Activation : std::uint8_t { ReLU = 0, Identity = 1 };

// Fully connected layer; weights are row-major (out_dim x in_dim).
struct DenseLayer {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::vector<double> weights;
  std::vector<double> bias;
  Activation activation = Activation::ReLU;

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out, Activation act)
      : in_dim(in), out_dim(out), weights(in * out, 0.0), bias(out, 0.0), activation(act) {}

  double& w(std::size_t row, std::size_t col) { return weights[row * in_dim + col]; }
  double w(std::size_t row, std::size_t col) const { return weights[row * in_dim + col]; }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

enum class NetworkKind : std::uint8_t {
  DenseBaseline = 0,  // dense stack over the flattened 2-D landmarks
  PointNetLite = 1,   // shared per-point MLP, channel-wise max pool, dense head
};

struct Network {
  NetworkKind kind = NetworkKind::PointNetLite;
  std::vector<DenseLayer> point_layers;  // PointNetLite only
  std::vector<DenseLayer> head_layers;
  std::size_t num_classes = kNumClasses;
  std::uint64_t seed = 0;

  FeatureLayout input_layout() const {
    return kind == NetworkKind::DenseBaseline ? FeatureLayout::Flat2D : FeatureLayout::PointCloud3D;
  }

  std::size_t parameter_count() const;

  // Parameter blocks in declaration order: for each point layer then each
  // head layer, weights followed by bias.
  std::vector<std::span<double>> parameter_blocks();
  std::vector<std::span<const double>> parameter_blocks() const;

  // Throws ShapeMismatch unless layer dims chain from the input to num_classes.
  void validate() const;

  friend bool operator==(const Network&, const Network&) = default;
};

// Hidden widths exclude the input and the 24-way output layer.
struct Architecture {
  NetworkKind kind = NetworkKind::PointNetLite;
  std::vector<std::size_t> point_widths;  // PointNetLite only; last entry is the pooled width
  std::vector<std::size_t> head_widths;

  static Architecture default_for(NetworkKind kind);
};

// Builds the network and draws Glorot-uniform weights from `seed`; biases start at zero.
Network make_network(const Architecture& arch, std::uint64_t seed);
Network make_network(NetworkKind kind, std::uint64_t seed);

void glorot_initialize(Network& net, std::uint64_t seed);

std::vector<double> forward(const Network& net, const FeatureVector& input);

// ReLU on/off state of every unit plus the max-pool winner per feature.
// Two inputs (or parameter settings) with equal patterns lie on the same
// linear piece of the network.
std::vector<std::uint32_t> activation_pattern(const Network& net, const FeatureVector& input);

std::vector<double> softmax(std::span<const double> logits);

inline constexpr double kProbabilityFloor = 1e-12;

// Sparse categorical cross-entropy with probabilities clamped at 1e-12.
double loss(std::span<const double> probs, std::size_t label);

// Same layout as Network::parameter_blocks().
struct Gradients {
  std::vector<std::vector<double>> blocks;

  static Gradients zeros_like(const Network& net);
  double squared_norm() const;
};

Gradients backward(const Network& net, const FeatureVector& input, std::size_t label);

// Adds the gradient of one sample into `into` and returns the sample loss.
double accumulate_gradients(const Network& net, const FeatureVector& input, std::size_t label,
                            Gradients& into, std::vector<double>* logits_out = nullptr);

struct AdamState {
  std::uint64_t t = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  double lr = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_network(const Network& net, double lr = 0.0005);
};

// One bias-corrected Adam update. Moment buffers are sized lazily on the
// first call; afterwards shapes must agree.
void adam_step(std::span<const std::span<double>> params, const Gradients& grads, AdamState& state);
void adam_step(Network& net, const Gradients& grads, AdamState& state);

struct LabeledFeatures {
  FeatureVector features;
  std::size_t label = 0;
};

struct TrainConfig {
  int epochs = 100;
  int batch_size = 64;
  std::uint64_t seed = 0;
  double validation_fraction = 0.2;
  double learning_rate = 0.0005;
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double validation_loss = 0.0;
  double validation_accuracy = 0.0;
};

struct TrainResult {
  Network network;
  std::vector<EpochMetrics> history;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

// Mini-batch Adam on the mean batch gradient. The split and the per-epoch
// shuffles are drawn from cfg.seed, so equal inputs give bit-identical output.
TrainResult train(const std::vector<LabeledFeatures>& dataset, const TrainConfig& cfg, Network net,
                  const EpochCallback& on_epoch = {});

struct Evaluation {
  std::size_t samples = 0;
  std::size_t correct = 0;
  double mean_loss = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [truth][predicted]

  double accuracy() const { return samples ? static_cast<double>(correct) / samples : 0.0; }
};

Evaluation evaluate(const Network& net, const std::vector<LabeledFeatures>& dataset);

std::size_t argmax(std::span<const double> values);

inline constexpr std::uint32_t kModelFormatVersion = 1;

void save_model(const Network& net, std::ostream& out);
Network load_model(std::istream& in);
void save_model(const Network& net, const std::filesystem::path& path);
Network load_model(const std::filesystem::path& path);

}  // namespace signstream::nn
