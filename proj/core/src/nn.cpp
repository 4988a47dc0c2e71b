#include "signstream/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "signstream/error.hpp"

namespace signstream::nn {

namespace {

// Uniform double in [0, 1) from the top 53 bits; avoids the
// implementation-defined std::uniform_real_distribution.
double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t bounded(std::mt19937_64& rng, std::size_t bound) { return static_cast<std::size_t>(rng() % bound); }

void shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[bounded(rng, i)]);
}

void dense_forward(const DenseLayer& layer, const double* in, double* pre, double* post) {
  const std::size_t n_in = layer.in_dim;
  for (std::size_t o = 0; o < layer.out_dim; ++o) {
    const double* row = layer.weights.data() + o * n_in;
    double s = layer.bias[o];
    for (std::size_t i = 0; i < n_in; ++i) s += row[i] * in[i];
    pre[o] = s;
    post[o] = (layer.activation == Activation::ReLU) ? (s > 0.0 ? s : 0.0) : s;
  }
}

// Given d(loss)/d(post), accumulates weight/bias gradients and writes
// d(loss)/d(input) into `d_in` (if non-null). `d_post` is overwritten with
// d(loss)/d(pre).
void dense_backward(const DenseLayer& layer, const double* in, const double* pre, double* d_post,
                    double* grad_w, double* grad_b, double* d_in) {
  const std::size_t n_in = layer.in_dim;
  if (layer.activation == Activation::ReLU) {
    for (std::size_t o = 0; o < layer.out_dim; ++o) {
      if (!(pre[o] > 0.0)) d_post[o] = 0.0;
    }
  }
  if (d_in) std::fill(d_in, d_in + n_in, 0.0);
  for (std::size_t o = 0; o < layer.out_dim; ++o) {
    const double g = d_post[o];
    if (g == 0.0) continue;
    grad_b[o] += g;
    double* gw = grad_w + o * n_in;
    const double* row = layer.weights.data() + o * n_in;
    for (std::size_t i = 0; i < n_in; ++i) gw[i] += g * in[i];
    if (d_in) {
      for (std::size_t i = 0; i < n_in; ++i) d_in[i] += g * row[i];
    }
  }
}

void check_input(const Network& net, const FeatureVector& input) {
  if (input.layout != net.input_layout()) {
    throw Error(ErrorCode::ShapeMismatch, "feature layout does not match network kind");
  }
  if (input.values.size() != FeatureVector::expected_size(input.layout)) {
    throw Error(ErrorCode::ShapeMismatch, "feature vector has wrong length");
  }
}

// Activations recorded by a forward pass for reuse in backward.
struct Trace {
  // point_pre[l] / point_post[l]: kNumLandmarks x out_dim, row per point.
  std::vector<std::vector<double>> point_pre;
  std::vector<std::vector<double>> point_post;
  std::vector<double> pooled;
  std::vector<std::size_t> pool_arg;
  std::vector<std::vector<double>> head_pre;
  std::vector<std::vector<double>> head_post;
  // scratch for backward
  std::vector<double> d_a;
  std::vector<double> d_b;
  std::vector<std::vector<double>> d_point;

  void shape_for(const Network& net) {
    point_pre.resize(net.point_layers.size());
    point_post.resize(net.point_layers.size());
    d_point.resize(net.point_layers.size());
    for (std::size_t l = 0; l < net.point_layers.size(); ++l) {
      const std::size_t n = landmarks::kNumLandmarks * net.point_layers[l].out_dim;
      point_pre[l].resize(n);
      point_post[l].resize(n);
      d_point[l].resize(n);
    }
    if (!net.point_layers.empty()) {
      pooled.resize(net.point_layers.back().out_dim);
      pool_arg.resize(net.point_layers.back().out_dim);
    }
    head_pre.resize(net.head_layers.size());
    head_post.resize(net.head_layers.size());
    std::size_t widest = 64;
    for (std::size_t l = 0; l < net.head_layers.size(); ++l) {
      head_pre[l].resize(net.head_layers[l].out_dim);
      head_post[l].resize(net.head_layers[l].out_dim);
      widest = std::max({widest, net.head_layers[l].in_dim, net.head_layers[l].out_dim});
    }
    d_a.resize(widest);
    d_b.resize(widest);
  }
};

// Returns a pointer to the logits inside the trace.
const std::vector<double>& run_forward(const Network& net, const FeatureVector& input, Trace& tr) {
  tr.shape_for(net);
  const double* head_in = input.values.data();
  if (net.kind == NetworkKind::PointNetLite) {
    constexpr std::size_t kPoints = landmarks::kNumLandmarks;
    for (std::size_t p = 0; p < kPoints; ++p) {
      const double* in = input.values.data() + 3 * p;
      for (std::size_t l = 0; l < net.point_layers.size(); ++l) {
        const DenseLayer& layer = net.point_layers[l];
        double* pre = tr.point_pre[l].data() + p * layer.out_dim;
        double* post = tr.point_post[l].data() + p * layer.out_dim;
        dense_forward(layer, in, pre, post);
        in = post;
      }
    }
    const std::size_t width = net.point_layers.back().out_dim;
    const std::vector<double>& last = tr.point_post.back();
    for (std::size_t c = 0; c < width; ++c) {
      std::size_t best = 0;
      double best_v = last[c];
      for (std::size_t p = 1; p < kPoints; ++p) {
        const double v = last[p * width + c];
        if (v > best_v) {  // strict: ties keep the lowest point index
          best_v = v;
          best = p;
        }
      }
      tr.pooled[c] = best_v;
      tr.pool_arg[c] = best;
    }
    head_in = tr.pooled.data();
  }
  for (std::size_t l = 0; l < net.head_layers.size(); ++l) {
    dense_forward(net.head_layers[l], head_in, tr.head_pre[l].data(), tr.head_post[l].data());
    head_in = tr.head_post[l].data();
  }
  return tr.head_post.back();
}

double accumulate_with(const Network& net, const FeatureVector& input, std::size_t label, Gradients& into,
                       Trace& tr, std::vector<double>* logits_out) {
  if (label >= net.num_classes) throw Error(ErrorCode::LabelOutOfRange, "label " + std::to_string(label));
  check_input(net, input);
  const std::vector<double>& logits = run_forward(net, input, tr);
  if (logits_out) *logits_out = logits;
  std::vector<double> probs = softmax(logits);
  const double sample_loss = loss(probs, label);

  // d loss / d logits = softmax - onehot
  std::vector<double>& d_a = tr.d_a;
  std::vector<double>& d_b = tr.d_b;
  std::copy(probs.begin(), probs.end(), d_a.begin());
  d_a[label] -= 1.0;

  const std::size_t n_point = net.point_layers.size();
  for (std::size_t l = net.head_layers.size(); l-- > 0;) {
    const DenseLayer& layer = net.head_layers[l];
    const double* in = l > 0 ? tr.head_post[l - 1].data()
                             : (n_point ? tr.pooled.data() : input.values.data());
    const std::size_t block = 2 * (n_point + l);
    const bool need_d_in = l > 0 || n_point > 0;
    dense_backward(layer, in, tr.head_pre[l].data(), d_a.data(), into.blocks[block].data(),
                   into.blocks[block + 1].data(), need_d_in ? d_b.data() : nullptr);
    std::swap(d_a, d_b);
  }
  if (n_point == 0) return sample_loss;

  // Max pool routes each channel's gradient to its argmax point.
  const std::size_t width = net.point_layers.back().out_dim;
  std::vector<double>& top = tr.d_point.back();
  std::fill(top.begin(), top.end(), 0.0);
  for (std::size_t c = 0; c < width; ++c) top[tr.pool_arg[c] * width + c] = d_a[c];

  for (std::size_t p = 0; p < landmarks::kNumLandmarks; ++p) {
    for (std::size_t l = n_point; l-- > 0;) {
      const DenseLayer& layer = net.point_layers[l];
      double* d_post = tr.d_point[l].data() + p * layer.out_dim;
      if (l == n_point - 1 &&
          std::all_of(d_post, d_post + layer.out_dim, [](double g) { return g == 0.0; })) {
        break;
      }
      const double* in = l > 0 ? tr.point_post[l - 1].data() + p * layer.in_dim : input.values.data() + 3 * p;
      double* d_in = l > 0 ? tr.d_point[l - 1].data() + p * layer.in_dim : nullptr;
      dense_backward(layer, in, tr.point_pre[l].data() + p * layer.out_dim, d_post,
                     into.blocks[2 * l].data(), into.blocks[2 * l + 1].data(), d_in);
    }
  }
  return sample_loss;
}

}  // namespace

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto* layers : {&point_layers, &head_layers}) {
    for (const auto& l : *layers) n += l.weights.size() + l.bias.size();
  }
  return n;
}

std::vector<std::span<double>> Network::parameter_blocks() {
  std::vector<std::span<double>> blocks;
  for (auto* layers : {&point_layers, &head_layers}) {
    for (auto& l : *layers) {
      blocks.emplace_back(l.weights);
      blocks.emplace_back(l.bias);
    }
  }
  return blocks;
}

std::vector<std::span<const double>> Network::parameter_blocks() const {
  std::vector<std::span<const double>> blocks;
  for (const auto* layers : {&point_layers, &head_layers}) {
    for (const auto& l : *layers) {
      blocks.emplace_back(l.weights);
      blocks.emplace_back(l.bias);
    }
  }
  return blocks;
}

void Network::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::ShapeMismatch, what); };
  if (num_classes != kNumClasses) fail("num_classes must be 24");
  if (head_layers.empty()) fail("network has no head layers");
  std::size_t width = 0;
  if (kind == NetworkKind::PointNetLite) {
    if (point_layers.empty()) fail("PointNetLite needs at least one point layer");
    width = 3;
    for (const auto& l : point_layers) {
      if (l.in_dim != width) fail("point layer dims do not chain");
      width = l.out_dim;
    }
  } else {
    if (!point_layers.empty()) fail("DenseBaseline has no point layers");
    width = landmarks::kNumLandmarks * 2;
  }
  for (const auto& l : head_layers) {
    if (l.in_dim != width) fail("head layer dims do not chain");
    width = l.out_dim;
  }
  if (width != num_classes) fail("output width must equal num_classes");
  for (const auto* layers : {&point_layers, &head_layers}) {
    for (const auto& l : *layers) {
      if (l.in_dim == 0 || l.out_dim == 0) fail("zero-sized layer");
      if (l.weights.size() != l.in_dim * l.out_dim || l.bias.size() != l.out_dim) fail("parameter storage size");
    }
  }
}

Architecture Architecture::default_for(NetworkKind kind) {
  if (kind == NetworkKind::PointNetLite) return {kind, {32, 64}, {32}};
  return {kind, {}, {64, 32}};
}

void glorot_initialize(Network& net, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto* layers : {&net.point_layers, &net.head_layers}) {
    for (auto& l : *layers) {
      const double limit = std::sqrt(6.0 / static_cast<double>(l.in_dim + l.out_dim));
      for (double& w : l.weights) w = (2.0 * unit_uniform(rng) - 1.0) * limit;
      std::fill(l.bias.begin(), l.bias.end(), 0.0);
    }
  }
  net.seed = seed;
}

Network make_network(const Architecture& arch, std::uint64_t seed) {
  Network net;
  net.kind = arch.kind;
  std::size_t width = 0;
  if (arch.kind == NetworkKind::PointNetLite) {
    if (arch.point_widths.empty()) throw Error(ErrorCode::ShapeMismatch, "PointNetLite needs point widths");
    width = 3;
    for (std::size_t w : arch.point_widths) {
      net.point_layers.emplace_back(width, w, Activation::ReLU);
      width = w;
    }
  } else {
    width = landmarks::kNumLandmarks * 2;
  }
  for (std::size_t w : arch.head_widths) {
    net.head_layers.emplace_back(width, w, Activation::ReLU);
    width = w;
  }
  net.head_layers.emplace_back(width, kNumClasses, Activation::Identity);
  net.validate();
  glorot_initialize(net, seed);
  return net;
}

Network make_network(NetworkKind kind, std::uint64_t seed) {
  return make_network(Architecture::default_for(kind), seed);
}

std::vector<double> forward(const Network& net, const FeatureVector& input) {
  check_input(net, input);
  Trace tr;
  return run_forward(net, input, tr);
}

std::vector<std::uint32_t> activation_pattern(const Network& net, const FeatureVector& input) {
  check_input(net, input);
  Trace tr;
  run_forward(net, input, tr);
  std::vector<std::uint32_t> out;
  for (std::size_t l = 0; l < net.point_layers.size(); ++l) {
    if (net.point_layers[l].activation != Activation::ReLU) continue;
    for (double v : tr.point_pre[l]) out.push_back(v > 0.0);
  }
  for (std::size_t a : tr.pool_arg) out.push_back(static_cast<std::uint32_t>(a));
  for (std::size_t l = 0; l < net.head_layers.size(); ++l) {
    if (net.head_layers[l].activation != Activation::ReLU) continue;
    for (double v : tr.head_pre[l]) out.push_back(v > 0.0);
  }
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> probs(logits.begin(), logits.end());
  if (probs.empty()) return probs;
  const double top = *std::max_element(probs.begin(), probs.end());
  double sum = 0.0;
  for (double& p : probs) {
    p = std::exp(p - top);
    sum += p;
  }
  for (double& p : probs) p /= sum;
  return probs;
}

double loss(std::span<const double> probs, std::size_t label) {
  if (label >= probs.size()) throw Error(ErrorCode::LabelOutOfRange, "label " + std::to_string(label));
  return -std::log(std::max(probs[label], kProbabilityFloor));
}

Gradients Gradients::zeros_like(const Network& net) {
  Gradients g;
  for (auto block : net.parameter_blocks()) g.blocks.emplace_back(block.size(), 0.0);
  return g;
}

double Gradients::squared_norm() const {
  double s = 0.0;
  for (const auto& b : blocks) {
    for (double g : b) s += g * g;
  }
  return s;
}

double accumulate_gradients(const Network& net, const FeatureVector& input, std::size_t label, Gradients& into,
                            std::vector<double>* logits_out) {
  Trace tr;
  return accumulate_with(net, input, label, into, tr, logits_out);
}

Gradients backward(const Network& net, const FeatureVector& input, std::size_t label) {
  Gradients g = Gradients::zeros_like(net);
  accumulate_gradients(net, input, label, g);
  return g;
}

AdamState AdamState::for_network(const Network& net, double lr) {
  AdamState s;
  s.lr = lr;
  for (auto block : net.parameter_blocks()) {
    s.m.emplace_back(block.size(), 0.0);
    s.v.emplace_back(block.size(), 0.0);
  }
  return s;
}

void adam_step(std::span<const std::span<double>> params, const Gradients& grads, AdamState& state) {
  if (params.size() != grads.blocks.size()) throw Error(ErrorCode::ShapeMismatch, "gradient block count");
  if (state.m.empty() && state.v.empty()) {
    for (const auto& g : grads.blocks) {
      state.m.emplace_back(g.size(), 0.0);
      state.v.emplace_back(g.size(), 0.0);
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw Error(ErrorCode::ShapeMismatch, "optimizer state block count");
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != grads.blocks[b].size() || state.m[b].size() != params[b].size() ||
        state.v[b].size() != params[b].size()) {
      throw Error(ErrorCode::ShapeMismatch, "parameter block " + std::to_string(b) + " size");
    }
  }
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto p = params[b];
    const auto& g = grads.blocks[b];
    auto& m = state.m[b];
    auto& v = state.v[b];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

void adam_step(Network& net, const Gradients& grads, AdamState& state) {
  auto blocks = net.parameter_blocks();
  adam_step(std::span<const std::span<double>>(blocks), grads, state);
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

Evaluation evaluate(const Network& net, const std::vector<LabeledFeatures>& dataset) {
  Evaluation ev;
  ev.confusion.assign(net.num_classes, std::vector<std::size_t>(net.num_classes, 0));
  Trace tr;
  double total = 0.0;
  for (const auto& s : dataset) {
    if (s.label >= net.num_classes) throw Error(ErrorCode::LabelOutOfRange, "label " + std::to_string(s.label));
    check_input(net, s.features);
    const auto probs = softmax(run_forward(net, s.features, tr));
    const std::size_t pred = argmax(probs);
    total += loss(probs, s.label);
    ev.correct += pred == s.label;
    ev.confusion[s.label][pred] += 1;
    ++ev.samples;
  }
  ev.mean_loss = ev.samples ? total / static_cast<double>(ev.samples) : 0.0;
  return ev;
}

TrainResult train(const std::vector<LabeledFeatures>& dataset, const TrainConfig& cfg, Network net,
                  const EpochCallback& on_epoch) {
  if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "training set is empty");
  if (cfg.epochs < 1 || cfg.batch_size < 1) throw Error(ErrorCode::InvalidArgument, "epochs and batch_size must be >= 1");
  if (!(cfg.validation_fraction > 0.0 && cfg.validation_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "validation_fraction must lie in (0, 1)");
  }
  if (!(cfg.learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be positive");
  net.validate();
  for (const auto& s : dataset) {
    if (s.label >= net.num_classes) throw Error(ErrorCode::LabelOutOfRange, "label " + std::to_string(s.label));
    check_input(net, s.features);
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle(order, rng);

  const std::size_t n = dataset.size();
  std::size_t n_val = static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(n)));
  n_val = std::clamp<std::size_t>(n_val, n >= 2 ? 1 : 0, n - 1);
  std::vector<LabeledFeatures> validation;
  for (std::size_t i = 0; i < n_val; ++i) validation.push_back(dataset[order[i]]);
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());

  AdamState adam = AdamState::for_network(net, cfg.learning_rate);
  Gradients grads = Gradients::zeros_like(net);
  Trace tr;
  std::vector<double> logits;
  TrainResult result;
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(train_idx, rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < train_idx.size(); start += batch) {
      const std::size_t stop = std::min(start + batch, train_idx.size());
      for (auto& b : grads.blocks) std::fill(b.begin(), b.end(), 0.0);
      for (std::size_t k = start; k < stop; ++k) {
        const auto& s = dataset[train_idx[k]];
        loss_sum += accumulate_with(net, s.features, s.label, grads, tr, &logits);
        correct += argmax(logits) == s.label;
      }
      const double scale = 1.0 / static_cast<double>(stop - start);
      for (auto& b : grads.blocks) {
        for (double& g : b) g *= scale;
      }
      adam_step(net, grads, adam);
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.train_loss = loss_sum / static_cast<double>(train_idx.size());
    m.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_idx.size());
    if (!validation.empty()) {
      const Evaluation ev = evaluate(net, validation);
      m.validation_loss = ev.mean_loss;
      m.validation_accuracy = ev.accuracy();
    }
    result.history.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  result.network = std::move(net);
  return result;
}

// ---------------------------------------------------------------------------
// Model container: "SSNM", u32 version, u8 kind, u64 seed, u32 classes,
// u32 point layer count, u32 head layer count, then per layer
// (u32 in, u32 out, u8 activation), then all parameters as little-endian f64.

namespace {

constexpr char kMagic[4] = {'S', 'S', 'N', 'M'};
constexpr std::uint32_t kMaxDim = 1u << 16;

template <typename T>
void put(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw Error(ErrorCode::CorruptModel, "truncated model stream");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void save_model(const Network& net, std::ostream& out) {
  net.validate();
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kModelFormatVersion);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(net.kind));
  put<std::uint64_t>(out, net.seed);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(net.num_classes));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(net.point_layers.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(net.head_layers.size()));
  for (const auto* layers : {&net.point_layers, &net.head_layers}) {
    for (const auto& l : *layers) {
      put<std::uint32_t>(out, static_cast<std::uint32_t>(l.in_dim));
      put<std::uint32_t>(out, static_cast<std::uint32_t>(l.out_dim));
      put<std::uint8_t>(out, static_cast<std::uint8_t>(l.activation));
    }
  }
  for (auto block : net.parameter_blocks()) {
    for (double p : block) put<double>(out, p);
  }
  if (!out) throw Error(ErrorCode::IoError, "failed writing model");
}

Network load_model(std::istream& in) {
  char magic[4];
  if (!in.read(magic, sizeof(magic))) throw Error(ErrorCode::CorruptModel, "truncated model header");
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw Error(ErrorCode::VersionMismatch, "not a signstream model");
  const auto version = get<std::uint32_t>(in);
  if (version != kModelFormatVersion) {
    throw Error(ErrorCode::VersionMismatch, "model format version " + std::to_string(version));
  }
  Network net;
  const auto kind = get<std::uint8_t>(in);
  if (kind > static_cast<std::uint8_t>(NetworkKind::PointNetLite)) throw Error(ErrorCode::CorruptModel, "unknown network kind");
  net.kind = static_cast<NetworkKind>(kind);
  net.seed = get<std::uint64_t>(in);
  net.num_classes = get<std::uint32_t>(in);
  const auto n_point = get<std::uint32_t>(in);
  const auto n_head = get<std::uint32_t>(in);
  if (n_point > 64 || n_head > 64) throw Error(ErrorCode::CorruptModel, "implausible layer count");
  auto read_layers = [&](std::vector<DenseLayer>& layers, std::uint32_t count) {
    for (std::uint32_t i = 0; i < count; ++i) {
      const auto in_dim = get<std::uint32_t>(in);
      const auto out_dim = get<std::uint32_t>(in);
      const auto act = get<std::uint8_t>(in);
      if (in_dim == 0 || out_dim == 0 || in_dim > kMaxDim || out_dim > kMaxDim || act > 1) {
        throw Error(ErrorCode::CorruptModel, "invalid layer header");
      }
      layers.emplace_back(in_dim, out_dim, static_cast<Activation>(act));
    }
  };
  read_layers(net.point_layers, n_point);
  read_layers(net.head_layers, n_head);
  try {
    net.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::CorruptModel, e.what());
  }
  for (auto block : net.parameter_blocks()) {
    for (double& p : block) {
      p = get<double>(in);
      if (!std::isfinite(p)) throw Error(ErrorCode::CorruptModel, "non-finite parameter");
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw Error(ErrorCode::CorruptModel, "trailing bytes after parameters");
  return net;
}

void save_model(const Network& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write model " + path.string());
  save_model(net, out);
}

Network load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open model " + path.string());
  return load_model(in);
}

}  // namespace signstream::nn
