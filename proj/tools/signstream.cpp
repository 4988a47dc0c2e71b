// signstream: serve the gateway, train/evaluate recognizers, build pose
// stores, and run the offline pipelines from the command line.
#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>

#include <nlohmann/json.hpp>

#include "signstream/alphabet.hpp"
#include "signstream/error.hpp"
#include "signstream/gloss.hpp"
#include "signstream/landmarks.hpp"
#include "signstream/nn.hpp"
#include "signstream/recognizer.hpp"
#include "signstream/retrieval.hpp"
#include "signstream/server.hpp"
#include "signstream/synthetic.hpp"

namespace ss = signstream;
namespace fs = std::filesystem;

namespace {

std::vector<ss::nn::LabeledFeatures> load_features(const fs::path& data, ss::landmarks::FeatureLayout layout) {
  const auto samples = ss::landmarks::load_dataset(data);
  std::vector<ss::nn::LabeledFeatures> out;
  out.reserve(samples.size());
  std::size_t skipped = 0;
  for (const auto& s : samples) {
    const auto cls = ss::letter_to_class(s.label);
    if (!cls) throw ss::Error(ss::ErrorCode::LabelOutOfRange, std::string("label '") + s.label + "' is not a static letter");
    try {
      out.push_back({ss::landmarks::extract_features(ss::landmarks::prepare(s.frame), layout), *cls});
    } catch (const ss::Error& e) {
      if (e.code() != ss::ErrorCode::DegenerateFrame) throw;
      ++skipped;
    }
  }
  if (skipped) std::cerr << "skipped " << skipped << " degenerate frame(s)\n";
  return out;
}

int cmd_serve(const fs::path& config_path, std::uint16_t port_override) {
  auto cfg = config_path.empty() ? ss::server::GatewayConfig{} : ss::server::load_gateway_config(config_path);
  if (config_path.empty()) ss::server::apply_env_overrides(cfg, ss::server::process_environment());
  if (port_override) cfg.port = port_override;
  cfg.validate();
  auto artifacts = ss::server::Artifacts::load(cfg);
  std::cerr << "model: " << (artifacts.model ? cfg.model_path.string() : "none")
            << "\nstore: " << (artifacts.store ? cfg.store_path.string() : "none")
            << "\ndictionary: " << (artifacts.dictionary ? cfg.dictionary_path.string() : "none")
            << "\ntranslator: " << (cfg.llm_enabled ? "llm" : "rule-based") << '\n';
  ss::server::Gateway gateway(cfg, std::move(artifacts));
  ss::server::WebSocketServer ws(gateway, cfg.bind_address, cfg.port, 1);
  std::cerr << "listening on ws://" << cfg.bind_address << ':' << ws.port() << std::endl;
  ws.run(true);
  std::cerr << "stopped\n";
  return 0;
}

int cmd_train(const fs::path& data, const fs::path& out, const std::string& kind_name, int epochs, int batch,
              std::uint64_t seed, double lr, double val_fraction, bool quiet) {
  const auto kind = kind_name == "dense" ? ss::nn::NetworkKind::DenseBaseline : ss::nn::NetworkKind::PointNetLite;
  auto net = ss::nn::make_network(kind, seed);
  const auto features = load_features(data, net.input_layout());
  ss::nn::TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = batch;
  cfg.seed = seed;
  cfg.learning_rate = lr;
  cfg.validation_fraction = val_fraction;
  auto report = [quiet](const ss::nn::EpochMetrics& m) {
    if (quiet) return;
    std::printf("epoch %3d  loss %.4f  acc %.4f  val_loss %.4f  val_acc %.4f\n", m.epoch, m.train_loss,
                m.train_accuracy, m.validation_loss, m.validation_accuracy);
    std::fflush(stdout);
  };
  auto result = ss::nn::train(features, cfg, std::move(net), report);
  ss::nn::save_model(result.network, out);
  if (!result.history.empty()) {
    std::printf("final validation accuracy %.4f\n", result.history.back().validation_accuracy);
  }
  std::printf("wrote %s (%zu parameters)\n", out.string().c_str(), result.network.parameter_count());
  return 0;
}

int cmd_evaluate(const fs::path& data, const fs::path& model_path, bool confusion) {
  const auto net = ss::nn::load_model(model_path);
  const auto features = load_features(data, net.input_layout());
  const auto ev = ss::nn::evaluate(net, features);
  std::printf("samples %zu  accuracy %.4f  mean_loss %.4f\n", ev.samples, ev.accuracy(), ev.mean_loss);
  if (confusion) {
    std::printf("   ");
    for (char c : ss::kRecognitionAlphabet) std::printf("%4c", c);
    std::printf("\n");
    for (std::size_t t = 0; t < ev.confusion.size(); ++t) {
      std::printf("%c  ", ss::class_to_letter(t));
      for (auto n : ev.confusion[t]) std::printf("%4zu", n);
      std::printf("\n");
    }
  }
  return 0;
}

int cmd_build_posedb(const fs::path& entries, const fs::path& letters, const fs::path& out, const std::string& provider) {
  auto p = ss::retrieval::make_provider(provider);
  const auto store = ss::retrieval::build_store(entries, letters, *p);
  ss::retrieval::save_store(store, out);
  std::printf("wrote %s: %zu entries, %zu letters, dim %zu, layout %s (%zu points), %g fps\n", out.string().c_str(),
              store.entries().size(), store.letter_poses().size(), store.manifest().dimension,
              store.manifest().layout.name.c_str(), store.manifest().layout.points, store.manifest().fps);
  return 0;
}

int cmd_translate(const std::string& text, const fs::path& store_path, double threshold, int transition,
                  const std::string& provider_spec, const fs::path& out) {
  // Same store/provider resolution as the server: the manifest's provider unless overridden.
  ss::server::GatewayConfig cfg;
  cfg.store_path = store_path;
  cfg.provider = provider_spec;
  const auto artifacts = ss::server::Artifacts::load(cfg);
  const auto& store = *artifacts.store;
  const auto& provider = artifacts.provider;
  ss::gloss::RuleBasedTranslator translator;
  const auto result = ss::retrieval::produce(text, store, translator, *provider, {threshold, transition});
  if (result.empty_gloss) std::printf("empty gloss\n");
  for (const auto& g : result.glosses) {
    std::printf("%-14s %-13s", g.gloss.c_str(), std::string(ss::retrieval::to_string(g.source)).c_str());
    if (g.matched) std::printf(" %s (%.4f)", g.matched->first.c_str(), g.matched->second);
    std::printf("\n");
  }
  std::printf("%zu frames at %g fps\n", result.sequence.frames.size(), result.sequence.fps);
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) throw ss::Error(ss::ErrorCode::IoError, "cannot write " + out.string());
    std::string body = R"({"fps":)";
    ss::retrieval::append_double(body, result.sequence.fps);
    body += R"(,"frames":)";
    body += ss::retrieval::frames_to_json(result.sequence.frames);
    body += "}\n";
    f << body;
  }
  return 0;
}

// Replays a frame log through the same code path the server uses.
int cmd_recognize_file(const fs::path& frames, const fs::path& model, const fs::path& dictionary, int debounce,
                       int absence, bool events) {
  ss::server::GatewayConfig cfg;
  cfg.model_path = model;
  cfg.dictionary_path = dictionary;
  cfg.recognizer.debounce_frames = debounce;
  cfg.recognizer.absence_frames = absence;
  cfg.frame_rate_cap = 0.0;
  cfg.validate();
  ss::server::Gateway gateway(cfg, ss::server::Artifacts::load(cfg), [] { return std::int64_t{0}; });
  const auto session = *gateway.open_session().session;
  gateway.handle(session, R"({"type":"hello","protocol_version":1,"mode":"recognition"})");

  std::ifstream in(frames);
  if (!in) throw ss::Error(ss::ErrorCode::IoError, "cannot open " + frames.string());
  std::string line;
  std::size_t line_no = 0;
  auto emit = [&](const std::string& msg) {
    if (events) {
      std::cout << msg << '\n';
      return;
    }
    const auto j = nlohmann::json::parse(msg);
    const auto type = j.at("type").get<std::string>();
    if (type == "error") std::cerr << "line " << line_no << ": " << j.at("detail").get<std::string>() << '\n';
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      std::cerr << "line " << line_no << ": not JSON\n";
      continue;
    }
    if (j.is_object() && !j.contains("type")) j["type"] = "frame";
    for (const auto& msg : gateway.handle(session, j.dump()).outbound) emit(msg);
  }
  const auto closing = gateway.close_session(session);
  for (const auto& msg : closing) {
    if (events) {
      std::cout << msg << '\n';
    } else {
      std::cout << nlohmann::json::parse(msg).at("text").get<std::string>() << '\n';
    }
  }
  return 0;
}

const std::vector<std::string> kDemoGlosses = {
    "HELLO", "THANK-YOU", "STORE", "SHOP", "GO", "HOME", "TOMORROW", "YESTERDAY", "EAT", "DRINK", "WATER",
    "HELP", "PLEASE", "NAME", "WHAT", "WHERE", "SCHOOL", "WORK", "FRIEND", "FAMILY", "LEARN", "SIGN",
    "GOOD", "MORNING", "NIGHT", "YES", "NO", "LIKE", "WANT", "NEED", "I", "YOU", "BOOK", "READ",
};

int cmd_synth(const fs::path& dir, std::size_t per_class, double sigma, std::uint64_t seed, std::size_t points) {
  fs::create_directories(dir);
  ss::landmarks::save_dataset(dir / "landmarks.jsonl", ss::synthetic::make_dataset(per_class, sigma, seed));

  // A short fingerspelled "HELLO" followed by a pause, as a frame log.
  {
    std::ofstream log(dir / "hello_frames.jsonl");
    std::mt19937_64 rng(seed + 1);
    std::int64_t t = 0;
    auto write = [&](std::optional<char> letter) {
      nlohmann::json rec;
      if (letter) {
        auto frame = ss::synthetic::sample_hand(*letter, rng);
        frame.timestamp_ms = t;
        rec = ss::landmarks::to_json(frame);
      } else {
        rec = {{"landmarks", nullptr}, {"handedness", "right"}, {"t", t}};
      }
      log << rec.dump() << '\n';
      t += 33;
    };
    for (char c : std::string("HELLO")) {
      for (int i = 0; i < 8; ++i) write(c);
      for (int i = 0; i < 3; ++i) write(std::nullopt);
    }
    for (int i = 0; i < 12; ++i) write(std::nullopt);
  }

  auto clip_line = [&](std::string_view key_name, const std::string& key, std::size_t frames) {
    const auto seq = ss::synthetic::pose_clip(key, frames, points);
    std::string line = "{\"" + std::string(key_name) + "\":" + nlohmann::json(key).dump() + ",\"fps\":";
    ss::retrieval::append_double(line, seq.fps);
    line += ",\"frames\":" + ss::retrieval::frames_to_json(seq.frames) + "}\n";
    return line;
  };
  {
    std::ofstream entries(dir / "entries.jsonl");
    for (const auto& g : kDemoGlosses) entries << clip_line("gloss", g, 24);
  }
  {
    std::ofstream letters(dir / "letters.jsonl");
    for (char c = 'A'; c <= 'Z'; ++c) letters << clip_line("letter", std::string(1, c), 10);
  }
  std::printf("wrote landmarks.jsonl (%zu samples), hello_frames.jsonl, entries.jsonl (%zu glosses), letters.jsonl to %s\n",
              per_class * ss::kNumClasses, kDemoGlosses.size(), dir.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"signstream: fingerspelling recognition and sign production"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "signstream 0.1.0");

  auto* serve = app.add_subcommand("serve", "Run the WebSocket gateway");
  fs::path serve_config;
  std::uint16_t serve_port = 0;
  serve->add_option("--config", serve_config, "Config file (key=value or JSON)")->envname("SIGNSTREAM_CONFIG");
  serve->add_option("--port", serve_port, "Override the configured port (0 keeps it)");

  auto* train = app.add_subcommand("train", "Train a letter classifier");
  fs::path train_data, train_out;
  std::string train_kind = "pointnet";
  int train_epochs = 100, train_batch = 64;
  std::uint64_t train_seed = 0;
  double train_lr = 0.0005, train_val = 0.2;
  bool train_quiet = false;
  train->add_option("--data", train_data, "Labelled landmark jsonl")->required()->envname("SIGNSTREAM_DATA");
  train->add_option("--out", train_out, "Model output path")->required()->envname("SIGNSTREAM_OUT");
  train->add_option("--kind", train_kind, "pointnet or dense")
      ->check(CLI::IsMember({"pointnet", "dense"}))
      ->envname("SIGNSTREAM_KIND");
  train->add_option("--epochs", train_epochs)->check(CLI::PositiveNumber)->envname("SIGNSTREAM_EPOCHS");
  train->add_option("--batch", train_batch)->check(CLI::PositiveNumber)->envname("SIGNSTREAM_BATCH");
  train->add_option("--seed", train_seed)->envname("SIGNSTREAM_SEED");
  train->add_option("--lr", train_lr, "Adam learning rate")->check(CLI::PositiveNumber)->envname("SIGNSTREAM_LR");
  train->add_option("--validation", train_val, "Held-out fraction")->check(CLI::Range(0.0, 0.9));
  train->add_flag("--quiet", train_quiet, "Only print the summary");

  auto* eval = app.add_subcommand("evaluate", "Accuracy of a model on a labelled dataset");
  fs::path eval_data, eval_model;
  bool eval_confusion = false;
  eval->add_option("--data", eval_data)->required()->envname("SIGNSTREAM_DATA");
  eval->add_option("--model", eval_model)->required()->envname("SIGNSTREAM_MODEL");
  eval->add_flag("--confusion", eval_confusion, "Print the confusion matrix");

  auto* build = app.add_subcommand("build-posedb", "Build a pose store directory");
  fs::path build_entries, build_letters, build_out;
  std::string build_provider = "hashed";
  build->add_option("--entries", build_entries)->required()->check(CLI::ExistingFile)->envname("SIGNSTREAM_ENTRIES");
  build->add_option("--letters", build_letters)->required()->check(CLI::ExistingFile)->envname("SIGNSTREAM_LETTERS");
  build->add_option("--out", build_out)->required()->envname("SIGNSTREAM_OUT");
  build->add_option("--provider", build_provider, "hashed[:dim] or file:<path>")->envname("SIGNSTREAM_PROVIDER");

  auto* translate = app.add_subcommand("translate", "Text to gloss to stitched pose sequence");
  std::string tr_text, tr_provider;
  fs::path tr_store, tr_out;
  double tr_threshold = ss::retrieval::kDefaultThreshold;
  int tr_transition = ss::retrieval::kDefaultTransitionFrames;
  translate->add_option("--text", tr_text)->required()->envname("SIGNSTREAM_TEXT");
  translate->add_option("--store", tr_store)->required()->check(CLI::ExistingDirectory)->envname("SIGNSTREAM_STORE");
  translate->add_option("--threshold", tr_threshold)->check(CLI::Range(-1.0, 1.0))->envname("SIGNSTREAM_THRESHOLD");
  translate->add_option("--transition-frames", tr_transition)->check(CLI::NonNegativeNumber)
      ->envname("SIGNSTREAM_TRANSITION_FRAMES");
  translate->add_option("--provider", tr_provider, "Defaults to the store's provider")->envname("SIGNSTREAM_PROVIDER");
  translate->add_option("--out", tr_out, "Write {fps, frames} JSON here")->envname("SIGNSTREAM_OUT");

  auto* recog = app.add_subcommand("recognize-file", "Offline replay of a frame log");
  fs::path rf_frames, rf_model, rf_dict;
  int rf_debounce = 5, rf_absence = 10;
  bool rf_events = false;
  recog->add_option("--frames", rf_frames, "jsonl of {t, handedness, landmarks}")->required()->check(CLI::ExistingFile)
      ->envname("SIGNSTREAM_FRAMES");
  recog->add_option("--model", rf_model)->required()->check(CLI::ExistingFile)->envname("SIGNSTREAM_MODEL");
  recog->add_option("--dictionary", rf_dict)->check(CLI::ExistingFile)->envname("SIGNSTREAM_DICTIONARY");
  recog->add_option("--debounce-frames", rf_debounce)->check(CLI::PositiveNumber)->envname("SIGNSTREAM_DEBOUNCE_FRAMES");
  recog->add_option("--absence-frames", rf_absence)->check(CLI::PositiveNumber)->envname("SIGNSTREAM_ABSENCE_FRAMES");
  recog->add_flag("--events", rf_events, "Print every outbound message instead of just the transcript");

  auto* synth = app.add_subcommand("synth", "Write synthetic demo data (landmarks, frame log, pose clips)");
  fs::path sy_dir;
  std::size_t sy_per_class = 200, sy_points = 75;
  double sy_sigma = 0.02;
  std::uint64_t sy_seed = 7;
  synth->add_option("--out-dir", sy_dir)->required();
  synth->add_option("--per-class", sy_per_class)->check(CLI::PositiveNumber);
  synth->add_option("--sigma", sy_sigma)->check(CLI::NonNegativeNumber);
  synth->add_option("--seed", sy_seed);
  synth->add_option("--points", sy_points, "Skeleton points per pose frame")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) return cmd_serve(serve_config, serve_port);
    if (*train) {
      return cmd_train(train_data, train_out, train_kind, train_epochs, train_batch, train_seed, train_lr, train_val,
                       train_quiet);
    }
    if (*eval) return cmd_evaluate(eval_data, eval_model, eval_confusion);
    if (*build) return cmd_build_posedb(build_entries, build_letters, build_out, build_provider);
    if (*translate) return cmd_translate(tr_text, tr_store, tr_threshold, tr_transition, tr_provider, tr_out);
    if (*recog) return cmd_recognize_file(rf_frames, rf_model, rf_dict, rf_debounce, rf_absence, rf_events);
    if (*synth) return cmd_synth(sy_dir, sy_per_class, sy_sigma, sy_seed, sy_points);
  } catch (const ss::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
