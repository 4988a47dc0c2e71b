#include <algorithm>
#include <cctype>
#include <cmath>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "signstream/error.hpp"
#include "signstream/server.hpp"

namespace signstream::server {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string serialize(const ordered_json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

double parse_double(std::string_view key, std::string_view text) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::InvalidArgument, "config " + std::string(key) + ": not a number: " + std::string(text));
  }
  return v;
}

template <typename Int>
Int parse_int(std::string_view key, std::string_view text) {
  Int v{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::InvalidArgument, "config " + std::string(key) + ": not an integer: " + std::string(text));
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  const std::string t = lower(std::string(text));
  if (t == "1" || t == "true" || t == "yes" || t == "on") return true;
  if (t == "0" || t == "false" || t == "no" || t == "off") return false;
  throw Error(ErrorCode::InvalidArgument, "config " + std::string(key) + ": not a boolean: " + std::string(text));
}

// Every key accepted by set_config_value; also the env override names.
constexpr std::string_view kConfigKeys[] = {
    "bind",           "port",          "model",           "store",          "dictionary",
    "word_lists",     "provider",      "threshold",       "transition_frames", "debounce_frames",
    "absence_frames", "confidence_floor", "correction",   "max_sessions",   "frame_rate_cap",
    "max_text_bytes", "inbox_capacity", "workers",        "llm_enabled",    "llm_endpoint",
    "llm_model",      "llm_prompt",    "llm_timeout_ms",  "llm_api_key_env", "llm_max_in_flight",
    "verbose",
};

std::string error_json(std::string_view code, std::string_view detail) {
  ordered_json j;
  j["type"] = "error";
  j["code"] = code;
  j["detail"] = detail;
  return serialize(j);
}

}  // namespace

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::Recognition: return "recognition";
    case Mode::Production: return "production";
    case Mode::Dual: return "dual";
  }
  return "dual";
}

std::optional<Mode> parse_mode(std::string_view text) {
  if (text == "recognition") return Mode::Recognition;
  if (text == "production") return Mode::Production;
  if (text == "dual") return Mode::Dual;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// config

void GatewayConfig::validate() const {
  recognizer.validate();
  if (max_sessions == 0) throw Error(ErrorCode::InvalidArgument, "max_sessions must be positive");
  if (!(frame_rate_cap >= 0.0)) throw Error(ErrorCode::InvalidArgument, "frame_rate_cap must be >= 0 (0 disables)");
  if (max_text_bytes == 0) throw Error(ErrorCode::InvalidArgument, "max_text_bytes must be positive");
  if (inbox_capacity == 0) throw Error(ErrorCode::InvalidArgument, "inbox_capacity must be positive");
  if (worker_threads == 0) throw Error(ErrorCode::InvalidArgument, "workers must be positive");
  if (!(threshold >= -1.0 && threshold <= 1.0)) throw Error(ErrorCode::InvalidArgument, "threshold must lie in [-1, 1]");
  if (transition_frames < 0) throw Error(ErrorCode::InvalidArgument, "transition_frames must be >= 0");
  auto check = [](const std::filesystem::path& p, std::string_view what) {
    if (!p.empty() && !std::filesystem::exists(p)) {
      throw Error(ErrorCode::IoError, std::string(what) + " not found: " + p.string());
    }
  };
  check(model_path, "model");
  check(store_path, "store");
  check(dictionary_path, "dictionary");
  check(word_lists_dir, "word_lists");
  check(llm_prompt_path, "llm_prompt");
  if (llm_enabled && llm.endpoint.empty()) throw Error(ErrorCode::InvalidArgument, "llm_enabled requires llm_endpoint");
}

void set_config_value(GatewayConfig& cfg, std::string_view key_in, std::string_view value_in) {
  const std::string key = lower(trim(key_in));
  const std::string value = trim(value_in);
  if (key == "bind") cfg.bind_address = value;
  else if (key == "port") cfg.port = parse_int<std::uint16_t>(key, value);
  else if (key == "model") cfg.model_path = value;
  else if (key == "store") cfg.store_path = value;
  else if (key == "dictionary") cfg.dictionary_path = value;
  else if (key == "word_lists") cfg.word_lists_dir = value;
  else if (key == "provider") cfg.provider = value;
  else if (key == "threshold") cfg.threshold = parse_double(key, value);
  else if (key == "transition_frames") cfg.transition_frames = parse_int<int>(key, value);
  else if (key == "debounce_frames") cfg.recognizer.debounce_frames = parse_int<int>(key, value);
  else if (key == "absence_frames") cfg.recognizer.absence_frames = parse_int<int>(key, value);
  else if (key == "confidence_floor") cfg.recognizer.confidence_floor = parse_double(key, value);
  else if (key == "correction") cfg.recognizer.correction_enabled = parse_bool(key, value);
  else if (key == "max_sessions") cfg.max_sessions = parse_int<std::size_t>(key, value);
  else if (key == "frame_rate_cap") cfg.frame_rate_cap = parse_double(key, value);
  else if (key == "max_text_bytes") cfg.max_text_bytes = parse_int<std::size_t>(key, value);
  else if (key == "inbox_capacity") cfg.inbox_capacity = parse_int<std::size_t>(key, value);
  else if (key == "workers") cfg.worker_threads = parse_int<std::size_t>(key, value);
  else if (key == "llm_enabled") cfg.llm_enabled = parse_bool(key, value);
  else if (key == "llm_endpoint") cfg.llm.endpoint = value;
  else if (key == "llm_model") cfg.llm.model_name = value;
  else if (key == "llm_prompt") cfg.llm_prompt_path = value;
  else if (key == "llm_timeout_ms") cfg.llm.timeout_ms = parse_int<int>(key, value);
  else if (key == "llm_api_key_env") cfg.llm.api_key_env = value;
  else if (key == "llm_max_in_flight") cfg.llm.max_in_flight = parse_int<std::size_t>(key, value);
  else if (key == "verbose") cfg.verbose = cfg.llm.verbose = parse_bool(key, value);
  else throw Error(ErrorCode::InvalidArgument, "unknown config key: " + key);
}

EnvLookup process_environment() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

void apply_env_overrides(GatewayConfig& cfg, const EnvLookup& env, std::string_view prefix) {
  if (!env) return;
  for (std::string_view key : kConfigKeys) {
    std::string name(prefix);
    for (char c : key) name += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (auto v = env(name)) set_config_value(cfg, key, *v);
  }
}

GatewayConfig parse_gateway_config(std::string_view text, const EnvLookup& env) {
  GatewayConfig cfg;
  const std::string body = trim(text);
  if (!body.empty() && body.front() == '{') {
    json j;
    try {
      j = json::parse(body);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::FormatError, std::string("config JSON: ") + e.what());
    }
    for (const auto& [key, value] : j.items()) {
      set_config_value(cfg, key, value.is_string() ? value.get<std::string>() : value.dump());
    }
  } else {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos) {
        throw Error(ErrorCode::FormatError, "config line " + std::to_string(line_no) + ": expected key = value");
      }
      set_config_value(cfg, t.substr(0, eq), t.substr(eq + 1));
    }
  }
  apply_env_overrides(cfg, env);
  return cfg;
}

GatewayConfig load_gateway_config(const std::filesystem::path& path, const EnvLookup& env) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  GatewayConfig cfg = parse_gateway_config(ss.str(), {});
  // Paths in the file are relative to the file; env overrides to the cwd.
  const auto base = path.parent_path();
  for (auto* p : {&cfg.model_path, &cfg.store_path, &cfg.dictionary_path, &cfg.word_lists_dir, &cfg.llm_prompt_path}) {
    if (!p->empty() && p->is_relative()) *p = base / *p;
  }
  apply_env_overrides(cfg, env);
  return cfg;
}

// ---------------------------------------------------------------------------
// artifacts

Artifacts Artifacts::load(const GatewayConfig& cfg) {
  Artifacts a;
  if (!cfg.model_path.empty()) a.model = std::make_shared<const nn::Network>(nn::load_model(cfg.model_path));
  if (!cfg.store_path.empty()) a.store = std::make_shared<const retrieval::PoseStore>(retrieval::load_store(cfg.store_path));
  if (!cfg.dictionary_path.empty()) {
    a.dictionary = std::make_shared<const recognizer::Dictionary>(recognizer::Dictionary::load(cfg.dictionary_path));
  }
  std::string provider = cfg.provider;
  if (provider.empty() && a.store) {
    provider = a.store->manifest().provider;
    if (provider.empty() || provider == "hashed") provider = "hashed:" + std::to_string(a.store->manifest().dimension);
  }
  if (!provider.empty()) a.provider = retrieval::make_provider(provider);
  if (a.store && a.provider && a.provider->dimension() != a.store->manifest().dimension) {
    throw Error(ErrorCode::DimensionMismatch, "provider dimension differs from the store's");
  }

  if (cfg.llm_enabled) {
    gloss::LlmClientConfig llm = cfg.llm;
    llm.verbose = llm.verbose || cfg.verbose;
    if (llm.prompt_template.empty()) {
      llm.prompt_template = cfg.llm_prompt_path.empty() ? gloss::default_prompt_template()
                                                        : gloss::load_prompt_template(cfg.llm_prompt_path);
    }
    auto client = std::make_shared<gloss::HttpLlmClient>(llm);
    a.translator = std::make_shared<gloss::LlmTranslator>(
        client, llm.prompt_template, [](const std::string& w) { std::cerr << "[gloss] " << w << '\n'; });
  } else {
    std::shared_ptr<const gloss::WordLists> lists;
    if (!cfg.word_lists_dir.empty()) lists = std::make_shared<const gloss::WordLists>(gloss::WordLists::load(cfg.word_lists_dir));
    a.translator = std::make_shared<gloss::RuleBasedTranslator>(lists);
  }
  return a;
}

Clock steady_clock_ms() {
  return [] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
  };
}

// ---------------------------------------------------------------------------
// gateway

struct Gateway::Session {
  std::string id;
  std::mutex mu;
  bool greeted = false;
  bool closed = false;
  Mode mode = Mode::Dual;
  recognizer::TranscriptState state;
  SessionCounters counters;
  double tokens = 0.0;
  std::int64_t last_refill_ms = 0;
};

std::string error_message(std::string_view code, std::string_view detail) { return error_json(code, detail); }

Gateway::Gateway(GatewayConfig cfg, Artifacts artifacts, Clock clock)
    : cfg_(std::move(cfg)), artifacts_(std::move(artifacts)), clock_(std::move(clock)) {
  cfg_.recognizer.validate();
  if (!clock_) clock_ = steady_clock_ms();
  if (!artifacts_.translator) artifacts_.translator = std::make_shared<gloss::RuleBasedTranslator>();
  if (artifacts_.store && !artifacts_.provider) {
    artifacts_.provider = std::make_shared<retrieval::HashedNGramProvider>(artifacts_.store->manifest().dimension);
  }
}

Gateway::~Gateway() = default;

Gateway::Opened Gateway::open_session() {
  std::lock_guard lock(mu_);
  if (sessions_.size() >= cfg_.max_sessions) {
    return {std::nullopt,
            Reply{{error_json(codes::kSessionLimit, "session cap of " + std::to_string(cfg_.max_sessions) + " reached")},
                  true}};
  }
  auto s = std::make_shared<Session>();
  s->id = "s" + std::to_string(next_id_++);
  s->tokens = cfg_.frame_rate_cap;
  s->last_refill_ms = clock_();
  sessions_.emplace(s->id, s);
  return {s->id, {}};
}

std::shared_ptr<Gateway::Session> Gateway::find(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::size_t Gateway::session_count() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

std::optional<SessionCounters> Gateway::counters(const std::string& id) const {
  auto s = find(id);
  if (!s) return std::nullopt;
  std::lock_guard lock(s->mu);
  return s->counters;
}

Reply Gateway::handle(const std::string& id, std::string_view inbound) {
  auto s = find(id);
  if (!s) return {{error_json(codes::kUnknownSession, "no open session " + id)}, true};
  std::lock_guard lock(s->mu);
  if (s->closed) return {{error_json(codes::kUnknownSession, "session closed")}, true};

  auto fail = [&](std::string_view code, std::string_view detail) {
    ++s->counters.errors;
    return Reply{{error_json(code, detail)}, false};
  };

  json msg;
  try {
    msg = json::parse(inbound);
  } catch (const json::parse_error&) {
    return fail(codes::kMalformedMessage, "not valid JSON");
  }
  if (!msg.is_object()) return fail(codes::kMalformedMessage, "message must be a JSON object");
  auto type_it = msg.find("type");
  if (type_it == msg.end() || !type_it->is_string()) return fail(codes::kMalformedMessage, "missing string \"type\"");
  const std::string type = type_it->get<std::string>();

  if (type == "hello") return on_hello(*s, msg);
  if (type != "frame" && type != "produce") {
    return fail(codes::kUnknownType, "unsupported message type \"" + type + "\"");
  }
  if (!s->greeted) return fail(codes::kHelloRequired, "send hello first");
  return type == "frame" ? on_frame(*s, msg) : on_produce(*s, msg);
}

Reply Gateway::on_hello(Session& s, const json& msg) {
  auto fail = [&](std::string_view code, std::string_view detail, bool close) {
    ++s.counters.errors;
    return Reply{{error_json(code, detail)}, close};
  };
  auto v = msg.find("protocol_version");
  if (v == msg.end() || !v->is_number_integer()) {
    return fail(codes::kMalformedMessage, "hello needs an integer protocol_version", false);
  }
  if (v->get<std::int64_t>() != kProtocolVersion) {
    return fail(codes::kVersionUnsupported,
                "protocol_version " + v->dump() + " unsupported; server speaks " + std::to_string(kProtocolVersion),
                true);
  }
  Mode mode = Mode::Dual;
  if (auto m = msg.find("mode"); m != msg.end()) {
    std::optional<Mode> parsed;
    if (m->is_string()) parsed = parse_mode(m->get<std::string>());
    if (!parsed) return fail(codes::kMalformedMessage, "mode must be recognition, production or dual", false);
    mode = *parsed;
  }
  s.greeted = true;
  s.mode = mode;

  ordered_json ack;
  ack["type"] = "config_ack";
  ack["session"] = s.id;
  ack["debounce_frames"] = cfg_.recognizer.debounce_frames;
  ack["absence_frames"] = cfg_.recognizer.absence_frames;
  ack["threshold"] = cfg_.threshold;
  return {{serialize(ack)}, false};
}

Reply Gateway::on_frame(Session& s, const json& msg) {
  auto fail = [&](std::string_view code, std::string_view detail) {
    ++s.counters.errors;
    return Reply{{error_json(code, detail)}, false};
  };
  if (s.mode == Mode::Production) return fail(codes::kModeMismatch, "frames need recognition or dual mode");
  if (!artifacts_.model) return fail(codes::kModelUnavailable, "no recognition model loaded");
  ++s.counters.frames_in;

  if (cfg_.frame_rate_cap > 0.0) {
    const std::int64_t now = clock_();
    const double elapsed = static_cast<double>(std::max<std::int64_t>(0, now - s.last_refill_ms));
    s.tokens = std::min(cfg_.frame_rate_cap, s.tokens + elapsed * cfg_.frame_rate_cap / 1000.0);
    s.last_refill_ms = now;
    if (s.tokens < 1.0) {
      ++s.counters.frames_dropped;
      return {};
    }
    s.tokens -= 1.0;
  }

  landmarks::FrameRecord record;
  try {
    record = landmarks::parse_frame_record(msg);
  } catch (const Error& e) {
    return fail(codes::kFrameInvalid, e.what());
  }

  std::optional<recognizer::Classification> observation;
  if (record.frame) {
    try {
      const auto norm = landmarks::prepare(*record.frame);
      const auto& net = *artifacts_.model;
      const auto probs = nn::softmax(nn::forward(net, landmarks::extract_features(norm, net.input_layout())));
      observation = recognizer::disambiguate(probs, norm);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateFrame) return fail(codes::kFrameInvalid, e.what());
      ++s.counters.degenerate_frames;
    }
  }

  const recognizer::Dictionary* dict = artifacts_.dictionary.get();
  auto result = recognizer::step(s.state, cfg_.recognizer, observation, dict);
  s.state = std::move(result.state);

  Reply reply;
  for (const auto& ev : result.events) {
    if (const auto* l = std::get_if<recognizer::LetterCommitted>(&ev)) {
      ++s.counters.letters_out;
      ordered_json j;
      j["type"] = "letter";
      j["char"] = std::string(1, l->letter);
      j["confidence"] = l->confidence;
      reply.outbound.push_back(serialize(j));
    } else if (const auto* w = std::get_if<recognizer::WordFinalized>(&ev)) {
      ordered_json j;
      j["type"] = "word";
      j["raw"] = w->raw;
      j["corrected"] = w->corrected;
      reply.outbound.push_back(serialize(j));
      ordered_json t;
      t["type"] = "transcript";
      t["text"] = recognizer::finalize(s.state, cfg_.recognizer, dict);
      reply.outbound.push_back(serialize(t));
    }
    // SpaceCommitted always travels with a WordFinalized; the word message covers both.
  }
  return reply;
}

Reply Gateway::on_produce(Session& s, const json& msg) {
  auto fail = [&](std::string_view code, std::string_view detail) {
    ++s.counters.errors;
    return Reply{{error_json(code, detail)}, false};
  };
  if (s.mode == Mode::Recognition) return fail(codes::kModeMismatch, "produce needs production or dual mode");
  auto text_it = msg.find("text");
  if (text_it == msg.end() || !text_it->is_string()) return fail(codes::kMalformedMessage, "produce needs string \"text\"");
  const std::string& text = text_it->get_ref<const std::string&>();
  if (text.size() > cfg_.max_text_bytes) {
    return fail(codes::kTextTooLong, std::to_string(text.size()) + " bytes exceeds the cap of " +
                                         std::to_string(cfg_.max_text_bytes));
  }
  if (!artifacts_.store) return fail(codes::kStoreUnavailable, "no pose store loaded");
  ++s.counters.produce_requests;

  retrieval::ProductionResult result;
  try {
    retrieval::ProductionOptions opts{cfg_.threshold, cfg_.transition_frames};
    result = retrieval::produce(text, *artifacts_.store, *artifacts_.translator, *artifacts_.provider, opts);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::EmptyStore) return fail(codes::kStoreUnavailable, e.what());
    return fail(codes::kProduceFailed, e.what());
  }

  ordered_json glosses = ordered_json::array();
  for (const auto& g : result.glosses) {
    ordered_json item;
    item["gloss"] = g.gloss;
    if (g.matched) {
      item["matched"] = g.matched->first;
      item["similarity"] = g.matched->second;
    } else {
      item["matched"] = nullptr;
      item["similarity"] = nullptr;
    }
    item["source"] = retrieval::to_string(g.source);
    glosses.push_back(std::move(item));
  }

  // Frames can be large; write them directly rather than through a json tree.
  std::string out = R"({"type":"pose_sequence","fps":)";
  retrieval::append_double(out, result.sequence.fps);
  out += R"(,"glosses":)";
  out += serialize(glosses);
  out += R"(,"frames":)";
  out += retrieval::frames_to_json(result.sequence.frames);
  if (result.empty_gloss) out += R"(,"empty_gloss":true)";
  out += '}';
  return {{std::move(out)}, false};
}

std::vector<std::string> Gateway::close_session(const std::string& id) {
  std::shared_ptr<Session> s;
  {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) return {};
    s = it->second;
    sessions_.erase(it);
  }
  std::lock_guard lock(s->mu);
  if (s->closed) return {};
  s->closed = true;
  if (!s->greeted || s->mode == Mode::Production) return {};
  ordered_json t;
  t["type"] = "transcript";
  t["text"] = recognizer::finalize(s->state, cfg_.recognizer, artifacts_.dictionary.get());
  return {serialize(t)};
}

// ---------------------------------------------------------------------------
// inbox

bool is_frame_message(std::string_view text) {
  const auto key = text.find("\"type\"");
  if (key == std::string_view::npos) return false;
  std::size_t i = key + 6;
  auto skip_ws = [&] {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == '\n' || text[i] == '\r')) ++i;
  };
  skip_ws();
  if (i >= text.size() || text[i] != ':') return false;
  ++i;
  skip_ws();
  return text.substr(i, 7) == "\"frame\"";
}

SessionInbox::SessionInbox(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw Error(ErrorCode::InvalidArgument, "inbox capacity must be positive");
}

void SessionInbox::push(std::string message) {
  const bool droppable = is_frame_message(message);
  if (queue_.size() >= capacity_) {
    auto oldest = std::find_if(queue_.begin(), queue_.end(), [](const Item& it) { return it.droppable; });
    if (oldest != queue_.end()) {
      queue_.erase(oldest);
      ++dropped_;
    } else if (droppable) {
      ++dropped_;
      return;
    }
  }
  queue_.push_back({std::move(message), droppable});
}

std::optional<std::string> SessionInbox::pop() {
  if (queue_.empty()) return std::nullopt;
  std::string out = std::move(queue_.front().text);
  queue_.pop_front();
  return out;
}

}  // namespace signstream::server
