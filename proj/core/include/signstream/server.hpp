#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "signstream/gloss.hpp"
#include "signstream/nn.hpp"
#include "signstream/recognizer.hpp"
#include "signstream/retrieval.hpp"

namespace signstream::server {

inline constexpr int kProtocolVersion = 1;

// Error codes carried in {"type":"error","code":...} messages.
namespace codes {
inline constexpr std::string_view kFrameInvalid = "FRAME_INVALID";
inline constexpr std::string_view kTextTooLong = "TEXT_TOO_LONG";
inline constexpr std::string_view kStoreUnavailable = "STORE_UNAVAILABLE";
inline constexpr std::string_view kModelUnavailable = "MODEL_UNAVAILABLE";
inline constexpr std::string_view kVersionUnsupported = "VERSION_UNSUPPORTED";
inline constexpr std::string_view kSessionLimit = "SESSION_LIMIT";
inline constexpr std::string_view kMalformedMessage = "MALFORMED_MESSAGE";
inline constexpr std::string_view kUnknownType = "UNKNOWN_TYPE";
inline constexpr std::string_view kHelloRequired = "HELLO_REQUIRED";
inline constexpr std::string_view kModeMismatch = "MODE_MISMATCH";
inline constexpr std::string_view kUnknownSession = "UNKNOWN_SESSION";
inline constexpr std::string_view kProduceFailed = "PRODUCE_FAILED";
}  // namespace codes

enum class Mode { Recognition, Production, Dual };
std::string_view to_string(Mode mode);
std::optional<Mode> parse_mode(std::string_view text);

struct GatewayConfig {
  std::string bind_address = "0.0.0.0";
  std::uint16_t port = 8765;
  std::filesystem::path model_path;
  std::filesystem::path store_path;
  std::filesystem::path dictionary_path;
  std::filesystem::path word_lists_dir;  // empty: built-in lists
  std::string provider;                  // empty: taken from the store manifest
  double threshold = retrieval::kDefaultThreshold;
  int transition_frames = retrieval::kDefaultTransitionFrames;
  recognizer::RecognizerConfig recognizer;
  std::size_t max_sessions = 64;
  double frame_rate_cap = 60.0;  // frames per second per session
  std::size_t max_text_bytes = 4096;
  std::size_t inbox_capacity = 256;
  std::size_t worker_threads = 2;
  bool llm_enabled = false;
  gloss::LlmClientConfig llm;
  std::filesystem::path llm_prompt_path;
  bool verbose = false;

  // Caps positive; every configured path exists.
  void validate() const;
};

// Applies one "key = value" setting. Throws InvalidArgument on unknown keys.
void set_config_value(GatewayConfig& cfg, std::string_view key, std::string_view value);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_environment();

// SIGNSTREAM_<KEY> variables override file values (e.g. SIGNSTREAM_PORT).
void apply_env_overrides(GatewayConfig& cfg, const EnvLookup& env, std::string_view prefix = "SIGNSTREAM_");

// JSON object or key=value lines, followed by environment overrides.
GatewayConfig load_gateway_config(const std::filesystem::path& path, const EnvLookup& env = process_environment());
GatewayConfig parse_gateway_config(std::string_view text, const EnvLookup& env = {});

// Heavy, read-only resources shared by all sessions.
struct Artifacts {
  std::shared_ptr<const nn::Network> model;
  std::shared_ptr<const retrieval::PoseStore> store;
  std::shared_ptr<const recognizer::Dictionary> dictionary;
  std::shared_ptr<gloss::Translator> translator;  // must tolerate concurrent calls
  std::shared_ptr<const retrieval::EmbeddingProvider> provider;

  static Artifacts load(const GatewayConfig& cfg);
};

using Clock = std::function<std::int64_t()>;  // milliseconds
Clock steady_clock_ms();

struct SessionCounters {
  std::uint64_t frames_in = 0;
  std::uint64_t frames_dropped = 0;
  std::uint64_t degenerate_frames = 0;
  std::uint64_t letters_out = 0;
  std::uint64_t produce_requests = 0;
  std::uint64_t errors = 0;
};

struct Reply {
  std::vector<std::string> outbound;
  bool close = false;  // transport should close the connection after sending
};

// Transport-independent protocol engine. Thread-safe: distinct sessions may
// be driven from distinct threads; calls for one session are serialized
// internally.
class Gateway {
 public:
  Gateway(GatewayConfig cfg, Artifacts artifacts, Clock clock = steady_clock_ms());
  ~Gateway();

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  struct Opened {
    std::optional<std::string> session;  // empty when the session cap is reached
    Reply reply;
  };
  Opened open_session();

  Reply handle(const std::string& session, std::string_view inbound);

  // Finalizes the transcript; returns the closing transcript message for
  // recognition sessions.
  std::vector<std::string> close_session(const std::string& session);

  std::size_t session_count() const;
  std::optional<SessionCounters> counters(const std::string& session) const;
  const GatewayConfig& config() const { return cfg_; }

 private:
  struct Session;

  std::shared_ptr<Session> find(const std::string& id) const;
  Reply on_hello(Session& s, const nlohmann::json& msg);
  Reply on_frame(Session& s, const nlohmann::json& msg);
  Reply on_produce(Session& s, const nlohmann::json& msg);

  GatewayConfig cfg_;
  Artifacts artifacts_;
  Clock clock_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;
};

std::string error_message(std::string_view code, std::string_view detail);

// Cheap check used by transports to decide which queued messages may be shed.
bool is_frame_message(std::string_view text);

// Per-session inbound queue. When full, the oldest queued frame is dropped;
// control messages are never dropped.
class SessionInbox {
 public:
  explicit SessionInbox(std::size_t capacity);

  void push(std::string message);
  std::optional<std::string> pop();
  std::size_t size() const { return queue_.size(); }
  std::uint64_t dropped() const { return dropped_; }

 private:
  struct Item {
    std::string text;
    bool droppable;
  };
  std::size_t capacity_;
  std::deque<Item> queue_;
  std::uint64_t dropped_ = 0;
};

// WebSocket front end for a Gateway (text frames, one JSON message each).
class WebSocketServer {
 public:
  WebSocketServer(Gateway& gateway, const std::string& address, std::uint16_t port, std::size_t io_threads = 1);
  ~WebSocketServer();

  WebSocketServer(const WebSocketServer&) = delete;
  WebSocketServer& operator=(const WebSocketServer&) = delete;

  std::uint16_t port() const;

  // Serves on the calling thread until stop() or, if requested, SIGINT/SIGTERM.
  void run(bool handle_signals = false);
  // Serves on background threads; pair with stop() and wait().
  void start();
  // Stops accepting, sends final transcripts and closes every session.
  void stop();
  void wait();

  class Impl;

 private:
  std::shared_ptr<Impl> impl_;
};

}  // namespace signstream::server
