// HTTP-backed hooks: LLM gloss translation, remote embeddings, sentence
// correction. None of these are required for offline operation.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>
#include <iostream>

#include <nlohmann/json.hpp>

#include "signstream/error.hpp"
#include "signstream/gloss.hpp"
#include "signstream/recognizer.hpp"
#include "signstream/retrieval.hpp"

namespace signstream {

namespace {

using nlohmann::json;

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::InvalidArgument, "URL lacks a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string post_json(const std::string& url, const std::string& body, int timeout_ms,
                      const httplib::Headers& headers = {}) {
  const SplitUrl parts = split_url(url);
  httplib::Client client(parts.origin);
  const auto sec = timeout_ms / 1000;
  const auto usec = (timeout_ms % 1000) * 1000;
  client.set_connection_timeout(sec, usec);
  client.set_read_timeout(sec, usec);
  client.set_write_timeout(sec, usec);
  auto res = client.Post(parts.path, headers, body, "application/json");
  if (!res) {
    const auto err = res.error();
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
      throw Error(ErrorCode::Timeout, url + ": " + httplib::to_string(err));
    }
    throw Error(ErrorCode::RemoteFailure, url + ": " + httplib::to_string(err));
  }
  if (res->status != 200) throw Error(ErrorCode::RemoteFailure, url + ": HTTP " + std::to_string(res->status));
  return res->body;
}

json parse_reply(const std::string& body, const std::string& url) {
  try {
    return json::parse(body);
  } catch (const json::parse_error&) {
    throw Error(ErrorCode::MalformedReply, url + ": reply is not JSON");
  }
}

}  // namespace

namespace gloss {

HttpLlmClient::HttpLlmClient(LlmClientConfig cfg)
    : cfg_(std::move(cfg)), in_flight_(static_cast<std::ptrdiff_t>(cfg_.max_in_flight)) {
  cfg_.validate();
}

std::string HttpLlmClient::complete(const std::string& prompt) {
  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<64>& s;
    ~Release() { s.release(); }
  } release{in_flight_};

  const json request = {{"model", cfg_.model_name},
                        {"temperature", 0},
                        {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})}};
  httplib::Headers headers;
  if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key) {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  if (cfg_.verbose) {
    std::cerr << "[llm] POST " << cfg_.endpoint << " (Authorization: " << (headers.empty() ? "none" : "Bearer ***")
              << ")\n[llm] request: " << request.dump() << '\n';
  }
  const std::string body = post_json(cfg_.endpoint, request.dump(), cfg_.timeout_ms, headers);
  if (cfg_.verbose) std::cerr << "[llm] response: " << body << '\n';
  const json reply = parse_reply(body, cfg_.endpoint);
  try {
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::MalformedReply, "completion reply lacks choices[0].message.content");
  }
}

}  // namespace gloss

namespace retrieval {

RemoteProvider::RemoteProvider(std::string url, std::size_t dimension, int timeout_ms)
    : url_(std::move(url)), dimension_(dimension), timeout_ms_(timeout_ms) {
  if (dimension_ == 0 || timeout_ms_ <= 0) throw Error(ErrorCode::InvalidArgument, "remote provider dimension/timeout");
}

EmbeddingVector RemoteProvider::embed(std::string_view text) const {
  std::string body;
  try {
    body = post_json(url_, json{{"input", text}}.dump(), timeout_ms_);
  } catch (const Error& e) {
    throw Error(ErrorCode::RemoteFailure, e.what());
  }
  try {
    auto values = parse_reply(body, url_).at("embedding").get<std::vector<double>>();
    if (values.size() != dimension_) throw Error(ErrorCode::DimensionMismatch, "remote embedding dimension");
    return unit_normalized(std::move(values));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::RemoteFailure, std::string("remote embedding reply: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::DimensionMismatch) throw;
    throw Error(ErrorCode::RemoteFailure, e.what());
  }
}

}  // namespace retrieval

namespace recognizer {

HttpSentenceCorrector::HttpSentenceCorrector(std::string url, int timeout_ms)
    : url_(std::move(url)), timeout_ms_(timeout_ms) {
  if (timeout_ms_ <= 0) throw Error(ErrorCode::InvalidArgument, "corrector timeout must be positive");
}

std::string HttpSentenceCorrector::correct(std::string_view sentence) {
  const std::string body = post_json(url_, json{{"text", sentence}}.dump(), timeout_ms_);
  try {
    return parse_reply(body, url_).at("text").get<std::string>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::MalformedReply, "corrector reply lacks \"text\"");
  }
}

}  // namespace recognizer

}  // namespace signstream
