#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace signstream::gloss {

struct GlossSequence {
  std::vector<std::string> tokens;  // uppercase A-Z, 0-9, '-'
  std::string source_text;

  friend bool operator==(const GlossSequence&, const GlossSequence&) = default;
};

// Closed word lists driving the rule-based translator. Shipped as editable
// data files; the defaults are compiled in from the same files.
struct WordLists {
  std::unordered_set<std::string> articles;
  std::unordered_set<std::string> copulas;
  std::unordered_set<std::string> time_adverbials;
  std::unordered_set<std::string> place_nouns;
  std::unordered_set<std::string> verbs;                         // lemmas
  std::unordered_map<std::string, std::string> irregular_forms;  // form -> lemma

  static const WordLists& defaults();
  // Reads articles.txt, copulas.txt, time_adverbials.txt, place_nouns.txt and
  // verbs.txt from `dir`.
  static WordLists load(const std::filesystem::path& dir);
  static WordLists from_text(std::string_view articles, std::string_view copulas, std::string_view time_adverbials,
                             std::string_view place_nouns, std::string_view verbs);

  // Lemma for a lowercase token, if it is a form of a listed verb.
  std::optional<std::string> verb_lemma(const std::string& token) const;
};

// Lowercased word tokens; apostrophes are removed, any other character
// outside [a-z0-9-] separates tokens.
std::vector<std::string> tokenize(std::string_view text);

GlossSequence translate_rule_based(std::string_view text, const WordLists& lists = WordLists::defaults());

// Abstract text translator so production can run on either path.
class Translator {
 public:
  virtual ~Translator() = default;
  virtual GlossSequence translate(std::string_view text) = 0;
};

class RuleBasedTranslator final : public Translator {
 public:
  explicit RuleBasedTranslator(std::shared_ptr<const WordLists> lists = nullptr);
  GlossSequence translate(std::string_view text) override;

 private:
  std::shared_ptr<const WordLists> lists_;
};

struct LlmClientConfig {
  std::string endpoint;    // e.g. https://api.openai.com/v1/chat/completions
  std::string model_name = "gpt-4o";
  std::string prompt_template;  // contains {TEXT}
  int timeout_ms = 10000;
  std::string api_key_env = "OPENAI_API_KEY";
  std::size_t max_in_flight = 4;
  bool verbose = false;

  void validate() const;
};

std::string default_prompt_template();
std::string load_prompt_template(const std::filesystem::path& path);
std::string render_prompt(std::string_view prompt_template, std::string_view text);

// Sends one prompt, returns the raw completion text. Implementations throw
// signstream::Error with Timeout or RemoteFailure.
class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string complete(const std::string& prompt) = 0;
};

// Chat-completion style HTTP(S) client.
class HttpLlmClient final : public LlmClient {
 public:
  explicit HttpLlmClient(LlmClientConfig cfg);
  std::string complete(const std::string& prompt) override;

 private:
  LlmClientConfig cfg_;
  std::counting_semaphore<64> in_flight_;
};

// Uppercase tokens from a reply; throws MalformedReply on any character
// outside [A-Z0-9- ] after trimming or on an empty reply.
std::vector<std::string> parse_llm_reply(std::string_view reply);

enum class Provenance { Llm, RuleBasedFallback };

struct LlmTranslation {
  GlossSequence gloss;
  Provenance provenance = Provenance::Llm;
  std::optional<std::string> warning;
};

// Never throws on client failure: falls back to the rule-based path.
LlmTranslation translate_via_llm(std::string_view text, LlmClient& client, std::string_view prompt_template,
                                 const WordLists& lists = WordLists::defaults());

class LlmTranslator final : public Translator {
 public:
  using WarningSink = std::function<void(const std::string&)>;

  LlmTranslator(std::shared_ptr<LlmClient> client, std::string prompt_template, WarningSink on_warning = {});
  GlossSequence translate(std::string_view text) override;

 private:
  std::shared_ptr<LlmClient> client_;
  std::string prompt_template_;
  WarningSink on_warning_;
};

}  // namespace signstream::gloss
