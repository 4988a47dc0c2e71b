#include "signstream/gloss.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "gloss_defaults.hpp"
#include "signstream/error.hpp"

namespace signstream::gloss {

namespace {

std::vector<std::string> data_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    lines.push_back(line.substr(first, last - first + 1));
  }
  return lines;
}

std::unordered_set<std::string> word_set(std::string_view text) {
  std::unordered_set<std::string> words;
  for (auto& line : data_lines(text)) words.insert(std::move(line));
  return words;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool is_consonant(char c) { return c >= 'a' && c <= 'z' && std::string_view("aeiou").find(c) == std::string_view::npos; }

std::string to_upper(std::string s) {
  for (char& c : s) {
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
  }
  return s;
}

}  // namespace

WordLists WordLists::from_text(std::string_view articles, std::string_view copulas, std::string_view time_adverbials,
                               std::string_view place_nouns, std::string_view verbs) {
  WordLists lists;
  lists.articles = word_set(articles);
  lists.copulas = word_set(copulas);
  lists.time_adverbials = word_set(time_adverbials);
  lists.place_nouns = word_set(place_nouns);
  for (const auto& line : data_lines(verbs)) {
    std::istringstream fields(line);
    std::string lemma;
    fields >> lemma;
    lists.verbs.insert(lemma);
    std::string form;
    while (fields >> form) lists.irregular_forms.emplace(form, lemma);
  }
  return lists;
}

const WordLists& WordLists::defaults() {
  static const WordLists lists = from_text(defaults::kArticles, defaults::kCopulas, defaults::kTimeAdverbials,
                                           defaults::kPlaceNouns, defaults::kVerbs);
  return lists;
}

WordLists WordLists::load(const std::filesystem::path& dir) {
  return from_text(read_file(dir / "articles.txt"), read_file(dir / "copulas.txt"),
                   read_file(dir / "time_adverbials.txt"), read_file(dir / "place_nouns.txt"),
                   read_file(dir / "verbs.txt"));
}

std::optional<std::string> WordLists::verb_lemma(const std::string& token) const {
  if (verbs.contains(token)) return token;
  if (auto it = irregular_forms.find(token); it != irregular_forms.end()) return it->second;

  std::vector<std::string> candidates;
  auto ends_with = [&](std::string_view suffix) {
    return token.size() > suffix.size() + 1 && token.ends_with(suffix);
  };
  auto stem_variants = [&](std::string stem) {
    candidates.push_back(stem);
    const std::size_t n = stem.size();
    if (n >= 2 && stem[n - 1] == stem[n - 2] && is_consonant(stem[n - 1])) candidates.push_back(stem.substr(0, n - 1));
    candidates.push_back(stem + "e");
  };
  if (ends_with("ing")) {
    stem_variants(token.substr(0, token.size() - 3));
  } else if (ends_with("ied")) {
    candidates.push_back(token.substr(0, token.size() - 3) + "y");
  } else if (ends_with("ed")) {
    stem_variants(token.substr(0, token.size() - 2));
  } else if (ends_with("ies")) {
    candidates.push_back(token.substr(0, token.size() - 3) + "y");
  } else if (token.size() > 2 && token.ends_with('s')) {
    candidates.push_back(token.substr(0, token.size() - 1));
    if (token.ends_with("es")) candidates.push_back(token.substr(0, token.size() - 2));
  }
  for (const auto& c : candidates) {
    if (verbs.contains(c)) return c;
  }
  return std::nullopt;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    const auto first = current.find_first_not_of('-');
    if (first != std::string::npos) {
      const auto last = current.find_last_not_of('-');
      tokens.push_back(current.substr(first, last - first + 1));
    }
    current.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c >= 'A' && c <= 'Z') {
      current.push_back(static_cast<char>(c - 'A' + 'a'));
    } else if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-') {
      current.push_back(c);
    } else if (c == '\'') {
      // apostrophes join: "don't" -> "dont"
    } else if (text.substr(i, 3) == "\xE2\x80\x99") {
      i += 2;  // typographic apostrophe
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

GlossSequence translate_rule_based(std::string_view text, const WordLists& lists) {
  GlossSequence out;
  out.source_text = std::string(text);

  std::vector<std::string> words;
  for (auto& tok : tokenize(text)) {
    if (lists.articles.contains(tok) || lists.copulas.contains(tok)) continue;
    words.push_back(lists.verb_lemma(tok).value_or(std::move(tok)));
  }

  // Time adverbials go first. Done before the "to" rule so that adjacency is
  // judged on the final order, which keeps the translation idempotent.
  std::stable_partition(words.begin(), words.end(),
                        [&](const std::string& w) { return lists.time_adverbials.contains(w); });

  // Infinitive "to" and "to" before a place noun; right to left so chains collapse.
  for (std::size_t i = words.size(); i-- > 0;) {
    if (words[i] != "to" || i + 1 >= words.size()) continue;
    const std::string& next = words[i + 1];
    if (lists.verbs.contains(next) || lists.place_nouns.contains(next)) {
      words.erase(words.begin() + static_cast<std::ptrdiff_t>(i));
    }
  }

  out.tokens.reserve(words.size());
  for (auto& w : words) out.tokens.push_back(to_upper(std::move(w)));
  return out;
}

RuleBasedTranslator::RuleBasedTranslator(std::shared_ptr<const WordLists> lists) : lists_(std::move(lists)) {}

GlossSequence RuleBasedTranslator::translate(std::string_view text) {
  return translate_rule_based(text, lists_ ? *lists_ : WordLists::defaults());
}

// ---------------------------------------------------------------------------
// LLM path

void LlmClientConfig::validate() const {
  if (timeout_ms <= 0) throw Error(ErrorCode::InvalidArgument, "LLM timeout_ms must be positive");
  if (endpoint.empty()) throw Error(ErrorCode::InvalidArgument, "LLM endpoint is empty");
  if (max_in_flight == 0 || max_in_flight > 64) throw Error(ErrorCode::InvalidArgument, "LLM max_in_flight must be 1..64");
  if (prompt_template.find("{TEXT}") == std::string::npos) {
    throw Error(ErrorCode::InvalidArgument, "prompt template lacks a {TEXT} placeholder");
  }
}

std::string default_prompt_template() { return std::string(defaults::kPromptTemplate); }

std::string load_prompt_template(const std::filesystem::path& path) {
  std::string text = read_file(path);
  if (text.find("{TEXT}") == std::string::npos) {
    throw Error(ErrorCode::FormatError, "prompt template lacks a {TEXT} placeholder: " + path.string());
  }
  return text;
}

std::string render_prompt(std::string_view prompt_template, std::string_view text) {
  std::string out;
  constexpr std::string_view kPlaceholder = "{TEXT}";
  std::size_t pos = 0;
  while (true) {
    const auto hit = prompt_template.find(kPlaceholder, pos);
    out.append(prompt_template.substr(pos, hit == std::string_view::npos ? std::string_view::npos : hit - pos));
    if (hit == std::string_view::npos) break;
    out.append(text);
    pos = hit + kPlaceholder.size();
  }
  return out;
}

std::vector<std::string> parse_llm_reply(std::string_view reply) {
  constexpr std::string_view kWs = " \t\r\n";
  const auto first = reply.find_first_not_of(kWs);
  if (first == std::string_view::npos) throw Error(ErrorCode::MalformedReply, "empty reply");
  const auto last = reply.find_last_not_of(kWs);
  const std::string_view body = reply.substr(first, last - first + 1);
  for (char c : body) {
    const bool ok = (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == ' ';
    if (!ok) throw Error(ErrorCode::MalformedReply, "reply contains characters outside [A-Z0-9- ]");
  }
  std::vector<std::string> tokens;
  std::istringstream in{std::string(body)};
  std::string tok;
  while (in >> tok) tokens.push_back(tok);
  return tokens;
}

LlmTranslation translate_via_llm(std::string_view text, LlmClient& client, std::string_view prompt_template,
                                 const WordLists& lists) {
  try {
    const std::string reply = client.complete(render_prompt(prompt_template, text));
    return {GlossSequence{parse_llm_reply(reply), std::string(text)}, Provenance::Llm, std::nullopt};
  } catch (const std::exception& e) {
    return {translate_rule_based(text, lists), Provenance::RuleBasedFallback,
            std::string("LLM translation failed, using rule-based gloss: ") + e.what()};
  }
}

LlmTranslator::LlmTranslator(std::shared_ptr<LlmClient> client, std::string prompt_template, WarningSink on_warning)
    : client_(std::move(client)), prompt_template_(std::move(prompt_template)), on_warning_(std::move(on_warning)) {
  if (!client_) throw Error(ErrorCode::InvalidArgument, "LlmTranslator needs a client");
}

GlossSequence LlmTranslator::translate(std::string_view text) {
  auto result = translate_via_llm(text, *client_, prompt_template_);
  if (result.warning && on_warning_) on_warning_(*result.warning);
  return std::move(result.gloss);
}

}  // namespace signstream::gloss
