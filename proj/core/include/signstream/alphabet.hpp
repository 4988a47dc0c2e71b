#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace signstream {

// Static fingerspelling letters. J and Z involve motion and are not
// classified from single frames.
inline constexpr std::string_view kRecognitionAlphabet = "ABCDEFGHIKLMNOPQRSTUVWXY";
inline constexpr std::size_t kNumClasses = kRecognitionAlphabet.size();

static_assert(kNumClasses == 24);

constexpr char class_to_letter(std::size_t index) { return kRecognitionAlphabet.at(index); }

constexpr std::optional<std::size_t> letter_to_class(char letter) {
  auto pos = kRecognitionAlphabet.find(letter);
  if (pos == std::string_view::npos) return std::nullopt;
  return pos;
}

constexpr bool is_recognizable_letter(char letter) { return letter_to_class(letter).has_value(); }

}  // namespace signstream
