#include "bokeh/control.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <optional>

namespace bokeh {

void BokehControl::validate() const {
  if (!std::isfinite(intensity) || intensity < 0.0)
    throw std::invalid_argument("blur intensity must be finite and >= 0");
  if (focus == FocusRegion::AtDisparity && !(disparity >= 0.0 && disparity <= 1.0))
    throw std::invalid_argument("focus disparity must lie in [0,1]");
}

std::string_view region_name(FocusRegion focus) {
  switch (focus) {
    case FocusRegion::Foreground: return "foreground";
    case FocusRegion::Middle: return "middle";
    case FocusRegion::Background: return "background";
    case FocusRegion::AtDisparity: return "disparity";
  }
  return "?";
}

namespace {

enum class TokenKind { Word, Number, End };

struct Token {
  TokenKind kind;
  std::string text;  // lowercased for words
  std::size_t pos;
  double value = 0.0;
};

bool number_start(char c) {
  return std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '+';
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = i;
      std::string word;
      while (i < text.size() && std::isalpha(static_cast<unsigned char>(text[i])))
        word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[i++]))));
      tokens.push_back({TokenKind::Word, std::move(word), start});
    } else if (number_start(c)) {
      const std::size_t start = i;
      std::size_t end = i;
      auto digit_or = [&](std::size_t k) {
        const char ch = text[k];
        return std::isdigit(static_cast<unsigned char>(ch)) || ch == '.' || ch == 'e' ||
               ch == 'E' || ch == '-' || ch == '+';
      };
      while (end < text.size() && digit_or(end)) ++end;
      std::string_view lexeme = text.substr(start, end - start);
      // from_chars rejects a leading '+'
      std::string_view body = lexeme;
      if (!body.empty() && body.front() == '+') body.remove_prefix(1);
      double value = 0.0;
      const auto [ptr, ec] = std::from_chars(body.data(), body.data() + body.size(), value);
      if (ec != std::errc() || ptr != body.data() + body.size() || body.empty() ||
          body.front() == '+')
        throw PromptError("malformed number '" + std::string(lexeme) + "'", start);
      if (!std::isfinite(value))
        throw PromptError("number is not finite", start);
      tokens.push_back({TokenKind::Number, std::string(lexeme), start, value});
      i = end;
    } else {
      throw PromptError(std::string("unexpected character '") + c + "'", i);
    }
  }
  tokens.push_back({TokenKind::End, "", text.size()});
  return tokens;
}

class PromptParser {
 public:
  explicit PromptParser(std::string_view text) : tokens_(tokenize(text)) {}

  BokehControl parse() {
    BokehControl control;
    parse_focus(control);
    control.intensity = kDefaultIntensity;
    if (peek_word("with")) parse_intensity(control);
    if (current().kind != TokenKind::End)
      throw PromptError("unexpected trailing input '" + current().text + "'", current().pos);
    return control;
  }

 private:
  const Token& current() const { return tokens_[index_]; }
  bool peek_word(std::string_view word) const {
    return current().kind == TokenKind::Word && current().text == word;
  }

  void expect_word(std::string_view word) {
    if (!peek_word(word)) {
      const std::string got = current().kind == TokenKind::End ? "end of input"
                                                               : "'" + current().text + "'";
      throw PromptError("expected '" + std::string(word) + "' but found " + got, current().pos);
    }
    ++index_;
  }

  const Token& expect_number() {
    if (current().kind != TokenKind::Number) {
      const std::string got = current().kind == TokenKind::End ? "end of input"
                                                               : "'" + current().text + "'";
      throw PromptError("expected a number but found " + got, current().pos);
    }
    return tokens_[index_++];
  }

  void parse_focus(BokehControl& control) {
    expect_word("focus");
    if (peek_word("on")) {
      ++index_;
      expect_word("the");
      const Token& region = current();
      if (region.kind == TokenKind::Word && region.text == "foreground") {
        control.focus = FocusRegion::Foreground;
      } else if (region.kind == TokenKind::Word && region.text == "middle") {
        control.focus = FocusRegion::Middle;
      } else if (region.kind == TokenKind::Word && region.text == "background") {
        control.focus = FocusRegion::Background;
      } else {
        throw PromptError("unknown focus region '" + region.text +
                              "' (expected foreground, middle or background)",
                          region.pos);
      }
      ++index_;
    } else if (peek_word("at")) {
      ++index_;
      expect_word("disparity");
      const Token& number = expect_number();
      if (!(number.value >= 0.0 && number.value <= 1.0))
        throw PromptError("focus disparity must lie in [0,1]", number.pos);
      control.focus = FocusRegion::AtDisparity;
      control.disparity = number.value;
    } else {
      throw PromptError("expected 'on' or 'at' after 'focus'", current().pos);
    }
  }

  void parse_intensity(BokehControl& control) {
    expect_word("with");
    expect_word("blur");
    expect_word("intensity");
    expect_word("of");
    const Token& number = expect_number();
    if (number.value < 0.0)
      throw PromptError("blur intensity must be >= 0", number.pos);
    control.intensity = number.value;
  }

  std::vector<Token> tokens_;
  std::size_t index_ = 0;
};

std::string shortest(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

}  // namespace

BokehControl parse_prompt(std::string_view text) { return PromptParser(text).parse(); }

std::string format_prompt(const BokehControl& control) {
  control.validate();
  std::string out;
  if (control.focus == FocusRegion::AtDisparity)
    out = "focus at disparity " + shortest(control.disparity);
  else
    out = "focus on the " + std::string(region_name(control.focus));
  return out + " with blur intensity of " + shortest(control.intensity);
}

double disparity_quantile(const DisparityMap& disp, double q) {
  if (disp.empty()) throw std::invalid_argument("empty disparity map");
  std::vector<float> values(disp.data().begin(), disp.data().end());
  const auto k = static_cast<std::size_t>(std::floor(std::clamp(q, 0.0, 1.0) *
                                                     static_cast<double>(values.size() - 1)));
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end());
  return values[k];
}

double resolve_focus(const BokehControl& control, const DisparityMap& disp,
                     const FocusPercentiles& percentiles) {
  switch (control.focus) {
    case FocusRegion::Foreground: return disparity_quantile(disp, percentiles.foreground);
    case FocusRegion::Middle: return disparity_quantile(disp, percentiles.middle);
    case FocusRegion::Background: return disparity_quantile(disp, percentiles.background);
    case FocusRegion::AtDisparity: return control.disparity;
  }
  return control.disparity;
}

std::vector<double> sinusoidal_features(double value, int pairs, double base) {
  std::vector<double> out(static_cast<std::size_t>(2 * pairs));
  for (int k = 0; k < pairs; ++k) {
    const double freq = std::pow(base, -static_cast<double>(k) / pairs);
    out[2 * k] = std::sin(value * freq);
    out[2 * k + 1] = std::cos(value * freq);
  }
  return out;
}

namespace {
constexpr double kFeatureBase = 200.0;
// Disparity is scaled so a step of 0.01 moves the fastest feature by 1 rad.
constexpr double kDisparityScale = 100.0;
}  // namespace

ControlEmbedding embed_control(const BokehControl& control, int dim) {
  if (dim < 8 || dim % 2 != 0)
    throw std::invalid_argument("control embedding width must be even and >= 8");
  control.validate();
  ControlEmbedding emb;
  emb.dim = dim;
  auto& focus = emb.tokens[0];
  focus.assign(static_cast<std::size_t>(dim), 0.0);
  focus[static_cast<std::size_t>(control.focus)] = 1.0;
  if (control.focus == FocusRegion::AtDisparity) {
    const auto feats = sinusoidal_features(control.disparity * kDisparityScale,
                                           (dim - ControlEmbedding::kCodeSlots) / 2, kFeatureBase);
    std::copy(feats.begin(), feats.end(), focus.begin() + ControlEmbedding::kCodeSlots);
  }
  emb.tokens[1] = sinusoidal_features(control.intensity, dim / 2, kFeatureBase);
  return emb;
}

}  // namespace bokeh
