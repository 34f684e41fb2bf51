#pragma once

// Final-answer extraction and canonicalization.
//
// An output's meaning is reduced to the canonical form of the span inside its
// last balanced \boxed{...}. Two answers are equivalent iff both parse and
// their canonical strings are byte-equal, which makes equivalence a true
// equivalence relation on parsed answers.

#include <algorithm>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace empo {

struct RawOutput {
  std::string text;
};

enum class AnswerKind { Parsed, Unparseable };

struct ExtractedAnswer {
  AnswerKind kind = AnswerKind::Unparseable;
  std::string surface;
  std::string canonical;

  bool parsed() const noexcept { return kind == AnswerKind::Parsed; }

  static ExtractedAnswer unparseable() { return {}; }
};

namespace canon_detail {

using Rational = boost::multiprecision::cpp_rational;
using Integer = boost::multiprecision::cpp_int;

// Longer numerals are left alone rather than parsed.
inline constexpr std::size_t kMaxNumeralDigits = 4096;

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

inline std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

// Index of the bracket closing the one opened at `open`, or npos.
inline std::size_t matching_close(std::string_view s, std::size_t open,
                                  char lhs, char rhs) {
  int depth = 0;
  for (std::size_t i = open; i < s.size(); ++i) {
    if (s[i] == lhs) {
      ++depth;
    } else if (s[i] == rhs) {
      if (--depth == 0) return i;
    }
  }
  return std::string_view::npos;
}

inline bool starts_with_command(std::string_view s, std::string_view cmd,
                                std::size_t pos = 0) {
  if (s.substr(pos, cmd.size()) != cmd) return false;
  std::size_t next = pos + cmd.size();
  // "\left" must not match "\leftarrow".
  return next >= s.size() || !std::isalpha(static_cast<unsigned char>(s[next]));
}

// Sizing tokens carry no meaning anywhere in an answer.
inline std::string drop_sizing_tokens(std::string_view s) {
  static constexpr std::string_view kTokens[] = {
      "\\left",  "\\right", "\\bigl", "\\bigr", "\\Bigl", "\\Bigr",
      "\\biggl", "\\biggr", "\\Biggl", "\\Biggr", "\\big",  "\\Big",
      "\\bigg",  "\\Bigg",  "\\displaystyle", "\\textstyle", "\\,",
      "\\;",     "\\!",     "\\ "};
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    bool dropped = false;
    if (s[i] == '\\') {
      for (auto tok : kTokens) {
        bool symbol = !std::isalpha(static_cast<unsigned char>(tok.back()));
        if (symbol ? s.substr(i, tok.size()) == tok
                   : starts_with_command(s, tok, i)) {
          i += tok.size();
          dropped = true;
          break;
        }
      }
    }
    if (!dropped) out.push_back(s[i++]);
  }
  return out;
}

// Removes one layer of an outer formatting wrapper; nullopt when none applies.
inline std::optional<std::string> strip_outer_wrapper(std::string_view s) {
  if (s.size() >= 2 && s.front() == '$' && s.back() == '$') {
    std::size_t k = (s.size() >= 4 && s.substr(0, 2) == "$$" &&
                     s.substr(s.size() - 2) == "$$")
                        ? 2
                        : 1;
    return std::string(s.substr(k, s.size() - 2 * k));
  }
  if (s.size() >= 4 && ((s.substr(0, 2) == "\\(" && s.substr(s.size() - 2) == "\\)") ||
                        (s.substr(0, 2) == "\\[" && s.substr(s.size() - 2) == "\\]"))) {
    return std::string(s.substr(2, s.size() - 4));
  }
  if (!s.empty() && s.front() == '{' &&
      matching_close(s, 0, '{', '}') == s.size() - 1) {
    return std::string(s.substr(1, s.size() - 2));
  }
  static constexpr std::string_view kWrappers[] = {
      "\\boxed",  "\\text",   "\\textbf", "\\textit", "\\textrm", "\\mathrm",
      "\\mathbf", "\\mathit", "\\mbox",   "\\fbox",   "\\operatorname"};
  for (auto w : kWrappers) {
    if (!starts_with_command(s, w)) continue;
    std::size_t open = w.size();
    while (open < s.size() && is_space(s[open])) ++open;
    if (open < s.size() && s[open] == '{' &&
        matching_close(s, open, '{', '}') == s.size() - 1) {
      return std::string(s.substr(open + 1, s.size() - open - 2));
    }
  }
  return std::nullopt;
}

// Exact value of an integer or decimal literal: [+-]? (d+ (. d*)? | . d+).
inline std::optional<Rational> parse_decimal(std::string_view s) {
  if (s.empty()) return std::nullopt;
  bool negative = false;
  std::size_t i = 0;
  if (s[0] == '+' || s[0] == '-') {
    negative = s[0] == '-';
    i = 1;
  }
  std::string digits;
  std::size_t frac_digits = 0;
  bool seen_point = false, any_digit = false;
  for (; i < s.size(); ++i) {
    char c = s[i];
    if (c >= '0' && c <= '9') {
      digits.push_back(c);
      if (seen_point) ++frac_digits;
      any_digit = true;
    } else if (c == '.' && !seen_point) {
      seen_point = true;
    } else {
      return std::nullopt;
    }
  }
  if (!any_digit || digits.size() > kMaxNumeralDigits) return std::nullopt;
  // cpp_int reads a leading zero as an octal prefix.
  std::size_t nz = digits.find_first_not_of('0');
  digits = nz == std::string::npos ? "0" : digits.substr(nz);
  Integer num(digits);
  Integer den = boost::multiprecision::pow(Integer(10), static_cast<unsigned>(frac_digits));
  Rational value(num, den);
  return negative ? Rational(-value) : value;
}

inline std::optional<Rational> parse_signed_fraction_command(std::string_view s) {
  bool negative = false;
  if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
    negative = s[0] == '-';
    s.remove_prefix(1);
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  }
  std::size_t pos = 0;
  bool matched = false;
  for (std::string_view cmd : {"\\dfrac", "\\tfrac", "\\frac"}) {
    if (starts_with_command(s, cmd)) {
      pos = cmd.size();
      matched = true;
      break;
    }
  }
  if (!matched) return std::nullopt;
  auto read_group = [&](std::string& out) {
    while (pos < s.size() && is_space(s[pos])) ++pos;
    if (pos >= s.size()) return false;
    if (s[pos] == '{') {
      std::size_t close = matching_close(s, pos, '{', '}');
      if (close == std::string_view::npos) return false;
      out = trim(s.substr(pos + 1, close - pos - 1));
      pos = close + 1;
      return true;
    }
    // \frac12 shorthand: single-character arguments.
    if (std::isdigit(static_cast<unsigned char>(s[pos]))) {
      out = std::string(1, s[pos++]);
      return true;
    }
    return false;
  };
  std::string num_text, den_text;
  if (!read_group(num_text) || !read_group(den_text)) return std::nullopt;
  while (pos < s.size() && is_space(s[pos])) ++pos;
  if (pos != s.size()) return std::nullopt;
  auto num = parse_decimal(num_text);
  auto den = parse_decimal(den_text);
  if (!num || !den || *den == 0) return std::nullopt;
  Rational value = *num / *den;
  return negative ? Rational(-value) : value;
}

inline std::optional<Rational> parse_rational(std::string_view s) {
  if (auto v = parse_decimal(s)) return v;
  if (auto v = parse_signed_fraction_command(s)) return v;
  std::size_t slash = s.find('/');
  if (slash == std::string_view::npos || s.find('/', slash + 1) != std::string_view::npos) {
    return std::nullopt;
  }
  auto num = parse_decimal(trim(s.substr(0, slash)));
  auto den = parse_decimal(trim(s.substr(slash + 1)));
  if (!num || !den || *den == 0) return std::nullopt;
  return *num / *den;
}

inline std::string format_rational(const Rational& v) {
  // cpp_rational is always normalized with a positive denominator.
  const Integer& num = boost::multiprecision::numerator(v);
  const Integer& den = boost::multiprecision::denominator(v);
  if (den == 1) return num.str();
  return num.str() + "/" + den.str();
}

// Splits on commas that are not nested inside (), [] or {}.
inline std::vector<std::string> split_top_level(std::string_view s, char sep) {
  std::vector<std::string> parts;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c == '(' || c == '[' || c == '{') ++depth;
    else if (c == ')' || c == ']' || c == '}') --depth;
    else if (c == sep && depth == 0) {
      parts.emplace_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  parts.emplace_back(s.substr(start));
  return parts;
}

inline std::string canonicalize_impl(std::string_view surface, int depth);

inline std::string strip_to_core(std::string_view surface) {
  std::string cur = collapse_whitespace(drop_sizing_tokens(surface));
  while (auto inner = strip_outer_wrapper(cur)) {
    cur = collapse_whitespace(drop_sizing_tokens(*inner));
  }
  return cur;
}

inline std::string canonicalize_impl(std::string_view surface, int depth) {
  std::string cur = strip_to_core(surface);
  if (cur.empty() || depth > 64) return cur;

  if (auto v = parse_rational(cur)) return format_rational(*v);

  if (cur.size() == 1 && std::isalpha(static_cast<unsigned char>(cur[0]))) {
    return std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>(cur[0]))));
  }

  if (cur.front() == '(' && matching_close(cur, 0, '(', ')') == cur.size() - 1) {
    std::string_view inner(cur);
    inner = inner.substr(1, inner.size() - 2);
    auto parts = split_top_level(inner, ',');
    if (parts.size() == 1) {
      // Plain grouping parentheses, e.g. "(B)" or "(5)".
      std::string core = canonicalize_impl(parts[0], depth + 1);
      return core.empty() ? cur : core;
    }
    std::string out = "(";
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (i) out.push_back(',');
      out += canonicalize_impl(parts[i], depth + 1);
    }
    out.push_back(')');
    return out;
  }
  return cur;
}

}  // namespace canon_detail

/// Deterministic normal form of an answer span. Idempotent.
inline std::string canonicalize(std::string_view surface) {
  return canon_detail::canonicalize_impl(surface, 0);
}

/// Contents of the last balanced \boxed{...} in `output`. Boxes nested inside
/// an outer box belong to the outer span.
inline ExtractedAnswer extract_final_answer(const RawOutput& output) {
  static constexpr std::string_view kMarker = "\\boxed";
  std::string_view text(output.text);
  std::optional<std::string_view> last;
  std::size_t pos = 0;
  while ((pos = text.find(kMarker, pos)) != std::string_view::npos) {
    std::size_t open = pos + kMarker.size();
    while (open < text.size() && canon_detail::is_space(text[open])) ++open;
    if (open >= text.size() || text[open] != '{') {
      pos += kMarker.size();
      continue;
    }
    std::size_t close = canon_detail::matching_close(text, open, '{', '}');
    if (close == std::string_view::npos) {
      pos += kMarker.size();
      continue;
    }
    last = text.substr(open + 1, close - open - 1);
    pos = close + 1;
  }
  if (!last) return ExtractedAnswer::unparseable();
  std::string canonical = canonicalize(*last);
  if (canonical.empty()) return ExtractedAnswer::unparseable();
  return {AnswerKind::Parsed, std::string(*last), std::move(canonical)};
}

/// Unparseable answers are never equivalent, not even to each other.
inline bool are_equivalent(const ExtractedAnswer& a, const ExtractedAnswer& b) {
  return a.parsed() && b.parsed() && a.canonical == b.canonical;
}

}  // namespace empo
