#include "conceptsynth/text.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>

namespace csynth {
namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_word_byte(char c) {
  const auto uc = static_cast<unsigned char>(c);
  return std::isalnum(uc) || uc >= 0x80;
}

}  // namespace

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::string collapse_whitespace(std::string_view s) {
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

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> word_tokens(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (is_word_byte(c)) {
      cur.push_back(c);
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::optional<double> parse_last_number(std::string_view text) {
  // Walk backwards to the end of the last digit run, then expand to a full decimal literal.
  std::size_t end = text.size();
  while (end > 0) {
    while (end > 0 && !std::isdigit(static_cast<unsigned char>(text[end - 1]))) --end;
    if (end == 0) return std::nullopt;
    std::size_t start = end;
    while (start > 0 && (std::isdigit(static_cast<unsigned char>(text[start - 1])) || text[start - 1] == '.')) --start;
    if (start > 0 && (text[start - 1] == '-' || text[start - 1] == '+')) --start;
    std::string literal(text.substr(start, end - start));
    while (!literal.empty() && literal.front() == '.') literal.erase(literal.begin());
    char* parse_end = nullptr;
    const double v = std::strtod(literal.c_str(), &parse_end);
    if (parse_end != literal.c_str()) return v;
    end = start;
  }
  return std::nullopt;
}

std::optional<bool> parse_last_yes_no(std::string_view text) {
  const auto words = word_tokens(text);
  for (auto it = words.rbegin(); it != words.rend(); ++it) {
    const std::string w = ascii_lower(*it);
    if (w == "yes" || w == "true") return true;
    if (w == "no" || w == "false") return false;
  }
  return std::nullopt;
}

std::optional<std::string> parse_last_choice(std::string_view text, const std::vector<std::string>& choices) {
  // Normalize separators so "overly detailed" and "overly-detailed" both read as "overly_detailed".
  std::string norm = ascii_lower(text);
  for (char& c : norm) {
    if (c == '-') c = '_';
  }
  std::string best;
  std::size_t best_pos = 0;
  bool found = false;
  for (const auto& choice : choices) {
    for (const std::string& variant : {choice, [&] {
                                         std::string v = choice;
                                         std::replace(v.begin(), v.end(), '_', ' ');
                                         return v;
                                       }()}) {
      for (std::size_t at = norm.rfind(variant); at != std::string::npos;
           at = at == 0 ? std::string::npos : norm.rfind(variant, at - 1)) {
        const bool left_ok = at == 0 || !is_word_byte(norm[at - 1]) ;
        const std::size_t after = at + variant.size();
        const bool right_ok = after >= norm.size() || !(is_word_byte(norm[after]) || norm[after] == '_');
        if (left_ok && right_ok) {
          if (!found || at > best_pos || (at == best_pos && choice.size() > best.size())) {
            best = choice;
            best_pos = at;
            found = true;
          }
          break;
        }
      }
    }
  }
  if (!found) return std::nullopt;
  return best;
}

}  // namespace csynth

namespace csynth {

std::string normalize_text(std::string_view s) {
  std::string kept;
  kept.reserve(s.size());
  for (char c : s) {
    const auto uc = static_cast<unsigned char>(c);
    if (uc >= 0x80 || std::isalnum(uc)) {
      kept.push_back(static_cast<char>(std::tolower(uc)));
    } else if (is_space(c)) {
      kept.push_back(' ');
    }
  }
  return collapse_whitespace(kept);
}

std::vector<std::string> normalized_tokens(std::string_view s) {
  std::vector<std::string> out;
  const std::string norm = normalize_text(s);
  std::size_t start = 0;
  while (start < norm.size()) {
    auto end = norm.find(' ', start);
    if (end == std::string::npos) end = norm.size();
    out.push_back(norm.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

}  // namespace csynth
