#include "conceptsynth/mock_backend.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <set>
#include <sstream>
#include <thread>

#include "conceptsynth/hashing.hpp"

namespace csynth {
namespace {

using nlohmann::json;

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc) || uc >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(uc)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<std::string> quoted_strings(const std::string& prompt) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto open = prompt.find('"', pos);
    if (open == std::string::npos) break;
    const auto close = prompt.find('"', open + 1);
    if (close == std::string::npos) break;
    std::string s = prompt.substr(open + 1, close - open - 1);
    if (!s.empty() && s.find('\n') == std::string::npos && std::find(out.begin(), out.end(), s) == out.end()) {
      out.push_back(std::move(s));
    }
    pos = close + 1;
  }
  return out;
}

std::string after_last_marker(const std::string& prompt, const std::string& marker) {
  const auto at = prompt.rfind(marker);
  return at == std::string::npos ? prompt : prompt.substr(at + marker.size());
}

std::string line_value(const std::string& prompt, const std::string& key) {
  const auto at = prompt.find(key);
  if (at == std::string::npos) return {};
  const auto start = at + key.size();
  const auto end = prompt.find('\n', start);
  std::string v = prompt.substr(start, end == std::string::npos ? std::string::npos : end - start);
  const auto b = v.find_first_not_of(" \t");
  const auto e = v.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string{} : v.substr(b, e - b + 1);
}

std::string format_score(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", s);
  return buf;
}

const std::set<std::string>& stopwords() {
  static const std::set<std::string> kStop{"the", "a", "an", "of", "in", "and", "for", "to", "on"};
  return kStop;
}

std::set<std::string> content_words(std::string_view s) {
  std::set<std::string> out;
  for (auto& w : words(s)) {
    if (!stopwords().contains(w)) out.insert(std::move(w));
  }
  return out;
}

}  // namespace

const std::vector<std::string>& mock_concept_vocabulary() {
  static const std::vector<std::string> kVocab{
      "Pythagorean theorem",
      "Perimeter of a triangle",
      "Area of a circle",
      "Quadratic formula",
      "Vieta's formulas",
      "Arithmetic sequence",
      "Geometric sequence",
      "Binomial theorem",
      "Law of cosines",
      "Law of sines",
      "Modular arithmetic",
      "Greatest common divisor",
      "Prime factorization",
      "Fundamental theorem of arithmetic",
      "Permutations",
      "Combinations",
      "Expected value",
      "Conditional probability",
      "Logarithm properties",
      "Exponential growth",
      "Similar triangles",
      "Inscribed angle theorem",
      "Triangle inequality",
      "AM-GM inequality",
      "Polynomial remainder theorem",
      "Complex conjugates",
      "Unit circle",
      "Distance formula",
      "Slope of a line",
      "Systems of linear equations",
      "Absolute value inequalities",
      "Floor function",
      "Sum of interior angles of a polygon",
      "Volume of a cylinder",
      "Pigeonhole principle",
      "Inclusion-exclusion principle",
      "Divisibility rules",
      "Perfect squares",
      "Difference of squares",
      "Completing the square",
      // Phrases the quality filter and the clusterer are expected to catch.
      "Problem-solving strategies",
      "The Pythagorean theorem",
      "a^2 + b^2 = c^2",
  };
  return kVocab;
}

MockOptions MockOptions::from_json(const json& j) {
  MockOptions o;
  if (!j.is_object()) return o;
  try {
    o.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("fixed")) {
      for (const auto& [task, out] : j["fixed"].items()) o.fixed[parse_task(task)] = out.get<std::string>();
    }
    if (j.contains("rules")) {
      for (const auto& r : j["rules"]) {
        MockRule rule;
        if (r.contains("task")) rule.task = parse_task(r["task"].get<std::string>());
        rule.contains = r.value("contains", std::string{});
        rule.output = r.value("output", std::string{});
        rule.fail = r.value("fail", false);
        o.rules.push_back(std::move(rule));
      }
    }
    if (j.contains("score_by_kind")) o.score_by_kind = j["score_by_kind"].get<std::map<std::string, double>>();
    if (j.contains("score_range")) {
      o.score_lo = j["score_range"].at(0).get<double>();
      o.score_hi = j["score_range"].at(1).get<double>();
    }
    o.yes_rate = j.value("yes_rate", o.yes_rate);
    o.max_delay_ms = j.value("max_delay_ms", o.max_delay_ms);
    o.embedding_dim = j.value("embedding_dim", o.embedding_dim);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed mock options: ") + e.what());
  }
  if (o.embedding_dim < 2) throw ConfigError("mock embedding_dim must be >= 2");
  return o;
}

MockBackend::MockBackend(BackendDescriptor descriptor)
    : Backend(std::move(descriptor)), options_(MockOptions::from_json(this->descriptor().mock)) {}

std::uint64_t MockBackend::hash(const std::string& prompt, std::string_view salt) const {
  std::string key = descriptor().model_name;
  key += '\x1f';
  key += std::to_string(options_.seed);
  key += '\x1f';
  key += salt;
  key += '\x1f';
  key += prompt;
  return stable_hash64(key);
}

CompletionExchange MockBackend::do_complete(const std::string& prompt, const DecodeParams& params) {
  if (options_.max_delay_ms > 0) {
    const auto ms = static_cast<int>(unit_interval(hash(prompt, "delay")) * options_.max_delay_ms);
    std::this_thread::sleep_for(std::chrono::milliseconds(ms));
  }
  CompletionExchange ex;
  ex.prompt = prompt;
  ex.output = respond(prompt, params.task);
  ex.input_tokens = count_tokens(prompt);
  ex.output_tokens = count_tokens(ex.output);
  return ex;
}

std::string MockBackend::respond(const std::string& prompt, Task task) const {
  for (const auto& rule : options_.rules) {
    if (rule.task && *rule.task != task) continue;
    if (!rule.contains.empty() && prompt.find(rule.contains) == std::string::npos) continue;
    if (rule.fail) throw TransportError("mock backend " + descriptor().backend_id + " scripted failure", 1);
    return rule.output;
  }
  if (auto it = options_.fixed.find(task); it != options_.fixed.end()) return it->second;

  const double u = unit_interval(hash(prompt, to_string(task)));
  switch (task) {
    case Task::kExtractConcepts: {
      // Recognize vocabulary phrases in the problem text, longest first, without overlaps.
      const std::string text = lower(after_last_marker(prompt, "Problem:"));
      std::vector<std::string> vocab = mock_concept_vocabulary();
      std::stable_sort(vocab.begin(), vocab.end(), [](const auto& a, const auto& b) { return a.size() > b.size(); });
      std::vector<bool> taken(text.size(), false);
      std::vector<std::pair<std::size_t, std::string>> hits;
      for (const auto& phrase : vocab) {
        const std::string needle = lower(phrase);
        for (auto at = text.find(needle); at != std::string::npos; at = text.find(needle, at + 1)) {
          if (std::any_of(taken.begin() + static_cast<long>(at), taken.begin() + static_cast<long>(at + needle.size()),
                          [](bool t) { return t; })) {
            continue;
          }
          std::fill(taken.begin() + static_cast<long>(at), taken.begin() + static_cast<long>(at + needle.size()), true);
          hits.emplace_back(at, phrase);
          break;
        }
      }
      std::sort(hits.begin(), hits.end());
      std::vector<std::string> chosen;
      for (auto& [at, phrase] : hits) chosen.push_back(phrase);
      if (chosen.empty()) {
        const auto& all = mock_concept_vocabulary();
        const std::size_t k = 1 + static_cast<std::size_t>(u * 5.0);
        auto h = hash(prompt, "pick");
        while (chosen.size() < std::min<std::size_t>(k, all.size())) {
          const auto& c = all[h % all.size()];
          if (std::find(chosen.begin(), chosen.end(), c) == chosen.end()) chosen.push_back(c);
          h = stable_hash64(std::to_string(h));
        }
      }
      std::ostringstream out;
      for (std::size_t i = 0; i < chosen.size(); ++i) out << (i + 1) << ". " << chosen[i] << "\n";
      return out.str();
    }
    case Task::kReviewConcept: {
      const auto q = quoted_strings(prompt);
      const std::string concept_text = q.empty() ? std::string{} : q.front();
      const std::string l = lower(concept_text);
      for (const char* vague : {"strategies", "strategy", "techniques", "general ", "basic ", "elementary "}) {
        if (l.find(vague) != std::string::npos) return "Category:\nvague";
      }
      const auto digits = std::count_if(l.begin(), l.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
      if (l.find('=') != std::string::npos || digits >= 3 || l.size() > 70) return "Category:\noverly_detailed";
      return "Category:\nok";
    }
    case Task::kConfirmSynonym: {
      const auto q = quoted_strings(prompt);
      if (q.size() < 2) return "NO";
      const auto a = content_words(q[0]);
      const auto b = content_words(q[1]);
      const bool a_in_b = std::includes(b.begin(), b.end(), a.begin(), a.end());
      const bool b_in_a = std::includes(a.begin(), a.end(), b.begin(), b.end());
      return (a_in_b || b_in_a) ? "YES" : "NO";
    }
    case Task::kChooseRepresentative: {
      std::istringstream in(after_last_marker(prompt, "Members:"));
      std::string line;
      int best = -1;
      std::size_t best_len = 0;
      while (std::getline(in, line)) {
        const auto dot = line.find(". ");
        if (dot == std::string::npos || dot == 0) continue;
        const std::string num = line.substr(0, dot);
        if (!std::all_of(num.begin(), num.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
          continue;
        }
        const std::size_t len = line.size() - dot - 2;
        if (best < 0 || len < best_len) {
          best = std::stoi(num);
          best_len = len;
        }
      }
      return best < 0 ? "1" : std::to_string(best);
    }
    case Task::kGenerateProblem: {
      const auto concepts = quoted_strings(prompt);
      const auto h = hash(prompt, "numbers");
      const int a = 2 + static_cast<int>(h % 47);
      const int b = 3 + static_cast<int>((h >> 16) % 89);
      std::ostringstream out;
      out << "In a configuration governed by ";
      for (std::size_t i = 0; i < concepts.size(); ++i) {
        if (i > 0) out << (i + 1 == concepts.size() ? " and " : ", ");
        out << concepts[i];
      }
      out << ", a quantity starts at " << a << " and is transformed using each principle in turn. "
          << "If the final value must equal " << b << ", determine the smallest admissible starting adjustment.";
      return out.str();
    }
    case Task::kRateDifficulty:
      if (u < 0.40) return "Difficulty: low";
      if (u < 0.75) return "Difficulty: medium";
      return "Difficulty: high";
    case Task::kSolve: {
      const auto h = hash(prompt, "answer");
      return "We apply each stated principle step by step and simplify the resulting expression.\nThe answer is " +
             std::to_string(h % 1000) + ".";
    }
    case Task::kScoreProblem: {
      const std::string relationship = line_value(prompt, "Concept relationship:");
      if (auto it = options_.score_by_kind.find(relationship); it != options_.score_by_kind.end()) {
        const double jitter = (u - 0.5) * 0.04;
        return "Score:\n" + format_score(std::clamp(it->second + jitter, 0.0, 1.0));
      }
      return "Score:\n" + format_score(options_.score_lo + u * (options_.score_hi - options_.score_lo));
    }
    case Task::kVoteSolution:
      return u < options_.yes_rate ? "Verdict:\nYES" : "Verdict:\nNO";
  }
  return {};
}

std::vector<float> MockBackend::embed_one(const std::string& text) const {
  std::vector<float> v(static_cast<std::size_t>(options_.embedding_dim), 0.0F);
  const auto toks = words(text);
  if (toks.empty()) {
    v[hash(text, "empty") % v.size()] = 1.0F;
    return v;
  }
  for (const auto& t : toks) v[hash(t, "embed") % v.size()] += 1.0F;
  return v;
}

EmbeddingBatch MockBackend::do_embed(const std::vector<std::string>& texts) {
  EmbeddingBatch batch;
  batch.vectors.reserve(texts.size());
  for (const auto& t : texts) {
    batch.vectors.push_back(embed_one(t));
    batch.usage.input_tokens += count_tokens(t);
  }
  batch.usage.calls = 1;
  return batch;
}

}  // namespace csynth
