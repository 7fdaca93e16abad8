#include "lpp/scoring.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <numeric>

#include "lpp/error.hpp"
#include "lpp/io.hpp"
#include "lpp/parallel.hpp"

namespace lpp {

namespace {

using nlohmann::json;

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::size_t skip_spaces(const std::string& s, std::size_t i) {
  while (i < s.size() && is_space(s[i])) ++i;
  return i;
}

// Position just after `key` + spaces + '=' + spaces, or npos.
std::size_t after_assignment(const std::string& s, std::size_t key_end) {
  std::size_t i = skip_spaces(s, key_end);
  if (i >= s.size() || s[i] != '=') return std::string::npos;
  return skip_spaces(s, i + 1);
}

std::optional<ParsedStatus> status_at(const std::string& s, std::size_t i) {
  // "not ambiguous", also tolerating "not_ambiguous" and runs of spaces.
  if (s.compare(i, 3, "not") == 0) {
    std::size_t j = i + 3;
    std::size_t k = j;
    while (k < s.size() && (is_space(s[k]) || s[k] == '_' || s[k] == '-')) ++k;
    if (k > j && s.compare(k, 9, "ambiguous") == 0) return ParsedStatus::not_ambiguous;
  }
  if (s.compare(i, 9, "ambiguous") == 0) return ParsedStatus::ambiguous;
  return std::nullopt;
}

ParsedStatus find_status(const std::string& s) {
  static constexpr std::string_view kKey = "ambiguous status";
  for (std::size_t pos = s.find(kKey); pos != std::string::npos; pos = s.find(kKey, pos + 1)) {
    const std::size_t v = after_assignment(s, pos + kKey.size());
    if (v == std::string::npos) continue;
    if (auto status = status_at(s, v)) return *status;
  }
  return ParsedStatus::unparsed;
}

ParsedAnswer find_answer(const std::string& s) {
  static constexpr std::string_view kKey = "answer";
  for (std::size_t pos = s.find(kKey); pos != std::string::npos; pos = s.find(kKey, pos + 1)) {
    const std::size_t v = after_assignment(s, pos + kKey.size());
    if (v == std::string::npos || v >= s.size()) continue;
    if (s[v] != 'a' && s[v] != 'b') continue;
    if (v + 1 < s.size() && is_alnum(s[v + 1])) continue;
    return s[v] == 'a' ? ParsedAnswer::a : ParsedAnswer::b;
  }
  return ParsedAnswer::unparsed;
}

void check_lengths(std::size_t gold, std::size_t responses) {
  if (gold != responses) {
    throw PreconditionError("length mismatch: " + std::to_string(gold) + " gold tasks but " +
                            std::to_string(responses) + " responses");
  }
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

std::string_view to_string(ParsedStatus status) {
  switch (status) {
    case ParsedStatus::ambiguous: return "AMBIGUOUS";
    case ParsedStatus::not_ambiguous: return "NOT_AMBIGUOUS";
    case ParsedStatus::unparsed: return "UNPARSED";
  }
  return "UNPARSED";
}

std::string_view to_string(ParsedAnswer answer) {
  switch (answer) {
    case ParsedAnswer::a: return "A";
    case ParsedAnswer::b: return "B";
    case ParsedAnswer::unparsed: return "UNPARSED";
  }
  return "UNPARSED";
}

ArParse parse_ar_response(std::string_view text) {
  const std::string s = lower(text);
  return {find_status(s), find_answer(s)};
}

std::string_view to_string(TaskKind kind) { return kind == TaskKind::ar ? "AR" : "SPC"; }

TaskKind parse_task_kind(std::string_view text) {
  const std::string t = lower(text);
  if (t == "ar") return TaskKind::ar;
  if (t == "spc") return TaskKind::spc;
  throw FormatError("unknown task kind '" + std::string(text) + "'");
}

TaskScore score_ar(std::span<const ArTask> gold, std::span<const std::string> responses,
                   std::size_t threads) {
  check_lengths(gold.size(), responses.size());
  const std::size_t n = gold.size();
  std::vector<std::array<double, 2>> hits(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const ArParse parsed = parse_ar_response(responses[i]);
    const ParsedStatus want_status = gold[i].gold_status == AmbiguityStatus::ambiguous
                                         ? ParsedStatus::ambiguous
                                         : ParsedStatus::not_ambiguous;
    const ParsedAnswer want_answer =
        gold[i].gold_answer == AnswerChoice::a ? ParsedAnswer::a : ParsedAnswer::b;
    hits[i] = {parsed.status == want_status ? 1.0 : 0.0,
               parsed.answer == want_answer ? 1.0 : 0.0};
  });
  TaskScore score;
  score.task_kind = TaskKind::ar;
  score.n = n;
  double status_hits = 0.0;
  double answer_hits = 0.0;
  score.per_item.reserve(n);
  for (const auto& [s, a] : hits) {
    status_hits += s;
    answer_hits += a;
    score.per_item.push_back((s + a) / 2.0);
  }
  const double denom = n == 0 ? 1.0 : static_cast<double>(n);
  score.status_accuracy = status_hits / denom;
  score.answer_accuracy = answer_hits / denom;
  score.mean = (*score.status_accuracy + *score.answer_accuracy) / 2.0;
  return score;
}

std::string normalize_prediction(std::string_view pred, std::size_t gold_length) {
  std::string out;
  for (char c : pred) {
    if (out.size() == gold_length) break;
    if (!is_space(c)) out.push_back(c);
  }
  return out;
}

double char_f1(std::string_view pred, std::string_view gold) {
  const std::string p = normalize_prediction(pred, gold.size());
  if (p.empty() && gold.empty()) return 1.0;
  if (p.empty() || gold.empty()) return 0.0;
  std::array<std::size_t, 256> counts{};
  for (char c : gold) ++counts[static_cast<unsigned char>(c)];
  std::size_t overlap = 0;
  for (char c : p) {
    auto& k = counts[static_cast<unsigned char>(c)];
    if (k > 0) {
      --k;
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  const double precision = static_cast<double>(overlap) / static_cast<double>(p.size());
  const double recall = static_cast<double>(overlap) / static_cast<double>(gold.size());
  return 2.0 * precision * recall / (precision + recall);
}

TaskScore score_spc(std::span<const SpcTask> gold, std::span<const std::string> responses,
                    std::size_t threads) {
  check_lengths(gold.size(), responses.size());
  const std::size_t n = gold.size();
  TaskScore score;
  score.task_kind = TaskKind::spc;
  score.n = n;
  score.per_item.assign(n, 0.0);
  std::vector<double> exact(n, 0.0);
  parallel_for(n, threads, [&](std::size_t i) {
    score.per_item[i] = char_f1(responses[i], gold[i].target);
    exact[i] = normalize_prediction(responses[i], gold[i].target.size()) == gold[i].target;
  });
  score.mean = mean_of(score.per_item);
  score.exact_match = mean_of(exact);
  return score;
}

std::vector<std::string> read_responses(const std::filesystem::path& path, std::size_t expected) {
  std::vector<std::optional<std::string>> slots(expected);
  std::size_t line_no = 0;
  for (const auto& line : read_nonempty_lines(path)) {
    ++line_no;
    const std::string where = path.string() + ": line " + std::to_string(line_no) + ": ";
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError(where + e.what());
    }
    auto idx = doc.find("task_index");
    auto text = doc.find("response_text");
    if (idx == doc.end() || !idx->is_number_integer() || text == doc.end() || !text->is_string()) {
      throw FormatError(where + "expected {task_index, response_text}");
    }
    const auto i = idx->get<std::int64_t>();
    if (i < 0 || static_cast<std::size_t>(i) >= expected) {
      throw PreconditionError(where + "task_index " + std::to_string(i) + " out of range (" +
                              std::to_string(expected) + " tasks)");
    }
    if (slots[i]) throw FormatError(where + "duplicate task_index " + std::to_string(i));
    slots[i] = text->get<std::string>();
  }
  std::vector<std::string> out;
  out.reserve(expected);
  for (std::size_t i = 0; i < expected; ++i) {
    if (!slots[i]) {
      throw PreconditionError("length mismatch: no response for task_index " + std::to_string(i));
    }
    out.push_back(std::move(*slots[i]));
  }
  return out;
}

nlohmann::ordered_json to_json(const TaskScore& score) {
  nlohmann::ordered_json out{{"task_kind", std::string(to_string(score.task_kind))},
                             {"n", score.n},
                             {"mean", score.mean}};
  if (score.status_accuracy) out["status_accuracy"] = *score.status_accuracy;
  if (score.answer_accuracy) out["answer_accuracy"] = *score.answer_accuracy;
  if (score.exact_match) out["exact_match"] = *score.exact_match;
  out["per_item"] = score.per_item;
  return out;
}

}  // namespace lpp
