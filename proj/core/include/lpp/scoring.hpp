#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lpp/taskgen.hpp"

namespace lpp {

enum class ParsedStatus { ambiguous, not_ambiguous, unparsed };
enum class ParsedAnswer { a, b, unparsed };

std::string_view to_string(ParsedStatus status);
std::string_view to_string(ParsedAnswer answer);

struct ArParse {
  ParsedStatus status = ParsedStatus::unparsed;
  ParsedAnswer answer = ParsedAnswer::unparsed;

  friend bool operator==(const ArParse&, const ArParse&) = default;
};

/// Case-insensitive and total. Looks for `ambiguous status = NOT AMBIGUOUS`
/// (tested before `AMBIGUOUS`) and `answer = A|B` anywhere, in either order.
ArParse parse_ar_response(std::string_view text);

enum class TaskKind { ar, spc };

std::string_view to_string(TaskKind kind);
TaskKind parse_task_kind(std::string_view text);

struct TaskScore {
  TaskKind task_kind = TaskKind::ar;
  std::vector<double> per_item;
  double mean = 0.0;
  std::size_t n = 0;
  // AR only.
  std::optional<double> status_accuracy;
  std::optional<double> answer_accuracy;
  // SPC only: normalized prediction identical to the target.
  std::optional<double> exact_match;
};

/// Unparsed components count as misses; nothing is dropped from n.
TaskScore score_ar(std::span<const ArTask> gold, std::span<const std::string> responses,
                   std::size_t threads = 1);

/// The prediction after stripping whitespace and cutting to gold.size().
std::string normalize_prediction(std::string_view pred, std::size_t gold_length);

/// Bag-of-characters F1 between normalize_prediction(pred) and gold.
double char_f1(std::string_view pred, std::string_view gold);

TaskScore score_spc(std::span<const SpcTask> gold, std::span<const std::string> responses,
                    std::size_t threads = 1);

/// Reads {task_index, response_text} lines and returns the texts ordered by
/// task_index. Every index in [0, expected) must appear exactly once.
std::vector<std::string> read_responses(const std::filesystem::path& path, std::size_t expected);

nlohmann::ordered_json to_json(const TaskScore& score);

}  // namespace lpp
