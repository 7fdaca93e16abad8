#pragma once

#include <cstddef>
#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lpp/spectral.hpp"

namespace lpp {

inline constexpr int kTaskSchemaVersion = 1;

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Seed of task `index` in a stream: mix64(mix64(seed) + index). Every task
/// is a pure function of (seed, index), so generation can be split freely.
std::uint64_t derive_task_seed(std::uint64_t seed, std::uint64_t index);

/// Portable draws on top of mt19937_64 (whose output sequence is fixed by the
/// standard; the std distributions are not).
class TaskRng {
 public:
  explicit TaskRng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform integer in [0, bound) by rejection sampling.
  std::uint64_t below(std::uint64_t bound);
  /// Uniform double in [0, 1) from the top 53 bits.
  double unit();

 private:
  std::mt19937_64 engine_;
};

struct GenConfig {
  std::size_t count = 100;
  std::uint64_t seed = 42;
  std::size_t spc_length = 12;
  double ar_unambiguous_fraction = 0.25;
  std::size_t ar_prefix_token_cap = 30;

  void validate() const;
};

// --- Symbolic Pattern Completion -------------------------------------------

enum class PatternFamily { alternation, mirroring, progression };

std::string_view to_string(PatternFamily family);
PatternFamily parse_pattern_family(std::string_view text);

inline constexpr std::size_t kSpcTargetLength = 3;

struct SpcTask {
  PatternFamily pattern_family = PatternFamily::alternation;
  std::vector<char> symbols;
  std::string shown_sequence;
  std::string target;
  std::string template_id;
  std::uint64_t seed = 0;

  friend bool operator==(const SpcTask&, const SpcTask&) = default;
};

/// The repeating unit of a family: "uv" (alternation), "uvvu" (mirroring),
/// or the symbols in order (progression).
std::string pattern_period(PatternFamily family, std::span<const char> symbols);

/// Builds the task from explicit parameters: shown = first `length` symbols
/// of the periodic realization, target = the next three.
SpcTask make_spc_task(PatternFamily family, std::vector<char> symbols, std::size_t length,
                      std::string template_id = {}, std::uint64_t seed = 0);

/// `count` tasks; families cycle alternation, mirroring, progression by
/// index, symbol choices come from derive_task_seed(seed, index).
std::vector<SpcTask> gen_spc(const GenConfig& config);

// --- Ambiguous Reasoning ---------------------------------------------------

enum class AmbiguityStatus { ambiguous, not_ambiguous };
enum class AnswerChoice { a, b };

std::string_view to_string(AmbiguityStatus status);
std::string_view to_string(AnswerChoice answer);

struct ArSense {
  std::string label;
  std::string completion;
  std::vector<std::string> hints;
  std::string unambiguous_prefix;
};

struct ArBankEntry {
  std::string id;
  std::string head_word;
  std::string prefix;
  std::array<ArSense, 2> senses;
};

using ArBank = std::vector<ArBankEntry>;

/// Parses and checks a template bank document: both senses complete, distinct
/// completions, and no completion appearing verbatim in any prefix.
ArBank parse_ar_bank(const nlohmann::json& doc);
ArBank load_ar_bank(const std::filesystem::path& path);
/// The bank compiled into the library (core/data/ar_bank.json).
const ArBank& default_ar_bank();

struct ArTask {
  std::string prefix;
  std::string option_a;
  std::string option_b;
  std::string hint;
  AmbiguityStatus gold_status = AmbiguityStatus::ambiguous;
  AnswerChoice gold_answer = AnswerChoice::a;
  std::string entry_id;
  std::uint64_t seed = 0;

  friend bool operator==(const ArTask&, const ArTask&) = default;
};

/// The random decisions behind one AR task.
struct ArChoice {
  std::size_t gold_sense = 0;  // index into entry.senses the hint points at
  bool unambiguous = false;    // use the gold sense's unambiguous prefix
  bool swap_options = false;   // sense 1 becomes option A
  std::size_t hint_index = 0;
};

/// Keeps at most `cap` whitespace-separated tokens, re-joined by single spaces.
std::string truncate_tokens(std::string_view text, std::size_t cap);

ArTask build_ar_task(const ArBankEntry& entry, const ArChoice& choice, std::size_t prefix_cap,
                     std::uint64_t seed = 0);

/// Entries are visited round-robin through a seeded permutation (reshuffled
/// each pass); per task the draws are gold sense, unambiguous flag, option
/// swap, then hint.
std::vector<ArTask> gen_ar(const GenConfig& config, const ArBank& bank);

/// Candidates whose final-position entropy strictly exceeds `threshold`, in
/// input order.
std::vector<std::string> entropy_filter_prefixes(
    std::span<const std::string> candidates,
    const std::map<std::string, EntropySeries>& series_source, double threshold);

// --- Prompts -----------------------------------------------------------------

std::string task_input(const ArTask& task);
std::string task_input(const SpcTask& task);
std::string gold_response(const ArTask& task);
std::string gold_response(const SpcTask& task);

/// k solved exemplars (input, a space, gold response) separated by blank
/// lines, then the target's bare input.
std::string render_prompt(const ArTask& task, std::span<const ArTask> exemplars, std::size_t k);
std::string render_prompt(const SpcTask& task, std::span<const SpcTask> exemplars, std::size_t k);

// --- JSON Lines ----------------------------------------------------------------

nlohmann::ordered_json to_json(const SpcTask& task);
nlohmann::ordered_json to_json(const ArTask& task);
SpcTask spc_task_from_json(const nlohmann::json& doc);
ArTask ar_task_from_json(const nlohmann::json& doc);

std::string to_jsonl(std::span<const SpcTask> tasks);
std::string to_jsonl(std::span<const ArTask> tasks);
std::vector<SpcTask> read_spc_tasks(const std::filesystem::path& path);
std::vector<ArTask> read_ar_tasks(const std::filesystem::path& path);

}  // namespace lpp
