#include "lpp/taskgen.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include "lpp/error.hpp"
#include "lpp/io.hpp"

namespace lpp {

namespace detail {
std::string_view default_bank_json();
}  // namespace detail

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::uint64_t kPermutationSalt = 0x5045524d55544eULL;  // "PERMUTN"

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

char letter(std::uint64_t offset) { return static_cast<char>('A' + offset); }

std::string bank_string(const json& obj, const char* field, const std::string& where) {
  auto it = obj.find(field);
  if (it == obj.end() || !it->is_string() || it->get<std::string>().empty()) {
    throw FormatError("template bank: " + where + " is missing required field '" + field + "'");
  }
  return it->get<std::string>();
}

void check_schema_version(const json& doc) {
  auto it = doc.find("schema_version");
  if (it == doc.end() || !it->is_number_integer() || it->get<int>() != kTaskSchemaVersion) {
    throw FormatError("task record: missing or unsupported schema_version");
  }
}

template <typename T>
std::string field_string(const json& doc, const char* field) {
  auto it = doc.find(field);
  if (it == doc.end() || !it->is_string()) {
    throw FormatError(std::string("task record: missing string field '") + field + "'");
  }
  return it->get<std::string>();
}

std::uint64_t field_seed(const json& doc) {
  auto it = doc.find("seed");
  if (it == doc.end() || !it->is_number_unsigned()) {
    if (it != doc.end() && it->is_number_integer() && it->get<std::int64_t>() >= 0) {
      return static_cast<std::uint64_t>(it->get<std::int64_t>());
    }
    throw FormatError("task record: missing unsigned field 'seed'");
  }
  return it->get<std::uint64_t>();
}

template <typename Task, typename Parse>
std::vector<Task> read_jsonl(const std::filesystem::path& path, Parse parse) {
  std::vector<Task> tasks;
  std::size_t line_no = 0;
  for (const auto& line : read_nonempty_lines(path)) {
    ++line_no;
    try {
      tasks.push_back(parse(json::parse(line)));
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ": record " + std::to_string(line_no) + ": " + e.what());
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ": record " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return tasks;
}

template <typename Task>
std::string render(const Task& task, std::span<const Task> exemplars, std::size_t k) {
  if (k > exemplars.size()) {
    throw PreconditionError("render_prompt: k=" + std::to_string(k) + " but only " +
                            std::to_string(exemplars.size()) + " exemplars available");
  }
  std::string prompt;
  for (std::size_t i = 0; i < k; ++i) {
    if (exemplars[i] == task) {
      throw PreconditionError("render_prompt: exemplar " + std::to_string(i) +
                              " is the target task");
    }
    prompt += task_input(exemplars[i]) + " " + gold_response(exemplars[i]) + "\n\n";
  }
  return prompt + task_input(task);
}

}  // namespace

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_task_seed(std::uint64_t seed, std::uint64_t index) {
  return mix64(mix64(seed) + index);
}

std::uint64_t TaskRng::below(std::uint64_t bound) {
  if (bound == 0) throw PreconditionError("TaskRng::below: bound must be positive");
  const std::uint64_t threshold = (0 - bound) % bound;  // 2^64 mod bound
  for (;;) {
    const std::uint64_t r = engine_();
    if (r >= threshold) return r % bound;
  }
}

double TaskRng::unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

void GenConfig::validate() const {
  if (count < 1) throw PreconditionError("count must be >= 1");
  if (!(ar_unambiguous_fraction >= 0.0 && ar_unambiguous_fraction < 1.0)) {
    throw PreconditionError("ar_unambiguous_fraction must lie in [0, 1)");
  }
  if (spc_length < 1) throw PreconditionError("spc_length must be >= 1");
  if (ar_prefix_token_cap < 1) throw PreconditionError("ar_prefix_token_cap must be >= 1");
}

std::string_view to_string(PatternFamily family) {
  switch (family) {
    case PatternFamily::alternation: return "alternation";
    case PatternFamily::mirroring: return "mirroring";
    case PatternFamily::progression: return "progression";
  }
  return "unknown";
}

PatternFamily parse_pattern_family(std::string_view text) {
  if (text == "alternation") return PatternFamily::alternation;
  if (text == "mirroring") return PatternFamily::mirroring;
  if (text == "progression") return PatternFamily::progression;
  throw FormatError("unknown pattern family '" + std::string(text) + "'");
}

std::string pattern_period(PatternFamily family, std::span<const char> symbols) {
  switch (family) {
    case PatternFamily::alternation: return {symbols[0], symbols[1]};
    case PatternFamily::mirroring: return {symbols[0], symbols[1], symbols[1], symbols[0]};
    case PatternFamily::progression: return std::string(symbols.begin(), symbols.end());
  }
  return {};
}

SpcTask make_spc_task(PatternFamily family, std::vector<char> symbols, std::size_t length,
                      std::string template_id, std::uint64_t seed) {
  if (length < 1) throw PreconditionError("SPC sequence length must be >= 1");
  const std::set<char> distinct(symbols.begin(), symbols.end());
  if (distinct.size() != symbols.size()) throw PreconditionError("SPC symbols must be distinct");
  for (char c : symbols) {
    if (c < 'A' || c > 'Z') throw PreconditionError("SPC symbols must be uppercase A-Z");
  }
  const bool pair_family = family != PatternFamily::progression;
  if (pair_family ? symbols.size() != 2 : (symbols.size() < 3 || symbols.size() > 4)) {
    throw PreconditionError("wrong symbol count for " + std::string(to_string(family)));
  }
  const std::string period = pattern_period(family, symbols);
  std::string realization;
  realization.reserve(length + kSpcTargetLength);
  for (std::size_t i = 0; i < length + kSpcTargetLength; ++i) {
    realization.push_back(period[i % period.size()]);
  }
  SpcTask task;
  task.pattern_family = family;
  task.symbols = std::move(symbols);
  task.shown_sequence = realization.substr(0, length);
  task.target = realization.substr(length);
  task.template_id = template_id.empty() ? std::string(to_string(family)) : std::move(template_id);
  task.seed = seed;
  return task;
}

std::vector<SpcTask> gen_spc(const GenConfig& config) {
  config.validate();
  static constexpr PatternFamily kCycle[] = {PatternFamily::alternation, PatternFamily::mirroring,
                                             PatternFamily::progression};
  std::vector<SpcTask> tasks;
  tasks.reserve(config.count);
  for (std::size_t i = 0; i < config.count; ++i) {
    const std::uint64_t task_seed = derive_task_seed(config.seed, i);
    TaskRng rng(task_seed);
    const PatternFamily family = kCycle[i % 3];
    std::vector<char> symbols;
    std::string template_id;
    if (family == PatternFamily::progression) {
      const std::uint64_t k = 3 + rng.below(2);
      const std::uint64_t step = 1 + rng.below(3);
      const std::uint64_t start = rng.below(26);
      for (std::uint64_t j = 0; j < k; ++j) symbols.push_back(letter((start + j * step) % 26));
      template_id = "progression.k" + std::to_string(k) + ".step" + std::to_string(step);
    } else {
      const std::uint64_t u = rng.below(26);
      std::uint64_t v = rng.below(25);
      if (v >= u) ++v;
      symbols = {letter(u), letter(v)};
      template_id = family == PatternFamily::alternation ? "alternation.AB" : "mirroring.ABBA";
    }
    tasks.push_back(make_spc_task(family, std::move(symbols), config.spc_length,
                                  std::move(template_id), task_seed));
  }
  return tasks;
}

std::string_view to_string(AmbiguityStatus status) {
  return status == AmbiguityStatus::ambiguous ? "AMBIGUOUS" : "NOT_AMBIGUOUS";
}

std::string_view to_string(AnswerChoice answer) { return answer == AnswerChoice::a ? "A" : "B"; }

ArBank parse_ar_bank(const json& doc) {
  const json* entries = &doc;
  if (doc.is_object()) {
    auto it = doc.find("entries");
    if (it == doc.end()) throw FormatError("template bank: missing 'entries'");
    entries = &*it;
  }
  if (!entries->is_array()) throw FormatError("template bank: 'entries' must be an array");
  ArBank bank;
  std::set<std::string> ids;
  for (std::size_t i = 0; i < entries->size(); ++i) {
    const json& e = (*entries)[i];
    const std::string where = "entry " + std::to_string(i);
    if (!e.is_object()) throw FormatError("template bank: " + where + " is not an object");
    ArBankEntry entry;
    entry.id = bank_string(e, "id", where);
    const std::string named = where + " ('" + entry.id + "')";
    entry.head_word = bank_string(e, "head_word", named);
    entry.prefix = bank_string(e, "prefix", named);
    auto senses = e.find("senses");
    if (senses == e.end() || !senses->is_array() || senses->size() != 2) {
      throw FormatError("template bank: " + named + " must have exactly two senses");
    }
    for (std::size_t s = 0; s < 2; ++s) {
      const json& sj = (*senses)[s];
      const std::string swhere = named + " sense " + std::to_string(s);
      if (!sj.is_object()) throw FormatError("template bank: " + swhere + " is not an object");
      ArSense& sense = entry.senses[s];
      sense.label = sj.value("label", std::string(s == 0 ? "a" : "b"));
      sense.completion = bank_string(sj, "completion", swhere);
      sense.unambiguous_prefix = bank_string(sj, "unambiguous_prefix", swhere);
      auto hints = sj.find("hints");
      if (hints == sj.end() || !hints->is_array() || hints->empty()) {
        throw FormatError("template bank: " + swhere + " needs at least one hint");
      }
      for (const auto& h : *hints) {
        if (!h.is_string() || h.get<std::string>().empty()) {
          throw FormatError("template bank: " + swhere + " has an empty hint");
        }
        sense.hints.push_back(h.get<std::string>());
      }
    }
    if (entry.senses[0].completion == entry.senses[1].completion) {
      throw FormatError("template bank: " + named + " has identical sense completions");
    }
    for (const auto& sense : entry.senses) {
      const std::string option = lower(sense.completion);
      for (const std::string* p : {&entry.prefix, &entry.senses[0].unambiguous_prefix,
                                   &entry.senses[1].unambiguous_prefix}) {
        if (lower(*p).find(option) != std::string::npos) {
          throw FormatError("template bank: " + named + " option '" + sense.completion +
                            "' appears inside a prefix");
        }
      }
    }
    if (!ids.insert(entry.id).second) {
      throw FormatError("template bank: duplicate entry id '" + entry.id + "'");
    }
    bank.push_back(std::move(entry));
  }
  if (bank.empty()) throw FormatError("template bank: no entries");
  return bank;
}

ArBank load_ar_bank(const std::filesystem::path& path) {
  try {
    return parse_ar_bank(json::parse(read_text_file(path)));
  } catch (const json::exception& e) {
    throw FormatError("template bank " + path.string() + ": " + e.what());
  }
}

const ArBank& default_ar_bank() {
  static const ArBank kBank = parse_ar_bank(json::parse(detail::default_bank_json()));
  return kBank;
}

std::string truncate_tokens(std::string_view text, std::size_t cap) {
  std::istringstream in{std::string(text)};
  std::string token;
  std::string out;
  for (std::size_t n = 0; n < cap && in >> token; ++n) {
    if (!out.empty()) out += ' ';
    out += token;
  }
  return out;
}

ArTask build_ar_task(const ArBankEntry& entry, const ArChoice& choice, std::size_t prefix_cap,
                     std::uint64_t seed) {
  if (choice.gold_sense > 1) throw PreconditionError("gold_sense must be 0 or 1");
  const ArSense& gold = entry.senses[choice.gold_sense];
  if (choice.hint_index >= gold.hints.size()) throw PreconditionError("hint_index out of range");
  ArTask task;
  task.prefix = truncate_tokens(choice.unambiguous ? gold.unambiguous_prefix : entry.prefix,
                                prefix_cap);
  const ArSense& first = entry.senses[choice.swap_options ? 1 : 0];
  const ArSense& second = entry.senses[choice.swap_options ? 0 : 1];
  task.option_a = first.completion;
  task.option_b = second.completion;
  task.hint = gold.hints[choice.hint_index];
  task.gold_status = choice.unambiguous ? AmbiguityStatus::not_ambiguous : AmbiguityStatus::ambiguous;
  task.gold_answer = (&gold == &first) ? AnswerChoice::a : AnswerChoice::b;
  task.entry_id = entry.id;
  task.seed = seed;
  return task;
}

std::vector<ArTask> gen_ar(const GenConfig& config, const ArBank& bank) {
  config.validate();
  if (bank.empty()) throw PreconditionError("gen_ar: empty template bank");
  const std::size_t n = bank.size();
  std::vector<std::size_t> order(n);
  std::vector<ArTask> tasks;
  tasks.reserve(config.count);
  for (std::size_t i = 0; i < config.count; ++i) {
    if (i % n == 0) {
      std::iota(order.begin(), order.end(), 0);
      TaskRng shuffle(derive_task_seed(mix64(config.seed) ^ kPermutationSalt, i / n));
      for (std::size_t j = n - 1; j > 0; --j) {
        std::swap(order[j], order[shuffle.below(j + 1)]);
      }
    }
    const ArBankEntry& entry = bank[order[i % n]];
    const std::uint64_t task_seed = derive_task_seed(config.seed, i);
    TaskRng rng(task_seed);
    ArChoice choice;
    choice.gold_sense = static_cast<std::size_t>(rng.below(2));
    choice.unambiguous = rng.unit() < config.ar_unambiguous_fraction;
    choice.swap_options = rng.below(2) == 1;
    choice.hint_index =
        static_cast<std::size_t>(rng.below(entry.senses[choice.gold_sense].hints.size()));
    tasks.push_back(build_ar_task(entry, choice, config.ar_prefix_token_cap, task_seed));
  }
  return tasks;
}

std::vector<std::string> entropy_filter_prefixes(
    std::span<const std::string> candidates,
    const std::map<std::string, EntropySeries>& series_source, double threshold) {
  if (!(threshold >= 0.0)) throw PreconditionError("entropy threshold must be >= 0");
  std::vector<std::string> kept;
  for (const auto& candidate : candidates) {
    auto it = series_source.find(candidate);
    if (it == series_source.end()) {
      throw PreconditionError("no entropy series for candidate '" + candidate + "'");
    }
    if (it->second.empty()) {
      throw PreconditionError("empty entropy series for candidate '" + candidate + "'");
    }
    if (it->second.values.back() > threshold) kept.push_back(candidate);
  }
  return kept;
}

std::string task_input(const ArTask& task) {
  return "Consider the ambiguous prefix and two possible senses. First, judge the prefix alone "
         "as AMBIGUOUS or NOT AMBIGUOUS. Then, after reading the hint, choose the correct option "
         "A or B. Respond strictly as: ambiguous status=AMBIGUOUS or NOT AMBIGUOUS and answer=A "
         "or B. Prefix: " +
         task.prefix + ", Options: A. " + task.option_a + " or B. " + task.option_b +
         ". Hint: " + task.hint + " Your response:";
}

std::string task_input(const SpcTask& task) {
  return "You are given a symbolic sequence. Continue it by writing exactly the next " +
         std::to_string(task.target.size()) +
         " symbols, without spaces or explanations. Sequence: " + task.shown_sequence + " Answer:";
}

std::string gold_response(const ArTask& task) {
  return std::string("ambiguous status=") +
         (task.gold_status == AmbiguityStatus::ambiguous ? "AMBIGUOUS" : "NOT AMBIGUOUS") +
         "; answer=" + std::string(to_string(task.gold_answer));
}

std::string gold_response(const SpcTask& task) { return task.target; }

std::string render_prompt(const ArTask& task, std::span<const ArTask> exemplars, std::size_t k) {
  return render(task, exemplars, k);
}

std::string render_prompt(const SpcTask& task, std::span<const SpcTask> exemplars, std::size_t k) {
  return render(task, exemplars, k);
}

ordered_json to_json(const SpcTask& task) {
  ordered_json symbols = ordered_json::array();
  for (char c : task.symbols) symbols.push_back(std::string(1, c));
  return ordered_json{{"schema_version", kTaskSchemaVersion},
                      {"pattern_family", std::string(to_string(task.pattern_family))},
                      {"symbols", symbols},
                      {"shown_sequence", task.shown_sequence},
                      {"target", task.target},
                      {"template_id", task.template_id},
                      {"seed", task.seed}};
}

ordered_json to_json(const ArTask& task) {
  return ordered_json{{"schema_version", kTaskSchemaVersion},
                      {"prefix", task.prefix},
                      {"option_a", task.option_a},
                      {"option_b", task.option_b},
                      {"hint", task.hint},
                      {"gold_status", std::string(to_string(task.gold_status))},
                      {"gold_answer", std::string(to_string(task.gold_answer))},
                      {"entry_id", task.entry_id},
                      {"seed", task.seed}};
}

SpcTask spc_task_from_json(const json& doc) {
  check_schema_version(doc);
  SpcTask task;
  task.pattern_family = parse_pattern_family(field_string<SpcTask>(doc, "pattern_family"));
  auto symbols = doc.find("symbols");
  if (symbols == doc.end() || !symbols->is_array()) {
    throw FormatError("task record: missing array field 'symbols'");
  }
  for (const auto& s : *symbols) {
    if (!s.is_string() || s.get<std::string>().size() != 1) {
      throw FormatError("task record: symbols must be single characters");
    }
    task.symbols.push_back(s.get<std::string>()[0]);
  }
  task.shown_sequence = field_string<SpcTask>(doc, "shown_sequence");
  task.target = field_string<SpcTask>(doc, "target");
  task.template_id = field_string<SpcTask>(doc, "template_id");
  task.seed = field_seed(doc);
  return task;
}

ArTask ar_task_from_json(const json& doc) {
  check_schema_version(doc);
  ArTask task;
  task.prefix = field_string<ArTask>(doc, "prefix");
  task.option_a = field_string<ArTask>(doc, "option_a");
  task.option_b = field_string<ArTask>(doc, "option_b");
  task.hint = field_string<ArTask>(doc, "hint");
  const std::string status = field_string<ArTask>(doc, "gold_status");
  if (status == "AMBIGUOUS") {
    task.gold_status = AmbiguityStatus::ambiguous;
  } else if (status == "NOT_AMBIGUOUS") {
    task.gold_status = AmbiguityStatus::not_ambiguous;
  } else {
    throw FormatError("task record: bad gold_status '" + status + "'");
  }
  const std::string answer = field_string<ArTask>(doc, "gold_answer");
  if (answer != "A" && answer != "B") throw FormatError("task record: bad gold_answer '" + answer + "'");
  task.gold_answer = answer == "A" ? AnswerChoice::a : AnswerChoice::b;
  task.entry_id = field_string<ArTask>(doc, "entry_id");
  task.seed = field_seed(doc);
  return task;
}

std::string to_jsonl(std::span<const SpcTask> tasks) {
  std::string out;
  for (const auto& t : tasks) out += to_json(t).dump() + "\n";
  return out;
}

std::string to_jsonl(std::span<const ArTask> tasks) {
  std::string out;
  for (const auto& t : tasks) out += to_json(t).dump() + "\n";
  return out;
}

std::vector<SpcTask> read_spc_tasks(const std::filesystem::path& path) {
  return read_jsonl<SpcTask>(path, spc_task_from_json);
}

std::vector<ArTask> read_ar_tasks(const std::filesystem::path& path) {
  return read_jsonl<ArTask>(path, ar_task_from_json);
}

}  // namespace lpp
