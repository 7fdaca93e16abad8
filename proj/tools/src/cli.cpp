#include "lpp_cli/cli.hpp"

#include <cstdlib>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "json_config.hpp"
#include "lpp/error.hpp"
#include "lpp/io.hpp"
#include "lpp/profiler.hpp"
#include "lpp/report.hpp"
#include "lpp/scoring.hpp"
#include "lpp/serialize.hpp"
#include "lpp/stats.hpp"
#include "lpp/sweep.hpp"
#include "lpp/taskgen.hpp"
#include "lpp/trace.hpp"

namespace lpp::cli {

namespace {

using nlohmann::ordered_json;

// Bad flag values found after CLI11 accepted the command line.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  bool json = false;
  std::size_t threads = 0;
  std::string log_level;
};

struct RunSelection {
  std::optional<std::size_t> context;
  std::optional<std::size_t> prefix;
  std::optional<std::size_t> samples;
  std::vector<std::string> layers;
  std::vector<std::size_t> context_grid;
  std::string entropy_source = "auto";
  std::string scheme = "canonical";
};

struct Args {
  Globals globals;
  RunSelection sel;
  std::vector<std::string> runs;
  std::string inspect_run;
  std::string out;
  std::string out_dir;
  std::string format;
  std::string axis = "context_length";
  std::vector<std::int64_t> grid;
  std::vector<std::string> sweep_axes;
  std::vector<std::string> profile_files;
  std::string scores;
  std::string correlate_scheme;
  std::string gold;
  std::string responses;
  std::uint64_t seed = 42;
  std::size_t count = 100;
  std::size_t spc_length = 12;
  double unambiguous_fraction = 0.25;
  std::size_t prefix_cap = 30;
  std::string bank;
};

template <typename F>
auto as_usage(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

void add_selection(CLI::App* cmd, RunSelection& sel, bool with_grid) {
  cmd->add_option(
      "--context", sel.context,
      "Context length C in tokens (default 200, capped at the run's context_length)");
  cmd->add_option(
      "--prefix", sel.prefix,
      "Prefix length in tokens (default 100, capped at the run's prefix_length)");
  cmd->add_option(
      "--samples", sel.samples,
      "Number of samples, first N in manifest order (default 100, capped at the run)");
  cmd->add_option("--layers", sel.layers,
                  "Layers to analyse: indices, -1 for the last layer, or 'all' "
                  "(default: last layer)")
      ->delimiter(',');
  if (with_grid) {
    cmd->add_option("--context-grid", sel.context_grid,
                    "Extra context lengths for the per-context table")
        ->delimiter(',');
  }
  cmd->add_option("--entropy-source", sel.entropy_source,
                  "Entropy from 'entropy' payloads, 'logits', or 'auto'")
      ->capture_default_str();
  cmd->add_option("--scheme", sel.scheme,
                  "Aggregation: canonical, all-median, all-mean, all-min, all-max, or "
                  "entropy:pr:er stats")
      ->capture_default_str();
}

ProfileOptions to_options(const RunSelection& sel, const TraceManifest& manifest,
                          std::size_t threads) {
  ProfileOptions o;
  o.context_length = sel.context;
  o.prefix_length = sel.prefix;
  o.max_samples = sel.samples;
  if (!sel.layers.empty()) {
    if (sel.layers.size() == 1 && sel.layers.front() == "all") {
      o.layers = manifest.layers;
    } else {
      std::vector<int> layers;
      for (const auto& l : sel.layers) {
        try {
          std::size_t used = 0;
          layers.push_back(std::stoi(l, &used));
          if (used != l.size()) throw std::invalid_argument(l);
        } catch (const std::exception&) {
          throw UsageError("--layers: '" + l + "' is not a layer index");
        }
      }
      o.layers = layers;
    }
  }
  o.context_grid = sel.context_grid;
  o.entropy_source = as_usage([&] { return parse_entropy_source(sel.entropy_source); });
  o.threads = threads;
  return o;
}

AggregationScheme scheme_of(const RunSelection& sel) {
  return as_usage([&] { return parse_scheme(sel.scheme); });
}

void emit_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    write_file_atomic(path, text);
  }
}

void emit_json(const std::string& path, const ordered_json& doc, std::ostream& out) {
  emit_text(path, doc.dump(2) + "\n", out);
}

ordered_json profiles_json(const std::vector<LatentProfile>& profiles) {
  if (profiles.size() == 1) return to_json(profiles.front());
  ordered_json list = ordered_json::array();
  for (const auto& p : profiles) list.push_back(to_json(p));
  return ordered_json{{"profiles", list}};
}

std::vector<TraceRun> load_runs(const std::vector<std::string>& paths, spdlog::logger& log) {
  std::vector<TraceRun> runs;
  for (const auto& p : paths) {
    runs.push_back(load_run(p));
    log.info("loaded run {} ({} samples)", p, runs.back().manifest().num_samples);
  }
  return runs;
}

int cmd_inspect(const Args& a, std::ostream& out, spdlog::logger& log) {
  const TraceRun run = load_run(a.inspect_run);
  const ValidationReport report = validate_run(run);
  log.info("checked {} tensors", report.tensors_checked);
  if (a.globals.json) {
    out << ordered_json{{"manifest", summarize(run.manifest())}, {"validation", to_json(report)}}
               .dump(2)
        << "\n";
  } else {
    const TraceManifest& m = run.manifest();
    out << "model_id:       " << m.model_id << "\n"
        << "dataset_id:     " << m.dataset_id << "\n"
        << "samples:        " << m.num_samples << "\n"
        << "context/prefix: " << m.context_length << "/" << m.prefix_length << "\n"
        << "layers:         " << summarize(m)["layers"].dump() << "\n"
        << "payloads:       " << summarize(m)["payload_kinds"].dump() << "\n"
        << "tensors:        " << report.tensors_checked << " checked\n";
    for (const auto& f : report.findings) out << "  " << f.path << ": " << f.message << "\n";
    out << (report.ok ? "OK" : "INVALID") << "\n";
  }
  return report.ok ? kExitOk : kExitFailure;
}

int cmd_profile(const Args& a, std::ostream& out, spdlog::logger& log) {
  const AggregationScheme scheme = scheme_of(a.sel);
  std::vector<LatentProfile> profiles;
  for (const auto& run : load_runs(a.runs, log)) {
    profiles.push_back(
        latent_profile(run, scheme, to_options(a.sel, run.manifest(), a.globals.threads)));
    for (const auto& w : profiles.back().provenance.warnings) log.warn("{}", w);
  }
  emit_json(a.out, profiles_json(profiles), out);
  return kExitOk;
}

int cmd_sweep(const Args& a, std::ostream& out, spdlog::logger& log) {
  const SweepAxis axis = as_usage([&] { return parse_sweep_axis(a.axis); });
  const AggregationScheme scheme = scheme_of(a.sel);
  const std::vector<TraceRun> runs = load_runs(a.runs, log);
  if (axis != SweepAxis::dataset && runs.size() != 1) {
    throw UsageError("--axis " + a.axis + " takes exactly one --run");
  }
  std::vector<std::int64_t> grid = a.grid.empty() ? default_grid(axis) : a.grid;
  const SweepTable table = sensitivity_sweep(
      runs, axis, grid, scheme, to_options(a.sel, runs.front().manifest(), a.globals.threads));
  std::string format = a.format;
  if (format.empty()) {
    format = a.out.size() > 4 && a.out.substr(a.out.size() - 4) == ".csv" ? "csv" : "json";
  }
  if (format == "csv") {
    emit_text(a.out, std::string(kSweepCsvHeader) + "\n" + sweep_csv_rows(table), out);
  } else {
    emit_json(a.out, to_json(table), out);
  }
  return kExitOk;
}

int cmd_layers(const Args& a, std::ostream& out, spdlog::logger& log) {
  const AggregationScheme scheme = scheme_of(a.sel);
  const std::vector<TraceRun> runs = load_runs(a.runs, log);
  if (runs.size() != 1) throw UsageError("layers takes exactly one --run");
  const LayerCurve curve =
      layer_curve(runs.front(), scheme, to_options(a.sel, runs.front().manifest(), a.globals.threads));
  if (a.format == "csv" ||
      (a.format.empty() && a.out.size() > 4 && a.out.substr(a.out.size() - 4) == ".csv")) {
    emit_text(a.out,
              std::string(kLayerCurveCsvHeader) + "\n" +
                  layer_curve_csv_rows(runs.front().manifest().model_id, curve),
              out);
  } else {
    emit_json(a.out, to_json(curve), out);
  }
  return kExitOk;
}

GenConfig gen_config(const Args& a) {
  GenConfig c;
  c.count = a.count;
  c.seed = a.seed;
  c.spc_length = a.spc_length;
  c.ar_unambiguous_fraction = a.unambiguous_fraction;
  c.ar_prefix_token_cap = a.prefix_cap;
  as_usage([&] {
    c.validate();
    return 0;
  });
  return c;
}

int cmd_taskgen(TaskKind kind, const Args& a, std::ostream& out, spdlog::logger& log) {
  const GenConfig config = gen_config(a);
  std::string text;
  if (kind == TaskKind::spc) {
    text = to_jsonl(gen_spc(config));
  } else {
    const ArBank bank = a.bank.empty() ? default_ar_bank() : load_ar_bank(a.bank);
    log.info("template bank: {} entries", bank.size());
    text = to_jsonl(gen_ar(config, bank));
  }
  emit_text(a.out, text, out);
  log.info("generated {} {} tasks (seed {})", config.count, to_string(kind), config.seed);
  return kExitOk;
}

int cmd_score(TaskKind kind, const Args& a, std::ostream& out) {
  TaskScore score;
  if (kind == TaskKind::spc) {
    const auto gold = read_spc_tasks(a.gold);
    score = score_spc(gold, read_responses(a.responses, gold.size()), a.globals.threads);
  } else {
    const auto gold = read_ar_tasks(a.gold);
    score = score_ar(gold, read_responses(a.responses, gold.size()), a.globals.threads);
  }
  emit_json(a.out, to_json(score), out);
  return kExitOk;
}

std::vector<LatentProfile> read_profiles(const std::vector<std::string>& files) {
  std::vector<LatentProfile> profiles;
  for (const auto& f : files) {
    for (auto& p : load_latent_profiles(f)) profiles.push_back(std::move(p));
  }
  return profiles;
}

std::optional<std::string> correlate_scheme(const Args& a) {
  if (a.correlate_scheme.empty() || a.correlate_scheme == "canonical") return std::nullopt;
  return a.correlate_scheme;
}

int cmd_correlate(const Args& a, std::ostream& out) {
  const auto profiles = read_profiles(a.profile_files);
  const CorrelationReport report =
      correlation_matrix(profiles, load_score_table(a.scores), correlate_scheme(a));
  emit_json(a.out, to_json(report), out);
  return kExitOk;
}

int cmd_report(const Args& a, std::ostream& out, spdlog::logger& log) {
  const AggregationScheme scheme = scheme_of(a.sel);
  std::vector<SweepAxis> axes;
  const std::vector<std::string> names =
      a.sweep_axes.empty() ? std::vector<std::string>{"context_length"} : a.sweep_axes;
  for (const auto& name : names) {
    axes.push_back(as_usage([&] { return parse_sweep_axis(name); }));
  }
  ReportInputs inputs;
  inputs.profiles = read_profiles(a.profile_files);
  const std::vector<TraceRun> runs = load_runs(a.runs, log);
  for (const auto& run : runs) {
    const ProfileOptions options = to_options(a.sel, run.manifest(), a.globals.threads);
    inputs.profiles.push_back(latent_profile(run, scheme, options));
    if (run.manifest().layers.size() >= 3) {
      ProfileOptions curve_options = options;
      curve_options.layers.reset();
      inputs.curves.push_back({run.manifest().model_id, layer_curve(run, scheme, curve_options)});
    } else {
      log.info("{}: fewer than 3 layers, no layer curve", run.manifest().model_id);
    }
    for (SweepAxis axis : axes) {
      if (axis == SweepAxis::dataset) continue;
      inputs.sweeps.push_back(sensitivity_sweep(std::span(&run, 1), axis, default_grid(axis),
                                                scheme, options));
    }
  }
  for (SweepAxis axis : axes) {
    if (axis == SweepAxis::dataset && !runs.empty()) {
      inputs.sweeps.push_back(sensitivity_sweep(runs, axis, {}, scheme,
                                                to_options(a.sel, runs.front().manifest(),
                                                           a.globals.threads)));
    }
  }
  if (!a.scores.empty()) {
    inputs.correlations =
        correlation_matrix(inputs.profiles, load_score_table(a.scores), correlate_scheme(a));
  }
  const auto written = emit_report(inputs, a.out_dir);
  if (a.globals.json) {
    ordered_json list = ordered_json::array();
    for (const auto& p : written) list.push_back(p.string());
    out << ordered_json{{"written", list}}.dump(2) << "\n";
  } else {
    for (const auto& p : written) out << p.string() << "\n";
  }
  return kExitOk;
}

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err, const std::string& level) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto log = std::make_shared<spdlog::logger>("lpp", sink);
  log->set_pattern("lpp: %l: %v");
  log->set_level(spdlog::level::from_str(level));
  return log;
}

void report_error(std::ostream& err, bool json, const std::string& kind, const std::string& message,
                  int code) {
  if (json) {
    err << ordered_json{{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}}.dump()
        << "\n";
  } else {
    err << "lpp: " << (code == kExitUsage ? "usage error: " : "error: ") << message << "\n";
  }
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Args a;
  CLI::App app{"Latent profiling of language-model traces, diagnostic task generation and "
               "scoring.\nDefaults follow the reference setup: seed 42, context 200, prefix 100, "
               "100 samples, last layer, canonical aggregation (min entropy, max PR, max ER).",
               "lpp"};
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config file; command-line flags override it");
  app.add_flag("--json", a.globals.json, "Machine-readable output and errors");
  app.add_option("--threads", a.globals.threads, "Worker threads (0 = all cores)")
      ->capture_default_str();
  app.add_option("--log-level", a.globals.log_level,
                 "trace, debug, info, warn, err, critical or off (default: $LPP_LOG, else warn)");
  app.require_subcommand(1);

  auto* inspect = app.add_subcommand("inspect", "Validate a trace run and summarize it");
  inspect->add_option("run", a.inspect_run, "Run directory or manifest.json")->required();

  auto* profile = app.add_subcommand("profile", "Compute latent profiles (JSON)");
  profile->add_option("--run", a.runs, "Run directory or manifest.json (repeatable)")->required();
  profile->add_option("--out", a.out, "Output file (default: stdout)");
  add_selection(profile, a.sel, true);

  auto* sweep = app.add_subcommand("sweep", "Sensitivity sweep over one parameter");
  sweep->add_option("--run", a.runs, "Run (repeat for --axis dataset)")->required();
  sweep->add_option("--axis", a.axis, "context_length, prefix_length, sample_size or dataset")
      ->capture_default_str();
  sweep->add_option("--grid", a.grid,
                    "Grid values (defaults: context 50,100,200,500; prefix 10..100 step 10; "
                    "samples 10,100,500,1000)")
      ->delimiter(',');
  sweep->add_option("--out", a.out, "Output file (default: stdout)");
  sweep->add_option("--format", a.format, "json or csv (default: from --out extension, else json)")
      ->check(CLI::IsMember({"json", "csv"}));
  add_selection(sweep, a.sel, false);

  auto* layers = app.add_subcommand("layers", "Layerwise PR/ER curve and hourglass flag");
  layers->add_option("--run", a.runs, "Run directory or manifest.json")->required();
  layers->add_option("--out", a.out, "Output file (default: stdout)");
  layers->add_option("--format", a.format, "json or csv (default: from --out extension, else json)")
      ->check(CLI::IsMember({"json", "csv"}));
  add_selection(layers, a.sel, false);

  auto* taskgen = app.add_subcommand("taskgen", "Generate diagnostic tasks as JSON Lines");
  taskgen->require_subcommand(1);
  auto* taskgen_ar = taskgen->add_subcommand("ar", "Ambiguous Reasoning tasks");
  auto* taskgen_spc = taskgen->add_subcommand("spc", "Symbolic Pattern Completion tasks");
  for (auto* cmd : {taskgen_ar, taskgen_spc}) {
    cmd->add_option("--seed", a.seed, "Random seed")->capture_default_str();
    cmd->add_option("--count", a.count, "Number of tasks")->capture_default_str();
    cmd->add_option("--out", a.out, "Output JSONL file (default: stdout)");
  }
  taskgen_spc->add_option("--length", a.spc_length, "Shown sequence length")->capture_default_str();
  taskgen_ar->add_option("--bank", a.bank, "Template bank JSON (default: built-in bank)");
  taskgen_ar->add_option("--unambiguous-fraction", a.unambiguous_fraction,
                         "Share of tasks built on an unambiguous prefix")
      ->capture_default_str();
  taskgen_ar->add_option("--prefix-cap", a.prefix_cap, "Prefix length cap in words")
      ->capture_default_str();

  auto* score = app.add_subcommand("score", "Score model responses against gold tasks");
  score->require_subcommand(1);
  auto* score_ar_cmd = score->add_subcommand("ar", "AR dual accuracy");
  auto* score_spc_cmd = score->add_subcommand("spc", "SPC character-level F1");
  for (auto* cmd : {score_ar_cmd, score_spc_cmd}) {
    cmd->add_option("--gold", a.gold, "Task JSONL from taskgen")->required();
    cmd->add_option("--responses", a.responses, "JSONL of {task_index, response_text}")
        ->required();
    cmd->add_option("--out", a.out, "Output file (default: stdout)");
  }

  auto* correlate = app.add_subcommand("correlate", "Correlate latent profiles with scores");
  correlate->add_option("--profiles", a.profile_files, "Profile JSON files (repeatable)")
      ->required();
  correlate->add_option("--scores", a.scores, "CSV with header model_id,metric,value")->required();
  correlate->add_option("--scheme", a.correlate_scheme,
                        "Take latent values from this per_scheme entry (default: canonical)");
  correlate->add_option("--out", a.out, "Output file (default: stdout)");

  auto* report = app.add_subcommand("report", "Write the report bundle");
  report->add_option("--run", a.runs, "Runs to profile (repeatable)");
  report->add_option("--profiles", a.profile_files, "Precomputed profile JSON files");
  report->add_option("--scores", a.scores, "Score CSV; enables correlations.json content");
  report->add_option("--sweep-axis", a.sweep_axes,
                     "Sweep axes to include (repeatable; default: context_length)");
  report->add_option("--correlate-scheme", a.correlate_scheme,
                     "per_scheme entry used for correlations (default: canonical)");
  report->add_option("--out-dir", a.out_dir, "Output directory")->required();
  add_selection(report, a.sel, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::string message = e.what();
    if (!app.remaining().empty() && app.get_subcommands().empty()) {
      message = "unknown subcommand '" + app.remaining().front() + "'";
    }
    report_error(err, a.globals.json, "usage", message, kExitUsage);
    if (!a.globals.json) err << app.help();
    return kExitUsage;
  }

  std::string level = a.globals.log_level;
  if (level.empty()) {
    const char* env = std::getenv("LPP_LOG");
    level = env ? env : "warn";
  }
  if (spdlog::level::from_str(level) == spdlog::level::off && level != "off") {
    report_error(err, a.globals.json, "usage", "unknown log level '" + level + "'", kExitUsage);
    return kExitUsage;
  }
  auto log = make_logger(err, level);
  a.globals.threads = resolve_threads(a.globals.threads);

  try {
    if (*inspect) return cmd_inspect(a, out, *log);
    if (*profile) return cmd_profile(a, out, *log);
    if (*sweep) return cmd_sweep(a, out, *log);
    if (*layers) return cmd_layers(a, out, *log);
    if (*taskgen_ar) return cmd_taskgen(TaskKind::ar, a, out, *log);
    if (*taskgen_spc) return cmd_taskgen(TaskKind::spc, a, out, *log);
    if (*score_ar_cmd) return cmd_score(TaskKind::ar, a, out);
    if (*score_spc_cmd) return cmd_score(TaskKind::spc, a, out);
    if (*correlate) return cmd_correlate(a, out);
    if (*report) return cmd_report(a, out, *log);
  } catch (const UsageError& e) {
    report_error(err, a.globals.json, "usage", e.what(), kExitUsage);
    return kExitUsage;
  } catch (const FormatError& e) {
    report_error(err, a.globals.json, "format", e.what(), kExitFailure);
    return kExitFailure;
  } catch (const PreconditionError& e) {
    report_error(err, a.globals.json, "precondition", e.what(), kExitFailure);
    return kExitFailure;
  } catch (const std::exception& e) {
    report_error(err, a.globals.json, "error", e.what(), kExitFailure);
    return kExitFailure;
  }
  report_error(err, a.globals.json, "usage", "no subcommand", kExitUsage);
  return kExitUsage;
}

}  // namespace lpp::cli
