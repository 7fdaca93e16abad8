#include "lpp/report.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <system_error>

#include "lpp/error.hpp"
#include "lpp/io.hpp"
#include "lpp/serialize.hpp"

namespace lpp {

namespace {

namespace fs = std::filesystem;

std::string slug(std::string_view text) {
  std::string out;
  for (char c : text) {
    const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.';
    out += keep ? c : '_';
  }
  return out.empty() ? "_" : out;
}

class PlotWriter {
 public:
  explicit PlotWriter(fs::path dir) : dir_(std::move(dir)) {}

  void add(const std::string& stem, const std::vector<std::pair<double, double>>& points) {
    std::string name = slug(stem);
    for (int k = 2; used_.count(name); ++k) name = slug(stem) + "_" + std::to_string(k);
    used_.insert(name);
    std::string text = "x,y\n";
    for (const auto& [x, y] : points) text += format_double(x) + "," + format_double(y) + "\n";
    const fs::path path = dir_ / (name + ".csv");
    write_file_atomic(path, text);
    written_.push_back(path);
  }

  std::vector<fs::path> written() const { return written_; }

 private:
  fs::path dir_;
  std::set<std::string> used_;
  std::vector<fs::path> written_;
};

}  // namespace

std::vector<fs::path> emit_report(const ReportInputs& inputs, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir / "plotdata", ec);
  if (ec) throw Error("cannot create report directory " + out_dir.string() + ": " + ec.message());

  std::vector<fs::path> written;
  auto emit = [&](const fs::path& path, const std::string& text) {
    write_file_atomic(path, text);
    written.push_back(path);
  };

  nlohmann::ordered_json profiles = nlohmann::ordered_json::array();
  for (const auto& p : inputs.profiles) profiles.push_back(to_json(p));
  emit(out_dir / "profile.json",
       nlohmann::ordered_json{{"profiles", profiles}}.dump(2) + "\n");

  std::string sweeps = std::string(kSweepCsvHeader) + "\n";
  for (const auto& s : inputs.sweeps) sweeps += sweep_csv_rows(s);
  emit(out_dir / "sweeps.csv", sweeps);

  std::string curves = std::string(kLayerCurveCsvHeader) + "\n";
  for (const auto& c : inputs.curves) curves += layer_curve_csv_rows(c.model_id, c.curve);
  emit(out_dir / "layer_curve.csv", curves);

  const nlohmann::ordered_json correlations =
      inputs.correlations ? to_json(*inputs.correlations)
                          : nlohmann::ordered_json{{"models", nlohmann::ordered_json::array()},
                                                   {"scheme", nullptr},
                                                   {"pairs", nlohmann::ordered_json::object()},
                                                   {"method_notes", nlohmann::ordered_json::array()}};
  emit(out_dir / "correlations.json", correlations.dump(2) + "\n");

  PlotWriter plots(out_dir / "plotdata");
  for (const auto& p : inputs.profiles) {
    std::vector<std::pair<double, double>> entropy, pr, er;
    for (const auto& row : p.per_context_table) {
      const auto x = static_cast<double>(row.context_length);
      if (row.entropy) entropy.emplace_back(x, *row.entropy);
      if (row.pr) pr.emplace_back(x, *row.pr);
      if (row.er) er.emplace_back(x, *row.er);
    }
    plots.add("profile_" + p.model_id + "_context_entropy_floor", entropy);
    plots.add("profile_" + p.model_id + "_context_max_pr", pr);
    plots.add("profile_" + p.model_id + "_context_max_er", er);
  }
  for (const auto& s : inputs.sweeps) {
    std::vector<std::pair<double, double>> entropy, pr, er;
    for (const auto& row : s.rows) {
      if (!row.available) continue;
      const auto x = static_cast<double>(row.value);
      entropy.emplace_back(x, row.metrics.entropy);
      pr.emplace_back(x, row.metrics.pr);
      er.emplace_back(x, row.metrics.er);
    }
    const std::string stem = "sweep_" + std::string(to_string(s.axis)) + "_" + s.scheme;
    plots.add(stem + "_entropy_floor", entropy);
    plots.add(stem + "_pr", pr);
    plots.add(stem + "_er", er);
  }
  for (const auto& c : inputs.curves) {
    std::vector<std::pair<double, double>> pr, er;
    for (std::size_t i = 0; i < c.curve.layers.size(); ++i) {
      pr.emplace_back(c.curve.layer_depths[i], c.curve.pr_values[i]);
      er.emplace_back(c.curve.layer_depths[i], c.curve.er_values[i]);
    }
    plots.add("layers_" + c.model_id + "_pr", pr);
    plots.add("layers_" + c.model_id + "_er", er);
  }
  if (inputs.correlations) {
    for (const auto& pair : inputs.correlations->pairs) {
      std::vector<std::pair<double, double>> points;
      for (std::size_t i = 0; i < pair.latent_values.size(); ++i) {
        points.emplace_back(pair.latent_values[i], pair.score_values[i]);
      }
      plots.add("scatter_" + pair.latent_metric + "_vs_" + pair.score_metric, points);
    }
  }
  for (auto& p : plots.written()) written.push_back(std::move(p));
  std::sort(written.begin(), written.end());
  return written;
}

}  // namespace lpp
