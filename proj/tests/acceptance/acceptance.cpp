// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "lpp/error.hpp"
#include "lpp/profiler.hpp"
#include "lpp/scoring.hpp"
#include "lpp/serialize.hpp"
#include "lpp/spectral.hpp"
#include "lpp/stats.hpp"
#include "lpp/taskgen.hpp"
#include "lpp_cli/cli.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace {

using namespace lpp;
namespace fs = std::filesystem;

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Failure(what);
}

std::string num(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

EigSpectrum planted(std::vector<double> lambda) {
  const std::size_t k = lambda.size();
  return make_spectrum(std::move(lambda), k + 1, k);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "lpp");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
}

void metric_oracles() {
  for (std::size_t k = 1; k <= 8; ++k) {
    const EigSpectrum s = planted(std::vector<double>(k, 0.37));
    require(effective_rank(s) == double(k), "ER of uniform " + std::to_string(k) + "-spectrum is " +
                                                num(effective_rank(s)));
    require(participation_ratio(s) == double(k),
            "PR of uniform " + std::to_string(k) + "-spectrum is " + num(participation_ratio(s)));
  }
  const double pr = participation_ratio(planted({4, 1}));
  require(std::abs(pr - 25.0 / 17.0) <= 1e-9, "PR([4,1]) = " + num(pr));
  const double er = effective_rank(planted({0.5, 0.25, 0.25}));
  require(std::abs(er - std::pow(2.0, 1.5)) <= 1e-9, "ER([0.5,0.25,0.25]) = " + num(er));
}

void gram_equivalence() {
  test::Rng rng(1000);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.index(19);
    const std::size_t d = 1 + rng.index(20);
    Eigen::MatrixXd x(n, d);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.normal() * (1 + j);
    }
    const auto fast = covariance_spectrum(x).eigenvalues;
    const auto dense = test::oracle::dense_covariance_eigenvalues(x);
    const double scale = std::max(fast.front(), dense.front());
    for (std::size_t i = 0; i < std::max(fast.size(), dense.size()); ++i) {
      const double a = i < fast.size() ? fast[i] : 0.0;
      const double b = i < dense.size() ? dense[i] : 0.0;
      require(std::abs(a - b) <= 1e-8 * scale, "trial " + std::to_string(trial) + " (n=" +
                                                   std::to_string(n) + ", d=" + std::to_string(d) +
                                                   ") eigenvalue " + std::to_string(i));
    }
  }
}

void sampling_consistency() {
  test::Rng rng(6);
  Eigen::MatrixXd x(10000, 6);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = 3.0 * rng.normal();
  }
  const EigSpectrum s = covariance_spectrum(x);
  const double er = effective_rank(s);
  const double pr = participation_ratio(s);
  require(std::abs(er - 6) <= 0.12, "ER = " + num(er));
  require(std::abs(pr - 6) <= 0.12, "PR = " + num(pr));
}

void entropy_suite() {
  for (std::size_t v : {2u, 7u, 50257u}) {
    const std::vector<double> uniform(v, 1.3);
    require(std::abs(softmax_entropy(uniform) - std::log(double(v))) <= 1e-6,
            "uniform V=" + std::to_string(v));
    std::vector<double> onehot(v, 0.0);
    onehot[v / 2] = 1e4;
    require(softmax_entropy(onehot) <= 1e-6, "one-hot V=" + std::to_string(v));
  }
  test::Rng rng(15);
  for (int i = 0; i < 10000; ++i) {
    const std::size_t v = 2 + rng.index(60);
    std::vector<double> z(v);
    const double spread = std::pow(10.0, rng.uniform(-2, 2.5));
    for (auto& x : z) x = spread * rng.normal();
    const double h = softmax_entropy(z);
    require(h >= 0.0 && h <= std::log(double(v)), "bounds violated: H = " + num(h));
    if (i < 1000) {
      require(std::abs(h - test::oracle::entropy(z)) <= 1e-6, "oracle mismatch");
      std::vector<double> shifted = z;
      const double c = rng.uniform(-500, 500);
      for (auto& x : shifted) x += c;
      require(std::abs(softmax_entropy(shifted) - h) <= 1e-6, "shift invariance");
      std::vector<double> perm = z;
      std::reverse(perm.begin(), perm.end());
      std::rotate(perm.begin(), perm.begin() + rng.index(v), perm.end());
      require(std::abs(softmax_entropy(perm) - h) <= 1e-6, "permutation invariance");
    }
  }
}

void profile_determinism() {
  test::TempDir dir;
  const std::string fixture = test::fixture_dir().string();
  const std::string a = (dir / "a.json").string();
  const std::string b = (dir / "b.json").string();
  require(cli({"profile", "--run", fixture, "--out", a}) == 0, "first profile run failed");
  require(cli({"--threads", "4", "profile", "--run", fixture, "--out", b}) == 0,
          "second profile run failed");
  require(!slurp(a).empty() && slurp(a) == slurp(b), "profile.json differs between runs");

  ProfileOptions opts;
  opts.layers = std::vector<int>{0, 1, 2, kLastLayer};
  opts.context_grid = {18, 24, 28};
  const LatentProfile p = latent_profile(load_run(fixture), AggregationScheme::canonical(), opts);
  std::map<std::string, MetricTriple> by;
  for (const auto& [name, t] : p.per_scheme) by[name] = t;
  for (const auto& preset : scheme_presets()) {
    require(by.count(preset.name) == 1, "missing scheme " + preset.name);
  }
  const auto& lo = by["all-min"];
  const auto& hi = by["all-max"];
  for (const char* mid : {"all-median", "all-mean"}) {
    const auto& m = by[mid];
    require(lo.entropy <= m.entropy && m.entropy <= hi.entropy, std::string(mid) + " entropy");
    require(lo.pr <= m.pr && m.pr <= hi.pr, std::string(mid) + " pr");
    require(lo.er <= m.er && m.er <= hi.er, std::string(mid) + " er");
  }
}

void rolling_monotonicity() {
  test::Rng rng(17);
  for (int i = 0; i < 1000; ++i) {
    EntropySeries s;
    const std::size_t t = 4 + rng.index(120);
    for (std::size_t j = 0; j < t; ++j) s.values.push_back(rng.uniform(0, 5));
    const std::size_t prefix = 1 + rng.index(t - 2);
    double prev = sample_entropy_floor(s, prefix, prefix + 1);
    for (std::size_t c = prefix + 2; c <= t + 1; ++c) {
      const double f = sample_entropy_floor(s, prefix, c);
      require(f <= prev, "series " + std::to_string(i) + " increases at context " +
                             std::to_string(c));
      prev = f;
    }
  }
}

void taskgen_soundness() {
  GenConfig cfg;
  cfg.count = 10000;
  cfg.seed = 2024;
  for (const auto& t : gen_spc(cfg)) {
    require(test::oracle::spc_rule_holds(std::string(to_string(t.pattern_family)), t.symbols,
                                         t.shown_sequence, t.target),
            "rule checker rejects " + t.shown_sequence + "|" + t.target);
  }
  const SpcTask dy = make_spc_task(PatternFamily::alternation, {'D', 'Y'}, 12);
  require(dy.shown_sequence == "DYDYDYDYDYDY" && dy.target == "DYD", "DY alternation example");

  test::TempDir dir;
  const std::string a = (dir / "a.jsonl").string();
  const std::string b = (dir / "b.jsonl").string();
  require(cli({"taskgen", "spc", "--seed", "42", "--count", "100", "--out", a}) == 0,
          "taskgen exit status");
  require(cli({"taskgen", "spc", "--seed", "42", "--count", "100", "--out", b}) == 0,
          "taskgen exit status");
  const std::string text = slurp(a);
  require(std::count(text.begin(), text.end(), '\n') == 100, "line count");
  require(text == slurp(b), "not byte-identical");
  const auto tasks = read_spc_tasks(a);
  require(tasks.size() == 100 && tasks[0].pattern_family == PatternFamily::alternation &&
              tasks[0].template_id == "alternation.AB" && tasks[0].shown_sequence.size() == 12 &&
              tasks[0].target.size() == 3,
          "first task is not a 12-symbol alternation with a 3-symbol target");
}

void scoring_oracles() {
  test::Rng rng(19);
  const std::string alphabet = "ABCDXY \n";
  for (int i = 0; i < 10000; ++i) {
    std::string p(rng.index(8), ' ');
    std::string g(rng.index(6), 'A');
    for (char& c : p) c = alphabet[rng.index(alphabet.size())];
    for (char& c : g) c = alphabet[rng.index(6)];
    require(char_f1(p, g) == test::oracle::char_f1(p, g), "char_f1('" + p + "', '" + g + "')");
  }
  const ArParse parse = parse_ar_response("ambiguous status=AMBIGUOUS; answer=B");
  require(parse.status == ParsedStatus::ambiguous && parse.answer == ParsedAnswer::b,
          "canonical AR response");

  GenConfig cfg;
  cfg.count = 500;
  const auto gold = gen_ar(cfg, default_ar_bank());
  const char* statuses[] = {"AMBIGUOUS", "NOT AMBIGUOUS", "unsure"};
  const char* answers[] = {"A", "B", "?"};
  std::vector<std::string> resp;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    resp.push_back(std::string("ambiguous status=") + statuses[rng.index(3)] + "; answer=" +
                   answers[rng.index(3)]);
  }
  const TaskScore s = score_ar(gold, resp);
  std::size_t sh = 0, ah = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const ArParse q = parse_ar_response(resp[i]);
    sh += (q.status == ParsedStatus::ambiguous) == (gold[i].gold_status == AmbiguityStatus::ambiguous) &&
          q.status != ParsedStatus::unparsed;
    ah += (q.answer == ParsedAnswer::a) == (gold[i].gold_answer == AnswerChoice::a) &&
          q.answer != ParsedAnswer::unparsed;
  }
  require(*s.status_accuracy == double(sh) / gold.size(), "status accuracy");
  require(*s.answer_accuracy == double(ah) / gold.size(), "answer accuracy");
  require(std::abs(s.mean - (*s.status_accuracy + *s.answer_accuracy) / 2) <= 1e-15,
          "mean is not the average of the two accuracies");
}

void correlation_exactness() {
  test::Rng rng(23);
  int checked = 0;
  for (int i = 0; checked < 1000; ++i) {
    const std::size_t n = 3 + rng.index(7);
    std::vector<double> x(n), y(n);
    for (auto& v : x) v = i % 4 == 0 ? double(rng.index(5)) : rng.normal();
    for (auto& v : y) v = i % 4 == 0 ? double(rng.index(5)) : rng.normal();
    Correlation r, s;
    try {
      r = pearson(x, y);
      s = spearman(x, y);
    } catch (const PreconditionError&) {
      continue;
    }
    ++checked;
    const auto ro = test::oracle::pearson_exact(x, y);
    const auto so = test::oracle::spearman_exact(x, y);
    const std::string tag = "vector " + std::to_string(i) + " (n=" + std::to_string(n) + ")";
    require(std::abs(r.coefficient - ro.r) <= 1e-12, tag + " pearson r");
    require(std::abs(s.coefficient - so.r) <= 1e-12, tag + " spearman rho");
    require(r.exact && s.exact, tag + " not exact");
    require(r.p_value == ro.p, tag + " pearson p " + num(r.p_value) + " vs " + num(ro.p));
    require(s.p_value == so.p, tag + " spearman p " + num(s.p_value) + " vs " + num(so.p));
  }
  const double rho = spearman(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 3, 2, 4}).coefficient;
  require(std::abs(rho - 0.8) <= 1e-12, "rho = " + num(rho));
  const double p = pearson(std::vector<double>{1, 2, 3}, std::vector<double>{3, 5, 7}).p_value;
  require(std::abs(p - 2.0 / 6.0) <= 1e-15, "p = " + num(p));
}

void hourglass() {
  const std::vector<double> depth{0.0, 0.5, 1.0};
  require(detect_hourglass(depth, std::vector<double>{5, 2, 5}), "[5,2,5] not flagged");
  require(!detect_hourglass(depth, std::vector<double>{2, 5, 2}), "[2,5,2] flagged");
  const LayerCurve c = layer_curve(load_run(test::fixture_dir()));
  require(c.layers.size() == 4 && c.hourglass_flag, "fixture curve not flagged");
}

struct Criterion {
  std::string name;
  std::function<void()> check;
  double budget_s;  // 0 = no runtime bound
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"metric oracles", metric_oracles, 1.0},
      {"gram-trick equivalence", gram_equivalence, 30.0},
      {"sampling consistency", sampling_consistency, 10.0},
      {"entropy suite", entropy_suite, 0},
      {"profile determinism and scheme ordering", profile_determinism, 0},
      {"rolling-window monotonicity", rolling_monotonicity, 0},
      {"taskgen soundness", taskgen_soundness, 0},
      {"scoring oracles", scoring_oracles, 0},
      {"correlation exactness", correlation_exactness, 0},
      {"hourglass detector", hourglass, 0},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    std::string error;
    try {
      c.check();
    } catch (const std::exception& e) {
      error = e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (error.empty() && c.budget_s > 0 && secs > c.budget_s) {
      error = "took " + num(secs) + " s, budget " + num(c.budget_s) + " s";
    }
    char timing[32];
    std::snprintf(timing, sizeof timing, "%.3fs", secs);
    if (error.empty()) {
      std::cout << "PASS  " << c.name << "  (" << timing << ")\n";
    } else {
      ++failed;
      std::cout << "FAIL  " << c.name << "  (" << timing << "): " << error << "\n";
    }
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
