#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <Eigen/Eigenvalues>

namespace lpp::test::oracle {

double entropy(const std::vector<double>& logits) {
  long double m = *std::max_element(logits.begin(), logits.end());
  long double z = 0.0L;
  for (double l : logits) z += std::exp(static_cast<long double>(l) - m);
  long double h = 0.0L;
  for (double l : logits) {
    const long double p = std::exp(static_cast<long double>(l) - m) / z;
    if (p > 0.0L) h -= p * std::log(p);
  }
  return static_cast<double>(h);
}

std::vector<double> dense_covariance_eigenvalues(const Eigen::MatrixXd& x) {
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd xc = x.rowwise() - mean;
  const Eigen::MatrixXd cov = (xc.transpose() * xc) / static_cast<double>(x.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov, Eigen::EigenvaluesOnly);
  std::vector<double> ev(solver.eigenvalues().data(),
                         solver.eigenvalues().data() + solver.eigenvalues().size());
  std::sort(ev.rbegin(), ev.rend());
  return ev;
}

double effective_rank(const std::vector<double>& lambda) {
  const double total = std::accumulate(lambda.begin(), lambda.end(), 0.0);
  double h = 0.0;
  for (double l : lambda) {
    if (l <= 0.0) continue;
    const double p = l / total;
    h -= p * std::log(p);
  }
  return std::exp(h);
}

double participation_ratio(const std::vector<double>& lambda) {
  double s = 0.0, q = 0.0;
  for (double l : lambda) {
    s += l;
    q += l * l;
  }
  return s * s / q;
}

double char_f1(const std::string& pred_raw, const std::string& gold) {
  std::string pred;
  for (char c : pred_raw) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') continue;
    pred += c;
  }
  if (pred.size() > gold.size()) pred.resize(gold.size());
  if (pred.empty() && gold.empty()) return 1.0;
  if (pred.empty() || gold.empty()) return 0.0;
  std::map<char, int> pc, gc;
  for (char c : pred) ++pc[c];
  for (char c : gold) ++gc[c];
  int overlap = 0;
  for (const auto& [c, n] : pc) {
    auto it = gc.find(c);
    if (it != gc.end()) overlap += std::min(n, it->second);
  }
  if (overlap == 0) return 0.0;
  const double p = static_cast<double>(overlap) / pred.size();
  const double r = static_cast<double>(overlap) / gold.size();
  return 2 * p * r / (p + r);
}

namespace {

double plain_r(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

Corr pearson_exact(const std::vector<double>& x, const std::vector<double>& y) {
  Corr out;
  out.r = plain_r(x, y);
  // Heap's algorithm over permutations of y.
  std::vector<double> py = y;
  const std::size_t n = py.size();
  std::vector<std::size_t> c(n, 0);
  auto visit = [&] {
    ++out.total;
    if (std::abs(plain_r(x, py)) >= std::abs(out.r) - 1e-9) ++out.hits;
  };
  visit();
  std::size_t i = 1;
  while (i < n) {
    if (c[i] < i) {
      std::swap(py[i % 2 == 0 ? 0 : c[i]], py[i]);
      visit();
      ++c[i];
      i = 1;
    } else {
      c[i] = 0;
      ++i;
    }
  }
  out.p = static_cast<double>(out.hits) / static_cast<double>(out.total);
  return out;
}

Corr spearman_exact(const std::vector<double>& x, const std::vector<double>& y) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      double less = 0, equal = 0;
      for (double w : v) {
        if (w < v[i]) ++less;
        if (w == v[i]) ++equal;
      }
      r[i] = less + (equal + 1) / 2.0;
    }
    return r;
  };
  return pearson_exact(ranks(x), ranks(y));
}

bool spc_rule_holds(const std::string& family, const std::vector<char>& symbols,
                    const std::string& shown, const std::string& target) {
  if (target.size() != 3 || shown.empty()) return false;
  if (symbols.size() < 2 || symbols.size() > 4) return false;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (symbols[i] < 'A' || symbols[i] > 'Z') return false;
    for (std::size_t j = 0; j < i; ++j) {
      if (symbols[i] == symbols[j]) return false;
    }
  }
  const std::string s = shown + target;
  if (family == "alternation") {
    if (symbols.size() != 2) return false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] != (i % 2 == 0 ? symbols[0] : symbols[1])) return false;
    }
    return true;
  }
  if (family == "mirroring") {
    if (symbols.size() != 2) return false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const std::size_t pos = i % 4;
      const char want = (pos == 0 || pos == 3) ? symbols[0] : symbols[1];
      if (s[i] != want) return false;
    }
    return true;
  }
  if (family == "progression") {
    if (symbols.size() < 3) return false;
    const int step = ((symbols[1] - symbols[0]) % 26 + 26) % 26;
    if (step == 0) return false;
    for (std::size_t i = 1; i < symbols.size(); ++i) {
      if (((symbols[i] - symbols[i - 1]) % 26 + 26) % 26 != step) return false;
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] != symbols[i % symbols.size()]) return false;
    }
    return true;
  }
  return false;
}

}  // namespace lpp::test::oracle
