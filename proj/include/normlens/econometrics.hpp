#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <json.hpp>

namespace normlens {

// One tweet in the event-study panel. day_index counts days since May 1 of
// the observation's panel year, so the same calendar day in both years shares
// an index (and hence a day intercept).
struct PanelObservation {
  std::string id;
  std::string user;
  std::string series = "heshe";  // heshe | togetherness
  int day_index = 0;
  int year2 = 0;
  int after = 0;  // after the event; nonzero only in year 2
  int follow_norms = 0;
  double gendered_language = 0.5;
  int she_count = 0;
};

inline int follow_norms(int predicted, int label) {
  if ((predicted != 0 && predicted != 1) || (label != 0 && label != 1))
    throw std::runtime_error("follow_norms: inputs must be binary");
  return predicted == label ? 1 : 0;
}

// Days since May 1, with Feb 29 mapped to -1 (no cross-year pair; drop it).
inline int day_index_from_date(int year, int month, int day) {
  if (month == 2 && day == 29) return -1;
  static const int len[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  auto day_of_year = [&](int m, int d) {
    int x = d - 1;
    for (int i = 0; i < m - 1; ++i) x += len[i];
    return x;  // Feb 29 already excluded
  };
  (void)year;
  const int may1 = day_of_year(5, 1);
  int idx = day_of_year(month, day) - may1;
  if (idx < 0) idx += 365;  // Jan-Apr belong to the previous panel year
  return idx;
}

// October 17 in the panel-year indexing.
inline constexpr int kEventDayIndex = 169;

inline double outcome_value(const PanelObservation& o, const std::string& outcome) {
  if (outcome == "follow_norms") return o.follow_norms;
  if (outcome == "gendered_language") return o.gendered_language;
  if (outcome == "she_count") return o.she_count;
  throw std::runtime_error("unknown outcome: " + outcome);
}

struct RegressionResult {
  std::vector<std::string> names;
  Eigen::VectorXd beta;
  Eigen::MatrixXd X;  // post-absorption design
  Eigen::VectorXd y;
  Eigen::VectorXd weights;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd bread;  // (X'WX)^{-1}
  Eigen::MatrixXd vcov;
  std::vector<double> se, t_stats, p_values;
  std::vector<std::string> stars;
  std::vector<std::string> day_cluster, user_cluster;  // per-row ids
  int n_absorbed = 0;  // dof used by absorbed fixed effects (incl. intercept)
  std::string estimator = "homoskedastic";
  std::size_t cluster_count_a = 0, cluster_count_b = 0;
  double r2 = 0.0;

  long long n() const { return static_cast<long long>(y.size()); }
  int k() const { return static_cast<int>(X.cols()) + n_absorbed; }
  int coef(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return static_cast<int>(i);
    throw std::runtime_error("no coefficient named " + name);
  }
};

struct Design {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<std::string> names;
  std::vector<std::string> day_cluster, user_cluster;
  int n_absorbed = 0;
};

namespace detail {

// Demean columns of X and y within groups; returns the number of groups.
inline std::size_t demean_once(Eigen::MatrixXd& X, Eigen::VectorXd& y,
                               const std::vector<std::string>& groups) {
  std::unordered_map<std::string, std::pair<Eigen::VectorXd, double>> sums;
  std::unordered_map<std::string, long long> counts;
  const int k = static_cast<int>(X.cols());
  for (int i = 0; i < X.rows(); ++i) {
    auto& s = sums[groups[i]];
    if (s.first.size() == 0) s.first = Eigen::VectorXd::Zero(k);
    s.first += X.row(i).transpose();
    s.second += y[i];
    counts[groups[i]] += 1;
  }
  for (int i = 0; i < X.rows(); ++i) {
    const auto& s = sums.at(groups[i]);
    const double c = static_cast<double>(counts.at(groups[i]));
    X.row(i) -= (s.first / c).transpose();
    y[i] -= s.second / c;
  }
  return sums.size();
}

// Alternating projections for two-way fixed effects.
inline void demean_twoway(Eigen::MatrixXd& X, Eigen::VectorXd& y,
                          const std::vector<std::string>& a, const std::vector<std::string>& b,
                          int max_iter = 200, double tol = 1e-12) {
  for (int it = 0; it < max_iter; ++it) {
    Eigen::MatrixXd X_prev = X;
    Eigen::VectorXd y_prev = y;
    demean_once(X, y, a);
    demean_once(X, y, b);
    const double delta = (X - X_prev).cwiseAbs().maxCoeff() +
                         (y - y_prev).cwiseAbs().maxCoeff();
    if (delta < tol) return;
  }
}

inline std::size_t count_groups(const std::vector<std::string>& g) {
  std::unordered_map<std::string, int> seen;
  for (const auto& s : g) seen.emplace(s, 0);
  return seen.size();
}

}  // namespace detail

// Build the design matrix for a named specification. Fixed effects are
// absorbed by within-demeaning; the FE dof count is carried in n_absorbed.
// Time-trend specifications follow the event-study robustness formulas with
// t = day_index / 100 (scaling keeps t^2 well conditioned; it only rescales
// trend coefficients, never After Metoo).
inline Design build_design(const std::vector<PanelObservation>& obs, const std::string& spec,
                           const std::string& outcome) {
  auto rows_where = [&](auto pred) {
    std::vector<const PanelObservation*> out;
    for (const auto& o : obs)
      if (pred(o)) out.push_back(&o);
    return out;
  };
  auto fill = [&](const std::vector<const PanelObservation*>& rows, Design& d,
                  const std::vector<std::string>& names,
                  auto row_fn) {
    d.names = names;
    d.X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(names.size()));
    d.y.resize(static_cast<Eigen::Index>(rows.size()));
    d.day_cluster.reserve(rows.size());
    d.user_cluster.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const PanelObservation& o = *rows[i];
      row_fn(o, d.X.row(static_cast<Eigen::Index>(i)));
      d.y[static_cast<Eigen::Index>(i)] = outcome_value(o, outcome);
      d.day_cluster.push_back(std::to_string(o.day_index));
      // a user appearing in both series counts as two separate users
      d.user_cluster.push_back(o.series + ":" + o.user);
    }
  };

  Design d;
  const auto is_heshe = [](const PanelObservation& o) { return o.series == "heshe"; };

  if (spec == "raw") {
    // After Metoo is undefined in Year 1, so raw uses Year-2 rows only
    auto rows = rows_where([&](const PanelObservation& o) { return is_heshe(o) && o.year2; });
    if (rows.empty())
      throw std::runtime_error("spec 'raw' requires Year-2 data (After Metoo undefined in Year 1)");
    fill(rows, d, {"const", "after_metoo"}, [](const PanelObservation& o, auto row) {
      row[0] = 1.0;
      row[1] = o.after;
    });
  } else if (spec == "baseline" || spec == "day_fe") {
    auto rows = rows_where(is_heshe);
    if (rows.empty()) throw std::runtime_error("spec '" + spec + "': no observations");
    fill(rows, d, {"year2", "after_metoo"}, [](const PanelObservation& o, auto row) {
      row[0] = o.year2;
      row[1] = o.after;
    });
    d.n_absorbed = static_cast<int>(detail::demean_once(d.X, d.y, d.day_cluster));
  } else if (spec == "user_fe") {
    auto rows = rows_where(is_heshe);
    if (rows.empty()) throw std::runtime_error("spec 'user_fe': no observations");
    fill(rows, d, {"year2", "after_metoo"}, [](const PanelObservation& o, auto row) {
      row[0] = o.year2;
      row[1] = o.after;
    });
    d.n_absorbed = static_cast<int>(detail::demean_once(d.X, d.y, d.user_cluster));
  } else if (spec == "day_user_fe") {
    auto rows = rows_where(is_heshe);
    if (rows.empty()) throw std::runtime_error("spec 'day_user_fe': no observations");
    fill(rows, d, {"after_metoo"}, [](const PanelObservation& o, auto row) { row[0] = o.after; });
    const std::size_t g_day = detail::count_groups(d.day_cluster);
    const std::size_t g_user = detail::count_groups(d.user_cluster);
    detail::demean_twoway(d.X, d.y, d.day_cluster, d.user_cluster);
    d.n_absorbed = static_cast<int>(g_day + g_user - 1);
  } else if (spec == "trend_placebo" || spec == "placebo_togetherness") {
    // Y = 1(b0+b1 t+b2 t^2) + AfterMetoo(b3+b4 t+b5 t^2); After coded 1
    // past the event for BOTH series.
    auto rows = rows_where([](const PanelObservation& o) { return o.year2 != 0; });
    if (rows.empty()) throw std::runtime_error("spec 'trend_placebo': no Year-2 observations");
    fill(rows, d, {"const", "t", "t2", "after_metoo", "after_x_t", "after_x_t2"},
         [](const PanelObservation& o, auto row) {
           const double t = o.day_index / 100.0;
           const double a = o.day_index >= kEventDayIndex ? 1.0 : 0.0;
           row[0] = 1.0;
           row[1] = t;
           row[2] = t * t;
           row[3] = a;
           row[4] = a * t;
           row[5] = a * t * t;
         });
  } else if (spec == "trend_heshe") {
    auto rows = rows_where([](const PanelObservation& o) { return o.year2 != 0; });
    if (rows.empty()) throw std::runtime_error("spec 'trend_heshe': no Year-2 observations");
    fill(rows, d,
         {"const", "t", "t2", "after_metoo", "after_x_t", "after_x_t2", "heshe", "heshe_x_t",
          "heshe_x_t2"},
         [&](const PanelObservation& o, auto row) {
           const double t = o.day_index / 100.0;
           const double a = o.after;
           const double h = o.series == "heshe" ? 1.0 : 0.0;
           row[0] = 1.0;
           row[1] = t;
           row[2] = t * t;
           row[3] = a;
           row[4] = a * t;
           row[5] = a * t * t;
           row[6] = h;
           row[7] = h * t;
           row[8] = h * t * t;
         });
  } else if (spec == "trend_day_fe") {
    auto rows = rows_where([](const PanelObservation& o) { return o.year2 != 0; });
    if (rows.empty()) throw std::runtime_error("spec 'trend_day_fe': no Year-2 observations");
    fill(rows, d,
         {"after_metoo", "after_x_t", "after_x_t2", "heshe", "heshe_x_t", "heshe_x_t2"},
         [&](const PanelObservation& o, auto row) {
           const double t = o.day_index / 100.0;
           const double a = o.after;
           const double h = o.series == "heshe" ? 1.0 : 0.0;
           row[0] = a;
           row[1] = a * t;
           row[2] = a * t * t;
           row[3] = h;
           row[4] = h * t;
           row[5] = h * t * t;
         });
    d.n_absorbed = static_cast<int>(detail::demean_once(d.X, d.y, d.day_cluster));
  } else if (spec == "trend_day_user_fe") {
    auto rows = rows_where([](const PanelObservation& o) { return o.year2 != 0; });
    if (rows.empty()) throw std::runtime_error("spec 'trend_day_user_fe': no Year-2 observations");
    fill(rows, d, {"after_metoo", "after_x_t", "after_x_t2"},
         [&](const PanelObservation& o, auto row) {
           const double t = o.day_index / 100.0;
           const double a = o.after;
           row[0] = a;
           row[1] = a * t;
           row[2] = a * t * t;
         });
    const std::size_t g_day = detail::count_groups(d.day_cluster);
    const std::size_t g_user = detail::count_groups(d.user_cluster);
    detail::demean_twoway(d.X, d.y, d.day_cluster, d.user_cluster);
    d.n_absorbed = static_cast<int>(g_day + g_user - 1);
  } else {
    throw std::runtime_error("unknown specification: " + spec);
  }
  return d;
}

// Weighted least squares. Throws when the design is rank deficient, naming
// the collinear column.
inline RegressionResult ols(const Design& d, const Eigen::VectorXd* weights = nullptr) {
  RegressionResult r;
  r.names = d.names;
  r.X = d.X;
  r.y = d.y;
  r.day_cluster = d.day_cluster;
  r.user_cluster = d.user_cluster;
  r.n_absorbed = d.n_absorbed;
  const Eigen::Index n = d.X.rows(), k = d.X.cols();
  if (n <= k + d.n_absorbed) throw std::runtime_error("ols: more parameters than observations");
  r.weights = weights ? *weights : Eigen::VectorXd::Ones(n);
  if (r.weights.size() != n) throw std::runtime_error("ols: weight length mismatch");

  Eigen::MatrixXd Xw = r.weights.asDiagonal() * d.X;
  Eigen::MatrixXd xtx = d.X.transpose() * Xw;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xtx);
  qr.setThreshold(1e-10);
  if (qr.rank() < k) {
    const auto perm = qr.colsPermutation().indices();
    const std::string bad = d.names[perm[k - 1]];
    throw std::runtime_error("ols: design is rank deficient; collinear term: " + bad);
  }
  r.bread = qr.inverse();
  r.beta = r.bread * (d.X.transpose() * (r.weights.asDiagonal() * d.y));
  r.residuals = d.y - d.X * r.beta;

  const double ybar = (r.weights.array() * d.y.array()).sum() / r.weights.sum();
  const double tss = (r.weights.array() * (d.y.array() - ybar).square()).sum();
  const double rss = (r.weights.array() * r.residuals.array().square()).sum();
  r.r2 = tss > 0 ? 1.0 - rss / tss : 0.0;

  // default homoskedastic vcov
  const double dof = static_cast<double>(n) - static_cast<double>(r.k());
  r.vcov = r.bread * (rss / std::max(dof, 1.0));
  return r;
}

inline double normal_sf2(double t) {  // two-sided p-value under N(0,1)
  return std::erfc(std::abs(t) / std::sqrt(2.0));
}

inline std::string star_string(double p) {
  if (p < 0.01) return "***";
  if (p < 0.05) return "**";
  if (p < 0.1) return "*";
  return "";
}

inline void finalize_inference(RegressionResult& r) {
  const int k = static_cast<int>(r.beta.size());
  r.se.resize(k);
  r.t_stats.resize(k);
  r.p_values.resize(k);
  r.stars.resize(k);
  for (int j = 0; j < k; ++j) {
    r.se[j] = std::sqrt(std::max(r.vcov(j, j), 0.0));
    r.t_stats[j] = r.se[j] > 0 ? r.beta[j] / r.se[j] : 0.0;
    r.p_values[j] = r.se[j] > 0 ? normal_sf2(r.t_stats[j]) : 1.0;
    r.stars[j] = star_string(r.p_values[j]);
  }
}

namespace detail {

// One-way cluster-robust meat with small-sample factor G/(G-1)*(N-1)/(N-K).
inline Eigen::MatrixXd crve(const RegressionResult& r, const std::vector<std::string>& ids,
                            std::size_t* n_clusters = nullptr) {
  const Eigen::Index n = r.X.rows();
  const int k = static_cast<int>(r.X.cols());
  if (static_cast<Eigen::Index>(ids.size()) != n)
    throw std::runtime_error("cluster_vcov: id length mismatch");
  std::unordered_map<std::string, Eigen::VectorXd> scores;
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& s = scores[ids[i]];
    if (s.size() == 0) s = Eigen::VectorXd::Zero(k);
    s += r.weights[i] * r.residuals[i] * r.X.row(i).transpose();
  }
  const std::size_t g = scores.size();
  if (n_clusters) *n_clusters = g;
  if (g < 2) throw std::runtime_error("cluster_vcov: need at least 2 clusters");
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  for (const auto& [id, s] : scores) meat += s * s.transpose();
  const double nn = static_cast<double>(n);
  const double factor = static_cast<double>(g) / (g - 1.0) * (nn - 1.0) / (nn - r.k());
  return factor * r.bread * meat * r.bread;
}

inline Eigen::MatrixXd repair_psd(const Eigen::MatrixXd& v) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (v + v.transpose()));
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

inline void cluster_vcov(RegressionResult& r, const std::vector<std::string>& ids) {
  r.vcov = detail::crve(r, ids, &r.cluster_count_a);
  r.estimator = "cluster";
  finalize_inference(r);
}

// Cameron-Gelbach-Miller: V_a + V_b - V_{a.b}, each with its own small-sample
// factor, then negative eigenvalues zeroed if the result is indefinite.
inline void twoway_cluster_vcov(RegressionResult& r, const std::vector<std::string>& ids_a,
                                const std::vector<std::string>& ids_b) {
  std::vector<std::string> inter(ids_a.size());
  for (std::size_t i = 0; i < ids_a.size(); ++i) inter[i] = ids_a[i] + "\x1f" + ids_b[i];
  const Eigen::MatrixXd va = detail::crve(r, ids_a, &r.cluster_count_a);
  const Eigen::MatrixXd vb = detail::crve(r, ids_b, &r.cluster_count_b);
  const Eigen::MatrixXd vab = detail::crve(r, inter);
  Eigen::MatrixXd v = va + vb - vab;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (v + v.transpose()));
  if (es.eigenvalues().minCoeff() < 0.0) v = detail::repair_psd(v);
  r.vcov = v;
  r.estimator = "twoway-cluster";
  finalize_inference(r);
}

struct DailyAggregate {
  int day_index = 0;
  int after = 0;
  double mean_year1 = 0.0, mean_year2 = 0.0;
  long long n_year1 = 0, n_year2 = 0;
  double diff() const { return mean_year2 - mean_year1; }
  double weight() const { return static_cast<double>(n_year1 + n_year2); }
};

// Per-day means of an outcome by year group. Days missing either group are
// returned with the available side only; callers building the difference
// series should drop them (they are flagged by a zero count).
inline std::vector<DailyAggregate> aggregate_daily(const std::vector<PanelObservation>& obs,
                                                   const std::string& outcome) {
  std::map<int, DailyAggregate> days;
  for (const auto& o : obs) {
    auto& d = days[o.day_index];
    d.day_index = o.day_index;
    const double v = outcome_value(o, outcome);
    if (o.year2) {
      d.mean_year2 += v;
      d.n_year2 += 1;
      if (o.after) d.after = 1;
    } else {
      d.mean_year1 += v;
      d.n_year1 += 1;
    }
  }
  std::vector<DailyAggregate> out;
  out.reserve(days.size());
  for (auto& [idx, d] : days) {
    if (d.n_year1 > 0) d.mean_year1 /= static_cast<double>(d.n_year1);
    if (d.n_year2 > 0) d.mean_year2 /= static_cast<double>(d.n_year2);
    out.push_back(d);
  }
  return out;
}

inline void newey_west_vcov(RegressionResult& r, int lag);

// Weighted regression of the daily difference series on {1, AfterMetoo} with
// Bartlett-kernel HAC vcov at the given lag. Days missing either group drop;
// gaps make the series consecutive in observed order.
inline RegressionResult newey_west_difference(const std::vector<DailyAggregate>& days, int lag = 4) {
  std::vector<const DailyAggregate*> keep;
  for (const auto& d : days)
    if (d.n_year1 > 0 && d.n_year2 > 0) keep.push_back(&d);
  const Eigen::Index t = static_cast<Eigen::Index>(keep.size());
  if (t <= lag) throw std::runtime_error("newey_west: series length must exceed lag");
  Design d;
  d.names = {"const", "after_metoo"};
  d.X.resize(t, 2);
  d.y.resize(t);
  Eigen::VectorXd w(t);
  for (Eigen::Index i = 0; i < t; ++i) {
    d.X(i, 0) = 1.0;
    d.X(i, 1) = keep[i]->after;
    d.y[i] = keep[i]->diff();
    w[i] = keep[i]->weight();
    d.day_cluster.push_back(std::to_string(keep[i]->day_index));
    d.user_cluster.push_back("day");
  }
  RegressionResult r = ols(d, &w);
  newey_west_vcov(r, lag);
  return r;
}

// Bartlett HAC sandwich over the (already estimated) regression's scores in
// row order. lag 0 reduces to the heteroskedasticity-robust estimator.
inline void newey_west_vcov(RegressionResult& r, int lag) {
  const Eigen::Index n = r.X.rows();
  const int k = static_cast<int>(r.X.cols());
  if (n <= lag) throw std::runtime_error("newey_west: series length must exceed lag");
  std::vector<Eigen::VectorXd> scores(n);
  for (Eigen::Index i = 0; i < n; ++i)
    scores[i] = r.weights[i] * r.residuals[i] * r.X.row(i).transpose();
  Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < n; ++i) omega += scores[i] * scores[i].transpose();
  for (int l = 1; l <= lag; ++l) {
    const double wl = 1.0 - static_cast<double>(l) / (lag + 1.0);
    Eigen::MatrixXd gamma = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index i = l; i < n; ++i) gamma += scores[i] * scores[i - l].transpose();
    omega += wl * (gamma + gamma.transpose());
  }
  const double factor = static_cast<double>(n) / (static_cast<double>(n) - r.k());
  r.vcov = factor * r.bread * omega * r.bread;
  r.estimator = "newey-west:" + std::to_string(lag);
  finalize_inference(r);
}

// End-to-end: build design, estimate, apply the requested variance estimator.
// vcov_choice: "homoskedastic" | "cluster:day" | "cluster:user" |
// "twoway:day,user" | "newey-west:L" (aggregates to daily differences first).
inline RegressionResult estimate_spec(const std::string& spec,
                                      const std::vector<PanelObservation>& obs,
                                      const std::string& outcome,
                                      const std::string& vcov_choice = "cluster:day") {
  if (vcov_choice.rfind("newey-west", 0) == 0) {
    int lag = 4;
    const auto pos = vcov_choice.find(':');
    if (pos != std::string::npos) lag = std::stoi(vcov_choice.substr(pos + 1));
    std::vector<PanelObservation> heshe;
    for (const auto& o : obs)
      if (o.series == "heshe") heshe.push_back(o);
    return newey_west_difference(aggregate_daily(heshe, outcome), lag);
  }
  Design d = build_design(obs, spec, outcome);
  RegressionResult r = ols(d);
  if (vcov_choice == "cluster:day") {
    cluster_vcov(r, r.day_cluster);
  } else if (vcov_choice == "cluster:user") {
    cluster_vcov(r, r.user_cluster);
  } else if (vcov_choice == "twoway:day,user") {
    twoway_cluster_vcov(r, r.day_cluster, r.user_cluster);
  } else if (vcov_choice == "homoskedastic") {
    finalize_inference(r);
  } else {
    throw std::runtime_error("unknown vcov choice: " + vcov_choice);
  }
  return r;
}

// Keep only users observed on both sides of the event day in Year 2; Year-1
// rows pass through unconditionally.
inline std::vector<PanelObservation> restrict_either_side(const std::vector<PanelObservation>& obs) {
  std::unordered_map<std::string, std::pair<bool, bool>> sides;
  for (const auto& o : obs) {
    if (!o.year2) continue;
    auto& s = sides[o.series + ":" + o.user];
    (o.after ? s.second : s.first) = true;
  }
  std::vector<PanelObservation> out;
  for (const auto& o : obs) {
    if (!o.year2) {
      out.push_back(o);
      continue;
    }
    const auto& s = sides.at(o.series + ":" + o.user);
    if (s.first && s.second) out.push_back(o);
  }
  return out;
}

// Entry/exit rate series: per day, first (resp. last) observed tweets of each
// user over total tweets that day, standardized to mean 0, sd 1.
struct DailyRates {
  std::vector<int> days;
  std::vector<double> entry, exit;
};

inline DailyRates entry_exit_rates(const std::vector<std::pair<std::string, int>>& user_days) {
  if (user_days.empty()) throw std::runtime_error("entry_exit_rates: empty input");
  std::unordered_map<std::string, std::pair<int, int>> span;  // user -> {first, last}
  std::map<int, long long> totals;
  for (const auto& [user, day] : user_days) {
    totals[day] += 1;
    auto it = span.find(user);
    if (it == span.end()) {
      span.emplace(user, std::make_pair(day, day));
    } else {
      it->second.first = std::min(it->second.first, day);
      it->second.second = std::max(it->second.second, day);
    }
  }
  std::map<int, long long> firsts, lasts;
  for (const auto& [user, s] : span) {
    firsts[s.first] += 1;
    lasts[s.second] += 1;
  }
  DailyRates r;
  for (const auto& [day, total] : totals) {
    r.days.push_back(day);
    r.entry.push_back(static_cast<double>(firsts[day]) / total);
    r.exit.push_back(static_cast<double>(lasts[day]) / total);
  }
  auto standardize = [](std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double mean = 0;
    for (double x : v) mean += x;
    mean /= n;
    double var = 0;
    for (double x : v) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / n);
    for (double& x : v) x = sd > 0 ? (x - mean) / sd : 0.0;
  };
  standardize(r.entry);
  standardize(r.exit);
  return r;
}

// --- I/O ---------------------------------------------------------------------

inline void write_observations(const std::vector<PanelObservation>& obs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "id,user,series,day_index,year2,after,follow_norms,gendered_language,she_count\n";
  for (const auto& o : obs)
    out << o.id << "," << o.user << "," << o.series << "," << o.day_index << "," << o.year2 << ","
        << o.after << "," << o.follow_norms << "," << o.gendered_language << "," << o.she_count
        << "\n";
}

inline std::vector<PanelObservation> read_observations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty observation file: " + path);
  std::vector<PanelObservation> obs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f;
    PanelObservation o;
    std::getline(ss, o.id, ',');
    std::getline(ss, o.user, ',');
    std::getline(ss, o.series, ',');
    std::getline(ss, f, ',');
    o.day_index = std::stoi(f);
    std::getline(ss, f, ',');
    o.year2 = std::stoi(f);
    std::getline(ss, f, ',');
    o.after = std::stoi(f);
    std::getline(ss, f, ',');
    o.follow_norms = std::stoi(f);
    std::getline(ss, f, ',');
    o.gendered_language = std::stod(f);
    std::getline(ss, f, ',');
    o.she_count = std::stoi(f);
    obs.push_back(std::move(o));
  }
  return obs;
}

inline void write_regression_result(const RegressionResult& r, const std::string& csv_path,
                                    const std::string& json_path) {
  std::ofstream out(csv_path);
  if (!out) throw std::runtime_error("cannot open " + csv_path + " for writing");
  out << "term,coefficient,se,t,p,stars\n";
  for (std::size_t j = 0; j < r.names.size(); ++j)
    out << r.names[j] << "," << r.beta[static_cast<Eigen::Index>(j)] << "," << r.se[j] << ","
        << r.t_stats[j] << "," << r.p_values[j] << "," << r.stars[j] << "\n";

  nlohmann::json j;
  j["estimator"] = r.estimator;
  j["n"] = r.n();
  j["r2"] = r.r2;
  j["n_absorbed"] = r.n_absorbed;
  j["clusters_a"] = r.cluster_count_a;
  j["clusters_b"] = r.cluster_count_b;
  j["terms"] = r.names;
  j["beta"] = std::vector<double>(r.beta.data(), r.beta.data() + r.beta.size());
  nlohmann::json vc = nlohmann::json::array();
  for (Eigen::Index a = 0; a < r.vcov.rows(); ++a) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index b = 0; b < r.vcov.cols(); ++b) row.push_back(r.vcov(a, b));
    vc.push_back(row);
  }
  j["vcov"] = vc;
  std::ofstream jout(json_path);
  if (!jout) throw std::runtime_error("cannot open " + json_path + " for writing");
  jout << j.dump(2) << "\n";
}

}  // namespace normlens
