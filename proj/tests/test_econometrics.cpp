#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "normlens/econometrics.hpp"
#include "normlens/rng.hpp"

using namespace normlens;

namespace {

PanelObservation ob(const std::string& user, int day, int year2, int after, double y,
                    const std::string& series = "heshe") {
  PanelObservation o;
  o.user = user;
  o.series = series;
  o.day_index = day;
  o.year2 = year2;
  o.after = after;
  o.gendered_language = y;
  o.follow_norms = y >= 0.5 ? 1 : 0;
  return o;
}

// random two-year panel with user and day structure
std::vector<PanelObservation> random_panel(int n, int n_users, int n_days, Rng& rng) {
  std::vector<PanelObservation> obs;
  for (int i = 0; i < n; ++i) {
    const int day = static_cast<int>(rng.uniform_int(n_days));
    const int year2 = static_cast<int>(rng.uniform_int(2));
    const int after = year2 && day >= n_days / 2 ? 1 : 0;
    obs.push_back(ob("u" + std::to_string(rng.uniform_int(n_users)), day, year2, after,
                     rng.uniform()));
  }
  return obs;
}

Eigen::MatrixXd sandwich(const RegressionResult& r, const Eigen::MatrixXd& meat, double factor) {
  return factor * r.bread * meat * r.bread;
}

}  // namespace

TEST_CASE("follow_norms") {
  CHECK(follow_norms(1, 1) == 1);
  CHECK(follow_norms(0, 0) == 1);
  CHECK(follow_norms(1, 0) == 0);
  CHECK(follow_norms(0, 1) == 0);
  CHECK_THROWS(follow_norms(2, 1));
  CHECK_THROWS(follow_norms(0, -1));
}

TEST_CASE("mean follow_norms equals classification accuracy") {
  Rng rng(3);
  int correct = 0;
  double sum = 0.0;
  for (int i = 0; i < 200; ++i) {
    const int label = static_cast<int>(rng.uniform_int(2));
    const int predicted = static_cast<int>(rng.uniform_int(2));
    correct += predicted == label;
    sum += follow_norms(predicted, label);
  }
  CHECK(sum / 200 == doctest::Approx(correct / 200.0));
}

TEST_CASE("day_index_from_date") {
  CHECK(day_index_from_date(2017, 5, 1) == 0);
  CHECK(day_index_from_date(2017, 10, 17) == kEventDayIndex);
  CHECK(day_index_from_date(2016, 2, 29) == -1);
  CHECK(day_index_from_date(2018, 1, 1) == 245);   // wraps into the previous panel year
  CHECK(day_index_from_date(2018, 4, 30) == 364);  // last panel day
  // same calendar day in both years shares an index
  CHECK(day_index_from_date(2016, 10, 17) == day_index_from_date(2017, 10, 17));
}

TEST_CASE("outcome_value dispatch") {
  PanelObservation o = ob("u", 0, 1, 0, 0.7);
  o.she_count = 1;
  CHECK(outcome_value(o, "gendered_language") == 0.7);
  CHECK(outcome_value(o, "follow_norms") == 1.0);
  CHECK(outcome_value(o, "she_count") == 1.0);
  CHECK_THROWS(outcome_value(o, "nope"));
}

TEST_CASE("baseline design demeans within calendar day") {
  std::vector<PanelObservation> obs{ob("a", 10, 0, 0, 0.2), ob("b", 10, 1, 0, 0.6),
                                    ob("c", 20, 0, 0, 0.3), ob("d", 20, 1, 1, 0.9)};
  auto d = build_design(obs, "baseline", "gendered_language");
  CHECK(d.names == std::vector<std::string>{"year2", "after_metoo"});
  CHECK(d.n_absorbed == 2);
  // columns and outcome sum to zero within each day group
  CHECK(d.X(0, 0) + d.X(1, 0) == doctest::Approx(0.0));
  CHECK(d.y[2] + d.y[3] == doctest::Approx(0.0));
  CHECK(d.day_cluster == std::vector<std::string>{"10", "10", "20", "20"});
  CHECK(d.user_cluster[0] == "heshe:a");
}

TEST_CASE("within-demeaned FE matches explicit dummy regression") {
  Rng rng(17);
  const int n_users = 6;
  auto obs = random_panel(400, n_users, 30, rng);
  // make sure every user appears
  for (int u = 0; u < n_users; ++u)
    obs.push_back(ob("u" + std::to_string(u), 5, 1, 0, rng.uniform()));

  auto fe = ols(build_design(obs, "user_fe", "gendered_language"));

  // explicit user dummies, no intercept
  Design d;
  d.names = {"year2", "after_metoo"};
  for (int u = 0; u < n_users; ++u) d.names.push_back("du" + std::to_string(u));
  d.X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(obs.size()), 2 + n_users);
  d.y.resize(static_cast<Eigen::Index>(obs.size()));
  for (std::size_t i = 0; i < obs.size(); ++i) {
    d.X(i, 0) = obs[i].year2;
    d.X(i, 1) = obs[i].after;
    d.X(i, 2 + std::stoi(obs[i].user.substr(1))) = 1.0;
    d.y[i] = obs[i].gendered_language;
    d.day_cluster.push_back(std::to_string(obs[i].day_index));
    d.user_cluster.push_back(obs[i].user);
  }
  auto dummy = ols(d);
  CHECK(fe.beta[0] == doctest::Approx(dummy.beta[0]).epsilon(1e-10));
  CHECK(fe.beta[1] == doctest::Approx(dummy.beta[1]).epsilon(1e-10));
  // absorbed dof make the homoskedastic dof identical too
  CHECK(fe.k() == dummy.k());
  CHECK(std::sqrt(fe.vcov(1, 1)) == doctest::Approx(std::sqrt(dummy.vcov(1, 1))).epsilon(1e-8));
}

TEST_CASE("two-way FE matches explicit double-dummy regression") {
  Rng rng(29);
  std::vector<PanelObservation> obs;
  for (int u = 0; u < 5; ++u)
    for (int day = 0; day < 12; ++day) {
      const int year2 = static_cast<int>(rng.uniform_int(2));
      const int after = year2 && day >= 6;
      obs.push_back(ob("u" + std::to_string(u), day, year2, after, rng.uniform()));
    }
  auto fe = ols(build_design(obs, "day_user_fe", "gendered_language"));

  Design d;
  d.names = {"after_metoo", "const"};
  for (int u = 1; u < 5; ++u) d.names.push_back("du" + std::to_string(u));
  for (int day = 1; day < 12; ++day) d.names.push_back("dd" + std::to_string(day));
  d.X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(obs.size()),
                              static_cast<Eigen::Index>(d.names.size()));
  d.y.resize(static_cast<Eigen::Index>(obs.size()));
  for (std::size_t i = 0; i < obs.size(); ++i) {
    d.X(i, 0) = obs[i].after;
    d.X(i, 1) = 1.0;
    const int u = std::stoi(obs[i].user.substr(1));
    if (u > 0) d.X(i, 1 + u) = 1.0;
    if (obs[i].day_index > 0) d.X(i, 5 + obs[i].day_index) = 1.0;
    d.y[i] = obs[i].gendered_language;
    d.day_cluster.push_back(std::to_string(obs[i].day_index));
    d.user_cluster.push_back(obs[i].user);
  }
  auto dummy = ols(d);
  CHECK(fe.beta[0] == doctest::Approx(dummy.beta[0]).epsilon(1e-8));
  CHECK(fe.k() == dummy.k());
}

TEST_CASE("ols recovers an exact linear relationship") {
  Design d;
  d.names = {"x"};
  d.X.resize(5, 1);
  d.y.resize(5);
  for (int i = 0; i < 5; ++i) {
    d.X(i, 0) = i + 1.0;
    d.y[i] = 2.0 * (i + 1.0);
  }
  auto r = ols(d);
  CHECK(r.beta[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(r.r2 == doctest::Approx(1.0));

  // constant weights do not change the estimate
  Eigen::VectorXd w = Eigen::VectorXd::Constant(5, 3.0);
  CHECK(ols(d, &w).beta[0] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("ols names the collinear term on rank deficiency") {
  Design d;
  d.names = {"x", "x_copy", "z"};
  d.X.resize(6, 3);
  d.y.resize(6);
  Rng rng(5);
  for (int i = 0; i < 6; ++i) {
    d.X(i, 0) = rng.uniform();
    d.X(i, 1) = d.X(i, 0);
    d.X(i, 2) = rng.uniform();
    d.y[i] = rng.uniform();
  }
  CHECK_THROWS_WITH_AS(ols(d), doctest::Contains("x"), std::runtime_error);
}

TEST_CASE("raw spec needs Year-2 rows") {
  std::vector<PanelObservation> year1{ob("a", 3, 0, 0, 0.4)};
  CHECK_THROWS_WITH_AS(build_design(year1, "raw", "gendered_language"),
                       doctest::Contains("Year-2"), std::runtime_error);
  CHECK_THROWS(build_design(year1, "nope", "gendered_language"));
}

TEST_CASE("singleton clusters reduce to the heteroskedasticity-robust estimator") {
  Rng rng(7);
  Design d;
  d.names = {"const", "x"};
  const int n = 40;
  d.X.resize(n, 2);
  d.y.resize(n);
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) {
    d.X(i, 0) = 1.0;
    d.X(i, 1) = rng.uniform();
    d.y[i] = 0.5 + d.X(i, 1) + rng.gaussian() * (0.1 + d.X(i, 1));
    ids.push_back("row" + std::to_string(i));
  }
  auto r = ols(d);
  cluster_vcov(r, ids);
  CHECK(r.cluster_count_a == n);

  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(2, 2);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd s = r.residuals[i] * r.X.row(i).transpose();
    meat += s * s.transpose();
  }
  const double hc1 = static_cast<double>(n) / (n - r.k());
  Eigen::MatrixXd expected = sandwich(r, meat, hc1);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      CHECK(r.vcov(a, b) == doctest::Approx(expected(a, b)).epsilon(1e-10));
}

TEST_CASE("cluster vcov matches a direct sandwich on a small fixture") {
  Design d;
  d.names = {"const", "x"};
  d.X.resize(4, 2);
  d.y.resize(4);
  const double xs[4] = {0.0, 1.0, 2.0, 3.0};
  const double ys[4] = {0.1, 1.3, 1.8, 3.4};
  for (int i = 0; i < 4; ++i) {
    d.X(i, 0) = 1.0;
    d.X(i, 1) = xs[i];
    d.y[i] = ys[i];
  }
  const std::vector<std::string> ids{"g1", "g1", "g2", "g2"};
  auto r = ols(d);
  cluster_vcov(r, ids);
  CHECK(r.cluster_count_a == 2);
  CHECK(r.estimator == "cluster");

  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(2, 2);
  for (int g = 0; g < 2; ++g) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(2);
    for (int i = 2 * g; i < 2 * g + 2; ++i) s += r.residuals[i] * r.X.row(i).transpose();
    meat += s * s.transpose();
  }
  const double factor = 2.0 / 1.0 * 3.0 / (4.0 - 2.0);
  Eigen::MatrixXd expected = sandwich(r, meat, factor);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      CHECK(r.vcov(a, b) == doctest::Approx(expected(a, b)).epsilon(1e-10));
}

TEST_CASE("identical cluster dimensions collapse two-way to one-way") {
  Rng rng(11);
  auto obs = random_panel(200, 8, 20, rng);
  auto d = build_design(obs, "baseline", "gendered_language");
  auto one = ols(d);
  cluster_vcov(one, one.day_cluster);
  auto two = ols(d);
  twoway_cluster_vcov(two, two.day_cluster, two.day_cluster);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      CHECK(two.vcov(a, b) == doctest::Approx(one.vcov(a, b)).epsilon(1e-10));
  CHECK(two.cluster_count_a == two.cluster_count_b);
}

TEST_CASE("twoway cluster vcov on a 2x3 fixture is symmetric with nonnegative diagonal") {
  std::vector<PanelObservation> obs;
  Rng rng(13);
  for (int u = 0; u < 3; ++u)
    for (int day = 0; day < 6; ++day) {
      const int year2 = (u + day) % 2;  // varies within every day
      obs.push_back(ob("u" + std::to_string(u), day, year2, year2 && day >= 4, rng.uniform()));
    }
  auto r = estimate_spec("baseline", obs, "gendered_language", "twoway:day,user");
  CHECK(r.estimator == "twoway-cluster");
  CHECK(r.cluster_count_a == 6);
  CHECK(r.cluster_count_b == 3);
  for (int a = 0; a < 2; ++a) {
    CHECK(r.vcov(a, a) >= 0.0);
    for (int b = 0; b < 2; ++b)
      CHECK(r.vcov(a, b) == doctest::Approx(r.vcov(b, a)).epsilon(1e-12));
  }
}

TEST_CASE("cluster vcov is invariant to observation order") {
  Rng rng(19);
  auto obs = random_panel(150, 5, 15, rng);
  auto base = estimate_spec("baseline", obs, "gendered_language", "cluster:day");
  std::reverse(obs.begin(), obs.end());
  auto rev = estimate_spec("baseline", obs, "gendered_language", "cluster:day");
  for (int a = 0; a < 2; ++a) {
    CHECK(rev.beta[a] == doctest::Approx(base.beta[a]).epsilon(1e-10));
    CHECK(rev.se[a] == doctest::Approx(base.se[a]).epsilon(1e-10));
  }
}

TEST_CASE("newey-west lag 0 equals the heteroskedasticity-robust sandwich") {
  Rng rng(23);
  Design d;
  d.names = {"const", "x"};
  const int n = 30;
  d.X.resize(n, 2);
  d.y.resize(n);
  for (int i = 0; i < n; ++i) {
    d.X(i, 0) = 1.0;
    d.X(i, 1) = i / 10.0;
    d.y[i] = 1.0 + 0.3 * d.X(i, 1) + rng.gaussian() * 0.2;
  }
  auto r = ols(d);
  newey_west_vcov(r, 0);

  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(2, 2);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd s = r.residuals[i] * r.X.row(i).transpose();
    meat += s * s.transpose();
  }
  Eigen::MatrixXd expected = sandwich(r, meat, static_cast<double>(n) / (n - 2));
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      CHECK(r.vcov(a, b) == doctest::Approx(expected(a, b)).epsilon(1e-12));
  CHECK_THROWS(newey_west_vcov(r, n));
}

TEST_CASE("aggregate_daily means, weights and missing sides") {
  std::vector<PanelObservation> obs{ob("a", 1, 0, 0, 0.2), ob("b", 1, 0, 0, 0.4),
                                    ob("c", 1, 1, 0, 0.9), ob("d", 2, 1, 1, 0.5)};
  auto days = aggregate_daily(obs, "gendered_language");
  REQUIRE(days.size() == 2);
  CHECK(days[0].day_index == 1);
  CHECK(days[0].mean_year1 == doctest::Approx(0.3));
  CHECK(days[0].mean_year2 == doctest::Approx(0.9));
  CHECK(days[0].diff() == doctest::Approx(0.6));
  CHECK(days[0].weight() == 3.0);
  CHECK(days[1].n_year1 == 0);  // missing-side flag
  CHECK(days[1].after == 1);
}

TEST_CASE("newey_west_difference drops one-sided days and estimates the shift") {
  Rng rng(31);
  std::vector<PanelObservation> obs;
  for (int day = 0; day < 60; ++day) {
    const int after = day >= 30;
    for (int i = 0; i < 5; ++i) {
      obs.push_back(ob("u", day, 0, 0, 0.5 + rng.gaussian() * 0.01));
      obs.push_back(ob("u", day, 1, after, 0.5 + 0.1 * after + rng.gaussian() * 0.01));
    }
  }
  // a one-sided day must be ignored
  obs.push_back(ob("x", 100, 1, 1, 99.0));
  auto r = newey_west_difference(aggregate_daily(obs, "gendered_language"), 4);
  CHECK(r.n() == 60);
  CHECK(r.names == std::vector<std::string>{"const", "after_metoo"});
  CHECK(r.beta[r.coef("after_metoo")] == doctest::Approx(0.1).epsilon(0.1));
  CHECK(r.estimator == "newey-west:4");
  CHECK_THROWS(newey_west_difference({}, 4));
}

TEST_CASE("p-values and stars") {
  CHECK(star_string(0.005) == "***");
  CHECK(star_string(0.03) == "**");
  CHECK(star_string(0.07) == "*");
  CHECK(star_string(0.2) == "");
  CHECK(normal_sf2(1.959964) == doctest::Approx(0.05).epsilon(1e-4));
  CHECK(normal_sf2(2.575829) == doctest::Approx(0.01).epsilon(1e-4));
  CHECK(normal_sf2(0.0) == doctest::Approx(1.0));
}

TEST_CASE("restrict_either_side keeps only users seen before and after") {
  std::vector<PanelObservation> obs{
      ob("both", 100, 1, 0, 0.5),  ob("both", 200, 1, 1, 0.5), ob("pre", 100, 1, 0, 0.5),
      ob("post", 200, 1, 1, 0.5),  ob("y1", 100, 0, 0, 0.5),
  };
  auto kept = restrict_either_side(obs);
  REQUIRE(kept.size() == 3);
  CHECK(kept[0].user == "both");
  CHECK(kept[1].user == "both");
  CHECK(kept[2].user == "y1");  // Year-1 rows pass through
}

TEST_CASE("entry_exit_rates are standardized and flag a planted mass exit") {
  std::vector<std::pair<std::string, int>> user_days;
  Rng rng(37);
  // 50 regulars active across all days, 30 extra users all leaving on day 20
  for (int u = 0; u < 50; ++u)
    for (int day = 0; day < 30; ++day) user_days.emplace_back("r" + std::to_string(u), day);
  for (int u = 0; u < 30; ++u) {
    user_days.emplace_back("quitter" + std::to_string(u), 2);
    user_days.emplace_back("quitter" + std::to_string(u), 20);
  }
  auto rates = entry_exit_rates(user_days);
  double mean_entry = 0, mean_exit = 0;
  for (double v : rates.entry) mean_entry += v;
  for (double v : rates.exit) mean_exit += v;
  CHECK(std::abs(mean_entry) / rates.entry.size() < 1e-12);
  CHECK(std::abs(mean_exit) / rates.exit.size() < 1e-12);
  // the final day always collects the regulars' exits, so compare interior days
  std::size_t argmax = 0;
  for (std::size_t i = 0; i < rates.exit.size(); ++i) {
    if (rates.days[i] == 29) continue;
    if (rates.exit[i] > rates.exit[argmax]) argmax = i;
  }
  CHECK(rates.days[argmax] == 20);
  CHECK_THROWS(entry_exit_rates({}));
}

TEST_CASE("observations CSV round trip") {
  const std::string path = (std::filesystem::temp_directory_path() / "obs_rt.csv").string();
  std::vector<PanelObservation> obs{ob("alice", 42, 1, 0, 0.625), ob("bob", 7, 0, 0, 0.25, "togetherness")};
  obs[0].id = "m1";
  obs[0].she_count = 1;
  obs[1].id = "m2";
  write_observations(obs, path);
  auto back = read_observations(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].id == "m1");
  CHECK(back[0].user == "alice");
  CHECK(back[0].day_index == 42);
  CHECK(back[0].year2 == 1);
  CHECK(back[0].she_count == 1);
  CHECK(back[0].gendered_language == doctest::Approx(0.625));
  CHECK(back[1].series == "togetherness");
  std::remove(path.c_str());
}

TEST_CASE("scaling the outcome by 100 scales coefficients and ses by 100") {
  Rng rng(41);
  auto obs = random_panel(300, 10, 25, rng);
  auto scaled = obs;
  for (auto& o : scaled) o.gendered_language *= 100.0;
  auto a = estimate_spec("baseline", obs, "gendered_language", "cluster:day");
  auto b = estimate_spec("baseline", scaled, "gendered_language", "cluster:day");
  for (int j = 0; j < 2; ++j) {
    CHECK(b.beta[j] == doctest::Approx(100.0 * a.beta[j]).epsilon(1e-8));
    CHECK(b.se[j] == doctest::Approx(100.0 * a.se[j]).epsilon(1e-8));
    CHECK(b.t_stats[j] == doctest::Approx(a.t_stats[j]).epsilon(1e-8));
  }
}

TEST_CASE("trend specs expose the documented coefficient layout") {
  Rng rng(43);
  std::vector<PanelObservation> obs;
  for (int day = 0; day < 365; day += 3)
    for (int i = 0; i < 2; ++i) {
      const int after = day >= kEventDayIndex;
      obs.push_back(ob("u" + std::to_string(i), day, 1, after, rng.uniform()));
      obs.push_back(ob("u" + std::to_string(i), day, 1, after, rng.uniform(), "togetherness"));
    }
  auto placebo = build_design(obs, "trend_placebo", "gendered_language");
  CHECK(placebo.names == std::vector<std::string>{"const", "t", "t2", "after_metoo", "after_x_t",
                                                  "after_x_t2"});
  auto heshe = build_design(obs, "trend_heshe", "gendered_language");
  CHECK(heshe.names.size() == 9);
  auto r = ols(heshe);
  CHECK(std::isfinite(r.beta[r.coef("after_metoo")]));
  auto day_fe = build_design(obs, "trend_day_fe", "gendered_language");
  CHECK(day_fe.n_absorbed > 0);
}
