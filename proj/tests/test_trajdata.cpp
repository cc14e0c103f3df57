#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include "oril/trajdata.hpp"
#include "oril/worldsim.hpp"

using namespace oril;
using trajdata::Dataset;
using trajdata::Episode;
using trajdata::Source;

namespace {

// Synthetic episode whose states encode (id, t) so sampled rows can be traced
// back to their position: states(t) = (id, t), actions(t) = (id + t/1000).
Episode make_episode(std::uint64_t id, int T, const std::vector<double>& gt = {}) {
  Episode e;
  e.id = id;
  e.states.resize(T + 1, 2);
  e.actions.resize(T, 1);
  for (int t = 0; t <= T; ++t) {
    e.states(t, 0) = static_cast<double>(id);
    e.states(t, 1) = static_cast<double>(t);
  }
  for (int t = 0; t < T; ++t) e.actions(t, 0) = static_cast<double>(id) + t / 1000.0;
  if (!gt.empty()) {
    e.gt_rewards.resize(T);
    for (int t = 0; t < T; ++t) e.gt_rewards[t] = gt[t];
  }
  return e;
}

Dataset make_dataset(std::vector<Episode> eps) {
  Dataset d;
  d.obs_dim = 2;
  d.act_dim = 1;
  d.episodes = std::move(eps);
  return d;
}

// Constant per-step reward c over T steps.
std::vector<double> const_rewards(int T, double c) { return std::vector<double>(T, c); }

// 0.999 chi-square quantile via the Wilson-Hilferty cube approximation,
// accurate to well under a percent for df >= 5.
double chi2_crit_999(int df) {
  const double z = 3.090232306167814;  // 0.999 normal quantile
  const double a = 2.0 / (9.0 * df);
  const double c = 1.0 - a + z * std::sqrt(a);
  return df * c * c * c;
}

bool episodes_equal(const Episode& a, const Episode& b) {
  return a.id == b.id && (a.states.array() == b.states.array()).all() &&
         (a.actions.array() == b.actions.array()).all() &&
         a.gt_rewards.size() == b.gt_rewards.size() &&
         (a.gt_rewards.size() == 0 || (a.gt_rewards.array() == b.gt_rewards.array()).all());
}

}  // namespace

TEST_CASE("dataset validation catches shape mismatches") {
  Dataset d = make_dataset({make_episode(0, 5, const_rewards(5, 0.0))});
  REQUIRE_NOTHROW(trajdata::validate_dataset(d));

  Dataset bad_rows = d;
  bad_rows.episodes[0].states.conservativeResize(4, 2);  // T+1 must be 6
  REQUIRE_THROWS_AS(trajdata::validate_dataset(bad_rows), trajdata::SchemaError);

  Dataset bad_gt = d;
  bad_gt.episodes[0].gt_rewards.conservativeResize(3);
  REQUIRE_THROWS_AS(trajdata::validate_dataset(bad_gt), trajdata::SchemaError);

  Dataset mixed = make_dataset({make_episode(0, 5, const_rewards(5, 0.0)), make_episode(1, 5)});
  REQUIRE_THROWS_AS(trajdata::validate_dataset(mixed), trajdata::SchemaError);

  Dataset bad_dim = d;
  bad_dim.obs_dim = 3;
  REQUIRE_THROWS_AS(trajdata::validate_dataset(bad_dim), trajdata::SchemaError);
}

TEST_CASE("episode return sums ground-truth rewards") {
  Episode e = make_episode(0, 3, {0.0, 1.0, 0.5});
  REQUIRE(trajdata::episode_return(e) == 1.5);
  Episode no_gt = make_episode(1, 3);
  REQUIRE_THROWS_AS(trajdata::episode_return(no_gt), trajdata::MissingGroundTruth);
}

TEST_CASE("top-quantile demo selection matches a sort oracle") {
  // 60 episodes with deliberately repeated returns so the cutoff is tied.
  const int n = 60;
  std::vector<Episode> eps;
  std::vector<double> returns(n);
  for (int i = 0; i < n; ++i) {
    const double r = static_cast<double>((i * 7) % 20);  // values 0..19, each ~3 times
    returns[i] = 4.0 * r;
    eps.push_back(make_episode(static_cast<std::uint64_t>(i), 4, const_rewards(4, r)));
  }
  Dataset raw = make_dataset(std::move(eps));

  const double q = 0.2;
  trajdata::SplitDataset split = trajdata::build_split(raw, trajdata::SuccessRule::top_quantile(q), 1.0, 11);

  // Oracle: sort by (return desc, index asc), take ceil(q*n).
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (returns[a] != returns[b]) return returns[a] > returns[b];
    return a < b;
  });
  const int m = static_cast<int>(std::ceil(q * n));
  std::set<std::uint64_t> expect(order.begin(), order.begin() + m);
  std::set<std::uint64_t> got;
  for (const Episode& e : split.demos.episodes) got.insert(e.id);
  REQUIRE(static_cast<int>(got.size()) == m);
  REQUIRE(got == expect);
}

TEST_CASE("step-fraction rule includes episodes at exactly the threshold") {
  // 6 of 12 steps at reward 1 passes a 0.5 threshold; 5 of 12 does not.
  Dataset raw = make_dataset({
      make_episode(0, 12, {1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0}),
      make_episode(1, 12, {1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0}),
  });
  auto idx = trajdata::successful_episodes(raw, trajdata::SuccessRule::step_fraction(0.5));
  REQUIRE(idx == std::vector<int>{0});
}

TEST_CASE("halving partitions the indices with near-equal sizes") {
  for (int n : {1, 2, 3, 7, 100}) {
    std::vector<Episode> eps;
    for (int i = 0; i < n; ++i) eps.push_back(make_episode(i, 1));
    Dataset d = make_dataset(std::move(eps));
    auto [a, b] = trajdata::halve_unlabeled(d, 5);
    REQUIRE(static_cast<int>(a.size()) == (n + 1) / 2);
    REQUIRE(static_cast<int>(b.size()) == n / 2);
    std::set<int> all(a.begin(), a.end());
    for (int i : b) REQUIRE(all.insert(i).second);  // disjoint
    REQUIRE(static_cast<int>(all.size()) == n);     // covering
    auto [a2, b2] = trajdata::halve_unlabeled(d, 5);
    REQUIRE(a == a2);
    REQUIRE(b == b2);
  }

  // Odd split sizes at scale.
  std::vector<Episode> eps;
  for (int i = 0; i < 7811; ++i) eps.push_back(make_episode(i, 1));
  Dataset big = make_dataset(std::move(eps));
  auto [a, b] = trajdata::halve_unlabeled(big, 1);
  REQUIRE(a.size() == 3906);
  REQUIRE(b.size() == 3905);

  REQUIRE_THROWS_AS(trajdata::halve_unlabeled(make_dataset({}), 1), trajdata::EmptyDataset);
}

TEST_CASE("build split strips rewards and keeps episode ids disjoint") {
  std::vector<Episode> eps;
  for (int i = 0; i < 30; ++i) {
    const double r = (i % 3 == 0) ? 1.0 : 0.0;  // every third episode succeeds
    eps.push_back(make_episode(i, 8, const_rewards(8, r)));
  }
  Dataset raw = make_dataset(std::move(eps));
  auto rule = trajdata::SuccessRule::step_fraction(0.5);
  trajdata::SplitDataset split = trajdata::build_split(raw, rule, 0.7, 3);

  REQUIRE(!split.demos.empty());
  std::set<std::uint64_t> seen;
  for (const Episode& e : split.demos.episodes) {
    REQUIRE(!e.has_gt());
    REQUIRE(e.id % 3 == 0);  // only successful episodes can be demos
    REQUIRE(seen.insert(e.id).second);
  }
  for (const Episode& e : split.unlabeled.episodes) {
    REQUIRE(!e.has_gt());
    REQUIRE(seen.insert(e.id).second);
  }
  REQUIRE(seen.size() == raw.episodes.size());

  // The halving indexes the unlabeled set it was built with.
  const int nu = static_cast<int>(split.unlabeled.episodes.size());
  REQUIRE(static_cast<int>(split.unlabeled_half_a.size() + split.unlabeled_half_b.size()) == nu);

  SECTION("no successful episode means no demo set") {
    Dataset all_fail = raw;
    for (Episode& e : all_fail.episodes) e.gt_rewards.setZero();
    REQUIRE_THROWS_AS(trajdata::build_split(all_fail, rule, 1.0, 3), trajdata::EmptyDemoSet);
  }

  SECTION("everything successful and always included leaves nothing unlabeled") {
    Dataset all_good = raw;
    for (Episode& e : all_good.episodes) e.gt_rewards.setConstant(1.0);
    trajdata::SplitDataset s = trajdata::build_split(all_good, rule, 1.0, 3);
    REQUIRE(s.demos.episodes.size() == raw.episodes.size());
    REQUIRE(s.unlabeled.empty());
  }

  SECTION("missing ground truth is rejected") {
    REQUIRE_THROWS_AS(trajdata::build_split(split.demos, rule, 0.5, 3), trajdata::MissingGroundTruth);
  }
}

TEST_CASE("pinned split reproduces a requested demo id set") {
  std::vector<Episode> eps;
  for (int i = 0; i < 10; ++i) eps.push_back(make_episode(i, 4, const_rewards(4, 1.0)));
  Dataset raw = make_dataset(std::move(eps));
  std::vector<std::uint64_t> want = {2, 5, 7};
  trajdata::SplitDataset s = trajdata::build_split_pinned(raw, want, 9);
  std::set<std::uint64_t> got;
  for (const Episode& e : s.demos.episodes) got.insert(e.id);
  REQUIRE(got == std::set<std::uint64_t>(want.begin(), want.end()));
  REQUIRE(s.unlabeled.episodes.size() == 7);
}

TEST_CASE("uniform state sampling is unbiased over the state multiset") {
  // 12 distinct states across episodes of different lengths.
  Dataset d = make_dataset({make_episode(0, 2), make_episode(1, 3), make_episode(2, 4)});
  RngStream rng(77);
  const int draws = 120000;
  Matrix s = trajdata::sample_states(d, draws, rng);

  std::map<std::pair<int, int>, long> counts;
  for (int i = 0; i < draws; ++i)
    counts[{static_cast<int>(s(i, 0)), static_cast<int>(s(i, 1))}] += 1;
  REQUIRE(counts.size() == 12);

  const double expected = draws / 12.0;
  double chi2 = 0.0;
  for (const auto& [key, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
  REQUIRE(chi2 < chi2_crit_999(11));
}

TEST_CASE("state sampling weights episodes by their length") {
  Dataset d = make_dataset({make_episode(0, 10), make_episode(1, 90)});
  RngStream rng(3);
  const int draws = 100000;
  Matrix s = trajdata::sample_states(d, draws, rng);
  long from_long = 0;
  for (int i = 0; i < draws; ++i)
    if (s(i, 0) == 1.0) ++from_long;
  const double frac = static_cast<double>(from_long) / draws;
  REQUIRE(frac == Catch::Approx(91.0 / 102.0).margin(0.01));
}

TEST_CASE("transition sampling covers the requested sources exactly") {
  std::vector<Episode> eps;
  for (int i = 0; i < 6; ++i) {
    const double r = i < 2 ? 1.0 : 0.0;
    eps.push_back(make_episode(i, 5, const_rewards(5, r)));
  }
  Dataset raw = make_dataset(std::move(eps));
  trajdata::SplitDataset split =
      trajdata::build_split(raw, trajdata::SuccessRule::step_fraction(0.5), 1.0, 4);
  REQUIRE(split.demos.episodes.size() == 2);
  trajdata::SplitSampler sampler(split);
  RngStream rng(8);

  SECTION("expert-only batches carry only demo rows") {
    trajdata::TransitionBatch b = sampler.transitions({Source::Expert}, 64, rng);
    for (int i = 0; i < b.size(); ++i) {
      REQUIRE(b.origin[i] == trajdata::Origin::Expert);
      REQUIRE(b.episode_ids[i] < 2);
    }
  }

  SECTION("both halves together reach every unlabeled transition") {
    std::set<std::pair<std::uint64_t, int>> seen;
    trajdata::TransitionBatch b = sampler.transitions({Source::HalfA, Source::HalfB}, 5000, rng);
    for (int i = 0; i < b.size(); ++i) {
      REQUIRE(b.origin[i] == trajdata::Origin::Unlabeled);
      seen.insert({b.episode_ids[i], b.t_index[i]});
    }
    REQUIRE(seen.size() == 4 * 5);  // 4 unlabeled episodes x 5 transitions
  }

  SECTION("next states are the stored successors") {
    trajdata::TransitionBatch b =
        sampler.transitions({Source::Expert, Source::HalfA, Source::HalfB}, 256, rng);
    for (int i = 0; i < b.size(); ++i) {
      REQUIRE(b.next_states(i, 0) == b.states(i, 0));
      REQUIRE(b.next_states(i, 1) == b.states(i, 1) + 1.0);
    }
  }

  SECTION("an exhausted source is an error, not an empty batch") {
    Dataset one = make_dataset({make_episode(0, 5, const_rewards(5, 1.0)),
                                make_episode(1, 5, const_rewards(5, 0.0))});
    trajdata::SplitDataset s1 =
        trajdata::build_split(one, trajdata::SuccessRule::step_fraction(0.5), 1.0, 4);
    trajdata::SplitSampler sp(s1);
    // A single unlabeled episode leaves one half empty.
    Source empty_half = s1.unlabeled_half_a.empty() ? Source::HalfA : Source::HalfB;
    REQUIRE_THROWS_AS(sp.transitions({empty_half}, 4, rng), trajdata::EmptySource);
  }

  SECTION("degenerate requests are rejected") {
    REQUIRE_THROWS_AS(sampler.transitions({Source::Expert}, 0, rng), std::invalid_argument);
    REQUIRE_THROWS_AS(sampler.transitions(std::initializer_list<Source>{}, 4, rng),
                      trajdata::EmptySource);
  }
}

TEST_CASE("early states take the first observations of each episode") {
  Dataset d = make_dataset({make_episode(0, 20), make_episode(1, 3)});
  Matrix e10 = trajdata::early_states(d, 10);
  REQUIRE(e10.rows() == 10 + 4);  // min(10, 21) + min(10, 4)
  for (int t = 0; t < 10; ++t) {
    REQUIRE(e10(t, 0) == 0.0);
    REQUIRE(e10(t, 1) == static_cast<double>(t));
  }
  for (int t = 0; t < 4; ++t) REQUIRE(e10(10 + t, 1) == static_cast<double>(t));

  Matrix all = trajdata::early_states(d, 1000);
  REQUIRE(all.rows() == 21 + 4);

  const std::vector<int> only_second = {1};
  Matrix sub = trajdata::early_states(d, only_second, 10);
  REQUIRE(sub.rows() == 4);
  REQUIRE(sub(0, 0) == 1.0);
}

TEST_CASE("dataset files round-trip bit-exactly") {
  namespace fs = std::filesystem;
  const worldsim::Env env = worldsim::Env::point_reach();
  Dataset d = worldsim::generate_dataset(
      env, {{worldsim::BehaviorPolicy::noisy_expert(0.3), 2}, {worldsim::BehaviorPolicy::random(), 3}}, 5);
  const fs::path path = fs::temp_directory_path() / "oril_trajdata_roundtrip.bin";

  SECTION("with ground-truth rewards") {
    trajdata::write_dataset(d, path);
    Dataset r = trajdata::read_dataset(path);
    REQUIRE(r.obs_dim == d.obs_dim);
    REQUIRE(r.act_dim == d.act_dim);
    REQUIRE(r.meta == d.meta);
    REQUIRE(r.episodes.size() == d.episodes.size());
    for (std::size_t i = 0; i < d.episodes.size(); ++i)
      REQUIRE(episodes_equal(r.episodes[i], d.episodes[i]));
  }

  SECTION("without ground-truth rewards") {
    trajdata::SplitDataset split =
        trajdata::build_split(d, trajdata::SuccessRule::top_quantile(0.4), 1.0, 2);
    trajdata::write_dataset(split.unlabeled, path);
    Dataset r = trajdata::read_dataset(path);
    REQUIRE(r.episodes.size() == split.unlabeled.episodes.size());
    for (std::size_t i = 0; i < r.episodes.size(); ++i) {
      REQUIRE(!r.episodes[i].has_gt());
      REQUIRE(episodes_equal(r.episodes[i], split.unlabeled.episodes[i]));
    }
  }

  SECTION("wrong magic string is rejected with the failing offset") {
    trajdata::write_dataset(d, path);
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.put('X');
    f.close();
    REQUIRE_THROWS_AS(trajdata::read_dataset(path), trajdata::FormatError);
  }

  SECTION("truncated files are rejected") {
    trajdata::write_dataset(d, path);
    const auto size = fs::file_size(path);
    fs::resize_file(path, size - 10);
    REQUIRE_THROWS_AS(trajdata::read_dataset(path), trajdata::FormatError);
  }

  fs::remove(path);
}
