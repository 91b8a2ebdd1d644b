#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <vector>

#include "../helpers.hpp"
#include "cautious/ensemble.hpp"

using namespace cautious;

namespace {

// Member m is the constant table m, so draws are identifiable by value too.
std::vector<RewardTable> numbered_members(std::size_t count, std::size_t n_states = 2,
                                          std::size_t n_actions = 2) {
  std::vector<RewardTable> members;
  for (std::size_t m = 0; m < count; ++m) {
    RewardTable table;
    table.bound = static_cast<double>(count);
    table.values = Tensor3(n_states, n_actions, n_states);
    for (std::size_t i = 0; i < table.values.size(); ++i) {
      table.values.data()[i] = static_cast<double>(m);
    }
    members.push_back(std::move(table));
  }
  return members;
}

}  // namespace

TEST_SUITE("ensemble") {

TEST_CASE("unshuffled draws follow insertion order") {
  RewardEnsemble ensemble(numbered_members(5), false);
  const auto first = ensemble.draw(2);
  const auto rest = ensemble.draw(3);
  CHECK(first == std::vector<std::size_t>{0, 1});
  CHECK(rest == std::vector<std::size_t>{2, 3, 4});
  CHECK(ensemble.remaining() == 0);
}

TEST_CASE("shuffle is deterministic in the seed") {
  RewardEnsemble a(numbered_members(50), false);
  RewardEnsemble b(numbered_members(50), false);
  a.shuffle(1234);
  b.shuffle(1234);
  CHECK(a.draw(50) == b.draw(50));

  RewardEnsemble c(numbered_members(100), false);
  RewardEnsemble d(numbered_members(100), false);
  c.shuffle(0);
  d.shuffle(1);
  CHECK(c.draw(100) != d.draw(100));
}

TEST_CASE("drawing everything visits each member exactly once") {
  RewardEnsemble ensemble(numbered_members(20), false);
  ensemble.shuffle(7);
  const auto order = ensemble.draw(20);
  std::set<std::size_t> seen(order.begin(), order.end());
  CHECK(seen.size() == 20);
  CHECK(*seen.begin() == 0);
  CHECK(*seen.rbegin() == 19);
}

TEST_CASE("split draws concatenate to one big draw") {
  RewardEnsemble whole(numbered_members(12), false);
  RewardEnsemble split(numbered_members(12), false);
  whole.shuffle(99);
  split.shuffle(99);
  const auto all = whole.draw(12);
  auto joined = split.draw(5);
  const auto tail = split.draw(7);
  joined.insert(joined.end(), tail.begin(), tail.end());
  CHECK(joined == all);
}

TEST_CASE("draw(0) consumes nothing") {
  RewardEnsemble ensemble(numbered_members(3), false);
  CHECK(ensemble.draw(0).empty());
  CHECK(ensemble.remaining() == 3);
}

TEST_CASE("exhaustion error reports the shortfall") {
  RewardEnsemble ensemble(numbered_members(5), false);
  try {
    ensemble.draw(6);
    FAIL("expected a throw");
  } catch (const std::runtime_error& error) {
    const std::string text = error.what();
    CHECK(text.find("6") != std::string::npos);
    CHECK(text.find("5") != std::string::npos);
    CHECK(text.find("exhausted") != std::string::npos);
  }

  // A partially consumed queue also reports correctly.
  RewardEnsemble partial(numbered_members(5), false);
  partial.draw(4);
  CHECK_THROWS_AS(partial.draw(2), std::runtime_error);
}

TEST_CASE("with-replacement draws never exhaust and stay in range") {
  RewardEnsemble ensemble(numbered_members(4), true, 5);
  for (int round = 0; round < 10; ++round) {
    for (std::size_t index : ensemble.draw(25)) CHECK(index < 4);
    CHECK(ensemble.remaining() == 4);
  }

  // Seeded identically, two ensembles produce the same stream.
  RewardEnsemble a(numbered_members(4), true);
  RewardEnsemble b(numbered_members(4), true);
  a.shuffle(42);
  b.shuffle(42);
  CHECK(a.draw(100) == b.draw(100));

  // And a long stream covers every index.
  RewardEnsemble c(numbered_members(4), true, 1);
  const auto stream = c.draw(200);
  std::set<std::size_t> seen(stream.begin(), stream.end());
  CHECK(seen.size() == 4);
}

TEST_CASE("shared_bound is the max member bound") {
  auto members = numbered_members(3);
  members[1].bound = 9.5;
  RewardEnsemble ensemble(std::move(members), false);
  CHECK(ensemble.shared_bound() == 9.5);
}

TEST_CASE("synthetic_belief statistics") {
  std::mt19937_64 engine(41);
  const RewardTable base = test_helpers::random_reward(engine, 2, 2, 1.0);
  Matrix scale(2, 2);
  scale(0, 0) = 0.5;
  scale(0, 1) = 0.0;  // this action's rewards are believed exactly
  scale(1, 0) = 0.2;
  scale(1, 1) = 0.1;

  SUBCASE("zero scale reproduces the base exactly") {
    Matrix zero(2, 2);
    const auto members = synthetic_belief(base, zero, 5, 3);
    REQUIRE(members.size() == 5);
    for (const auto& member : members) {
      for (std::size_t i = 0; i < member.values.size(); ++i) {
        CHECK(member.values.data()[i] == base.values.data()[i]);
      }
    }
  }

  SUBCASE("per-action scale of zero pins those entries") {
    const auto members = synthetic_belief(base, scale, 50, 4);
    for (const auto& member : members) {
      for (std::size_t next = 0; next < 2; ++next) {
        CHECK(member.values(0, 1, next) == base.values(0, 1, next));
        CHECK(member.values(1, 0, next) != base.values(1, 0, next));
      }
    }
  }

  SUBCASE("sample standard deviation approaches the requested scale") {
    const std::size_t n_members = 4000;
    const auto members = synthetic_belief(base, scale, n_members, 5);
    double sum = 0.0;
    double sum_sq = 0.0;
    for (const auto& member : members) {
      const double deviation = member.values(0, 0, 1) - base.values(0, 0, 1);
      sum += deviation;
      sum_sq += deviation * deviation;
    }
    const double mean = sum / n_members;
    const double sd = std::sqrt(sum_sq / n_members - mean * mean);
    CHECK(sd == doctest::Approx(0.5).epsilon(0.1));
    CHECK(mean == doctest::Approx(0.0).scale(1.0).epsilon(0.05));
  }

  SUBCASE("entries within one (s,a) row differ from each other") {
    const auto members = synthetic_belief(base, scale, 1, 6);
    const double shift0 = members[0].values(0, 0, 0) - base.values(0, 0, 0);
    const double shift1 = members[0].values(0, 0, 1) - base.values(0, 0, 1);
    CHECK(shift0 != shift1);
  }

  SUBCASE("deterministic in the seed") {
    const auto a = synthetic_belief(base, scale, 10, 7);
    const auto b = synthetic_belief(base, scale, 10, 7);
    const auto c = synthetic_belief(base, scale, 10, 8);
    for (std::size_t m = 0; m < 10; ++m) {
      for (std::size_t i = 0; i < a[m].values.size(); ++i) {
        CHECK(a[m].values.data()[i] == b[m].values.data()[i]);
      }
    }
    CHECK(a[0].values(0, 0, 0) != c[0].values(0, 0, 0));
  }

  SUBCASE("bound covers base plus six sigma and members are clipped") {
    const auto members = synthetic_belief(base, scale, 100, 9);
    double max_abs_base = 0.0;
    for (std::size_t i = 0; i < base.values.size(); ++i) {
      max_abs_base = std::max(max_abs_base, std::abs(base.values.data()[i]));
    }
    const double expected_bound = max_abs_base + 6.0 * 0.5;
    for (const auto& member : members) {
      CHECK(member.bound == doctest::Approx(expected_bound).epsilon(1e-12));
      for (std::size_t i = 0; i < member.values.size(); ++i) {
        CHECK(std::abs(member.values.data()[i]) <= member.bound + 1e-12);
      }
    }
  }
}

TEST_CASE("mean_reward averages elementwise") {
  auto members = numbered_members(3);  // constant tables 0, 1, 2
  const RewardTable mean = mean_reward(members);
  for (std::size_t i = 0; i < mean.values.size(); ++i) {
    CHECK(mean.values.data()[i] == doctest::Approx(1.0).epsilon(1e-15));
  }
  CHECK(mean.bound == 3.0);

  RewardEnsemble ensemble(members, false);
  const RewardTable via_ensemble = mean_reward(ensemble);
  for (std::size_t i = 0; i < mean.values.size(); ++i) {
    CHECK(via_ensemble.values.data()[i] == mean.values.data()[i]);
  }

  CHECK_THROWS_AS(mean_reward(std::vector<RewardTable>{}), std::invalid_argument);
}

TEST_CASE("ensemble directory round trip is bit-exact and keeps order") {
  test_helpers::TempDir dir("ens_dir");
  std::mt19937_64 engine(42);
  std::vector<RewardTable> members;
  for (int m = 0; m < 4; ++m) {
    members.push_back(test_helpers::random_reward(engine, 3, 2, 1.5));
  }
  const auto path = dir / "belief";
  write_ensemble_dir(path, members);
  const auto back = read_ensemble_dir(path);
  REQUIRE(back.size() == members.size());
  for (std::size_t m = 0; m < members.size(); ++m) {
    CHECK(back[m].bound == members[m].bound);
    for (std::size_t i = 0; i < members[m].values.size(); ++i) {
      CHECK(back[m].values.data()[i] == members[m].values.data()[i]);
    }
  }

  CHECK_THROWS_AS(read_ensemble_dir(dir / "nowhere"), std::runtime_error);
}

}  // TEST_SUITE
