#include "cautious/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "cautious/io.hpp"
#include "cautious/rng.hpp"

namespace cautious {

RewardEnsemble::RewardEnsemble(std::vector<RewardTable> members, bool with_replacement,
                               std::uint64_t draw_seed)
    : members_(std::move(members)),
      with_replacement_(with_replacement),
      engine_(make_engine(draw_seed, "draw")) {
  if (members_.empty()) throw std::invalid_argument("RewardEnsemble: no members");
  order_.resize(members_.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
}

double RewardEnsemble::shared_bound() const {
  double bound = 0.0;
  for (const auto& m : members_) bound = std::max(bound, m.bound);
  return bound;
}

void RewardEnsemble::shuffle(std::uint64_t seed) {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  auto engine = make_engine(seed, "shuffle");
  std::shuffle(order_.begin(), order_.end(), engine);
  cursor_ = 0;
  engine_ = make_engine(seed, "draw");
}

std::vector<std::size_t> RewardEnsemble::draw(std::size_t count) {
  std::vector<std::size_t> indices;
  indices.reserve(count);
  if (with_replacement_) {
    std::uniform_int_distribution<std::size_t> pick(0, members_.size() - 1);
    for (std::size_t i = 0; i < count; ++i) indices.push_back(order_[pick(engine_)]);
    return indices;
  }
  if (cursor_ + count > order_.size()) {
    std::ostringstream os;
    os << "ensemble exhausted: " << count << " requested, " << (order_.size() - cursor_)
       << " remaining (short " << (cursor_ + count - order_.size()) << ")";
    throw std::runtime_error(os.str());
  }
  for (std::size_t i = 0; i < count; ++i) indices.push_back(order_[cursor_ + i]);
  cursor_ += count;
  return indices;
}

std::size_t RewardEnsemble::remaining() const {
  return with_replacement_ ? members_.size() : order_.size() - cursor_;
}

std::vector<RewardTable> synthetic_belief(const RewardTable& base, const Matrix& noise_scale,
                                          std::size_t n_members, std::uint64_t seed) {
  if (noise_scale.rows() != base.n_states() || noise_scale.cols() != base.n_actions()) {
    throw std::invalid_argument("synthetic_belief: noise scale shape mismatch");
  }
  double base_max = 0.0;
  for (std::size_t i = 0; i < base.values.size(); ++i) {
    base_max = std::max(base_max, std::abs(base.values.data()[i]));
  }
  double scale_max = 0.0;
  for (std::size_t i = 0; i < noise_scale.size(); ++i) {
    scale_max = std::max(scale_max, noise_scale.data()[i]);
  }
  const double bound = base_max + 6.0 * scale_max;

  std::vector<RewardTable> members;
  members.reserve(n_members);
  for (std::size_t m = 0; m < n_members; ++m) {
    auto engine = make_engine(seed, "noise", m);
    std::normal_distribution<double> gauss(0.0, 1.0);
    RewardTable table;
    table.bound = bound;
    table.values = Tensor3(base.values.dim0(), base.values.dim1(), base.values.dim2());
    for (std::size_t s = 0; s < base.values.dim0(); ++s) {
      for (std::size_t a = 0; a < base.values.dim1(); ++a) {
        const double scale = noise_scale(s, a);
        const auto src = base.values.slice(s, a);
        auto dst = table.values.slice(s, a);
        for (std::size_t t = 0; t < base.values.dim2(); ++t) {
          dst[t] = std::clamp(src[t] + scale * gauss(engine), -bound, bound);
        }
      }
    }
    members.push_back(std::move(table));
  }
  return members;
}

namespace {

template <typename MemberAt>
RewardTable mean_reward_impl(std::size_t count, MemberAt&& member_at) {
  if (count == 0) throw std::invalid_argument("mean_reward: empty ensemble");
  const RewardTable& first = member_at(0);
  RewardTable mean;
  mean.values = Tensor3(first.values.dim0(), first.values.dim1(), first.values.dim2());
  for (std::size_t m = 0; m < count; ++m) {
    const RewardTable& member = member_at(m);
    if (!member.values.same_shape(mean.values)) {
      throw std::invalid_argument("mean_reward: member shape mismatch");
    }
    mean.bound = std::max(mean.bound, member.bound);
    for (std::size_t i = 0; i < mean.values.size(); ++i) {
      mean.values.data()[i] += member.values.data()[i];
    }
  }
  const double inv = 1.0 / static_cast<double>(count);
  for (std::size_t i = 0; i < mean.values.size(); ++i) mean.values.data()[i] *= inv;
  return mean;
}

}  // namespace

RewardTable mean_reward(const std::vector<RewardTable>& members) {
  return mean_reward_impl(members.size(),
                          [&](std::size_t m) -> const RewardTable& { return members[m]; });
}

RewardTable mean_reward(const RewardEnsemble& ensemble) {
  return mean_reward_impl(ensemble.size(),
                          [&](std::size_t m) -> const RewardTable& { return ensemble.member(m); });
}

namespace {

template <typename MemberAt>
void write_ensemble_dir_impl(const std::filesystem::path& dir, std::size_t count,
                             MemberAt&& member_at) {
  if (count == 0) throw std::invalid_argument("write_ensemble_dir: no members");
  std::filesystem::create_directories(dir);
  std::string manifest = "CAUTIOUS-ENS v1\n";
  for (std::size_t m = 0; m < count; ++m) {
    std::ostringstream name;
    name << "member_" << m << ".rew";
    write_reward(dir / name.str(), member_at(m));
    manifest += name.str();
    manifest += '\n';
  }
  atomic_write_text(dir / "manifest.txt", manifest);
}

}  // namespace

void write_ensemble_dir(const std::filesystem::path& dir, const std::vector<RewardTable>& members) {
  write_ensemble_dir_impl(dir, members.size(),
                          [&](std::size_t m) -> const RewardTable& { return members[m]; });
}

void write_ensemble_dir(const std::filesystem::path& dir, const RewardEnsemble& ensemble) {
  write_ensemble_dir_impl(dir, ensemble.size(),
                          [&](std::size_t m) -> const RewardTable& { return ensemble.member(m); });
}

std::vector<RewardTable> read_ensemble_dir(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.txt";
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot open: " + manifest_path.string());
  std::string line;
  if (!std::getline(in, line) || line != "CAUTIOUS-ENS v1") {
    throw std::runtime_error(manifest_path.string() + ": expected header 'CAUTIOUS-ENS v1'");
  }
  std::vector<RewardTable> members;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    members.push_back(read_reward(dir / line));
  }
  if (members.empty()) {
    throw std::runtime_error(manifest_path.string() + ": manifest lists no members");
  }
  return members;
}

}  // namespace cautious
