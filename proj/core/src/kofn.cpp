#include "cautious/kofn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "cautious/io.hpp"
#include "cautious/policy_eval.hpp"
#include "cautious/regret_matching.hpp"
#include "cautious/rng.hpp"

namespace cautious {

std::vector<std::size_t> worst_k_positions(const std::vector<double>& values, std::size_t k) {
  if (k == 0 || k > values.size()) {
    throw std::invalid_argument("worst_k_positions: k must be in [1, values.size()]");
  }
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // stable_sort keeps earlier sample positions ahead on ties.
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

RewardTable mix_rewards(const std::vector<const RewardTable*>& parts) {
  if (parts.empty()) throw std::invalid_argument("mix_rewards: no parts");
  const RewardTable& first = *parts.front();
  RewardTable out;
  out.values = Tensor3(first.values.dim0(), first.values.dim1(), first.values.dim2());
  out.bound = 0.0;
  const double w = 1.0 / static_cast<double>(parts.size());
  for (const RewardTable* part : parts) {
    if (!part->values.same_shape(first.values)) {
      throw std::invalid_argument("mix_rewards: shape mismatch");
    }
    out.bound = std::max(out.bound, part->bound);
    for (std::size_t i = 0; i < out.values.size(); ++i) {
      out.values.data()[i] += w * part->values.data()[i];
    }
  }
  return out;
}

namespace {

void check_config(const KofnConfig& config, std::size_t ensemble_size, bool with_replacement) {
  if (config.k == 0 || config.k > config.n) {
    throw std::invalid_argument("k must satisfy 1 <= k <= n");
  }
  if (config.iterations == 0) throw std::invalid_argument("iterations must be positive");
  if (!with_replacement && config.n * config.iterations > ensemble_size) {
    std::ostringstream os;
    os << "ensemble too small for run: needs " << config.n * config.iterations
       << " draws, has " << ensemble_size << " members";
    throw std::invalid_argument(os.str());
  }
}

/// Start-weighted values of `policy` on each sampled member, via one shared
/// factorization; repeated indices are solved once.
std::vector<double> sampled_returns(const TabularMdp& mdp, const RewardEnsemble& ensemble,
                                    const PolicyLinearSystem& system,
                                    const std::vector<std::size_t>& sampled) {
  std::unordered_map<std::size_t, double> cache;
  std::vector<double> returns(sampled.size());
  for (std::size_t i = 0; i < sampled.size(); ++i) {
    auto it = cache.find(sampled[i]);
    if (it == cache.end()) {
      const auto v = system.solve(ensemble.member(sampled[i]));
      it = cache.emplace(sampled[i], expected_return(mdp, v)).first;
    }
    returns[i] = it->second;
  }
  return returns;
}

}  // namespace

KofnResult run_kofn(const TabularMdp& mdp, RewardEnsemble& ensemble, const KofnConfig& config) {
  check_config(config, ensemble.size(), ensemble.with_replacement());
  ensemble.shuffle(config.seed);

  RegretMatcherBank bank(mdp.n_states, mdp.n_actions);
  std::vector<StationaryPolicy> snapshots;
  snapshots.reserve(config.iterations);
  KofnRunRecord record;
  record.iterations.reserve(config.iterations);

  for (std::size_t t = 1; t <= config.iterations; ++t) {
    const StationaryPolicy policy = bank.current_policy();
    snapshots.push_back(policy);

    const std::vector<std::size_t> sampled = ensemble.draw(config.n);
    const PolicyLinearSystem system(mdp, policy);
    const std::vector<double> returns = sampled_returns(mdp, ensemble, system, sampled);

    const std::vector<std::size_t> positions = worst_k_positions(returns, config.k);
    std::vector<const RewardTable*> parts;
    parts.reserve(config.k);
    double selected_mean = 0.0;
    KofnIterationRecord iter;
    iter.iteration = t;
    iter.sampled = sampled;
    for (std::size_t pos : positions) {
      iter.selected.push_back(sampled[pos]);
      parts.push_back(&ensemble.member(sampled[pos]));
      selected_mean += returns[pos];
    }
    selected_mean /= static_cast<double>(config.k);

    const RewardTable mixed = mix_rewards(parts);
    const auto v_mix = system.solve(mixed);
    iter.mixed_return = expected_return(mdp, v_mix);
    iter.mixing_error = std::abs(iter.mixed_return - selected_mean);

    bank.observe(q_values(mdp, mixed, v_mix));
    iter.max_regret_after = bank.max_regret();
    record.iterations.push_back(std::move(iter));
  }

  std::size_t output_iteration = config.iterations;
  if (config.output == KofnOutput::kSampled) {
    auto engine = make_engine(config.seed, "output");
    std::uniform_int_distribution<std::size_t> pick(1, config.iterations);
    output_iteration = pick(engine);
  } else if (config.output == KofnOutput::kBest) {
    const std::uint64_t eval_seed = substream_seed(config.seed, "best");
    double best_value = 0.0;
    for (std::size_t t = 1; t <= config.iterations; ++t) {
      const KofnValue value = kofn_value(mdp, ensemble, snapshots[t - 1], config.k, config.n,
                                         config.eval_repetitions, eval_seed);
      if (t == 1 || value.mean > best_value) {
        best_value = value.mean;
        output_iteration = t;
      }
    }
  }

  std::size_t stride = config.snapshot_stride;
  if (stride == 0) {
    stride = config.iterations <= 200 ? 1 : (config.iterations + 199) / 200;
  }
  for (std::size_t t = 1; t <= config.iterations; t += stride) {
    record.snapshots.push_back(KofnPolicySnapshot{t, snapshots[t - 1]});
  }

  record.output_iteration = output_iteration;
  return KofnResult{snapshots[output_iteration - 1], std::move(record)};
}

StationaryPolicy average_snapshot_policy(const KofnRunRecord& record) {
  if (record.snapshots.empty()) {
    throw std::invalid_argument("average_snapshot_policy: record has no policy snapshots");
  }
  const Matrix& first = record.snapshots.front().policy.probs;
  Matrix mean(first.rows(), first.cols());
  for (const auto& snapshot : record.snapshots) {
    for (std::size_t i = 0; i < mean.size(); ++i) {
      mean.data()[i] += snapshot.policy.probs.data()[i];
    }
  }
  const double inv = 1.0 / static_cast<double>(record.snapshots.size());
  for (std::size_t i = 0; i < mean.size(); ++i) mean.data()[i] *= inv;
  return StationaryPolicy{std::move(mean)};
}

std::vector<double> regret_curve(const TabularMdp& mdp, const std::vector<RewardTable>& members,
                                 const KofnRunRecord& record,
                                 const StationaryPolicy& competitor) {
  const PolicyLinearSystem system(mdp, competitor);
  std::vector<double> curve;
  curve.reserve(record.iterations.size());
  double cumulative = 0.0;
  for (const auto& iter : record.iterations) {
    std::vector<const RewardTable*> parts;
    parts.reserve(iter.selected.size());
    for (std::size_t index : iter.selected) parts.push_back(&members.at(index));
    const RewardTable mixed = mix_rewards(parts);
    cumulative += expected_return(mdp, system.solve(mixed)) - iter.mixed_return;
    curve.push_back(cumulative);
  }
  return curve;
}

KofnValue kofn_value(const TabularMdp& mdp, const RewardEnsemble& ensemble,
                     const StationaryPolicy& policy, std::size_t k, std::size_t n,
                     std::size_t repetitions, std::uint64_t seed) {
  if (k == 0 || k > n) throw std::invalid_argument("k must satisfy 1 <= k <= n");
  if (repetitions == 0) throw std::invalid_argument("repetitions must be positive");

  const PolicyLinearSystem system(mdp, policy);
  // Policy is fixed, so each member's value is a constant; fill lazily.
  std::unordered_map<std::size_t, double> cache;
  auto member_value = [&](std::size_t index) {
    auto it = cache.find(index);
    if (it == cache.end()) {
      const auto v = system.solve(ensemble.member(index));
      it = cache.emplace(index, expected_return(mdp, v)).first;
    }
    return it->second;
  };

  std::vector<double> samples;
  samples.reserve(repetitions);
  for (std::size_t rep = 0; rep < repetitions; ++rep) {
    auto engine = make_engine(seed, "eval", rep);
    std::uniform_int_distribution<std::size_t> pick(0, ensemble.size() - 1);
    std::vector<double> returns(n);
    for (std::size_t i = 0; i < n; ++i) returns[i] = member_value(pick(engine));
    const auto positions = worst_k_positions(returns, k);
    double acc = 0.0;
    for (std::size_t pos : positions) acc += returns[pos];
    samples.push_back(acc / static_cast<double>(k));
  }

  KofnValue out;
  for (double s : samples) out.mean += s;
  out.mean /= static_cast<double>(samples.size());
  if (samples.size() > 1) {
    double ss = 0.0;
    for (double s : samples) ss += (s - out.mean) * (s - out.mean);
    out.stderr = std::sqrt(ss / static_cast<double>(samples.size() - 1)) /
                 std::sqrt(static_cast<double>(samples.size()));
  }
  return out;
}

namespace {

std::string join_indices(const std::vector<std::size_t>& indices) {
  std::string out;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(indices[i]);
  }
  return out;
}

std::vector<std::size_t> parse_indices(const std::string& text, const std::string& where) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(',', start);
    if (end == std::string::npos) end = text.size();
    const std::string field = text.substr(start, end - start);
    if (field.empty()) throw std::runtime_error(where + ": empty index field");
    std::size_t value = 0;
    for (char c : field) {
      if (c < '0' || c > '9') throw std::runtime_error(where + ": bad index '" + field + "'");
      value = value * 10 + static_cast<std::size_t>(c - '0');
    }
    out.push_back(value);
    if (end == text.size()) break;
    start = end + 1;
  }
  return out;
}

}  // namespace

void write_run_record(const std::filesystem::path& path, const KofnRunRecord& record) {
  std::string out;
  for (const auto& iter : record.iterations) {
    out += std::to_string(iter.iteration);
    out += '\t';
    out += join_indices(iter.sampled);
    out += '\t';
    out += join_indices(iter.selected);
    out += '\t';
    out += format_double(iter.mixed_return);
    out += '\n';
  }
  atomic_write_text(path, out);
}

KofnRunRecord read_run_record(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  KofnRunRecord record;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::ostringstream where;
    where << path.string() << ":" << line_no;

    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      std::size_t end = line.find('\t', start);
      if (end == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, end - start));
      start = end + 1;
    }
    if (fields.size() != 4) {
      throw std::runtime_error(where.str() + ": expected 4 tab-separated fields");
    }

    KofnIterationRecord iter;
    iter.iteration = parse_indices(fields[0], where.str()).at(0);
    iter.sampled = parse_indices(fields[1], where.str());
    iter.selected = parse_indices(fields[2], where.str());
    iter.mixed_return = parse_double(fields[3]);
    record.iterations.push_back(std::move(iter));
  }
  return record;
}

}  // namespace cautious
