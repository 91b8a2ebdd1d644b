#include "cautious/mlp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "cautious/io.hpp"
#include "cautious/rng.hpp"

namespace cautious {

namespace {

void check_model(const MlpRewardModel& model) {
  if (model.w1.rows() != model.hidden_dim || model.w1.cols() != model.input_dim ||
      model.b1.size() != model.hidden_dim || model.w2.rows() != model.output_dim ||
      model.w2.cols() != model.hidden_dim || model.b2.size() != model.output_dim) {
    throw std::invalid_argument("model parameter shapes are inconsistent");
  }
}

/// Forward pass keeping the hidden pre-activations for backprop.
struct ForwardTrace {
  std::vector<double> pre;     // w1 x + b1
  std::vector<double> hidden;  // relu(pre)
  std::vector<double> out;
};

ForwardTrace forward_trace(const MlpRewardModel& model, std::span<const double> x) {
  ForwardTrace t;
  t.pre.resize(model.hidden_dim);
  t.hidden.resize(model.hidden_dim);
  t.out.assign(model.output_dim, 0.0);
  for (std::size_t h = 0; h < model.hidden_dim; ++h) {
    double acc = model.b1[h];
    const auto row = model.w1.row(h);
    for (std::size_t i = 0; i < model.input_dim; ++i) acc += row[i] * x[i];
    t.pre[h] = acc;
    t.hidden[h] = acc > 0.0 ? acc : 0.0;
  }
  for (std::size_t o = 0; o < model.output_dim; ++o) {
    double acc = model.b2[o];
    const auto row = model.w2.row(o);
    for (std::size_t h = 0; h < model.hidden_dim; ++h) acc += row[h] * t.hidden[h];
    t.out[o] = acc;
  }
  return t;
}

/// Resolves the weight vector an example trains under.
std::span<const double> effective_weights(const TrainExample& example,
                                          const std::vector<double>& defaults,
                                          std::vector<double>& ones_buffer,
                                          std::size_t output_dim) {
  if (!example.weight.empty()) {
    if (example.weight.size() != output_dim) {
      throw std::invalid_argument("example weight length does not match target length");
    }
    return example.weight;
  }
  if (!defaults.empty()) {
    if (defaults.size() != output_dim) {
      throw std::invalid_argument("default output weight length does not match target length");
    }
    return defaults;
  }
  if (ones_buffer.size() != output_dim) ones_buffer.assign(output_dim, 1.0);
  return ones_buffer;
}

/// Weighted MSE for one example: mean over outputs of w_o (y_o - t_o)^2.
double example_loss(const ForwardTrace& t, const TrainExample& example,
                    std::span<const double> w) {
  double acc = 0.0;
  for (std::size_t o = 0; o < t.out.size(); ++o) {
    const double d = t.out[o] - example.target[o];
    acc += w[o] * d * d;
  }
  return acc / static_cast<double>(t.out.size());
}

struct Gradients {
  Matrix w1, w2;
  std::vector<double> b1, b2;

  explicit Gradients(const MlpRewardModel& m)
      : w1(m.hidden_dim, m.input_dim),
        w2(m.output_dim, m.hidden_dim),
        b1(m.hidden_dim, 0.0),
        b2(m.output_dim, 0.0) {}

  void scale(double s) {
    for (std::size_t i = 0; i < w1.size(); ++i) w1.data()[i] *= s;
    for (std::size_t i = 0; i < w2.size(); ++i) w2.data()[i] *= s;
    for (auto& v : b1) v *= s;
    for (auto& v : b2) v *= s;
  }
};

/// Accumulates d(loss)/d(params) for one example into `grad`; returns the
/// example's loss. The rectifier uses subgradient 0 at exactly zero.
double accumulate_example_grad(const MlpRewardModel& model, const TrainExample& example,
                               std::span<const double> w, Gradients& grad) {
  const ForwardTrace t = forward_trace(model, example.features);
  const double inv_outputs = 1.0 / static_cast<double>(model.output_dim);

  std::vector<double> dout(model.output_dim);
  for (std::size_t o = 0; o < model.output_dim; ++o) {
    dout[o] = 2.0 * w[o] * (t.out[o] - example.target[o]) * inv_outputs;
  }
  std::vector<double> dhidden(model.hidden_dim, 0.0);
  for (std::size_t o = 0; o < model.output_dim; ++o) {
    grad.b2[o] += dout[o];
    auto grow = grad.w2.row(o);
    const auto wrow = model.w2.row(o);
    for (std::size_t h = 0; h < model.hidden_dim; ++h) {
      grow[h] += dout[o] * t.hidden[h];
      dhidden[h] += dout[o] * wrow[h];
    }
  }
  for (std::size_t h = 0; h < model.hidden_dim; ++h) {
    if (t.pre[h] <= 0.0) continue;
    grad.b1[h] += dhidden[h];
    auto grow = grad.w1.row(h);
    for (std::size_t i = 0; i < model.input_dim; ++i) {
      grow[i] += dhidden[h] * example.features[i];
    }
  }
  return example_loss(t, example, w);
}

/// Adam-style first/second moment state over all four parameter blocks.
struct Moments {
  Gradients m, v;
  explicit Moments(const MlpRewardModel& model) : m(model), v(model) {}
};

struct Block {
  double* data;
  std::size_t size;
};

std::array<Block, 4> blocks(MlpRewardModel& m) {
  return {{{m.w1.data(), m.w1.size()},
           {m.b1.data(), m.b1.size()},
           {m.w2.data(), m.w2.size()},
           {m.b2.data(), m.b2.size()}}};
}

std::array<Block, 4> blocks(Gradients& g) {
  return {{{g.w1.data(), g.w1.size()},
           {g.b1.data(), g.b1.size()},
           {g.w2.data(), g.w2.size()},
           {g.b2.data(), g.b2.size()}}};
}

}  // namespace

std::vector<double> forward(const MlpRewardModel& model, std::span<const double> features) {
  check_model(model);
  if (features.size() != model.input_dim) {
    throw std::invalid_argument("feature length does not match model input width");
  }
  return forward_trace(model, features).out;
}

MlpRewardModel init_model(std::size_t input_dim, std::size_t hidden_dim, std::size_t output_dim,
                          std::uint64_t seed) {
  if (input_dim == 0 || hidden_dim == 0 || output_dim == 0) {
    throw std::invalid_argument("model dimensions must be positive");
  }
  MlpRewardModel model;
  model.input_dim = input_dim;
  model.hidden_dim = hidden_dim;
  model.output_dim = output_dim;
  model.w1 = Matrix(hidden_dim, input_dim);
  model.b1.assign(hidden_dim, 0.0);
  model.w2 = Matrix(output_dim, hidden_dim);
  model.b2.assign(output_dim, 0.0);

  auto engine = make_engine(seed, "init");
  const double bound1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
  const double bound2 = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  std::uniform_real_distribution<double> u1(-bound1, bound1);
  std::uniform_real_distribution<double> u2(-bound2, bound2);
  for (std::size_t i = 0; i < model.w1.size(); ++i) model.w1.data()[i] = u1(engine);
  for (auto& b : model.b1) b = u1(engine);
  for (std::size_t i = 0; i < model.w2.size(); ++i) model.w2.data()[i] = u2(engine);
  for (auto& b : model.b2) b = u2(engine);
  return model;
}

MlpRewardModel train(const std::vector<TrainExample>& dataset, const TrainConfig& config,
                     std::vector<double>* epoch_losses) {
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  if (config.epochs == 0 || config.batch_size == 0) {
    throw std::invalid_argument("train: epochs and batch size must be positive");
  }
  if (config.learning_rate <= 0.0) throw std::invalid_argument("train: learning rate must be positive");
  const std::size_t input_dim = dataset.front().features.size();
  const std::size_t output_dim = dataset.front().target.size();
  for (const auto& e : dataset) {
    if (e.features.size() != input_dim || e.target.size() != output_dim) {
      throw std::invalid_argument("train: inconsistent example dimensions");
    }
  }

  MlpRewardModel model = init_model(input_dim, config.hidden_dim, output_dim, config.seed);
  Moments moments(model);
  auto shuffle_engine = make_engine(config.seed, "shuffle");
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  std::vector<double> ones;
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_engine);
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(begin + config.batch_size, order.size());
      Gradients grad(model);
      double batch_loss = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        const TrainExample& example = dataset[order[i]];
        const auto w = effective_weights(example, config.output_weights, ones, output_dim);
        batch_loss += accumulate_example_grad(model, example, w, grad);
      }
      const double inv_batch = 1.0 / static_cast<double>(end - begin);
      grad.scale(inv_batch);
      batch_loss *= inv_batch;
      ++step;
      if (!std::isfinite(batch_loss)) {
        throw std::runtime_error("train: non-finite loss at step " + std::to_string(step));
      }

      const auto params = blocks(model);
      const auto grads = blocks(grad);
      if (config.optimizer == Optimizer::kPlainGradient) {
        for (std::size_t b = 0; b < params.size(); ++b) {
          double* p = params[b].data;
          const double* g = grads[b].data;
          for (std::size_t i = 0; i < params[b].size; ++i) {
            p[i] -= config.learning_rate * (g[i] + config.weight_decay * p[i]);
          }
        }
      } else {
        const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
        const auto ms = blocks(moments.m);
        const auto vs = blocks(moments.v);
        for (std::size_t b = 0; b < params.size(); ++b) {
          double* p = params[b].data;
          const double* g = grads[b].data;
          double* m = ms[b].data;
          double* v = vs[b].data;
          for (std::size_t i = 0; i < params[b].size; ++i) {
            const double gi = g[i] + config.weight_decay * p[i];
            m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * gi;
            v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * gi * gi;
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            p[i] -= config.learning_rate * mhat / (std::sqrt(vhat) + kEps);
          }
        }
      }
    }
    if (epoch_losses) {
      epoch_losses->push_back(dataset_loss(model, dataset, config.output_weights));
    }
  }
  return model;
}

double dataset_loss(const MlpRewardModel& model, const std::vector<TrainExample>& dataset,
                    const std::vector<double>& default_weights) {
  if (dataset.empty()) throw std::invalid_argument("dataset_loss: empty dataset");
  check_model(model);
  std::vector<double> ones;
  double acc = 0.0;
  for (const auto& example : dataset) {
    const auto w = effective_weights(example, default_weights, ones, model.output_dim);
    const ForwardTrace t = forward_trace(model, example.features);
    acc += example_loss(t, example, w);
  }
  return acc / static_cast<double>(dataset.size());
}

double grad_check(const MlpRewardModel& model, const TrainExample& example, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("grad_check: eps must be positive");
  check_model(model);
  std::vector<double> ones;
  const auto w = effective_weights(example, {}, ones, model.output_dim);

  Gradients analytic(model);
  accumulate_example_grad(model, example, w, analytic);

  MlpRewardModel probe = model;
  auto loss_at = [&]() {
    const ForwardTrace t = forward_trace(probe, example.features);
    return example_loss(t, example, w);
  };

  double worst = 0.0;
  const auto params = blocks(probe);
  const auto exact = blocks(analytic);
  for (std::size_t b = 0; b < params.size(); ++b) {
    double* p = params[b].data;
    const double* a = exact[b].data;
    for (std::size_t i = 0; i < params[b].size; ++i) {
      const double saved = p[i];
      p[i] = saved + eps;
      const double plus = loss_at();
      p[i] = saved - eps;
      const double minus = loss_at();
      p[i] = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double denom = std::max({std::abs(a[i]), std::abs(numeric), 1.0});
      worst = std::max(worst, std::abs(a[i] - numeric) / denom);
    }
  }
  return worst;
}

RewardTable tabularize(const MlpRewardModel& model,
                       const std::vector<std::vector<double>>& state_features,
                       std::size_t n_actions, TabularizeMode mode) {
  check_model(model);
  const std::size_t n_states = state_features.size();
  if (n_states == 0 || n_actions == 0) {
    throw std::invalid_argument("tabularize: empty state or action set");
  }
  const std::size_t feature_dim = state_features.front().size();
  for (const auto& f : state_features) {
    if (f.size() != feature_dim) throw std::invalid_argument("tabularize: ragged feature map");
  }

  RewardTable table;
  table.values = Tensor3(n_states, n_actions, n_states);
  double bound = 0.0;

  if (mode == TabularizeMode::kBanditActions) {
    if (model.output_dim != n_actions) {
      throw std::invalid_argument("tabularize: model output arity must equal n_actions");
    }
    if (model.input_dim != feature_dim) {
      throw std::invalid_argument("tabularize: model input width must match features");
    }
    for (std::size_t s = 0; s < n_states; ++s) {
      const auto out = forward_trace(model, state_features[s]).out;
      for (std::size_t a = 0; a < n_actions; ++a) {
        bound = std::max(bound, std::abs(out[a]));
        auto dst = table.values.slice(s, a);
        for (std::size_t t = 0; t < n_states; ++t) dst[t] = out[a];
      }
    }
  } else {
    if (model.output_dim != 1) {
      throw std::invalid_argument("tabularize: state-pair mode needs a single-output model");
    }
    if (model.input_dim != 2 * feature_dim) {
      throw std::invalid_argument("tabularize: model input width must be twice the feature width");
    }
    // w1 x splits into a current-state half and a next-state half; precompute
    // each half per state so the pair loop is additions only.
    Matrix left(n_states, model.hidden_dim);
    Matrix right(n_states, model.hidden_dim);
    for (std::size_t s = 0; s < n_states; ++s) {
      for (std::size_t h = 0; h < model.hidden_dim; ++h) {
        const auto row = model.w1.row(h);
        double accl = 0.0, accr = 0.0;
        for (std::size_t i = 0; i < feature_dim; ++i) {
          accl += row[i] * state_features[s][i];
          accr += row[feature_dim + i] * state_features[s][i];
        }
        left(s, h) = accl;
        right(s, h) = accr;
      }
    }
    Matrix pair_value(n_states, n_states);
    for (std::size_t s = 0; s < n_states; ++s) {
      for (std::size_t t = 0; t < n_states; ++t) {
        double acc = model.b2[0];
        const auto wrow = model.w2.row(0);
        for (std::size_t h = 0; h < model.hidden_dim; ++h) {
          const double pre = left(s, h) + right(t, h) + model.b1[h];
          if (pre > 0.0) acc += wrow[h] * pre;
        }
        pair_value(s, t) = acc;
        bound = std::max(bound, std::abs(acc));
      }
    }
    for (std::size_t s = 0; s < n_states; ++s) {
      for (std::size_t a = 0; a < n_actions; ++a) {
        auto dst = table.values.slice(s, a);
        for (std::size_t t = 0; t < n_states; ++t) dst[t] = pair_value(s, t);
      }
    }
  }

  table.bound = bound;
  return table;
}

RewardEnsemble ensemble_train(const std::vector<TrainExample>& dataset, std::size_t members,
                              std::uint64_t base_seed, const TrainConfig& config,
                              const std::vector<std::vector<double>>& state_features,
                              std::size_t n_actions, TabularizeMode mode, bool with_replacement,
                              std::vector<MlpRewardModel>* models_out,
                              std::vector<std::vector<double>>* losses_out) {
  if (members == 0) throw std::invalid_argument("ensemble_train: members must be positive");
  std::vector<RewardTable> tables;
  tables.reserve(members);
  for (std::size_t m = 0; m < members; ++m) {
    TrainConfig member_config = config;
    member_config.seed = base_seed + m;
    std::vector<double> losses;
    MlpRewardModel model = train(dataset, member_config, losses_out ? &losses : nullptr);
    tables.push_back(tabularize(model, state_features, n_actions, mode));
    if (models_out) models_out->push_back(std::move(model));
    if (losses_out) losses_out->push_back(std::move(losses));
  }
  return RewardEnsemble(std::move(tables), with_replacement, base_seed);
}

void write_mlp(const std::filesystem::path& path, const MlpRewardModel& model) {
  check_model(model);
  std::string out = "CAUTIOUS-MLP v1\n";
  out += std::to_string(model.input_dim) + " " + std::to_string(model.hidden_dim) + " " +
         std::to_string(model.output_dim) + "\n";
  auto append_values = [&out](const double* values, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      if (i) out += ' ';
      out += format_double(values[i]);
    }
    out += '\n';
  };
  for (std::size_t h = 0; h < model.hidden_dim; ++h) append_values(model.w1.row(h).data(), model.input_dim);
  append_values(model.b1.data(), model.b1.size());
  for (std::size_t o = 0; o < model.output_dim; ++o) append_values(model.w2.row(o).data(), model.hidden_dim);
  append_values(model.b2.data(), model.b2.size());
  atomic_write_text(path, out);
}

MlpRewardModel read_mlp(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::string line;
  auto next_line = [&]() {
    if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": unexpected end of file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };
  if (next_line() != "CAUTIOUS-MLP v1") {
    throw std::runtime_error(path.string() + ": expected header 'CAUTIOUS-MLP v1'");
  }
  std::istringstream dims(next_line());
  MlpRewardModel model;
  if (!(dims >> model.input_dim >> model.hidden_dim >> model.output_dim)) {
    throw std::runtime_error(path.string() + ": bad dimensions line");
  }
  auto parse_values = [&](double* dst, std::size_t n) {
    std::istringstream row(next_line());
    std::string field;
    for (std::size_t i = 0; i < n; ++i) {
      if (!(row >> field)) throw std::runtime_error(path.string() + ": short row");
      dst[i] = parse_double(field);
    }
    if (row >> field) throw std::runtime_error(path.string() + ": extra fields in row");
  };
  model.w1 = Matrix(model.hidden_dim, model.input_dim);
  model.b1.assign(model.hidden_dim, 0.0);
  model.w2 = Matrix(model.output_dim, model.hidden_dim);
  model.b2.assign(model.output_dim, 0.0);
  for (std::size_t h = 0; h < model.hidden_dim; ++h) parse_values(model.w1.row(h).data(), model.input_dim);
  parse_values(model.b1.data(), model.b1.size());
  for (std::size_t o = 0; o < model.output_dim; ++o) parse_values(model.w2.row(o).data(), model.hidden_dim);
  parse_values(model.b2.data(), model.b2.size());
  return model;
}

}  // namespace cautious
