// Copyright 2026 The Sentinel Authors
// SPDX-License-Identifier: Apache-2.0

#include "sentinel/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "sentinel/error.hpp"
#include "sentinel/random.hpp"
#include "sentinel/text.hpp"

namespace sentinel {

NetworkConfig NetworkConfig::for_objects(std::size_t n_objects, std::size_t hidden_size,
                                         std::uint64_t seed) {
  NetworkConfig c;
  c.n_objects = n_objects;
  c.input_size = 2 * n_objects;
  c.hidden_size = hidden_size ? hidden_size : 2 * n_objects;
  c.output_size = n_objects;
  c.seed = seed;
  return c;
}

void NetworkConfig::validate() const {
  if (n_objects == 0) throw InvalidArgument("network needs n_objects >= 1");
  if (input_size != 2 * n_objects) throw InvalidArgument("input_size must equal 2N");
  if (output_size != n_objects) throw InvalidArgument("output_size must equal N");
  if (hidden_size == 0) throw InvalidArgument("hidden_size must be >= 1");
}

namespace {
bool all_finite(const Network& net);
}

void Network::validate() const {
  config.validate();
  const bool shapes_ok =
      hidden_weights.rows == config.hidden_size && hidden_weights.cols == config.input_size &&
      hidden_weights.data.size() == config.hidden_size * config.input_size &&
      hidden_bias.size() == config.hidden_size && output_weights.rows == config.output_size &&
      output_weights.cols == config.hidden_size &&
      output_weights.data.size() == config.output_size * config.hidden_size &&
      output_bias.size() == config.output_size;
  if (!shapes_ok) throw InvalidArgument("network parameter shapes do not match its config");
  if (!all_finite(*this)) throw InvalidArgument("network has non-finite parameters");
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Network init(NetworkConfig config, std::uint64_t seed) {
  config.seed = seed;
  config.validate();
  Network net;
  net.config = config;
  net.hidden_weights = Matrix(config.hidden_size, config.input_size);
  net.hidden_bias.assign(config.hidden_size, 0.0);
  net.output_weights = Matrix(config.output_size, config.hidden_size);
  net.output_bias.assign(config.output_size, 0.0);

  Rng rng(seed);
  const double hidden_limit = 1.0 / std::sqrt(static_cast<double>(config.input_size));
  for (double& w : net.hidden_weights.data) w = rng.uniform(-hidden_limit, hidden_limit);
  const double output_limit = 1.0 / std::sqrt(static_cast<double>(config.hidden_size));
  for (double& w : net.output_weights.data) w = rng.uniform(-output_limit, output_limit);
  return net;
}

namespace {

struct Activations {
  std::vector<double> hidden;
  std::vector<double> output;
};

void check_input(const Network& net, std::span<const double> input) {
  if (input.size() != net.config.input_size) {
    throw InvalidArgument("input has " + std::to_string(input.size()) + " values, network expects " +
                          std::to_string(net.config.input_size));
  }
}

void activate(const Network& net, std::span<const double> input, Activations& act) {
  const auto& c = net.config;
  act.hidden.resize(c.hidden_size);
  act.output.resize(c.output_size);
  for (std::size_t h = 0; h < c.hidden_size; ++h) {
    const double* row = &net.hidden_weights.data[h * c.input_size];
    double z = net.hidden_bias[h];
    for (std::size_t i = 0; i < c.input_size; ++i) z += row[i] * input[i];
    act.hidden[h] = sigmoid(z);
  }
  for (std::size_t o = 0; o < c.output_size; ++o) {
    const double* row = &net.output_weights.data[o * c.hidden_size];
    double z = net.output_bias[o];
    for (std::size_t h = 0; h < c.hidden_size; ++h) z += row[h] * act.hidden[h];
    act.output[o] = sigmoid(z);
  }
}

// Backpropagates one record into `g` (overwritten). Returns the record loss.
double backprop(const Network& net, std::span<const double> input, std::span<const double> target,
                Activations& act, std::vector<double>& output_delta, Gradients& g) {
  const auto& c = net.config;
  activate(net, input, act);
  double loss = 0.0;
  output_delta.resize(c.output_size);
  for (std::size_t o = 0; o < c.output_size; ++o) {
    const double y = act.output[o];
    const double r = y - target[o];
    loss += 0.5 * r * r;
    output_delta[o] = r * y * (1.0 - y);
  }
  for (std::size_t o = 0; o < c.output_size; ++o) {
    double* row = &g.output_weights.data[o * c.hidden_size];
    for (std::size_t h = 0; h < c.hidden_size; ++h) row[h] = output_delta[o] * act.hidden[h];
    g.output_bias[o] = output_delta[o];
  }
  for (std::size_t h = 0; h < c.hidden_size; ++h) {
    double back = 0.0;
    for (std::size_t o = 0; o < c.output_size; ++o) {
      back += net.output_weights.data[o * c.hidden_size + h] * output_delta[o];
    }
    const double delta = back * act.hidden[h] * (1.0 - act.hidden[h]);
    double* row = &g.hidden_weights.data[h * c.input_size];
    for (std::size_t i = 0; i < c.input_size; ++i) row[i] = delta * input[i];
    g.hidden_bias[h] = delta;
  }
  return loss;
}

Gradients zero_gradients(const NetworkConfig& c) {
  Gradients g;
  g.hidden_weights = Matrix(c.hidden_size, c.input_size);
  g.hidden_bias.assign(c.hidden_size, 0.0);
  g.output_weights = Matrix(c.output_size, c.hidden_size);
  g.output_bias.assign(c.output_size, 0.0);
  return g;
}

// param += velocity, where velocity = momentum * velocity - lr * grad.
void apply(std::vector<double>& param, std::vector<double>& velocity,
           const std::vector<double>& grad, double lr, double momentum) {
  for (std::size_t i = 0; i < param.size(); ++i) {
    velocity[i] = momentum * velocity[i] - lr * grad[i];
    param[i] += velocity[i];
  }
}

bool all_finite(const Network& net) {
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  return finite(net.hidden_weights.data) && finite(net.hidden_bias) &&
         finite(net.output_weights.data) && finite(net.output_bias);
}

void check_data(const Network& net, const TrainingSet& data, const char* name) {
  if (data.size() == 0) throw InvalidArgument(std::string(name) + " slice is empty");
  if (data.input_size != net.config.input_size || data.output_size != net.config.output_size) {
    throw InvalidArgument(std::string(name) + " slice shape does not match the network");
  }
}

}  // namespace

std::vector<double> forward(const Network& net, std::span<const double> input) {
  check_input(net, input);
  Activations act;
  activate(net, input, act);
  return act.output;
}

Gradients gradients(const Network& net, std::span<const double> input,
                    std::span<const double> target) {
  check_input(net, input);
  if (target.size() != net.config.output_size) {
    throw InvalidArgument("target has " + std::to_string(target.size()) +
                          " values, network expects " + std::to_string(net.config.output_size));
  }
  Gradients g = zero_gradients(net.config);
  Activations act;
  std::vector<double> delta;
  backprop(net, input, target, act, delta, g);
  return g;
}

double record_loss(const Network& net, std::span<const double> input,
                   std::span<const double> target) {
  auto y = forward(net, input);
  if (target.size() != y.size()) throw InvalidArgument("target arity mismatch");
  double loss = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) loss += 0.5 * (y[j] - target[j]) * (y[j] - target[j]);
  return loss;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidArgument("learning_rate must be a finite non-negative number");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidArgument("momentum must be in [0,1)");
  if (patience < 1) throw InvalidArgument("patience must be >= 1");
  if (!(min_improvement >= 0.0 && min_improvement < 1.0)) {
    throw InvalidArgument("min_improvement must be in [0,1)");
  }
  if (max_epochs < 1) throw InvalidArgument("max_epochs must be >= 1");
}

std::vector<double> encode_input(std::span<const Location> locations, const DatasetMeta& meta) {
  std::vector<double> input;
  input.reserve(2 * locations.size());
  for (const Location& p : locations) {
    Location q = p;
    if (meta.scale == CoordinateScale::none) {
      if (!meta.bounds.contains(p)) {
        throw InvalidArgument("location (" + text::format_shortest(p.x) + ", " +
                              text::format_shortest(p.y) + ") outside area bounds");
      }
      q = scale_location(p, meta.bounds);
    }
    input.push_back(q.x);
    input.push_back(q.y);
  }
  return input;
}

void TrainingSet::append(const Observation& obs, const DatasetMeta& meta) {
  auto in = encode_input(obs.locations, meta);
  if (in.size() != input_size || obs.hostility.size() != output_size) {
    throw InvalidArgument("record arity does not match training set");
  }
  inputs.insert(inputs.end(), in.begin(), in.end());
  targets.insert(targets.end(), obs.hostility.begin(), obs.hostility.end());
}

TrainingSet make_training_set(const NormalizedDataset& ds, const SplitAssignment& split,
                              SplitTag tag) {
  const auto records = flatten(ds);
  if (split.tags.size() != records.size()) {
    throw InvalidArgument("split covers " + std::to_string(split.tags.size()) +
                          " records, dataset has " + std::to_string(records.size()));
  }
  TrainingSet set;
  set.input_size = 2 * ds.n_objects;
  set.output_size = ds.n_objects;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (split.tags[i] == tag) set.append(*records[i], ds.meta);
  }
  return set;
}

double mean_squared_error(const Network& net, const TrainingSet& data) {
  if (data.size() == 0) throw InvalidArgument("cannot measure error on an empty slice");
  Activations act;
  double sum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    activate(net, data.input(i), act);
    auto t = data.target(i);
    for (std::size_t o = 0; o < act.output.size(); ++o) {
      const double r = act.output[o] - t[o];
      sum += r * r;
    }
  }
  return sum / static_cast<double>(data.size() * data.output_size);
}

TrainResult train_early_stop(Network net, const TrainingSet& train, const TrainingSet& validation,
                             const TrainConfig& tc) {
  tc.validate();
  net.validate();
  check_data(net, train, "training");
  check_data(net, validation, "validation");

  TrainResult result;
  TrainReport& report = result.report;
  Network best = net;
  report.best_validation_mse = std::numeric_limits<double>::infinity();

  Gradients grad = zero_gradients(net.config);
  Gradients velocity = zero_gradients(net.config);
  Activations act;
  std::vector<double> delta;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t stale = 0;
  double reference = std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    Rng rng(tc.shuffle_seed ^ (0x9e3779b97f4a7c15ULL * epoch));
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t idx : order) {
      backprop(net, train.input(idx), train.target(idx), act, delta, grad);
      apply(net.output_weights.data, velocity.output_weights.data, grad.output_weights.data,
            tc.learning_rate, tc.momentum);
      apply(net.output_bias, velocity.output_bias, grad.output_bias, tc.learning_rate, tc.momentum);
      apply(net.hidden_weights.data, velocity.hidden_weights.data, grad.hidden_weights.data,
            tc.learning_rate, tc.momentum);
      apply(net.hidden_bias, velocity.hidden_bias, grad.hidden_bias, tc.learning_rate, tc.momentum);
    }

    EpochStats stats{mean_squared_error(net, train), mean_squared_error(net, validation)};
    if (!std::isfinite(stats.train_mse) || !std::isfinite(stats.validation_mse) ||
        !all_finite(net)) {
      throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch) +
                             "; lower the learning rate");
    }
    report.epochs.push_back(stats);
    report.stop_epoch = epoch;
    if (stats.validation_mse < report.best_validation_mse) {
      report.best_validation_mse = stats.validation_mse;
      report.best_epoch = epoch;
      best = net;
    }
    if (stats.validation_mse < reference * (1.0 - tc.min_improvement)) {
      reference = stats.validation_mse;
      stale = 0;
    } else if (++stale >= tc.patience) {
      break;
    }
  }
  result.network = std::move(best);
  return result;
}

TrainResult train_early_stop(Network net, const NormalizedDataset& ds,
                             const SplitAssignment& split, const TrainConfig& tc) {
  return train_early_stop(std::move(net), make_training_set(ds, split, SplitTag::train),
                          make_training_set(ds, split, SplitTag::validation), tc);
}

std::vector<double> predict(const Network& net, const DatasetMeta& meta,
                            std::span<const Location> locations) {
  if (locations.size() != net.config.n_objects) {
    throw InvalidArgument("observation has " + std::to_string(locations.size()) +
                          " objects, model serves N=" + std::to_string(net.config.n_objects));
  }
  return forward(net, encode_input(locations, meta));
}

// ---- model file --------------------------------------------------------

namespace {

constexpr std::string_view kModelHeader = "sentinel-model v1";

void write_block(std::ostream& out, const char* name, const std::vector<double>& values,
                 std::size_t rows, std::size_t cols, bool matrix) {
  out << name << ' ' << rows;
  if (matrix) out << ' ' << cols;
  out << '\n';
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (c) out << ' ';
      out << text::format_precise(values[r * cols + c]);
    }
    out << '\n';
  }
}

class ModelReader {
 public:
  ModelReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  std::string line() {
    std::string s;
    if (!std::getline(in_, s)) fail("unexpected end of file");
    ++line_no_;
    return s;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(source_, line_no_, what);
  }

  std::size_t key_count(std::string_view token, std::string_view key) {
    if (token.size() <= key.size() + 1 || token.substr(0, key.size()) != key ||
        token[key.size()] != '=') {
      fail("expected `" + std::string(key) + "=<n>`");
    }
    auto v = text::parse_uint(token.substr(key.size() + 1));
    if (!v) fail("invalid value for " + std::string(key));
    return static_cast<std::size_t>(*v);
  }

  std::vector<double> block(const char* name, std::size_t rows, std::size_t cols, bool matrix) {
    const std::string head_line = line();
    auto head = text::split(head_line);
    const std::size_t expected = matrix ? 3 : 2;
    if (head.size() != expected || head[0] != name) {
      fail(std::string("expected `") + name + (matrix ? " <rows> <cols>`" : " <n>`"));
    }
    auto r = text::parse_uint(head[1]);
    auto c = matrix ? text::parse_uint(head[2]) : std::optional<std::uint64_t>(1);
    if (!r || !c || *r != rows || *c != cols) {
      fail(std::string(name) + " shape does not match config");
    }
    std::vector<double> values;
    values.reserve(rows * cols);
    for (std::size_t i = 0; i < rows; ++i) {
      const std::string row = line();
      auto tokens = text::split(row);
      if (tokens.size() != cols) {
        fail(std::string(name) + " row has " + std::to_string(tokens.size()) + " values, expected " +
             std::to_string(cols));
      }
      for (auto t : tokens) {
        auto v = text::parse_double(t);
        if (!v) fail("invalid number `" + std::string(t) + "`");
        values.push_back(*v);
      }
    }
    return values;
  }

  void expect_eof() {
    std::string s;
    if (std::getline(in_, s)) {
      ++line_no_;
      fail("trailing content after model");
    }
  }

 private:
  std::istream& in_;
  std::string source_;
  std::size_t line_no_ = 0;
};

}  // namespace

void write_network(const Network& net, std::ostream& out) {
  net.validate();
  const auto& c = net.config;
  out << kModelHeader << '\n';
  out << "config n_objects=" << c.n_objects << " input_size=" << c.input_size
      << " hidden_size=" << c.hidden_size << " output_size=" << c.output_size
      << " seed=" << c.seed << '\n';
  write_block(out, "hidden_weights", net.hidden_weights.data, c.hidden_size, c.input_size, true);
  write_block(out, "hidden_bias", net.hidden_bias, c.hidden_size, 1, false);
  write_block(out, "output_weights", net.output_weights.data, c.output_size, c.hidden_size, true);
  write_block(out, "output_bias", net.output_bias, c.output_size, 1, false);
}

void write_network(const Network& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_network(net, out);
}

Network read_network(std::istream& in, const std::string& source, bool to_eof) {
  ModelReader r(in, source);
  std::string header = r.line();
  if (header != kModelHeader) {
    if (header.rfind("sentinel-model ", 0) == 0) r.fail("unsupported model version `" + header + "`");
    r.fail("not a model file, expected `sentinel-model v1`");
  }
  const std::string config_line = r.line();
  auto tokens = text::split(config_line);
  if (tokens.size() != 6 || tokens[0] != "config") {
    r.fail("expected `config n_objects=.. input_size=.. hidden_size=.. output_size=.. seed=..`");
  }
  Network net;
  net.config.n_objects = r.key_count(tokens[1], "n_objects");
  net.config.input_size = r.key_count(tokens[2], "input_size");
  net.config.hidden_size = r.key_count(tokens[3], "hidden_size");
  net.config.output_size = r.key_count(tokens[4], "output_size");
  net.config.seed = r.key_count(tokens[5], "seed");
  try {
    net.config.validate();
  } catch (const InvalidArgument& e) {
    r.fail(e.what());
  }
  const auto& c = net.config;
  net.hidden_weights.rows = c.hidden_size;
  net.hidden_weights.cols = c.input_size;
  net.hidden_weights.data = r.block("hidden_weights", c.hidden_size, c.input_size, true);
  net.hidden_bias = r.block("hidden_bias", c.hidden_size, 1, false);
  net.output_weights.rows = c.output_size;
  net.output_weights.cols = c.hidden_size;
  net.output_weights.data = r.block("output_weights", c.output_size, c.hidden_size, true);
  net.output_bias = r.block("output_bias", c.output_size, 1, false);
  if (to_eof) r.expect_eof();
  return net;
}

Network read_network(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_network(in, path.string());
}

void write_report_csv(const TrainReport& report, std::ostream& out) {
  out << "epoch,train_mse,validation_mse\n";
  for (std::size_t i = 0; i < report.epochs.size(); ++i) {
    out << (i + 1) << ',' << text::format_precise(report.epochs[i].train_mse) << ','
        << text::format_precise(report.epochs[i].validation_mse) << '\n';
  }
}

}  // namespace sentinel
