#include "reprdyn/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "reprdyn/csv.hpp"

namespace reprdyn {
namespace {

constexpr std::string_view kExperimentNames[] = {
    "Simulate", "TwoPoint", "InitSweep", "GridSweep", "Xor",
    "Blobs",    "Mnist",    "DepthSweep", "Ablation"};

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_double(std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ConfigError("expected a number, got '" + std::string(v) + "'");
  }
  return out;
}

long long to_integer(std::string_view v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ConfigError("expected an integer, got '" + std::string(v) + "'");
  }
  return out;
}

std::uint64_t to_unsigned(std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ConfigError("expected a non-negative integer, got '" + std::string(v) + "'");
  }
  return out;
}

bool to_bool(std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("expected true or false, got '" + std::string(v) + "'");
}

int positive_int(std::string_view v) {
  const long long n = to_integer(v);
  if (n < 1 || n > 1'000'000'000) throw ConfigError("must be a positive integer");
  return static_cast<int>(n);
}

double positive(std::string_view v) {
  const double x = to_double(v);
  if (!(x > 0.0) || !std::isfinite(x)) throw ConfigError("must be positive");
  return x;
}

double non_negative(std::string_view v) {
  const double x = to_double(v);
  if (!(x >= 0.0) || !std::isfinite(x)) throw ConfigError("must be non-negative");
  return x;
}

std::vector<std::string_view> split_list(std::string_view v) {
  std::vector<std::string_view> out;
  if (trim(v).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = v.find(',', start);
    out.push_back(trim(v.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string join_doubles(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + format_double(xs[i]);
  return s;
}

std::string optional_double(const std::optional<double>& x) {
  return x ? format_double(*x) : std::string();
}

struct Key {
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

// The order here is the serialization order.
const std::vector<std::pair<std::string, Key>>& keys() {
  static const std::vector<std::pair<std::string, Key>> table = [] {
    std::vector<std::pair<std::string, Key>> k;
    auto add = [&](std::string name, auto set, auto get) {
      k.emplace_back(std::move(name), Key{set, get});
    };
    using C = ExperimentConfig;
    using V = std::string_view;

    add("experiment", [](C&, V) {}, [](const C& c) { return std::string(to_string(c.experiment)); });
    add("seed", [](C& c, V v) { c.seed = to_unsigned(v); },
        [](const C& c) { return std::to_string(c.seed); });
    add("trials", [](C& c, V v) { c.trials = positive_int(v); },
        [](const C& c) { return std::to_string(c.trials); });
    add("workers", [](C& c, V v) { c.workers = positive_int(v); },
        [](const C& c) { return std::to_string(c.workers); });
    add("output_dir", [](C& c, V v) { c.output_dir = std::string(v); },
        [](const C& c) { return c.output_dir; });
    add("paper_scale", [](C& c, V v) { c.paper_scale = to_bool(v); },
        [](const C& c) { return std::string(c.paper_scale ? "true" : "false"); });

    add("network.hidden_layers", [](C& c, V v) { c.network.hidden_layers = positive_int(v); },
        [](const C& c) { return std::to_string(c.network.hidden_layers); });
    add("network.units", [](C& c, V v) { c.network.units = positive_int(v); },
        [](const C& c) { return std::to_string(c.network.units); });
    add("network.activation",
        [](C& c, V v) {
          const auto a = parse_activation(v);
          if (!a) throw ConfigError("unknown activation '" + std::string(v) + "'");
          c.network.activation = *a;
        },
        [](const C& c) { return std::string(to_string(c.network.activation)); });
    add("network.init_gain", [](C& c, V v) { c.network.init_gain = non_negative(v); },
        [](const C& c) { return format_double(c.network.init_gain); });
    add("network.skip_connections", [](C& c, V v) { c.network.skip_connections = to_bool(v); },
        [](const C& c) { return std::string(c.network.skip_connections ? "true" : "false"); });
    add("network.dropout_p",
        [](C& c, V v) {
          const double p = to_double(v);
          if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout_p must be in [0, 1)");
          c.network.dropout_p = p;
        },
        [](const C& c) { return format_double(c.network.dropout_p); });
    add("network.hidden_index",
        [](C& c, V v) {
          if (v.empty()) {
            c.network.hidden_index.reset();
          } else {
            c.network.hidden_index = positive_int(v);
          }
        },
        [](const C& c) {
          return c.network.hidden_index ? std::to_string(*c.network.hidden_index) : std::string();
        });

    add("schedule.learning_rate", [](C& c, V v) { c.schedule.learning_rate = non_negative(v); },
        [](const C& c) { return format_double(c.schedule.learning_rate); });
    add("schedule.epochs",
        [](C& c, V v) {
          const long long n = to_integer(v);
          if (n < 0 || n > 100'000'000) throw ConfigError("epochs out of range");
          c.schedule.epochs = static_cast<int>(n);
        },
        [](const C& c) { return std::to_string(c.schedule.epochs); });
    add("schedule.optimizer",
        [](C& c, V v) {
          const auto o = parse_optimizer(v);
          if (!o) throw ConfigError("unknown optimizer '" + std::string(v) + "'");
          c.schedule.optimizer.kind = *o;
        },
        [](const C& c) { return std::string(to_string(c.schedule.optimizer.kind)); });
    add("schedule.beta1", [](C& c, V v) { c.schedule.optimizer.beta1 = non_negative(v); },
        [](const C& c) { return format_double(c.schedule.optimizer.beta1); });
    add("schedule.beta2", [](C& c, V v) { c.schedule.optimizer.beta2 = non_negative(v); },
        [](const C& c) { return format_double(c.schedule.optimizer.beta2); });
    add("schedule.epsilon", [](C& c, V v) { c.schedule.optimizer.epsilon = positive(v); },
        [](const C& c) { return format_double(c.schedule.optimizer.epsilon); });
    add("schedule.record_every", [](C& c, V v) { c.schedule.record_every = positive_int(v); },
        [](const C& c) { return std::to_string(c.schedule.record_every); });

    auto optional_rate = [&](std::string name, std::optional<double> TheoryOverrides::*field,
                             bool allow_zero) {
      add(std::move(name),
          [field, allow_zero](C& c, V v) {
            if (v.empty()) {
              (c.theory.*field).reset();
            } else {
              c.theory.*field = allow_zero ? non_negative(v) : positive(v);
            }
          },
          [field](const C& c) { return optional_double(c.theory.*field); });
    };
    optional_rate("theory.dx2", &TheoryOverrides::dx2, true);
    optional_rate("theory.dyT2", &TheoryOverrides::dyT2, true);
    optional_rate("theory.inv_tau_h", &TheoryOverrides::inv_tau_h, false);
    optional_rate("theory.inv_tau_y", &TheoryOverrides::inv_tau_y, false);
    optional_rate("theory.inv_tau_ybar", &TheoryOverrides::inv_tau_ybar, false);
    add("theory.dh2_0", [](C& c, V v) { c.theory.initial.dh2 = positive(v); },
        [](const C& c) { return format_double(c.theory.initial.dh2); });
    add("theory.dy2_0", [](C& c, V v) { c.theory.initial.dy2 = non_negative(v); },
        [](const C& c) { return format_double(c.theory.initial.dy2); });
    add("theory.w_0", [](C& c, V v) { c.theory.initial.w = to_double(v); },
        [](const C& c) { return format_double(c.theory.initial.w); });
    add("theory.t_end", [](C& c, V v) { c.theory.t_end = positive(v); },
        [](const C& c) { return format_double(c.theory.t_end); });
    add("theory.samples",
        [](C& c, V v) {
          c.theory.samples = positive_int(v);
          if (c.theory.samples < 2) throw ConfigError("samples must be at least 2");
        },
        [](const C& c) { return std::to_string(c.theory.samples); });
    add("theory.variant",
        [](C& c, V v) {
          const auto r = parse_variant(v);
          if (!r) throw ConfigError("unknown variant '" + std::string(v) + "'");
          c.theory.variant = *r;
        },
        [](const C& c) { return std::string(to_string(c.theory.variant)); });

    add("data.dx", [](C& c, V v) { c.data.dx = non_negative(v); },
        [](const C& c) { return format_double(c.data.dx); });
    add("data.dy", [](C& c, V v) { c.data.dy = non_negative(v); },
        [](const C& c) { return format_double(c.data.dy); });
    add("data.blob_grid", [](C& c, V v) { c.data.blob_grid = positive_int(v); },
        [](const C& c) { return std::to_string(c.data.blob_grid); });
    add("data.blob_image", [](C& c, V v) { c.data.blob_image = positive_int(v); },
        [](const C& c) { return std::to_string(c.data.blob_image); });
    add("data.blob_variance", [](C& c, V v) { c.data.blob_variance = positive(v); },
        [](const C& c) { return format_double(c.data.blob_variance); });
    add("data.mnist_images", [](C& c, V v) { c.data.mnist_images = std::string(v); },
        [](const C& c) { return c.data.mnist_images; });
    add("data.mnist_labels", [](C& c, V v) { c.data.mnist_labels = std::string(v); },
        [](const C& c) { return c.data.mnist_labels; });
    add("data.mnist_count", [](C& c, V v) { c.data.mnist_count = to_unsigned(v); },
        [](const C& c) { return std::to_string(c.data.mnist_count); });
    add("data.structure_items",
        [](C& c, V v) { c.data.structure_items = static_cast<std::size_t>(positive_int(v)); },
        [](const C& c) { return std::to_string(c.data.structure_items); });

    add("sweep.gains",
        [](C& c, V v) {
          c.sweep.gains.clear();
          for (auto x : split_list(v)) c.sweep.gains.push_back(non_negative(x));
        },
        [](const C& c) { return join_doubles(c.sweep.gains); });
    add("sweep.learning_rates",
        [](C& c, V v) {
          c.sweep.learning_rates.clear();
          for (auto x : split_list(v)) c.sweep.learning_rates.push_back(non_negative(x));
        },
        [](const C& c) { return join_doubles(c.sweep.learning_rates); });
    add("sweep.dx",
        [](C& c, V v) {
          c.sweep.dx.clear();
          for (auto x : split_list(v)) c.sweep.dx.push_back(non_negative(x));
        },
        [](const C& c) { return join_doubles(c.sweep.dx); });
    add("sweep.dy",
        [](C& c, V v) {
          c.sweep.dy.clear();
          for (auto x : split_list(v)) c.sweep.dy.push_back(non_negative(x));
        },
        [](const C& c) { return join_doubles(c.sweep.dy); });
    add("sweep.hidden_indices",
        [](C& c, V v) {
          c.sweep.hidden_indices.clear();
          for (auto x : split_list(v)) c.sweep.hidden_indices.push_back(positive_int(x));
        },
        [](const C& c) {
          std::string s;
          for (std::size_t i = 0; i < c.sweep.hidden_indices.size(); ++i) {
            s += (i ? "," : "") + std::to_string(c.sweep.hidden_indices[i]);
          }
          return s;
        });

    add("fit.starts", [](C& c, V v) { c.fit.starts = positive_int(v); },
        [](const C& c) { return std::to_string(c.fit.starts); });
    add("fit.ybar", [](C& c, V v) { c.fit.ybar = to_bool(v); },
        [](const C& c) { return std::string(c.fit.ybar ? "true" : "false"); });
    return k;
  }();
  return table;
}

struct Line {
  int number;
  std::string key;
  std::string value;
};

std::vector<Line> tokenize(std::string_view text) {
  std::vector<Line> lines;
  int number = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++number;
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(number) + ": expected 'key = value'");
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(number) + ": missing key");
    lines.push_back({number, std::string(key), std::string(trim(line.substr(eq + 1)))});
  }
  return lines;
}

}  // namespace

std::string_view to_string(Experiment e) { return kExperimentNames[static_cast<int>(e)]; }

std::optional<Experiment> parse_experiment(std::string_view name) {
  for (std::size_t i = 0; i < std::size(kExperimentNames); ++i) {
    if (kExperimentNames[i] == name) return static_cast<Experiment>(i);
  }
  return std::nullopt;
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return serialize(a) == serialize(b);
}

void ExperimentConfig::validate() const {
  try {
    NetworkConfig net = network;
    net.validate();
    schedule.validate();
  } catch (const NetworkError& e) {
    throw ConfigError(e.what());
  }
  if (trials < 1) throw ConfigError("trials must be positive");
  if (workers < 1) throw ConfigError("workers must be positive");
  if (!sweep.learning_rates.empty() && sweep.learning_rates.size() != sweep.gains.size()) {
    throw ConfigError("sweep.learning_rates must be empty or match sweep.gains in length");
  }
  for (int h : sweep.hidden_indices) {
    if (h > network.hidden_layers) {
      throw ConfigError("sweep.hidden_indices must lie in [1, network.hidden_layers]");
    }
  }
  switch (experiment) {
    case Experiment::InitSweep:
      if (sweep.gains.empty()) throw ConfigError("InitSweep needs sweep.gains");
      break;
    case Experiment::GridSweep:
      if (sweep.dx.empty() || sweep.dy.empty()) throw ConfigError("GridSweep needs sweep.dx and sweep.dy");
      break;
    case Experiment::DepthSweep:
      if (sweep.hidden_indices.empty()) throw ConfigError("DepthSweep needs sweep.hidden_indices");
      break;
    case Experiment::Mnist:
      if (data.mnist_images.empty() || data.mnist_labels.empty()) {
        throw ConfigError("Mnist needs data.mnist_images and data.mnist_labels");
      }
      break;
    case Experiment::Simulate:
      if (!(theory.initial.dh2 > kSingularityFloor)) throw ConfigError("theory.dh2_0 too small");
      break;
    default:
      break;
  }
}

ExperimentConfig default_config(Experiment e) {
  ExperimentConfig c;
  c.experiment = e;
  c.seed = 1;
  c.network.hidden_layers = 8;
  c.network.units = 100;
  c.network.activation = Activation::LeakyReLU;
  c.network.init_gain = 0.8;
  c.schedule.learning_rate = 0.02;
  c.schedule.epochs = 6000;
  c.schedule.record_every = 1;
  switch (e) {
    case Experiment::Simulate:
      c.theory.inv_tau_h = 1e-3;
      c.theory.inv_tau_y = 1e-2;
      break;
    case Experiment::TwoPoint:
    case Experiment::Ablation:
      break;
    case Experiment::InitSweep:
      c.sweep.gains = {0.8, 2.0, 2.5};
      c.sweep.learning_rates = {0.02, 1e-4, 1e-5};
      c.schedule.record_every = 5;
      break;
    case Experiment::GridSweep:
      c.sweep.dx = {0.5, 0.75, 1.0, 1.25, 1.5};
      c.sweep.dy = {0.0, 0.25, 0.5, 0.75, 1.0};
      c.schedule.record_every = 10;
      break;
    case Experiment::Xor:
      c.network.hidden_layers = 20;
      c.schedule.epochs = 10000;
      c.schedule.record_every = 100;
      c.trials = 5;
      break;
    case Experiment::Blobs:
      c.network.hidden_layers = 4;
      c.network.activation = Activation::Tanh;
      c.network.init_gain = 0.15;
      c.schedule.learning_rate = 0.3;
      c.schedule.epochs = 20000;
      c.schedule.record_every = 100;
      c.data.blob_grid = 15;
      break;
    case Experiment::Mnist:
      c.network.hidden_layers = 4;
      c.network.init_gain = 0.5;
      c.schedule.learning_rate = 0.1;
      c.schedule.epochs = 2000;
      c.schedule.record_every = 10;
      c.trials = 5;
      c.fit.ybar = false;
      break;
    case Experiment::DepthSweep:
      c.network.hidden_layers = 12;
      c.network.init_gain = 1.0;
      c.schedule.learning_rate = 0.01;
      c.sweep.hidden_indices = {6, 7, 8, 9, 10, 11, 12};
      c.schedule.record_every = 5;
      break;
  }
  return c;
}

ExperimentConfig with_paper_scale(ExperimentConfig c) {
  c.paper_scale = true;
  // Learning rates are doubled relative to the published ones: the loss here
  // is half the mean squared error, so its gradient is half as large.
  switch (c.experiment) {
    case Experiment::Simulate:
      break;
    case Experiment::TwoPoint:
    case Experiment::Ablation:
    case Experiment::GridSweep:
      c.network.hidden_layers = 20;
      c.network.units = 500;
      c.network.init_gain = 1.0;
      c.schedule.learning_rate = 0.01;
      c.schedule.epochs = 6000;
      break;
    case Experiment::InitSweep:
      c.network.hidden_layers = 20;
      c.network.units = 500;
      c.sweep.gains = {0.9, 1.1, 1.3, 1.4};
      c.sweep.learning_rates = {0.03, 0.005, 0.0015, 0.0005};
      c.schedule.epochs = 6000;
      break;
    case Experiment::Xor:
      c.network.hidden_layers = 20;
      c.network.units = 500;
      c.network.init_gain = 0.7;
      c.schedule.learning_rate = 0.03;
      c.schedule.epochs = 1000;
      c.schedule.record_every = 10;
      break;
    case Experiment::Blobs:
      c.network.hidden_layers = 4;
      c.network.init_gain = 0.5;
      c.schedule.learning_rate = 0.03;
      c.schedule.epochs = 1500;
      c.data.blob_grid = 30;
      break;
    case Experiment::Mnist:
      c.network.hidden_layers = 4;
      c.network.units = 200;
      c.network.init_gain = 0.5;
      c.schedule.learning_rate = 0.01;
      c.schedule.epochs = 200;
      c.data.mnist_count = 0;
      c.trials = 50;
      break;
    case Experiment::DepthSweep:
      c.network.hidden_layers = 20;
      c.network.units = 500;
      c.network.init_gain = 1.0;
      c.schedule.learning_rate = 0.01;
      c.sweep.hidden_indices = {10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20};
      break;
  }
  c.network.hidden_index.reset();
  return c;
}

ExperimentConfig parse_config(std::string_view text) {
  const auto lines = tokenize(text);
  const auto& table = keys();

  std::optional<Experiment> experiment;
  for (const auto& line : lines) {
    if (line.key != "experiment") continue;
    if (experiment) throw ConfigError("line " + std::to_string(line.number) + ": duplicate key 'experiment'");
    experiment = parse_experiment(line.value);
    if (!experiment) {
      throw ConfigError("line " + std::to_string(line.number) + ": unknown experiment '" +
                        line.value + "'");
    }
  }
  if (!experiment) throw ConfigError("missing required key 'experiment'");

  ExperimentConfig config = default_config(*experiment);
  std::set<std::string> seen;
  for (const auto& line : lines) {
    const auto it = std::find_if(table.begin(), table.end(),
                                 [&](const auto& k) { return k.first == line.key; });
    const std::string where = "line " + std::to_string(line.number) + ": ";
    if (it == table.end()) throw ConfigError(where + "unknown key '" + line.key + "'");
    if (!seen.insert(line.key).second) throw ConfigError(where + "duplicate key '" + line.key + "'");
    try {
      it->second.set(config, line.value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + line.key + ": " + e.what());
    }
  }
  config.validate();
  return config;
}

std::string serialize(const ExperimentConfig& config) {
  std::ostringstream out;
  for (const auto& [name, key] : keys()) out << name << " = " << key.get(config) << '\n';
  return out.str();
}

}  // namespace reprdyn
