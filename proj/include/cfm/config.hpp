#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include <cfm/common.hpp>
#include <cfm/dataset.hpp>
#include <cfm/metrics/sinkhorn.hpp>
#include <cfm/mlp.hpp>
#include <cfm/ode.hpp>
#include <cfm/training.hpp>

namespace cfm {

enum class Problem { toy1d, spiral, lorenz_da, external_csv };

inline std::string to_string(Problem p) {
  switch (p) {
    case Problem::toy1d: return "toy1d";
    case Problem::spiral: return "spiral";
    case Problem::lorenz_da: return "lorenz_da";
    case Problem::external_csv: return "external_csv";
  }
  return "?";
}

inline Problem problem_from_string(const std::string& s) {
  if (s == "toy1d") return Problem::toy1d;
  if (s == "spiral") return Problem::spiral;
  if (s == "lorenz_da") return Problem::lorenz_da;
  if (s == "external_csv") return Problem::external_csv;
  throw std::invalid_argument("unknown problem: " + s);
}

struct DataConfig {
  int n_train = 0;       // 0 means problem default
  int n_test = 0;
  int n_reference = 0;   // spiral reference pool / SIR ensemble size
  double band = 0.1;     // total band width for the spiral reference
  std::string external_train;
  std::string external_test;
  std::string external_reference;
};

struct SampleConfig {
  int n_samples = 0;            // 0 means problem default
  std::vector<double> y_hat;    // empty means problem default
};

struct ExperimentConfig {
  Problem problem = Problem::spiral;
  SourceKind source = SourceKind::gaussian;
  std::uint64_t seed = 0;
  std::string out_dir = "runs/out";
  int checkpoint_stride = 1000;

  DataConfig data;
  MlpConfig mlp;
  TrainConfig train;
  SolverConfig solver;
  SinkhornConfig sinkhorn;
  SampleConfig sample;
};

namespace detail {

struct RawConfig {
  // (section, key) -> (value, line number)
  std::map<std::pair<std::string, std::string>, std::pair<std::string, int>>
      entries;

  bool has(const std::string& sec, const std::string& key) const {
    return entries.count({sec, key}) > 0;
  }

  std::string take(std::set<std::pair<std::string, std::string>>& unused,
                   const std::string& sec, const std::string& key) const {
    unused.erase({sec, key});
    return entries.at({sec, key}).first;
  }
};

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline RawConfig parse_raw(std::istream& in, const std::string& origin) {
  RawConfig raw;
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                    ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                  ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                  ": empty key");
    if (!raw.entries.emplace(std::make_pair(section, key),
                             std::make_pair(value, line_no))
             .second)
      throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                  ": duplicate key '" + key + "'");
  }
  return raw;
}

inline double to_double(const std::string& v, const std::string& key) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (end != v.c_str() + v.size() || v.empty())
    throw std::invalid_argument("key '" + key + "': expected a number, got '" +
                                v + "'");
  return d;
}

inline long to_long(const std::string& v, const std::string& key) {
  char* end = nullptr;
  const long l = std::strtol(v.c_str(), &end, 10);
  if (end != v.c_str() + v.size() || v.empty())
    throw std::invalid_argument("key '" + key + "': expected an integer, got '" +
                                v + "'");
  return l;
}

inline bool to_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("key '" + key + "': expected true/false, got '" +
                              v + "'");
}

inline std::vector<double> to_double_list(const std::string& v,
                                          const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(trim(item), key));
  if (out.empty())
    throw std::invalid_argument("key '" + key + "': expected a list");
  return out;
}

}  // namespace detail

// Per-problem defaults: network and training hyper-parameters for the
// built-in benchmarks, plus data sizes and sampling protocol.
inline void apply_problem_defaults(ExperimentConfig& cfg) {
  switch (cfg.problem) {
    case Problem::spiral:
      cfg.mlp = {1, 1, 32, 3, Activation::relu};
      cfg.train.lr = 1e-3;
      cfg.train.batch_size = 1000;
      cfg.train.max_iterations = 100000;
      cfg.train.ema_decay = 0.9999;
      cfg.train.test_eval_stride = 100;
      cfg.train.ma_window = 500;
      cfg.train.sample_with_ema = true;
      cfg.data.n_train = 800;
      cfg.data.n_test = 200;
      cfg.data.n_reference = 100000;
      cfg.sample.n_samples = 10000;
      cfg.sample.y_hat = {-0.5, 0.0, 0.5, 1.0};
      break;
    case Problem::lorenz_da:
      cfg.mlp = {3, 1, 256, 4, Activation::relu};
      cfg.train.lr = 1e-3;
      cfg.train.batch_size = 500;
      cfg.train.max_iterations = 100000;
      cfg.train.ema_decay = 0.9;
      cfg.train.test_eval_stride = 100;
      cfg.train.ma_window = 500;
      cfg.train.sample_with_ema = true;
      cfg.data.n_train = 1000;
      cfg.data.n_test = 500;
      cfg.data.n_reference = 100000;
      cfg.sample.n_samples = 500;
      break;
    case Problem::toy1d:
      cfg.mlp = {1, 1, 32, 3, Activation::swish};
      cfg.train.lr = 1e-3;
      cfg.train.batch_size = 5;
      cfg.train.max_iterations = 50000;
      cfg.train.ema_decay = 0.9;
      cfg.train.test_eval_stride = 1;
      cfg.train.ma_window = 500;
      cfg.train.sample_with_ema = false;  // raw weights for the toy study
      cfg.data.n_train = 5;
      cfg.data.n_test = 1000;
      cfg.sample.n_samples = 1000;
      cfg.sample.y_hat = {0.6};
      break;
    case Problem::external_csv:
      cfg.sample.n_samples = 1000;
      break;
  }
}

// Strict parse of a flat-section key/value config. Unknown keys, duplicate
// keys, and type mismatches are rejected with the key name and line.
inline ExperimentConfig parse_config_stream(std::istream& in,
                                            const std::string& origin) {
  using detail::to_bool;
  using detail::to_double;
  using detail::to_double_list;
  using detail::to_long;

  const detail::RawConfig raw = detail::parse_raw(in, origin);
  std::set<std::pair<std::string, std::string>> unused;
  for (const auto& [k, v] : raw.entries) unused.insert(k);

  ExperimentConfig cfg;
  if (!raw.has("experiment", "problem"))
    throw std::invalid_argument(origin +
                                ": missing required key 'problem' in "
                                "[experiment]");
  if (!raw.has("experiment", "seed"))
    throw std::invalid_argument(origin +
                                ": missing required key 'seed' in "
                                "[experiment]");
  cfg.problem =
      problem_from_string(raw.take(unused, "experiment", "problem"));
  apply_problem_defaults(cfg);
  cfg.seed = static_cast<std::uint64_t>(
      to_long(raw.take(unused, "experiment", "seed"), "seed"));
  cfg.train.seed = cfg.seed;

  const auto opt = [&](const std::string& sec, const std::string& key,
                       auto&& apply) {
    if (raw.has(sec, key)) apply(raw.take(unused, sec, key));
  };

  opt("experiment", "source",
      [&](const std::string& v) { cfg.source = source_kind_from_string(v); });
  opt("experiment", "out_dir",
      [&](const std::string& v) { cfg.out_dir = v; });
  opt("experiment", "checkpoint_stride", [&](const std::string& v) {
    cfg.checkpoint_stride = static_cast<int>(to_long(v, "checkpoint_stride"));
  });

  opt("data", "n_train", [&](const std::string& v) {
    cfg.data.n_train = static_cast<int>(to_long(v, "n_train"));
  });
  opt("data", "n_test", [&](const std::string& v) {
    cfg.data.n_test = static_cast<int>(to_long(v, "n_test"));
  });
  opt("data", "n_reference", [&](const std::string& v) {
    cfg.data.n_reference = static_cast<int>(to_long(v, "n_reference"));
  });
  opt("data", "band",
      [&](const std::string& v) { cfg.data.band = to_double(v, "band"); });
  opt("data", "external_train",
      [&](const std::string& v) { cfg.data.external_train = v; });
  opt("data", "external_test",
      [&](const std::string& v) { cfg.data.external_test = v; });
  opt("data", "external_reference",
      [&](const std::string& v) { cfg.data.external_reference = v; });

  opt("mlp", "state_dim", [&](const std::string& v) {
    cfg.mlp.state_dim = static_cast<int>(to_long(v, "state_dim"));
  });
  opt("mlp", "cond_dim", [&](const std::string& v) {
    cfg.mlp.cond_dim = static_cast<int>(to_long(v, "cond_dim"));
  });
  opt("mlp", "hidden_width", [&](const std::string& v) {
    cfg.mlp.hidden_width = static_cast<int>(to_long(v, "hidden_width"));
  });
  opt("mlp", "hidden_layers", [&](const std::string& v) {
    cfg.mlp.hidden_layers = static_cast<int>(to_long(v, "hidden_layers"));
  });
  opt("mlp", "activation", [&](const std::string& v) {
    cfg.mlp.activation = activation_from_string(v);
  });

  opt("train", "lr",
      [&](const std::string& v) { cfg.train.lr = to_double(v, "lr"); });
  opt("train", "batch_size", [&](const std::string& v) {
    cfg.train.batch_size = static_cast<int>(to_long(v, "batch_size"));
  });
  opt("train", "max_iterations", [&](const std::string& v) {
    cfg.train.max_iterations = to_long(v, "max_iterations");
  });
  opt("train", "ema_decay", [&](const std::string& v) {
    cfg.train.ema_decay = to_double(v, "ema_decay");
  });
  opt("train", "test_eval_stride", [&](const std::string& v) {
    cfg.train.test_eval_stride = static_cast<int>(to_long(v, "test_eval_stride"));
  });
  opt("train", "ma_window", [&](const std::string& v) {
    cfg.train.ma_window = static_cast<int>(to_long(v, "ma_window"));
  });
  opt("train", "sample_with_ema", [&](const std::string& v) {
    cfg.train.sample_with_ema = to_bool(v, "sample_with_ema");
  });

  opt("solver", "rtol",
      [&](const std::string& v) { cfg.solver.rtol = to_double(v, "rtol"); });
  opt("solver", "atol",
      [&](const std::string& v) { cfg.solver.atol = to_double(v, "atol"); });
  opt("solver", "t_end",
      [&](const std::string& v) { cfg.solver.t_end = to_double(v, "t_end"); });
  opt("solver", "max_steps", [&](const std::string& v) {
    cfg.solver.max_steps = static_cast<int>(to_long(v, "max_steps"));
  });

  opt("sinkhorn", "epsilon", [&](const std::string& v) {
    cfg.sinkhorn.epsilon = to_double(v, "epsilon");
  });
  opt("sinkhorn", "max_iters", [&](const std::string& v) {
    cfg.sinkhorn.max_iters = static_cast<int>(to_long(v, "max_iters"));
  });
  opt("sinkhorn", "tol", [&](const std::string& v) {
    cfg.sinkhorn.convergence_tol = to_double(v, "tol");
  });

  opt("sample", "n_samples", [&](const std::string& v) {
    cfg.sample.n_samples = static_cast<int>(to_long(v, "n_samples"));
  });
  opt("sample", "y_hat", [&](const std::string& v) {
    cfg.sample.y_hat = to_double_list(v, "y_hat");
  });

  if (!unused.empty()) {
    const auto& [sec, key] = *unused.begin();
    const int line = raw.entries.at(*unused.begin()).second;
    throw std::invalid_argument(origin + ":" + std::to_string(line) +
                                ": unknown key '" + key + "' in [" + sec +
                                "]");
  }

  if (cfg.problem == Problem::external_csv) {
    if (cfg.data.external_train.empty() || cfg.data.external_test.empty())
      throw std::invalid_argument(
          origin + ": external_csv requires external_train and external_test");
  }
  cfg.train.validate();
  cfg.mlp.validate();
  cfg.solver.validate();
  cfg.sinkhorn.validate();
  return cfg;
}

inline ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config: " + path.string());
  return parse_config_stream(f, path.string());
}

inline std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  os << "[experiment]\n";
  os << "problem = " << to_string(cfg.problem) << "\n";
  os << "source = " << to_string(cfg.source) << "\n";
  os << "seed = " << cfg.seed << "\n";
  os << "out_dir = " << cfg.out_dir << "\n";
  os << "checkpoint_stride = " << cfg.checkpoint_stride << "\n\n";
  os << "[data]\n";
  os << "n_train = " << cfg.data.n_train << "\n";
  os << "n_test = " << cfg.data.n_test << "\n";
  os << "n_reference = " << cfg.data.n_reference << "\n";
  os << "band = " << cfg.data.band << "\n";
  if (!cfg.data.external_train.empty())
    os << "external_train = " << cfg.data.external_train << "\n";
  if (!cfg.data.external_test.empty())
    os << "external_test = " << cfg.data.external_test << "\n";
  if (!cfg.data.external_reference.empty())
    os << "external_reference = " << cfg.data.external_reference << "\n";
  os << "\n[mlp]\n";
  os << "state_dim = " << cfg.mlp.state_dim << "\n";
  os << "cond_dim = " << cfg.mlp.cond_dim << "\n";
  os << "hidden_width = " << cfg.mlp.hidden_width << "\n";
  os << "hidden_layers = " << cfg.mlp.hidden_layers << "\n";
  os << "activation = " << to_string(cfg.mlp.activation) << "\n";
  os << "\n[train]\n";
  os << "lr = " << cfg.train.lr << "\n";
  os << "batch_size = " << cfg.train.batch_size << "\n";
  os << "max_iterations = " << cfg.train.max_iterations << "\n";
  os << "ema_decay = " << cfg.train.ema_decay << "\n";
  os << "test_eval_stride = " << cfg.train.test_eval_stride << "\n";
  os << "ma_window = " << cfg.train.ma_window << "\n";
  os << "sample_with_ema = " << (cfg.train.sample_with_ema ? "true" : "false")
     << "\n";
  os << "\n[solver]\n";
  os << "rtol = " << cfg.solver.rtol << "\n";
  os << "atol = " << cfg.solver.atol << "\n";
  os << "t_end = " << cfg.solver.t_end << "\n";
  os << "max_steps = " << cfg.solver.max_steps << "\n";
  os << "\n[sinkhorn]\n";
  os << "epsilon = " << cfg.sinkhorn.epsilon << "\n";
  os << "max_iters = " << cfg.sinkhorn.max_iters << "\n";
  os << "tol = " << cfg.sinkhorn.convergence_tol << "\n";
  os << "\n[sample]\n";
  os << "n_samples = " << cfg.sample.n_samples << "\n";
  if (!cfg.sample.y_hat.empty()) {
    os << "y_hat = ";
    for (std::size_t i = 0; i < cfg.sample.y_hat.size(); ++i)
      os << (i ? ", " : "") << cfg.sample.y_hat[i];
    os << "\n";
  }
  return os.str();
}

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["experiment"] = {{"problem", to_string(cfg.problem)},
                     {"source", to_string(cfg.source)},
                     {"seed", cfg.seed},
                     {"out_dir", cfg.out_dir},
                     {"checkpoint_stride", cfg.checkpoint_stride}};
  j["data"] = {{"n_train", cfg.data.n_train},
               {"n_test", cfg.data.n_test},
               {"n_reference", cfg.data.n_reference},
               {"band", cfg.data.band},
               {"external_train", cfg.data.external_train},
               {"external_test", cfg.data.external_test},
               {"external_reference", cfg.data.external_reference}};
  j["mlp"] = {{"state_dim", cfg.mlp.state_dim},
              {"cond_dim", cfg.mlp.cond_dim},
              {"hidden_width", cfg.mlp.hidden_width},
              {"hidden_layers", cfg.mlp.hidden_layers},
              {"activation", to_string(cfg.mlp.activation)}};
  j["train"] = {{"lr", cfg.train.lr},
                {"batch_size", cfg.train.batch_size},
                {"max_iterations", cfg.train.max_iterations},
                {"ema_decay", cfg.train.ema_decay},
                {"test_eval_stride", cfg.train.test_eval_stride},
                {"ma_window", cfg.train.ma_window},
                {"sample_with_ema", cfg.train.sample_with_ema}};
  j["solver"] = {{"rtol", cfg.solver.rtol},
                 {"atol", cfg.solver.atol},
                 {"t_end", cfg.solver.t_end},
                 {"max_steps", cfg.solver.max_steps}};
  j["sinkhorn"] = {{"epsilon", cfg.sinkhorn.epsilon},
                   {"max_iters", cfg.sinkhorn.max_iters},
                   {"tol", cfg.sinkhorn.convergence_tol}};
  j["sample"] = {{"n_samples", cfg.sample.n_samples},
                 {"y_hat", cfg.sample.y_hat}};
  return j;
}

}  // namespace cfm
