// Command-line driver for the conditional flow matching toolkit:
// data generation, training, posterior sampling, evaluation, and the
// overfitting study, all reproducible from a config file and a seed.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include <cfm/closed_form.hpp>
#include <cfm/config.hpp>
#include <cfm/io/csv.hpp>
#include <cfm/io/manifest.hpp>
#include <cfm/metrics/kde.hpp>
#include <cfm/metrics/sinkhorn.hpp>
#include <cfm/metrics/stats.hpp>
#include <cfm/problems/lorenz63.hpp>
#include <cfm/problems/spiral.hpp>
#include <cfm/problems/toy1d.hpp>
#include <cfm/sampler.hpp>
#include <cfm/training.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string checkpoint = "final";
  bool resume = false;
};

cfm::ExperimentConfig load_config(const CliOptions& opt) {
  cfm::ExperimentConfig cfg = cfm::parse_config(opt.config_path);
  if (opt.seed) {
    cfg.seed = *opt.seed;
    cfg.train.seed = *opt.seed;
  }
  if (!opt.out_dir.empty()) cfg.out_dir = opt.out_dir;
  return cfg;
}

std::string ckpt_name(long iteration) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "ckpt_%08ld.bin", iteration);
  return buf;
}

void write_effective_config(const cfm::ExperimentConfig& cfg,
                            cfm::RunManifest& manifest) {
  const fs::path p = fs::path(cfg.out_dir) / "effective_config.json";
  fs::create_directories(cfg.out_dir);
  std::ofstream f(p, std::ios::trunc);
  f << cfm::config_to_json(cfg).dump(2) << "\n";
  f.close();
  manifest.set_config(cfm::config_to_json(cfg));
  manifest.record(p);
}

// Per-purpose generator streams derived from the experiment seed, so
// commands are reproducible independently of each other.
cfm::Rng derived_rng(std::uint64_t seed, std::uint64_t stream) {
  return cfm::Rng(cfm::detail::splitmix64(seed ^ (0xcf4d00ULL + stream)));
}

// ---------------------------------------------------------------------------
// generate

void cmd_generate(const CliOptions& opt) {
  const auto cfg = load_config(opt);
  cfm::DirLock lock(cfg.out_dir);
  cfm::RunManifest manifest(cfg.out_dir);
  write_effective_config(cfg, manifest);

  const fs::path data_dir = fs::path(cfg.out_dir) / "data";
  cfm::Rng rng = derived_rng(cfg.seed, 1);
  json meta;
  meta["problem"] = to_string(cfg.problem);
  meta["seed"] = cfg.seed;

  switch (cfg.problem) {
    case cfm::Problem::toy1d: {
      cfm::Toy1dSpec spec;
      const auto train = cfm::toy1d_generate(cfg.data.n_train, spec, rng);
      const auto test = cfm::toy1d_generate(cfg.data.n_test, spec, rng);
      cfm::Mat pool(10000, 1);
      for (Eigen::Index i = 0; i < pool.rows(); ++i)
        pool(i, 0) = rng.uniform(-1.0, 1.0);
      cfm::write_paired_csv(data_dir / "train.csv", train);
      cfm::write_paired_csv(data_dir / "test.csv", test);
      cfm::write_matrix_csv(data_dir / "prior_pool.csv", pool, {"x0"});
      meta["noise_std"] = spec.noise_std;
      meta["n_train"] = cfg.data.n_train;
      meta["n_test"] = cfg.data.n_test;
      break;
    }
    case cfm::Problem::spiral: {
      cfm::SpiralSpec spec;
      const auto train = cfm::spiral_generate(cfg.data.n_train, spec, rng);
      const auto test = cfm::spiral_generate(cfg.data.n_test, spec, rng);
      const auto reference =
          cfm::spiral_generate(cfg.data.n_reference, spec, rng);
      const auto pool = cfm::spiral_generate(
          std::max(cfg.sample.n_samples, 20000), spec, rng);
      cfm::write_paired_csv(data_dir / "train.csv", train);
      cfm::write_paired_csv(data_dir / "test.csv", test);
      cfm::write_paired_csv(data_dir / "reference.csv", reference);
      cfm::write_matrix_csv(data_dir / "prior_pool.csv", pool.x, {"x0"});
      meta["scale"] = spec.scale;
      meta["n_train"] = cfg.data.n_train;
      meta["n_test"] = cfg.data.n_test;
      meta["n_reference"] = cfg.data.n_reference;
      meta["band"] = cfg.data.band;
      break;
    }
    case cfm::Problem::lorenz_da: {
      cfm::Lorenz63Spec spec;
      const auto da = cfm::build_da_problem(
          spec, cfg.data.n_reference, rng, /*assimilation_step=*/3,
          /*n_subsample=*/cfg.data.n_train + cfg.data.n_test,
          /*n_train=*/cfg.data.n_train);
      cfm::write_paired_csv(data_dir / "train.csv", da.train);
      cfm::write_paired_csv(data_dir / "test.csv", da.test);
      cfm::write_matrix_csv(data_dir / "reference_posterior.csv",
                            da.reference_posterior,
                            cfm::numbered_columns("x", 3));
      cfm::write_matrix_csv(data_dir / "prior_pool.csv", da.prior_pool,
                            cfm::numbered_columns("x", 3));
      json obs = json::array();
      for (double o : da.observations) obs.push_back(o);
      meta["y_hat"] = da.y_hat;
      meta["observations"] = obs;
      meta["n_particles"] = cfg.data.n_reference;
      meta["n_train"] = cfg.data.n_train;
      meta["n_test"] = cfg.data.n_test;
      break;
    }
    case cfm::Problem::external_csv:
      throw std::invalid_argument(
          "generate: external_csv data is supplied, not generated");
  }

  std::ofstream mf(data_dir / "meta.json", std::ios::trunc);
  mf << meta.dump(2) << "\n";
  mf.close();

  for (const auto& entry : fs::directory_iterator(data_dir))
    manifest.record(entry.path());
  manifest.save();
  std::cout << "generated datasets in " << data_dir.string() << "\n";
}

// ---------------------------------------------------------------------------
// shared data loading

struct LoadedData {
  cfm::PairedDataset train;
  cfm::PairedDataset test;
  cfm::Normalizer normalizer;
  json meta;
};

LoadedData load_datasets(const cfm::ExperimentConfig& cfg) {
  const fs::path data_dir = fs::path(cfg.out_dir) / "data";
  LoadedData d;
  if (cfg.problem == cfm::Problem::external_csv) {
    d.train = cfm::read_paired_csv(cfg.data.external_train);
    d.test = cfm::read_paired_csv(cfg.data.external_test);
  } else {
    d.train = cfm::read_paired_csv(data_dir / "train.csv");
    d.test = cfm::read_paired_csv(data_dir / "test.csv");
    std::ifstream mf(data_dir / "meta.json");
    if (mf) mf >> d.meta;
  }
  d.normalizer = cfm::Normalizer::fit(d.train);
  return d;
}

cfm::MlpConfig resolve_mlp_config(const cfm::ExperimentConfig& cfg,
                                  const LoadedData& data) {
  cfm::MlpConfig mlp = cfg.mlp;
  mlp.state_dim = static_cast<int>(data.train.dim_x());
  mlp.cond_dim = static_cast<int>(data.train.dim_y());
  return mlp;
}

// ---------------------------------------------------------------------------
// train

void cmd_train(const CliOptions& opt) {
  const auto cfg = load_config(opt);
  cfm::DirLock lock(cfg.out_dir);
  cfm::RunManifest manifest(cfg.out_dir);
  write_effective_config(cfg, manifest);

  const auto data = load_datasets(cfg);
  const cfm::MlpConfig mlp = resolve_mlp_config(cfg, data);
  const fs::path train_dir = fs::path(cfg.out_dir) / "train";
  const fs::path ckpt_dir = train_dir / "checkpoints";
  fs::create_directories(ckpt_dir);

  cfm::Trainer trainer(data.normalizer.apply(data.train),
                       data.normalizer.apply(data.test), cfg.train, mlp,
                       cfg.source);

  const fs::path loss_path = train_dir / "loss_history.csv";
  if (opt.resume) {
    long latest = -1;
    for (const auto& entry : fs::directory_iterator(ckpt_dir)) {
      const std::string name = entry.path().filename().string();
      long it = 0;
      if (std::sscanf(name.c_str(), "ckpt_%08ld.bin", &it) == 1)
        latest = std::max(latest, it);
    }
    if (latest < 0)
      throw cfm::NotFoundError("train --resume: no checkpoint found in " +
                               ckpt_dir.string());
    const auto ckpt = cfm::load_checkpoint(ckpt_dir / ckpt_name(latest));
    cfm::LossHistory h = cfm::read_loss_history_csv(loss_path);
    // Truncate the history to the checkpoint iteration.
    h.train_loss.resize(static_cast<std::size_t>(ckpt.iteration));
    while (!h.eval_iterations.empty() &&
           h.eval_iterations.back() > static_cast<long>(ckpt.iteration)) {
      h.eval_iterations.pop_back();
      h.test_loss.pop_back();
      h.test_loss_ma.pop_back();
    }
    trainer.restore(ckpt, std::move(h));
    std::cout << "resuming from iteration " << ckpt.iteration << "\n";
  }

  // Checkpoints are kept at every test evaluation for short runs, else
  // every checkpoint_stride iterations; the moving-average minimum and
  // saturation snapshots are tracked in memory and written at the end.
  const bool dense_ckpts = cfg.train.max_iterations <= 5000;
  std::optional<cfm::Checkpoint> ma_min_ckpt;
  double ma_min_value = std::numeric_limits<double>::infinity();
  std::optional<cfm::Checkpoint> saturation_ckpt;

  auto on_eval = [&](long iter, double /*test_loss*/, const cfm::Trainer& tr) {
    const auto& h = tr.history();
    const double ma = h.test_loss_ma.back();
    if (ma < ma_min_value) {
      ma_min_value = ma;
      ma_min_ckpt = tr.make_checkpoint();
    }
    if (!saturation_ckpt && h.test_loss_ma.size() > 10) {
      const double before = h.test_loss_ma[h.test_loss_ma.size() - 11];
      const double rel =
          (before - ma) / std::max(std::abs(before), 1e-300);
      if (rel < 1e-3) saturation_ckpt = tr.make_checkpoint();
    }
    if (dense_ckpts || iter % cfg.checkpoint_stride == 0)
      cfm::save_checkpoint(ckpt_dir / ckpt_name(iter), tr.make_checkpoint());
  };

  trainer.run(on_eval);

  const long final_iter = trainer.state().iteration;
  cfm::save_checkpoint(ckpt_dir / ckpt_name(final_iter),
                       trainer.make_checkpoint());
  if (ma_min_ckpt)
    cfm::save_checkpoint(
        ckpt_dir / ckpt_name(static_cast<long>(ma_min_ckpt->iteration)),
        *ma_min_ckpt);
  if (saturation_ckpt)
    cfm::save_checkpoint(
        ckpt_dir / ckpt_name(static_cast<long>(saturation_ckpt->iteration)),
        *saturation_ckpt);

  cfm::write_loss_history_csv(loss_path, trainer.history());

  json selected;
  selected["final"] = final_iter;
  if (ma_min_ckpt) selected["ma_minimum"] = ma_min_ckpt->iteration;
  if (saturation_ckpt) selected["ma_saturation"] = saturation_ckpt->iteration;
  std::ofstream sf(train_dir / "selected.json", std::ios::trunc);
  sf << selected.dump(2) << "\n";
  sf.close();

  manifest.record(loss_path);
  manifest.record(train_dir / "selected.json");
  for (const auto& entry : fs::directory_iterator(ckpt_dir))
    manifest.record(entry.path());
  manifest.save();
  std::cout << "trained " << final_iter << " iterations; checkpoints in "
            << ckpt_dir.string() << "\n";
}

// ---------------------------------------------------------------------------
// sample

long resolve_checkpoint_id(const std::string& spec_str,
                           const fs::path& train_dir) {
  if (spec_str == "final" || spec_str == "ma_minimum" ||
      spec_str == "ma_saturation") {
    std::ifstream sf(train_dir / "selected.json");
    if (!sf)
      throw cfm::NotFoundError("no selected.json under " + train_dir.string() +
                               "; run train first");
    json selected;
    sf >> selected;
    if (!selected.contains(spec_str))
      throw cfm::NotFoundError("selected.json has no entry '" + spec_str + "'");
    return selected[spec_str].get<long>();
  }
  try {
    return std::stol(spec_str);
  } catch (const std::exception&) {
    throw std::invalid_argument("--checkpoint expects an iteration number, "
                                "'final', 'ma_minimum', or 'ma_saturation'");
  }
}

std::vector<double> resolve_y_hats(const cfm::ExperimentConfig& cfg,
                                   const json& meta) {
  if (!cfg.sample.y_hat.empty()) return cfg.sample.y_hat;
  if (cfg.problem == cfm::Problem::lorenz_da && meta.contains("y_hat"))
    return {meta["y_hat"].get<double>()};
  throw std::invalid_argument("no y_hat values: set [sample] y_hat");
}

void cmd_sample(const CliOptions& opt) {
  const auto cfg = load_config(opt);
  cfm::DirLock lock(cfg.out_dir);
  cfm::RunManifest manifest(cfg.out_dir);
  write_effective_config(cfg, manifest);
  cfm::require(cfg.sample.n_samples >= 1, "sample: n_samples must be >= 1");

  const auto data = load_datasets(cfg);
  const fs::path train_dir = fs::path(cfg.out_dir) / "train";
  const long ckpt_id = resolve_checkpoint_id(opt.checkpoint, train_dir);
  const fs::path ckpt_path = train_dir / "checkpoints" / ckpt_name(ckpt_id);
  if (!fs::exists(ckpt_path))
    throw cfm::NotFoundError("missing checkpoint: " + ckpt_path.string());
  const cfm::Checkpoint ckpt = cfm::load_checkpoint(ckpt_path);

  cfm::VelocityModel model{ckpt.cfg,
                           ckpt.sample_with_ema ? ckpt.ema.shadow : ckpt.params};

  std::optional<cfm::Mat> pool;
  if (cfg.source == cfm::SourceKind::prior_scrambled) {
    const fs::path pool_path = fs::path(cfg.out_dir) / "data" / "prior_pool.csv";
    pool = cfm::read_matrix_csv(pool_path).values;
  }

  const auto y_hats = resolve_y_hats(cfg, data.meta);
  const fs::path sample_dir = fs::path(cfg.out_dir) / "samples";
  fs::create_directories(sample_dir);

  for (std::size_t k = 0; k < y_hats.size(); ++k) {
    cfm::Rng rng = derived_rng(cfg.seed, 100 + k);
    cfm::Vec y(1);
    cfm::Vec y_hat = cfm::Vec::Constant(model.cfg.cond_dim, y_hats[k]);
    const auto ens = cfm::sample_posterior(
        model, data.normalizer, y_hat, cfg.source,
        pool ? &*pool : nullptr, cfg.sample.n_samples, cfg.solver, rng);

    char tag[64];
    std::snprintf(tag, sizeof(tag), "ensemble_%s_y%zu",
                  cfm::to_string(cfg.source).c_str(), k);
    const fs::path csv = sample_dir / (std::string(tag) + ".csv");
    cfm::write_ensemble_csv(csv, ens);

    json summary;
    summary["y_hat"] = y_hats[k];
    summary["checkpoint_iteration"] = ckpt_id;
    summary["sampled_with_ema"] = ckpt.sample_with_ema;
    summary["source"] = cfm::to_string(cfg.source);
    summary["n_samples"] = cfg.sample.n_samples;
    summary["avg_n_steps"] = ens.avg_n_steps;
    summary["avg_path_length"] = ens.avg_path_length;
    summary["failed_samples"] = ens.failed_samples;
    summary["mean"] = std::vector<double>(ens.mean.data(),
                                          ens.mean.data() + ens.mean.size());
    summary["std"] = std::vector<double>(
        ens.stddev.data(), ens.stddev.data() + ens.stddev.size());
    const fs::path js = sample_dir / (std::string(tag) + ".json");
    std::ofstream jf(js, std::ios::trunc);
    jf << summary.dump(2) << "\n";
    jf.close();

    manifest.record(csv);
    manifest.record(js);
    std::cout << tag << ": avg_n_steps " << ens.avg_n_steps
              << ", avg_path_length " << ens.avg_path_length << "\n";
  }
  manifest.save();
}

// ---------------------------------------------------------------------------
// evaluate

void append_metric(const fs::path& metrics_path, cfm::RunManifest& manifest,
                   const std::string& name, const json& config, double value,
                   const std::string& dataset_a, const std::string& dataset_b) {
  json rec;
  rec["metric"] = name;
  rec["config"] = config;
  rec["value"] = value;
  rec["dataset_a"] = dataset_a;
  rec["dataset_b"] = dataset_b;
  cfm::append_jsonl(metrics_path, rec);
}

void write_kde_grid(const fs::path& path, const cfm::Vec& generated,
                    const cfm::Vec* reference) {
  double lo = generated.minCoeff(), hi = generated.maxCoeff();
  if (reference != nullptr) {
    lo = std::min(lo, reference->minCoeff());
    hi = std::max(hi, reference->maxCoeff());
  }
  const double pad = 0.1 * std::max(hi - lo, 1e-6);
  lo -= pad;
  hi += pad;
  cfm::Vec grid = cfm::Vec::LinSpaced(256, lo, hi);
  const auto kde_gen = cfm::kde_1d(generated, grid);
  cfm::Mat out(grid.size(), reference != nullptr ? 3 : 2);
  out.col(0) = grid;
  out.col(1) = kde_gen.density;
  std::vector<std::string> cols = {"x", "kde_generated"};
  if (reference != nullptr) {
    out.col(2) = cfm::kde_1d(*reference, grid).density;
    cols.push_back("kde_reference");
  }
  cfm::write_matrix_csv(path, out, cols);
}

void cmd_evaluate(const CliOptions& opt) {
  const auto cfg = load_config(opt);
  cfm::DirLock lock(cfg.out_dir);
  cfm::RunManifest manifest(cfg.out_dir);
  write_effective_config(cfg, manifest);

  const auto data = load_datasets(cfg);
  const fs::path sample_dir = fs::path(cfg.out_dir) / "samples";
  const fs::path metrics_dir = fs::path(cfg.out_dir) / "metrics";
  const fs::path metrics_path = metrics_dir / "metrics.jsonl";
  fs::create_directories(metrics_dir);
  if (fs::exists(metrics_path)) fs::remove(metrics_path);  // re-evaluate fresh

  const json sink_cfg = {{"epsilon", cfg.sinkhorn.epsilon},
                         {"max_iters", cfg.sinkhorn.max_iters},
                         {"tol", cfg.sinkhorn.convergence_tol},
                         {"cost", "squared_euclidean_normalized"}};

  // Reference data per problem.
  std::optional<cfm::PairedDataset> spiral_ref;
  std::optional<cfm::Mat> da_ref;
  const fs::path data_dir = fs::path(cfg.out_dir) / "data";
  if (cfg.problem == cfm::Problem::spiral)
    spiral_ref = cfm::read_paired_csv(data_dir / "reference.csv");
  if (cfg.problem == cfm::Problem::lorenz_da)
    da_ref = cfm::read_matrix_csv(data_dir / "reference_posterior.csv").values;
  if (cfg.problem == cfm::Problem::external_csv &&
      !cfg.data.external_reference.empty())
    da_ref = cfm::read_matrix_csv(cfg.data.external_reference).values;

  if (!fs::exists(sample_dir))
    throw cfm::NotFoundError("no samples directory under " + cfg.out_dir);

  std::vector<fs::path> ensembles;
  for (const auto& entry : fs::directory_iterator(sample_dir))
    if (entry.path().extension() == ".csv") ensembles.push_back(entry.path());
  std::sort(ensembles.begin(), ensembles.end());
  if (ensembles.empty())
    throw cfm::NotFoundError("no ensemble CSVs under " + sample_dir.string());

  double sinkhorn_sum = 0.0;
  int sinkhorn_count = 0;
  cfm::Rng baseline_rng = derived_rng(cfg.seed, 777);

  for (const auto& path : ensembles) {
    const cfm::CsvTable table = cfm::read_matrix_csv(path);
    const cfm::Mat& gen = table.values;
    const std::string id = path.stem().string();

    double y_hat = 0.0;
    for (const auto& c : table.comments) {
      const auto pos = c.find("y_hat=");
      if (pos != std::string::npos) y_hat = std::strtod(c.c_str() + pos + 6, nullptr);
    }

    const auto stats = cfm::ensemble_stats(gen);
    for (Eigen::Index j = 0; j < stats.mean.size(); ++j) {
      append_metric(metrics_path, manifest,
                    "posterior_mean_dim" + std::to_string(j), json::object(),
                    stats.mean(j), id, "");
      append_metric(metrics_path, manifest,
                    "posterior_std_dim" + std::to_string(j), json::object(),
                    stats.stddev(j), id, "");
    }

    if (cfg.problem == cfm::Problem::spiral) {
      const cfm::Vec ref_x =
          cfm::spiral_reference_conditional(*spiral_ref, y_hat, cfg.data.band);
      // Distances in normalized coordinates, per the metric convention.
      const cfm::Mat gen_n = data.normalizer.apply_x(gen);
      const cfm::Mat ref_n = data.normalizer.apply_x(ref_x);
      const auto sd = cfm::sinkhorn_distance({gen_n, ref_n}, cfg.sinkhorn);
      append_metric(metrics_path, manifest, "sinkhorn_distance", sink_cfg,
                    sd.value, id, "reference_band");
      sinkhorn_sum += sd.value;
      ++sinkhorn_count;

      const Eigen::Index subset =
          std::min<Eigen::Index>(1000, ref_n.rows() / 2);
      const double baseline = cfm::self_distance_baseline(
          ref_n, subset, 4, cfg.sinkhorn, baseline_rng);
      append_metric(metrics_path, manifest, "self_distance_baseline",
                    sink_cfg, baseline, "reference_band", "reference_band");

      write_kde_grid(metrics_dir / ("kde_" + id + ".csv"), gen.col(0), &ref_x);
    } else if (da_ref) {
      const cfm::Mat gen_n = data.normalizer.apply_x(gen);
      const cfm::Mat ref_n = data.normalizer.apply_x(*da_ref);
      const auto sd = cfm::sinkhorn_distance({gen_n, ref_n}, cfg.sinkhorn);
      append_metric(metrics_path, manifest, "sinkhorn_distance", sink_cfg,
                    sd.value, id, "reference_posterior");
      sinkhorn_sum += sd.value;
      ++sinkhorn_count;

      const Eigen::Index subset =
          std::min<Eigen::Index>(500, ref_n.rows() / 2);
      const double baseline = cfm::self_distance_baseline(
          ref_n, subset, 4, cfg.sinkhorn, baseline_rng);
      append_metric(metrics_path, manifest, "self_distance_baseline",
                    sink_cfg, baseline, "reference_posterior",
                    "reference_posterior");

      for (Eigen::Index jdim = 0; jdim < gen.cols(); ++jdim) {
        cfm::Vec ref_col = da_ref->col(jdim);
        cfm::Vec gen_col = gen.col(jdim);
        write_kde_grid(metrics_dir / ("kde_" + id + "_dim" +
                                      std::to_string(jdim) + ".csv"),
                       gen_col, &ref_col);
      }
    } else if (cfg.problem == cfm::Problem::toy1d) {
      // Analytic truncated-normal reference.
      cfm::Vec grid = cfm::Vec::LinSpaced(256, -1.2, 1.2);
      const auto kde = cfm::kde_1d(gen.col(0), grid);
      cfm::Mat out(grid.size(), 3);
      out.col(0) = grid;
      out.col(1) = kde.density;
      for (Eigen::Index i = 0; i < grid.size(); ++i)
        out(i, 2) = cfm::toy1d_posterior_pdf(grid(i), y_hat);
      cfm::write_matrix_csv(metrics_dir / ("kde_" + id + ".csv"), out,
                            {"x", "kde_generated", "true_pdf"});
    } else {
      write_kde_grid(metrics_dir / ("kde_" + id + ".csv"), gen.col(0),
                     nullptr);
    }
  }

  if (sinkhorn_count > 0) {
    append_metric(metrics_path, manifest, "sinkhorn_distance_avg", sink_cfg,
                  sinkhorn_sum / sinkhorn_count, "all_ensembles", "reference");
  }

  manifest.record(metrics_path);
  for (const auto& entry : fs::directory_iterator(metrics_dir))
    manifest.record(entry.path());
  manifest.save();
  std::cout << "metrics written to " << metrics_path.string() << "\n";
}

// ---------------------------------------------------------------------------
// overfit-study

void cmd_overfit_study(const CliOptions& opt) {
  const auto cfg = load_config(opt);
  cfm::require(cfg.problem == cfm::Problem::toy1d,
          "overfit-study: config must use problem = toy1d");
  cfm::DirLock lock(cfg.out_dir);
  cfm::RunManifest manifest(cfg.out_dir);
  write_effective_config(cfg, manifest);

  // Generate the toy data in place when missing, mirroring cmd_generate.
  const fs::path data_dir = fs::path(cfg.out_dir) / "data";
  if (!fs::exists(data_dir / "train.csv")) {
    cfm::Rng rng = derived_rng(cfg.seed, 1);
    cfm::Toy1dSpec spec;
    cfm::write_paired_csv(data_dir / "train.csv",
                          cfm::toy1d_generate(cfg.data.n_train, spec, rng));
    cfm::write_paired_csv(data_dir / "test.csv",
                          cfm::toy1d_generate(cfg.data.n_test, spec, rng));
  }
  const auto data = load_datasets(cfg);
  const cfm::MlpConfig mlp = resolve_mlp_config(cfg, data);

  const std::vector<long> schedule = {1000, 3000, 15000, 50000};
  std::map<long, cfm::Vec> snapshots;  // raw weights per the study protocol
  cfm::Vec ma_min_params;
  long ma_min_iter = 0;
  double ma_min_value = std::numeric_limits<double>::infinity();

  cfm::TrainConfig tcfg = cfg.train;
  tcfg.max_iterations = std::max<long>(tcfg.max_iterations, schedule.back());

  cfm::Trainer trainer(data.normalizer.apply(data.train),
                       data.normalizer.apply(data.test), tcfg, mlp,
                       cfg.source);
  auto on_eval = [&](long iter, double /*tl*/, const cfm::Trainer& tr) {
    const double ma = tr.history().test_loss_ma.back();
    if (ma < ma_min_value) {
      ma_min_value = ma;
      ma_min_iter = iter;
      ma_min_params = tr.state().params;
    }
    if (std::find(schedule.begin(), schedule.end(), iter) != schedule.end())
      snapshots[iter] = tr.state().params;
  };
  trainer.run(on_eval);
  snapshots[-1] = ma_min_params;  // key -1 marks the MA-minimum snapshot

  const fs::path study_dir = fs::path(cfg.out_dir) / "study";
  fs::create_directories(study_dir);

  const auto sample_at = [&](const cfm::Vec& params, double y_hat, int m,
                             std::uint64_t stream) {
    cfm::VelocityModel model{mlp, params};
    cfm::Rng rng = derived_rng(cfg.seed, stream);
    cfm::Vec y = cfm::Vec::Constant(1, y_hat);
    return cfm::sample_posterior(model, data.normalizer, y,
                                 cfm::SourceKind::gaussian, nullptr, m,
                                 cfg.solver, rng);
  };

  // KDE comparison at y_hat = 0.6 across the checkpoint schedule.
  const double y_star = 0.6;
  cfm::Vec grid = cfm::Vec::LinSpaced(256, -1.5, 1.5);
  cfm::Mat kde_out(grid.size(), 2 + static_cast<Eigen::Index>(schedule.size()) + 1);
  kde_out.col(0) = grid;
  for (Eigen::Index i = 0; i < grid.size(); ++i)
    kde_out(i, 1) = cfm::toy1d_posterior_pdf(grid(i), y_star);
  std::vector<std::string> kde_cols = {"x", "true_pdf"};
  json summary;
  summary["ma_min_iteration"] = ma_min_iter;
  summary["schedule"] = schedule;

  int col = 2;
  std::uint64_t stream = 300;
  for (long iter : schedule) {
    const auto ens =
        sample_at(snapshots.at(iter), y_star, cfg.sample.n_samples, stream++);
    kde_out.col(col) = cfm::kde_1d(ens.samples.col(0), grid).density;
    kde_cols.push_back("kde_iter" + std::to_string(iter));
    summary["std_yhat0.6_iter" + std::to_string(iter)] = ens.stddev(0);
    ++col;
  }
  {
    const auto ens =
        sample_at(snapshots.at(-1), y_star, cfg.sample.n_samples, stream++);
    kde_out.col(col) = cfm::kde_1d(ens.samples.col(0), grid).density;
    kde_cols.push_back("kde_ma_min");
    summary["std_yhat0.6_ma_min"] = ens.stddev(0);
  }
  cfm::write_matrix_csv(study_dir / "kde_yhat0.6.csv", kde_out, kde_cols);

  // Mean/std sweep over 100 conditioning values per checkpoint.
  const cfm::Vec sweep = cfm::Vec::LinSpaced(100, -1.0, 1.0);
  for (long iter : schedule) {
    cfm::Mat out(sweep.size(), 3);
    for (Eigen::Index i = 0; i < sweep.size(); ++i) {
      const auto ens = sample_at(snapshots.at(iter), sweep(i), 500,
                                 1000 + 100 * iter / 1000 + i);
      out(i, 0) = sweep(i);
      out(i, 1) = ens.mean(0);
      out(i, 2) = ens.stddev(0);
    }
    cfm::write_matrix_csv(
        study_dir / ("posterior_sweep_iter" + std::to_string(iter) + ".csv"),
        out, {"y_hat", "mean", "std"});
  }

  std::ofstream sf(study_dir / "summary.json", std::ios::trunc);
  sf << summary.dump(2) << "\n";
  sf.close();

  cfm::write_loss_history_csv(study_dir / "loss_history.csv",
                              trainer.history());

  for (const auto& entry : fs::directory_iterator(study_dir))
    manifest.record(entry.path());
  manifest.save();
  std::cout << "overfit study written to " << study_dir.string()
            << " (MA minimum at iteration " << ma_min_iter << ")\n";
}

// ---------------------------------------------------------------------------
// report

void cmd_report(const CliOptions& opt) {
  const auto cfg = load_config(opt);
  const fs::path manifest_path = fs::path(cfg.out_dir) / "manifest.json";
  if (!fs::exists(manifest_path))
    throw cfm::NotFoundError("no manifest under " + cfg.out_dir);
  json manifest;
  std::ifstream mf(manifest_path);
  mf >> manifest;

  std::cout << "experiment: " << cfg.out_dir << "\n";
  if (manifest.contains("config"))
    std::cout << "problem: " << manifest["config"]["experiment"]["problem"]
              << ", source: " << manifest["config"]["experiment"]["source"]
              << ", seed: " << manifest["config"]["experiment"]["seed"]
              << "\n";
  std::cout << "files: " << manifest["files"].size() << "\n";

  const fs::path metrics_path = fs::path(cfg.out_dir) / "metrics" / "metrics.jsonl";
  if (fs::exists(metrics_path)) {
    std::cout << "\nmetrics:\n";
    std::ifstream f(metrics_path);
    std::string line;
    while (std::getline(f, line)) {
      const json rec = json::parse(line);
      std::printf("  %-28s %12.6g  %s\n",
                  rec["metric"].get<std::string>().c_str(),
                  rec["value"].get<double>(),
                  rec["dataset_a"].get<std::string>().c_str());
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conditional flow matching toolkit"};
  app.require_subcommand(1);

  CliOptions opt;
  const auto add_common = [&](CLI::App* cmd, bool needs_config = true) {
    auto* c = cmd->add_option("--config", opt.config_path, "config file path");
    if (needs_config) c->required();
    cmd->add_option("--seed", [&opt](const CLI::results_t& res) {
      opt.seed = std::stoull(res[0]);
      return true;
    }, "seed override");
    cmd->add_option("--out", opt.out_dir, "output directory override");
  };

  auto* gen = app.add_subcommand("generate", "generate problem datasets");
  add_common(gen);
  auto* train = app.add_subcommand("train", "train the velocity network");
  add_common(train);
  train->add_flag("--resume", opt.resume, "resume from the latest checkpoint");
  auto* sample = app.add_subcommand("sample", "sample the posterior");
  add_common(sample);
  sample->add_option("--checkpoint", opt.checkpoint,
                     "iteration number, 'final', 'ma_minimum', or "
                     "'ma_saturation'");
  auto* evaluate = app.add_subcommand("evaluate", "evaluate ensembles");
  add_common(evaluate);
  auto* study = app.add_subcommand("overfit-study",
                                   "run the small-data overfitting study");
  add_common(study);
  auto* report = app.add_subcommand("report", "summarize an experiment");
  add_common(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) cmd_generate(opt);
    if (train->parsed()) cmd_train(opt);
    if (sample->parsed()) cmd_sample(opt);
    if (evaluate->parsed()) cmd_evaluate(opt);
    if (study->parsed()) cmd_overfit_study(opt);
    if (report->parsed()) cmd_report(opt);
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const cfm::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 3;
  } catch (const cfm::NotFoundError& e) {
    std::cerr << "not found: " << e.what() << "\n";
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
