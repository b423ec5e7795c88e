#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <cfm/checkpoint.hpp>
#include <cfm/common.hpp>
#include <cfm/dataset.hpp>
#include <cfm/mlp.hpp>
#include <cfm/optim.hpp>
#include <cfm/rng.hpp>

namespace cfm {

class NotFoundError : public std::runtime_error {
 public:
  explicit NotFoundError(const std::string& what) : std::runtime_error(what) {}
};

struct TrainConfig {
  double lr = 1e-3;
  int batch_size = 1000;
  long max_iterations = 100000;
  double ema_decay = 0.9999;
  int test_eval_stride = 100;
  int ma_window = 500;
  std::uint64_t seed = 0;
  bool sample_with_ema = true;  // recorded in checkpoints

  void validate() const {
    require(lr > 0.0 && batch_size >= 1 && max_iterations >= 1 &&
                ema_decay > 0.0 && ema_decay < 1.0 && test_eval_stride >= 1 &&
                ma_window >= 1,
            "TrainConfig: all fields must be positive (ema_decay in (0,1))");
  }
};

struct LossHistory {
  std::vector<double> train_loss;      // one entry per iteration
  std::vector<long> eval_iterations;   // strictly increasing
  std::vector<double> test_loss;       // one entry per evaluation
  std::vector<double> test_loss_ma;    // trailing mean over evaluations
};

// Trailing mean over the last min(window, position + 1) entries.
inline std::vector<double> moving_average(const std::vector<double>& series,
                                          int window) {
  require(window >= 1, "moving_average: window must be >= 1");
  std::vector<double> out(series.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    acc += series[i];
    if (i >= static_cast<std::size_t>(window)) acc -= series[i - window];
    const auto n = std::min<std::size_t>(window, i + 1);
    out[i] = acc / static_cast<double>(n);
  }
  return out;
}

struct CheckpointStrategy {
  enum class Kind { ma_minimum, ma_saturation, fixed } kind = Kind::ma_minimum;
  long fixed_iteration = 0;

  static CheckpointStrategy ma_minimum() { return {Kind::ma_minimum, 0}; }
  static CheckpointStrategy ma_saturation() { return {Kind::ma_saturation, 0}; }
  static CheckpointStrategy fixed(long iter) { return {Kind::fixed, iter}; }
};

// Picks the evaluation iteration a sampling checkpoint should come from.
// ma_saturation uses the earliest evaluation whose moving average dropped
// by less than a relative 1e-3 over the trailing 10 evaluations.
inline long select_checkpoint(const LossHistory& history,
                              const CheckpointStrategy& strategy) {
  require(!history.eval_iterations.empty(),
          "select_checkpoint: empty history");
  switch (strategy.kind) {
    case CheckpointStrategy::Kind::ma_minimum: {
      std::size_t best = 0;
      for (std::size_t i = 1; i < history.test_loss_ma.size(); ++i)
        if (history.test_loss_ma[i] < history.test_loss_ma[best]) best = i;
      return history.eval_iterations[best];
    }
    case CheckpointStrategy::Kind::ma_saturation: {
      constexpr int kTrail = 10;
      constexpr double kRelThreshold = 1e-3;
      for (std::size_t i = kTrail; i < history.test_loss_ma.size(); ++i) {
        const double before = history.test_loss_ma[i - kTrail];
        const double now = history.test_loss_ma[i];
        const double rel_drop =
            (before - now) / std::max(std::abs(before), 1e-300);
        if (rel_drop < kRelThreshold) return history.eval_iterations[i];
      }
      return history.eval_iterations.back();
    }
    case CheckpointStrategy::Kind::fixed: {
      for (long it : history.eval_iterations)
        if (it == strategy.fixed_iteration) return it;
      throw NotFoundError("select_checkpoint: no evaluation at iteration " +
                          std::to_string(strategy.fixed_iteration));
    }
  }
  throw std::logic_error("select_checkpoint: unreachable");
}

struct TrainState {
  Vec params;
  OptimState opt;
  EmaState ema;
  long iteration = 0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

// Runs the conditional flow-matching loop over normalized data. Owns the
// generator streams so a run can be checkpointed and resumed bit-exactly:
// the training stream lives in the checkpoint, while each test evaluation
// derives a fresh stream from (seed, iteration) and holds no state.
class Trainer {
 public:
  using EvalCallback =
      std::function<void(long iteration, double test_loss, const Trainer&)>;

  Trainer(PairedDataset train, PairedDataset test, TrainConfig cfg,
          MlpConfig mlp, SourceKind source)
      : train_(std::move(train)),
        test_(std::move(test)),
        cfg_(cfg),
        mlp_(mlp),
        source_(source),
        rng_(cfg.seed) {
    cfg_.validate();
    mlp_.validate();
    require(train_.dim_x() == mlp_.state_dim &&
                train_.dim_y() == mlp_.cond_dim,
            "Trainer: dataset dimensions do not match the network config");
    require(source_ != SourceKind::prior_scrambled || cfg_.batch_size >= 2,
            "Trainer: prior_scrambled needs batch_size >= 2");
    state_.params = init_params(mlp_, rng_);
    state_.opt = OptimState::create(state_.params.size(), cfg_.lr);
    state_.ema = EmaState::create(state_.params, cfg_.ema_decay);
    state_.iteration = 0;
  }

  void restore(const Checkpoint& ckpt, LossHistory history) {
    require(ckpt.cfg == mlp_, "Trainer::restore: config mismatch");
    state_.params = ckpt.params;
    state_.opt = ckpt.opt;
    state_.ema = ckpt.ema;
    state_.iteration = static_cast<long>(ckpt.iteration);
    rng_.load_state(ckpt.rng_state);
    history_ = std::move(history);
    ma_acc_ = 0.0;
    const std::size_t count = history_.test_loss.size();
    const auto n = std::min<std::size_t>(cfg_.ma_window, count);
    for (std::size_t i = count - n; i < count; ++i)
      ma_acc_ += history_.test_loss[i];
  }

  // Advances to cfg.max_iterations (or `until`, if smaller).
  void run(const EvalCallback& on_eval = nullptr, long until = -1) {
    const long stop =
        until < 0 ? cfg_.max_iterations : std::min(until, cfg_.max_iterations);
    const Eigen::Index n = train_.size();
    const int b = cfg_.batch_size;

    TrainBatch batch;
    batch.x.resize(b, train_.dim_x());
    batch.y.resize(b, train_.dim_y());
    batch.t.resize(b);

    while (state_.iteration < stop) {
      // Draw order per iteration: row indices, then source, then times.
      for (int r = 0; r < b; ++r) {
        const auto idx = static_cast<Eigen::Index>(rng_.index(n));
        batch.x.row(r) = train_.x.row(idx);
        batch.y.row(r) = train_.y.row(idx);
      }
      batch.z = sample_source_batch(source_, batch.x, rng_);
      for (int r = 0; r < b; ++r) batch.t(r) = rng_.uniform01();

      const LossGrad lg = mlp_loss_and_grad(mlp_, state_.params, batch);
      if (!std::isfinite(lg.loss))
        throw NumericError("training diverged: non-finite loss at iteration " +
                           std::to_string(state_.iteration + 1));
      adam_step(state_.params, state_.opt, lg.grad);
      ema_update(state_.ema, state_.params);
      ++state_.iteration;
      history_.train_loss.push_back(lg.loss);

      if (state_.iteration % cfg_.test_eval_stride == 0) {
        const double tl = evaluate_test_loss(state_.iteration);
        history_.eval_iterations.push_back(state_.iteration);
        history_.test_loss.push_back(tl);
        append_ma(tl);
        if (on_eval) on_eval(state_.iteration, tl, *this);
      }
    }
  }

  // Test loss over the full test split with EMA weights and a fresh
  // (z, t) draw derived from (seed, iteration) only.
  double evaluate_test_loss(long iteration) const {
    Rng eval_rng(detail::splitmix64(cfg_.seed ^
                                    static_cast<std::uint64_t>(iteration)));
    TrainBatch batch;
    batch.x = test_.x;
    batch.y = test_.y;
    batch.z = sample_source_batch(source_, batch.x, eval_rng);
    batch.t.resize(test_.size());
    for (Eigen::Index r = 0; r < batch.t.size(); ++r)
      batch.t(r) = eval_rng.uniform01();

    Mat xi(batch.z.rows(), batch.z.cols());
    for (Eigen::Index r = 0; r < xi.rows(); ++r)
      xi.row(r) =
          (1.0 - batch.t(r)) * batch.z.row(r) + batch.t(r) * batch.x.row(r);
    const Mat out =
        mlp_forward(mlp_, state_.ema.shadow, xi, batch.y, batch.t);
    return (out - (batch.x - batch.z)).squaredNorm() /
           static_cast<double>(test_.size());
  }

  Checkpoint make_checkpoint() const {
    Checkpoint c;
    c.cfg = mlp_;
    c.params = state_.params;
    c.opt = state_.opt;
    c.ema = state_.ema;
    c.iteration = static_cast<std::uint64_t>(state_.iteration);
    c.sample_with_ema = cfg_.sample_with_ema;
    c.rng_state = rng_.save_state();
    return c;
  }

  const TrainState& state() const { return state_; }
  const LossHistory& history() const { return history_; }
  const TrainConfig& train_config() const { return cfg_; }
  const MlpConfig& mlp_config() const { return mlp_; }
  SourceKind source() const { return source_; }

 private:
  void append_ma(double tl) {
    ma_acc_ += tl;
    const std::size_t count = history_.test_loss.size();
    if (count > static_cast<std::size_t>(cfg_.ma_window))
      ma_acc_ -= history_.test_loss[count - 1 - cfg_.ma_window];
    const auto n = std::min<std::size_t>(cfg_.ma_window, count);
    history_.test_loss_ma.push_back(ma_acc_ / static_cast<double>(n));
  }

  PairedDataset train_;
  PairedDataset test_;
  TrainConfig cfg_;
  MlpConfig mlp_;
  SourceKind source_;
  Rng rng_;
  TrainState state_;
  LossHistory history_;
  double ma_acc_ = 0.0;
};

// One-call variant of the loop above.
inline std::pair<TrainState, LossHistory> train_cfm(
    const PairedDataset& train, const PairedDataset& test,
    const TrainConfig& cfg, const MlpConfig& mlp, SourceKind source,
    const Trainer::EvalCallback& on_eval = nullptr) {
  Trainer tr(train, test, cfg, mlp, source);
  tr.run(on_eval);
  return {tr.state(), tr.history()};
}

}  // namespace cfm
