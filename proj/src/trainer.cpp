#include "vapf/trainer.hpp"

#include <cmath>
#include <thread>

#include "vapf/errors.hpp"
#include "vapf/rng.hpp"

namespace vapf {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr must be finite and >= 0");
  if (weight_decay < 0.0) throw ConfigError("train.weight_decay must be >= 0");
  if (threads == 0) throw ConfigError("threads must be >= 1");
}

std::set<std::string> build_freeze_mask(Strategy strategy, const ParameterStore& store) {
  std::set<std::string> frozen;
  if (strategy == Strategy::FT) return frozen;
  bool has_prompts = false;
  for (const auto& e : store.entries()) has_prompts = has_prompts || e.role == ParamRole::Prompt;
  if (!has_prompts) {
    throw ConfigError(std::string("strategy '") + to_string(strategy) +
                      "' requires prompts but the model has none");
  }
  for (const auto& e : store.entries()) {
    if (e.role == ParamRole::Backbone) frozen.insert(e.name);
  }
  return frozen;
}

namespace {

double sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

std::vector<std::vector<double>> snapshot_f32(const ParameterStore& store) {
  std::vector<std::vector<double>> out;
  for (const auto& e : store.entries()) {
    std::vector<double> v(e.tensor.data().begin(), e.tensor.data().end());
    for (auto& x : v) x = static_cast<double>(static_cast<float>(x));
    out.push_back(std::move(v));
  }
  return out;
}

void restore(ParameterStore& store, const std::vector<std::vector<double>>& snap) {
  for (std::size_t i = 0; i < snap.size(); ++i) {
    Tensor t = store.entries()[i].tensor;
    std::copy(snap[i].begin(), snap[i].end(), t.data().begin());
  }
}

}  // namespace

std::vector<double> predict(const VapFormer& model, const Dataset& data,
                            const std::vector<std::size_t>& indices, std::size_t threads) {
  std::vector<double> out(indices.size());
  auto work = [&](std::size_t begin, std::size_t stride) {
    NoGradGuard guard;
    for (std::size_t k = begin; k < indices.size(); k += stride) {
      const auto& s = data.samples[indices[k]];
      out[k] = sigmoid(model.forward(s.volume, s.record).item());
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, indices.size()));
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    for (auto& th : pool) th.join();
  }
  return out;
}

EvalResult evaluate(const VapFormer& model, const Dataset& data,
                    const std::vector<std::size_t>& indices, std::size_t threads) {
  EvalResult r;
  r.scores = predict(model, data, indices, threads);
  for (auto i : indices) r.labels.push_back(data.samples[i].label);
  return r;
}

FitReport fit(VapFormer& model, const Dataset& data, const SplitIndices& split,
              const TrainConfig& cfg) {
  cfg.validate();
  if (split.train.empty() || split.val.empty()) throw ConfigError("fit needs train and val samples");
  ParameterStore& store = model.params();
  AdamW opt({cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  ReduceLROnPlateau sched(cfg.lr, cfg.plateau);

  FitReport report;
  auto best = snapshot_f32(store);
  bool have_best = false;
  std::vector<std::size_t> order = split.train;
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(cfg.seed, 0x45504F43ULL + epoch);
    order = split.train;
    rng.shuffle(order.begin(), order.end());

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<Tensor> logits;
      std::vector<double> labels;
      for (std::size_t k = start; k < end; ++k) {
        const auto& s = data.samples[order[k]];
        logits.push_back(model.forward(s.volume, s.record));
        labels.push_back(static_cast<double>(s.label));
      }
      Tensor loss = ops::bce_with_logits(ops::concat(logits, 0), labels);
      const double lv = loss.item();
      if (!std::isfinite(lv)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batches));
      }
      loss.backward();
      opt.step(store);
      loss_sum += lv;
      ++batches;
      if (cfg.after_step) cfg.after_step(store, epoch, step);
      ++step;
    }

    const double val_auc = auc(evaluate(model, data, split.val, cfg.threads));
    report.history.push_back({loss_sum / static_cast<double>(batches), val_auc, opt.lr()});
    if (!have_best || val_auc > report.best_val_auc) {
      have_best = true;
      report.best_val_auc = val_auc;
      report.best_epoch = epoch;
      best = snapshot_f32(store);
    }
    opt.set_lr(sched.step(val_auc));
  }
  restore(store, best);
  return report;
}

ModelCheckpoint pretrain(VapFormer& model, const Dataset& data, const SplitIndices& split,
                         const TrainConfig& cfg, FitReport* report) {
  for (const auto& e : model.params().entries()) {
    if (e.role == ParamRole::Prompt || e.role == ParamRole::GlobalTransform) {
      throw ConfigError("pretraining expects the prompt-free model; found '" + e.name + "'");
    }
  }
  model.params().set_freeze_mask({});
  FitReport r = fit(model, data, split, cfg);
  const double val_auc = auc(evaluate(model, data, split.val, cfg.threads));
  nlohmann::json metrics = {{"val_auc", val_auc}, {"best_epoch", r.best_epoch}};
  nlohmann::json config = {{"model", model.config().to_json()},
                           {"stage", "pretrain"},
                           {"seed", cfg.seed},
                           {"epochs", cfg.epochs},
                           {"lr", cfg.lr}};
  if (report) *report = std::move(r);
  return ModelCheckpoint::capture(model.params(), std::move(config), std::move(metrics));
}

nlohmann::json to_json(const RunMetrics& m) {
  return {{"bacc", m.test.bacc},
          {"f1", m.test.f1},
          {"auc", m.test.auc},
          {"val_auc", m.val_auc},
          {"trainable_params", m.trainable_params},
          {"total_params", m.total_params}};
}

ModelCheckpoint finetune(VapFormer& model, const ModelCheckpoint& pretrained, const Dataset& data,
                         const SplitIndices& split, const TrainConfig& cfg, RunMetrics* metrics,
                         FitReport* report) {
  pretrained.load_into(model.params(), LoadPolicy::BackboneOnly);
  model.params().set_freeze_mask(build_freeze_mask(cfg.strategy, model.params()));
  FitReport r = fit(model, data, split, cfg);

  RunMetrics m;
  m.test = summarize(evaluate(model, data, split.test, cfg.threads));
  m.val_auc = auc(evaluate(model, data, split.val, cfg.threads));
  m.trainable_params = model.params().trainable_count();
  m.total_params = model.params().total_count();
  if (metrics) *metrics = m;
  if (report) *report = std::move(r);

  nlohmann::json config = {{"model", model.config().to_json()},
                           {"stage", "finetune"},
                           {"strategy", to_string(cfg.strategy)},
                           {"seed", cfg.seed},
                           {"epochs", cfg.epochs},
                           {"lr", cfg.lr}};
  return ModelCheckpoint::capture(model.params(), std::move(config), to_json(m));
}

}  // namespace vapf
