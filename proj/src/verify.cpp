#include "vapf/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <sstream>

#include "vapf/errors.hpp"
#include "vapf/reference.hpp"
#include "vapf/rng.hpp"

namespace vapf {

namespace {

constexpr PromptCounts kVerifyPrompts{4, 3};

bool same_bits(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

ExperimentConfig verification_experiment(std::size_t finetune_epochs, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.model = verification_model();
  cfg.data = verification_data();
  cfg.prompts = kVerifyPrompts;
  cfg.pretrain = {2, 8, 1e-3, 1e-5, 0.01};
  cfg.finetune = {finetune_epochs, 8, 1e-3, 1e-5, 0.01};
  cfg.seeds = {seed};
  return cfg;
}

}  // namespace

ModelConfig verification_model() {
  ModelConfig m;
  m.visual.volume = {8, 8, 8};
  m.visual.patch = 2;
  m.visual.widths = {8, 16};
  m.visual.blocks_per_stage = 1;
  m.visual.downsample = 2;
  m.visual.ffn_ratio = 2;
  m.tabular = {8, 2, 2, 16, 0};
  m.fusion = {16, 1, 2, 32, 8};
  return m;
}

SynthConfig verification_data() {
  SynthConfig d;
  d.volume = {8, 8, 8};
  d.n_train = 32;
  d.n_val = 16;
  d.n_test = 16;
  d.task_a.radius = 1.5;
  d.task_a.pos_offset = {0.0, 0.0, 2.0};
  d.perturbation.center_shift = {1.0, -1.0, 0.0};
  return d;
}

CheckResult check_gradients(double tolerance, std::uint64_t seed, std::size_t min_coords,
                            GradCheckResult* detail) {
  SynthConfig dc = verification_data();
  dc.seed = seed;
  const Dataset data = generate(dc, TaskId::A);
  VapFormer model(configure_for(Strategy::Vap, verification_model(), kVerifyPrompts), seed);
  std::vector<std::size_t> picks;
  for (std::size_t i = 0; i < data.samples.size() && picks.size() < 2; ++i) {
    if (picks.empty() || data.samples[i].label != data.samples[picks[0]].label) picks.push_back(i);
  }
  auto loss = [&](ParameterStore&) {
    std::vector<Tensor> logits;
    std::vector<double> labels;
    for (auto i : picks) {
      logits.push_back(model.forward(data.samples[i].volume, data.samples[i].record));
      labels.push_back(data.samples[i].label);
    }
    return ops::bce_with_logits(ops::concat(logits, 0), labels);
  };
  GradCheckOptions opts;
  opts.seed = seed;
  opts.coordinates = std::max(min_coords, 2 * model.params().size());
  const GradCheckResult r = grad_check(loss, model.params(), opts);
  if (detail) *detail = r;

  std::map<ParamRole, std::size_t> families;
  for (const auto& e : model.params().entries()) ++families[e.role];
  CheckResult out;
  out.name = "gradcheck";
  out.passed = r.max_rel_error < tolerance && families.size() == 4;
  out.detail = "max_rel_error=" + fmt(r.max_rel_error) + " at " + r.worst_name + "[" +
               std::to_string(r.worst_index) + "] over " + std::to_string(r.checked) +
               " coordinates in " + std::to_string(model.params().size()) + " tensors, tolerance " +
               fmt(tolerance);
  return out;
}

std::vector<std::string> frozen_mismatches(const ModelCheckpoint& pretrained,
                                           const ModelCheckpoint& finetuned) {
  std::vector<std::string> bad;
  for (const auto& name : finetuned.freeze_mask) {
    const auto* a = pretrained.find(name);
    const auto* b = finetuned.find(name);
    if (!a || !b || a->shape != b->shape ||
        std::memcmp(a->values.data(), b->values.data(), a->values.size() * sizeof(float)) != 0) {
      bad.push_back(name);
    }
  }
  return bad;
}

CheckResult check_freeze(std::size_t epochs, bool corrupt, std::uint64_t seed) {
  const ExperimentConfig cfg = verification_experiment(epochs, seed);
  const TaskData data = TaskData::generate(cfg.data);
  const ModelCheckpoint pre = ModelCheckpoint::deserialize(run_pretrain(cfg, data, nullptr).serialize());

  std::string corrupted;
  // Right after the first optimizer step, so every best-state snapshot carries it.
  auto hook = [&](ParameterStore& store, std::size_t, std::size_t) {
    if (!corrupt || !corrupted.empty()) return;
    corrupted = *store.freeze_mask().begin();
    Tensor t = store.get(corrupted);
    t[0] += 0.125;
  };
  FinetuneResult ft = run_finetune(cfg, pre, data, Strategy::Vap, seed, kVerifyPrompts, hook);
  const ModelCheckpoint saved = ModelCheckpoint::deserialize(ft.checkpoint.serialize());
  const auto bad = frozen_mismatches(pre, saved);

  std::size_t moved = 0;
  for (const auto& t : saved.tensors) {
    if (saved.freeze_mask.count(t.name)) continue;
    const auto* p = pre.find(t.name);
    if (!p || std::memcmp(p->values.data(), t.values.data(), t.values.size() * sizeof(float)) != 0) {
      ++moved;
    }
  }

  CheckResult out;
  out.name = corrupt ? "freeze(corrupted)" : "freeze";
  out.passed = bad.empty() && !saved.freeze_mask.empty() && moved > 0;
  out.detail = std::to_string(saved.freeze_mask.size()) + " frozen tensors after " +
               std::to_string(epochs) + " epochs, " + std::to_string(moved) +
               " trainable tensors updated";
  if (!bad.empty()) {
    out.detail += "; changed:";
    for (const auto& n : bad) out.detail += " " + n;
  }
  if (corrupt) out.detail += "; corrupted " + (corrupted.empty() ? std::string("nothing") : corrupted);
  return out;
}

namespace {

CheckResult metric_oracles() {
  CheckResult r{"metrics_exhaustive", true, ""};
  const double levels[] = {0.1, 0.5, 0.9};
  std::size_t instances = 0;
  for (std::size_t n = 1; n <= 6; ++n) {
    std::size_t score_combos = 1;
    for (std::size_t i = 0; i < n; ++i) score_combos *= 3;
    for (std::size_t lm = 0; lm < (std::size_t{1} << n); ++lm) {
      for (std::size_t sm = 0; sm < score_combos; ++sm) {
        EvalResult e;
        std::size_t code = sm;
        for (std::size_t i = 0; i < n; ++i) {
          e.labels.push_back(static_cast<int>((lm >> i) & 1U));
          e.scores.push_back(levels[code % 3]);
          code /= 3;
        }
        ++instances;
        const ConfusionCounts c = reference::count_confusion(e.scores, e.labels);
        const ConfusionCounts got = e.confusion();
        bool ok = c.tp == got.tp && c.fp == got.fp && c.tn == got.tn && c.fn == got.fn;
        const std::size_t pos = c.tp + c.fn, neg = c.tn + c.fp;
        if (pos > 0 && neg > 0) {
          const double want_bacc = 0.5 * (static_cast<double>(c.tp) / static_cast<double>(pos) +
                                          static_cast<double>(c.tn) / static_cast<double>(neg));
          ok = ok && bacc(e) == want_bacc;
          ok = ok && std::abs(auc(e) - reference::pairwise_auc(e.scores, e.labels)) <= 1e-12;
        } else {
          bool threw = false;
          try {
            (void)bacc(e);
          } catch (const MetricError&) {
            threw = true;
          }
          ok = ok && threw;
        }
        if (c.tp + c.fp + c.fn > 0) {
          const double want_f1 = static_cast<double>(c.tp) /
                                 (static_cast<double>(c.tp) + 0.5 * static_cast<double>(c.fp + c.fn));
          ok = ok && f1(e) == want_f1;
        }
        if (!ok && r.passed) {
          r.passed = false;
          r.detail = "first mismatch at n=" + std::to_string(n) + " labels=" + std::to_string(lm) +
                     " scores=" + std::to_string(sm) + "; ";
        }
      }
    }
  }
  r.detail += std::to_string(instances) + " instances";
  return r;
}

CheckResult auc_cross_check(std::uint64_t seed) {
  Rng rng(seed, 0x41554343ULL);
  double worst = 0.0;
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t n = 2 + rng.below(199);
    EvalResult e;
    const bool coarse = inst % 2 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      e.labels.push_back(static_cast<int>(rng.below(2)));
      e.scores.push_back(coarse ? static_cast<double>(rng.below(8)) / 8.0 : rng.uniform());
    }
    e.labels[0] = 0;
    e.labels[1] = 1;
    const double a = auc(e);
    worst = std::max({worst, std::abs(a - auc_trapezoid(e)),
                      std::abs(a - reference::pairwise_auc(e.scores, e.labels))});
  }
  return {"auc_pairwise_vs_trapezoid", worst <= 1e-12, "max |diff|=" + fmt(worst) + " over 100 instances"};
}

Tensor random_tokens(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t({rows, cols});
  for (auto& v : t.data()) v = rng.normal();
  return t;
}

std::vector<CheckResult> global_prompt_reductions(std::uint64_t seed) {
  NoGradGuard guard;
  const ModelConfig base = verification_model();
  VapFormer vap(configure_for(Strategy::Vap, base, kVerifyPrompts), seed);
  VapFormer vistab(configure_for(Strategy::VisTab, base, kVerifyPrompts), seed + 1);
  Rng rng(seed, 0x45513300ULL);

  bool g1 = true, g0 = true;
  for (const auto& stage : vap.visual().stages()) {
    for (std::size_t b = 0; b < stage.blocks.size(); ++b) {
      const auto& block = stage.blocks[b];
      const std::size_t c = block.ln1.gamma.size();
      const std::size_t p = stage.prompts[b]->spatial.dim(0) * 2;
      const Tensor x = random_tokens(stage.embed.pos.dim(0), c, rng);
      const Tensor plain = epa_prompt_forward(block, stage.prompts[b], std::nullopt, x);
      const GlobalPromptTransform one{Tensor({1, p}, 0.0), Tensor({c}, 1.0)};
      const GlobalPromptTransform zero{Tensor({1, p}, 0.0), Tensor({c}, 0.0)};
      g1 = g1 && same_bits(epa_prompt_forward(block, stage.prompts[b], one, x).data(), plain.data());
      const Tensor only_ffn = ops::add(x, block.ffn(block.ln2(x)));
      g0 = g0 && same_bits(epa_prompt_forward(block, stage.prompts[b], zero, x).data(),
                           only_ffn.data());
    }
  }

  // Whole model: VAP with g forced to 1 against Vis-TabPrompt sharing its weights.
  for (const auto& e : vistab.params().entries()) {
    Tensor dst = e.tensor;
    const Tensor& src = vap.params().get(e.name);
    std::copy(src.data().begin(), src.data().end(), dst.data().begin());
  }
  for (const auto& e : vap.params().entries()) {
    if (e.role != ParamRole::GlobalTransform) continue;
    Tensor t = e.tensor;
    const bool is_bias = e.name.size() >= 2 && e.name.compare(e.name.size() - 2, 2, ".b") == 0;
    std::fill(t.data().begin(), t.data().end(), is_bias ? 1.0 : 0.0);
  }
  SynthConfig dc = verification_data();
  dc.seed = seed;
  const Dataset data = generate(dc, TaskId::B);
  bool model_eq = true;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& s = data.samples[i];
    model_eq = model_eq && same_bits(vap.forward(s.volume, s.record).data(),
                                     vistab.forward(s.volume, s.record).data());
  }
  return {{"global_prompt_g1", g1 && model_eq,
           std::string("per-block ") + (g1 ? "identical" : "differs") + ", whole model " +
               (model_eq ? "identical" : "differs")},
          {"global_prompt_g0", g0, g0 ? "attention contribution vanishes" : "output differs"}};
}

std::vector<CheckResult> unprompted_equivalence(const ModelConfig& cfg, std::uint64_t seed) {
  NoGradGuard guard;
  VapFormer model(configure_for(Strategy::FT, cfg, {}), seed);
  SynthConfig dc;
  dc.volume = cfg.visual.volume;
  dc.n_train = 2;
  dc.n_val = 2;
  dc.n_test = 2;
  dc.seed = seed;
  const Dataset data = generate(dc, TaskId::A);
  bool vis = true, tab = true, full = true;
  for (const auto& s : data.samples) {
    const Tensor vt = s.volume.to_tensor();
    const std::vector<double> vol(vt.data().begin(), vt.data().end());
    const auto rv = reference::visual_encoder(model.params(), cfg.visual, vol);
    vis = vis && same_bits(model.visual()(vt).data(), rv.v);
    const auto rt = reference::attribute_encoder(model.params(), cfg.schema, cfg.tabular, s.record);
    tab = tab && same_bits(model.tabular()(s.record).data(), rt.v);
    const double want = reference::model_logit(model.params(), cfg, vol, s.record);
    const double got = model.forward(vt, s.record).item();
    full = full && std::memcmp(&want, &got, sizeof(double)) == 0;
  }
  const std::string n = std::to_string(data.samples.size()) + " samples";
  return {{"reference_visual_encoder", vis, n},
          {"reference_attribute_encoder", tab, n},
          {"reference_model", full, n}};
}

}  // namespace

std::vector<CheckResult> check_oracles(std::uint64_t seed) {
  std::vector<CheckResult> out{metric_oracles(), auc_cross_check(seed)};
  for (auto& r : global_prompt_reductions(seed)) out.push_back(std::move(r));
  for (auto& r : unprompted_equivalence(verification_model(), seed)) out.push_back(std::move(r));
  return out;
}

std::vector<CheckResult> run_verification(const VerifyOptions& opts, std::ostream* log) {
  const bool all = !opts.gradcheck && !opts.freeze && !opts.oracles;
  std::vector<CheckResult> results;
  auto record = [&](CheckResult r) {
    if (log) *log << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
    results.push_back(std::move(r));
  };
  if (all || opts.gradcheck) record(check_gradients(opts.tolerance, opts.seed));
  if (all || opts.freeze) record(check_freeze(opts.freeze_epochs, opts.corrupt_frozen, opts.seed));
  if (all || opts.oracles) {
    for (auto& r : check_oracles(opts.seed)) record(std::move(r));
  }
  return results;
}

}  // namespace vapf
