// vapf: data generation, training, sweeps and verification.

#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "vapf/config.hpp"
#include "vapf/errors.hpp"
#include "vapf/experiment.hpp"
#include "vapf/verify.hpp"

namespace fs = std::filesystem;
using namespace vapf;

namespace {

enum Exit { kOk = 0, kConfig = 2, kIo = 3, kNumeric = 4, kVerify = 5 };

struct Common {
  std::string config;
  std::string data;
  std::string out;
};

ExperimentConfig load_config(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : ExperimentConfig::load(c.config);
  if (!c.out.empty()) cfg.out = c.out;
  return cfg;
}

TaskData load_data(const Common& c, const ExperimentConfig& cfg) {
  if (c.data.empty()) return TaskData::generate(cfg.data);
  TaskData d = TaskData::load(c.data);
  if (d.a.samples.front().volume.dims != cfg.model.visual.volume) {
    throw ConfigError("dataset volume shape does not match model.visual.volume");
  }
  return d;
}

fs::path checkpoint_dir(const ExperimentConfig& cfg) { return fs::path(cfg.out) / "checkpoints"; }

void add_common(CLI::App* sub, Common& c, bool with_data = true) {
  sub->add_option("--config", c.config, "experiment JSON (defaults used when omitted)");
  if (with_data) sub->add_option("--data", c.data, "gen-data directory (generated in memory when omitted)");
  sub->add_option("--out", c.out, "output directory (overrides config.out)");
}

ModelCheckpoint load_pretrained(const std::string& flag, const ExperimentConfig& cfg) {
  const fs::path p = flag.empty() ? checkpoint_dir(cfg) / "pretrain.ckpt" : fs::path(flag);
  return ModelCheckpoint::load(p);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Visual-attribute prompt learning toolkit"};
  app.require_subcommand(1);

  Common gen, pre, fin, ev, base, sw;

  auto* gen_cmd = app.add_subcommand("gen-data", "write synthetic tasks A and B");
  add_common(gen_cmd, gen, false);

  auto* pre_cmd = app.add_subcommand("pretrain", "train the prompt-free model on task A");
  add_common(pre_cmd, pre);

  std::string strategy = "pt";
  std::uint64_t seed = 0;
  std::string pretrained;
  auto* fin_cmd = app.add_subcommand("finetune", "fine-tune on task B");
  add_common(fin_cmd, fin);
  fin_cmd->add_option("--strategy", strategy, "ft|pt|vis|tab|vistab")
      ->check(CLI::IsMember({"ft", "pt", "vis", "tab", "vistab"}));
  fin_cmd->add_option("--seed", seed, "fine-tuning seed");
  fin_cmd->add_option("--pretrained", pretrained, "pretrained checkpoint (default <out>/checkpoints/pretrain.ckpt)");

  std::string ev_ckpt;
  std::string ev_task = "B";
  auto* ev_cmd = app.add_subcommand("evaluate", "test-split metrics of a checkpoint as JSON");
  add_common(ev_cmd, ev);
  ev_cmd->add_option("--checkpoint", ev_ckpt, "checkpoint file")->required();
  ev_cmd->add_option("--task", ev_task, "A or B")->check(CLI::IsMember({"A", "B"}));

  auto* base_cmd = app.add_subcommand("baselines", "unimodal logistic baselines on task B");
  add_common(base_cmd, base);

  std::string axis;
  std::vector<std::size_t> counts;
  std::vector<std::uint64_t> sweep_seeds;
  std::string sweep_pretrained;
  auto* sw_cmd = app.add_subcommand("sweep", "prompt-count sweep for VAP and Vis-TabPrompt");
  add_common(sw_cmd, sw);
  sw_cmd->add_option("--prompt-axis", axis, "visual|tabular")->required();
  sw_cmd->add_option("--counts", counts, "prompt counts")->required()->delimiter(',');
  sw_cmd->add_option("--seeds", sweep_seeds, "seeds (default: config seeds)")->delimiter(',');
  sw_cmd->add_option("--pretrained", sweep_pretrained, "pretrained checkpoint");

  VerifyOptions vopts;
  auto* ver_cmd = app.add_subcommand("verify", "run the invariant suite");
  ver_cmd->add_flag("--gradcheck", vopts.gradcheck, "finite-difference gradient check");
  ver_cmd->add_flag("--freeze", vopts.freeze, "frozen-parameter bit-exactness");
  ver_cmd->add_flag("--oracles", vopts.oracles, "metric and reference oracles");
  ver_cmd->add_option("--tolerance", vopts.tolerance, "gradcheck tolerance")->check(CLI::PositiveNumber);
  ver_cmd->add_option("--epochs", vopts.freeze_epochs, "prompt-tuning epochs for the freeze check");
  ver_cmd->add_option("--seed", vopts.seed, "seed");
  ver_cmd->add_flag("--corrupt-frozen", vopts.corrupt_frozen, "perturb a frozen tensor mid-run (test hook)");

  std::string vf_pre, vf_ckpt;
  Common vf;
  auto* vf_cmd = app.add_subcommand("verify-freeze", "compare a fine-tuned checkpoint's frozen tensors to its source");
  add_common(vf_cmd, vf, false);
  vf_cmd->add_option("--pretrained", vf_pre, "pretrained checkpoint (default <out>/checkpoints/pretrain.ckpt)");
  vf_cmd->add_option("--checkpoint", vf_ckpt, "fine-tuned checkpoint (default <out>/checkpoints/pt-s0.ckpt)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    if (*gen_cmd) {
      ExperimentConfig cfg = load_config(gen);
      const auto manifest = write_dataset(cfg.data, cfg.out);
      std::cout << "wrote " << (fs::path(cfg.out) / "manifest.json").string() << " ("
                << manifest["tasks"].size() << " tasks)\n";
    } else if (*pre_cmd) {
      ExperimentConfig cfg = load_config(pre);
      const TaskData data = load_data(pre, cfg);
      MetricsRow row;
      const ModelCheckpoint ckpt = run_pretrain(cfg, data, &row);
      ckpt.save(checkpoint_dir(cfg) / "pretrain.ckpt");
      upsert_metrics_csv(fs::path(cfg.out) / "metrics.csv", {row});
      std::cout << row.run_id << " auc=" << format_double(row.auc) << '\n';
    } else if (*fin_cmd) {
      ExperimentConfig cfg = load_config(fin);
      const TaskData data = load_data(fin, cfg);
      const ModelCheckpoint pre_ckpt = load_pretrained(pretrained, cfg);
      const FinetuneResult r =
          run_finetune(cfg, pre_ckpt, data, parse_strategy(strategy), seed, cfg.prompts);
      r.checkpoint.save(checkpoint_dir(cfg) / (r.row.run_id + ".ckpt"));
      upsert_metrics_csv(fs::path(cfg.out) / "metrics.csv", {r.row});
      std::cout << r.row.run_id << " auc=" << format_double(r.row.auc)
                << " trainable=" << r.row.trainable_params << "/" << r.row.total_params << '\n';
    } else if (*ev_cmd) {
      ExperimentConfig cfg = load_config(ev);
      const TaskData data = load_data(ev, cfg);
      const ModelCheckpoint ckpt = ModelCheckpoint::load(ev_ckpt);
      if (!ckpt.config.contains("model")) throw CheckpointError("checkpoint carries no model config");
      VapFormer model(ModelConfig::from_json(ckpt.config["model"]), 0);
      ckpt.load_into(model.params());
      const bool a = ev_task == "A";
      const MetricSummary m = summarize(evaluate(model, a ? data.a : data.b,
                                                 a ? data.split_a.test : data.split_b.test,
                                                 threads_from_env()));
      std::cout << nlohmann::json{{"task", ev_task}, {"bacc", m.bacc}, {"f1", m.f1}, {"auc", m.auc}}.dump()
                << '\n';
    } else if (*base_cmd) {
      ExperimentConfig cfg = load_config(base);
      const TaskData data = load_data(base, cfg);
      const auto rows = baseline_rows(data);
      upsert_metrics_csv(fs::path(cfg.out) / "metrics.csv", rows);
      for (const auto& r : rows) std::cout << r.run_id << " auc=" << format_double(r.auc) << '\n';
    } else if (*sw_cmd) {
      const SweepAxis ax = parse_axis(axis);
      ExperimentConfig cfg = load_config(sw);
      const TaskData data = load_data(sw, cfg);
      const ModelCheckpoint pre_ckpt = load_pretrained(sweep_pretrained, cfg);
      const auto rows =
          run_sweep(cfg, pre_ckpt, data, ax, counts, sweep_seeds.empty() ? cfg.seeds : sweep_seeds);
      write_sweep_csv(fs::path(cfg.out) / "sweep.csv", rows);
      write_text(fs::path(cfg.out) / "sweep.svg", sweep_svg(rows));
      std::cout << rows.size() << " sweep rows\n";
    } else if (*ver_cmd) {
      const auto results = run_verification(vopts, &std::cout);
      std::vector<std::string> failed;
      for (const auto& r : results)
        if (!r.passed) failed.push_back(r.name);
      if (!failed.empty()) {
        std::cerr << "verification failed:";
        for (const auto& n : failed) std::cerr << ' ' << n;
        std::cerr << '\n';
        return kVerify;
      }
    } else if (*vf_cmd) {
      ExperimentConfig cfg = load_config(vf);
      const ModelCheckpoint p = load_pretrained(vf_pre, cfg);
      const ModelCheckpoint f =
          ModelCheckpoint::load(vf_ckpt.empty() ? checkpoint_dir(cfg) / "pt-s0.ckpt" : fs::path(vf_ckpt));
      if (f.freeze_mask.empty()) throw VerificationError("checkpoint has no frozen tensors");
      const auto bad = frozen_mismatches(p, f);
      if (!bad.empty()) {
        std::cerr << "frozen tensors changed:";
        for (const auto& n : bad) std::cerr << ' ' << n;
        std::cerr << '\n';
        return kVerify;
      }
      std::cout << "PASS " << f.freeze_mask.size() << " frozen tensors unchanged\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const VerificationError& e) {
    std::cerr << "verification error: " << e.what() << '\n';
    return kVerify;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kIo;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIo;
  }
  return kOk;
}
