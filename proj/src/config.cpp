#include "vapf/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "vapf/json_util.hpp"

namespace vapf {

namespace {

nlohmann::json stage_json(const StageConfig& s) {
  return {{"epochs", s.epochs},
          {"batch_size", s.batch_size},
          {"lr", s.lr},
          {"reference_lr", s.reference_lr},
          {"weight_decay", s.weight_decay}};
}

void read_stage(const nlohmann::json& j, const std::string& path, StageConfig& s) {
  StrictObject o(j, path);
  o.read("epochs", s.epochs);
  o.read("batch_size", s.batch_size);
  o.read("lr", s.lr);
  o.read("reference_lr", s.reference_lr);
  o.read("weight_decay", s.weight_decay);
  o.finish();
  if (s.batch_size == 0) throw ConfigError(path + ".batch_size must be >= 1");
  if (!(s.lr >= 0.0)) throw ConfigError(path + ".lr must be >= 0");
}

}  // namespace

nlohmann::json ExperimentConfig::to_json() const {
  return {{"model", model.to_json()},
          {"prompts", {{"visual", prompts.visual}, {"tabular", prompts.tabular}}},
          {"data", data.to_json()},
          {"pretrain", stage_json(pretrain)},
          {"finetune", stage_json(finetune)},
          {"scheduler",
           {{"factor", scheduler.factor},
            {"patience", scheduler.patience},
            {"floor", scheduler.floor},
            {"min_delta", scheduler.min_delta}}},
          {"seeds", seeds},
          {"out", out},
          {"gradcheck_tolerance", gradcheck_tolerance}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  StrictObject o(j, "");
  if (auto* m = o.object("model")) c.model = ModelConfig::from_json(*m);
  if (auto* p = o.object("prompts")) {
    StrictObject po(*p, "prompts");
    po.read("visual", c.prompts.visual);
    po.read("tabular", c.prompts.tabular);
    po.finish();
  }
  if (auto* d = o.object("data")) c.data = SynthConfig::from_json(*d);
  if (auto* s = o.object("pretrain")) read_stage(*s, "pretrain", c.pretrain);
  if (auto* s = o.object("finetune")) read_stage(*s, "finetune", c.finetune);
  if (auto* s = o.object("scheduler")) {
    StrictObject so(*s, "scheduler");
    so.read("factor", c.scheduler.factor);
    so.read("patience", c.scheduler.patience);
    so.read("floor", c.scheduler.floor);
    so.read("min_delta", c.scheduler.min_delta);
    so.finish();
  }
  o.read("seeds", c.seeds);
  o.read("out", c.out);
  o.read("gradcheck_tolerance", c.gradcheck_tolerance);
  o.finish();

  if (c.data.volume != c.model.visual.volume) {
    throw ConfigError("data.volume must equal model.visual.volume");
  }
  if (c.prompts.visual % 2 != 0) throw ConfigError("prompts.visual must be even");
  if (c.seeds.empty()) throw ConfigError("seeds must not be empty");
  if (!(c.gradcheck_tolerance > 0.0)) throw ConfigError("gradcheck_tolerance must be positive");
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

std::size_t threads_from_env() {
  const char* v = std::getenv("VAPF_THREADS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1) return 1;
  return static_cast<std::size_t>(n);
}

}  // namespace vapf
