#include "vapf/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "vapf/errors.hpp"

namespace vapf {

namespace fs = std::filesystem;

TaskData TaskData::generate(const SynthConfig& cfg) {
  TaskData d;
  d.a = vapf::generate(cfg, TaskId::A);
  d.b = vapf::generate(cfg, TaskId::B);
  d.split_a = split_for(cfg, d.a);
  d.split_b = split_for(cfg, d.b);
  return d;
}

TaskData TaskData::load(const fs::path& dir) {
  const SynthConfig cfg = load_manifest_config(dir);
  TaskData d;
  d.a = load_task(dir, TaskId::A);
  d.b = load_task(dir, TaskId::B);
  d.split_a = split_for(cfg, d.a);
  d.split_b = split_for(cfg, d.b);
  return d;
}

std::string run_id(const std::string& strategy, std::uint64_t seed) {
  return strategy + "-s" + std::to_string(seed);
}

namespace {

const char* kMetricsHeader = "run_id,strategy,seed,bacc,f1,auc,trainable_params,total_params";

std::vector<std::string> cells(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const fs::path& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InputError(path.string() + ": bad number '" + s + "'");
  }
}

std::uint64_t parse_u64(const std::string& s, const fs::path& path) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InputError(path.string() + ": bad integer '" + s + "'");
  }
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

}  // namespace

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
  if (!os) throw IoError("write failed for " + path.string());
}

std::vector<MetricsRow> read_metrics_csv(const fs::path& path) {
  auto lines = read_lines(path);
  if (lines.empty() || lines[0] != kMetricsHeader) {
    throw InputError(path.string() + ": unexpected metrics header");
  }
  std::vector<MetricsRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto c = cells(lines[i]);
    if (c.size() != 8) throw InputError(path.string() + ": expected 8 columns on line " + std::to_string(i + 1));
    MetricsRow r;
    r.run_id = c[0];
    r.strategy = c[1];
    r.seed = parse_u64(c[2], path);
    r.bacc = parse_double(c[3], path);
    r.f1 = parse_double(c[4], path);
    r.auc = parse_double(c[5], path);
    r.trainable_params = parse_u64(c[6], path);
    r.total_params = parse_u64(c[7], path);
    rows.push_back(std::move(r));
  }
  return rows;
}

void upsert_metrics_csv(const fs::path& path, const std::vector<MetricsRow>& rows) {
  std::map<std::string, MetricsRow> merged;
  if (fs::exists(path)) {
    for (auto& r : read_metrics_csv(path)) merged[r.run_id] = r;
  }
  for (const auto& r : rows) merged[r.run_id] = r;
  std::ostringstream os;
  os << kMetricsHeader << '\n';
  for (const auto& [id, r] : merged) {
    os << r.run_id << ',' << r.strategy << ',' << r.seed << ',' << format_double(r.bacc) << ','
       << format_double(r.f1) << ',' << format_double(r.auc) << ',' << r.trainable_params << ','
       << r.total_params << '\n';
  }
  write_text(path, os.str());
}

TrainConfig train_config(const ExperimentConfig& cfg, const StageConfig& stage, Strategy strategy,
                         std::uint64_t seed) {
  TrainConfig t;
  t.epochs = stage.epochs;
  t.batch_size = stage.batch_size;
  t.lr = stage.lr;
  t.weight_decay = stage.weight_decay;
  t.plateau = cfg.scheduler;
  t.seed = seed;
  t.strategy = strategy;
  t.threads = threads_from_env();
  return t;
}

ModelCheckpoint run_pretrain(const ExperimentConfig& cfg, const TaskData& data, MetricsRow* row) {
  const std::uint64_t seed = cfg.seeds.front();
  VapFormer model(configure_for(Strategy::FT, cfg.model, cfg.prompts), seed);
  const TrainConfig tc = train_config(cfg, cfg.pretrain, Strategy::FT, seed);
  ModelCheckpoint ckpt = pretrain(model, data.a, data.split_a, tc);
  const MetricSummary test = summarize(evaluate(model, data.a, data.split_a.test, tc.threads));
  ckpt.metrics["test"] = {{"bacc", test.bacc}, {"f1", test.f1}, {"auc", test.auc}};
  if (row) {
    *row = {run_id("pretrain", seed), "pretrain", seed, test.bacc, test.f1, test.auc,
            model.params().total_count(), model.params().total_count()};
  }
  return ckpt;
}

FinetuneResult run_finetune(const ExperimentConfig& cfg, const ModelCheckpoint& pretrained,
                            const TaskData& data, Strategy strategy, std::uint64_t seed,
                            const PromptCounts& counts,
                            const std::function<void(ParameterStore&, std::size_t, std::size_t)>&
                                after_step) {
  VapFormer model(configure_for(strategy, cfg.model, counts), seed);
  TrainConfig tc = train_config(cfg, cfg.finetune, strategy, seed);
  tc.after_step = after_step;
  FinetuneResult r;
  r.checkpoint = finetune(model, pretrained, data.b, data.split_b, tc, &r.metrics);
  const std::string name = to_string(strategy);
  r.row = {run_id(name, seed),          name,
           seed,                        r.metrics.test.bacc,
           r.metrics.test.f1,           r.metrics.test.auc,
           r.metrics.trainable_params,  r.metrics.total_params};
  return r;
}

std::vector<MetricsRow> baseline_rows(const TaskData& data) {
  const BaselineScores b = unimodal_baselines(data.b, data.split_b);
  std::vector<MetricsRow> rows;
  auto add = [&](const char* name, const EvalResult& e, std::size_t params) {
    const MetricSummary m = summarize(e);
    rows.push_back({run_id(name, 0), name, 0, m.bacc, m.f1, m.auc, params, params});
  };
  // Logistic weights plus bias; the average baseline has both.
  std::size_t tab_features = 0;
  for (const auto& a : data.b.schema.attributes) {
    tab_features += a.kind == AttributeKind::Categorical ? a.cardinality : 1;
  }
  add("baseline_tab", b.tabular, tab_features + 1);
  add("baseline_vis", b.visual, 2);
  add("baseline_avg", b.average, tab_features + 3);
  return rows;
}

SweepAxis parse_axis(const std::string& s) {
  if (s == "visual") return SweepAxis::Visual;
  if (s == "tabular") return SweepAxis::Tabular;
  throw ConfigError("unknown prompt axis '" + s + "' (expected visual or tabular)");
}

const char* to_string(SweepAxis a) { return a == SweepAxis::Visual ? "visual" : "tabular"; }

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, const ModelCheckpoint& pretrained,
                                const TaskData& data, SweepAxis axis,
                                const std::vector<std::size_t>& counts,
                                const std::vector<std::uint64_t>& seeds) {
  if (counts.empty() || seeds.empty()) throw ConfigError("sweep needs counts and seeds");
  for (auto c : counts) {
    if (c == 0) throw ConfigError("sweep counts must be positive");
    if (axis == SweepAxis::Visual && c % 2 != 0) {
      throw ConfigError("visual prompt count " + std::to_string(c) +
                        " is odd; visual prompts split evenly between spatial and channel");
    }
  }
  std::vector<SweepRow> rows;
  for (auto c : counts) {
    PromptCounts pc = cfg.prompts;
    (axis == SweepAxis::Visual ? pc.visual : pc.tabular) = c;
    for (auto seed : seeds) {
      SweepRow row{axis, c, seed, 0.0, 0.0};
      row.auc_vap = run_finetune(cfg, pretrained, data, Strategy::Vap, seed, pc).metrics.test.auc;
      row.auc_vistab =
          run_finetune(cfg, pretrained, data, Strategy::VisTab, seed, pc).metrics.test.auc;
      rows.push_back(row);
    }
  }
  return rows;
}

void write_sweep_csv(const fs::path& path, const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "axis,count,seed,auc_vap,auc_vistab\n";
  for (const auto& r : rows) {
    os << to_string(r.axis) << ',' << r.count << ',' << r.seed << ',' << format_double(r.auc_vap)
       << ',' << format_double(r.auc_vistab) << '\n';
  }
  write_text(path, os.str());
}

std::vector<SweepRow> read_sweep_csv(const fs::path& path) {
  auto lines = read_lines(path);
  if (lines.empty() || lines[0] != "axis,count,seed,auc_vap,auc_vistab") {
    throw InputError(path.string() + ": unexpected sweep header");
  }
  std::vector<SweepRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto c = cells(lines[i]);
    if (c.size() != 5) throw InputError(path.string() + ": expected 5 columns on line " + std::to_string(i + 1));
    rows.push_back({parse_axis(c[0]), static_cast<std::size_t>(parse_u64(c[1], path)),
                    parse_u64(c[2], path), parse_double(c[3], path), parse_double(c[4], path)});
  }
  return rows;
}

std::vector<BandPoint> sweep_band(const std::vector<SweepRow>& rows, bool vap) {
  std::map<std::size_t, std::vector<double>> by_count;
  for (const auto& r : rows) by_count[r.count].push_back(vap ? r.auc_vap : r.auc_vistab);
  std::vector<BandPoint> out;
  for (const auto& [count, v] : by_count) {
    BandPoint p;
    p.count = count;
    double s = 0.0;
    for (double x : v) s += x;
    p.mean = s / static_cast<double>(v.size());
    p.min = *std::min_element(v.begin(), v.end());
    p.max = *std::max_element(v.begin(), v.end());
    out.push_back(p);
  }
  return out;
}

std::string sweep_svg(const std::vector<SweepRow>& rows) {
  const double W = 480, H = 320, left = 56, right = 16, top = 24, bottom = 44;
  const auto vap = sweep_band(rows, true);
  const auto vt = sweep_band(rows, false);
  double lo = 1.0, hi = 0.0;
  for (const auto* band : {&vap, &vt}) {
    for (const auto& p : *band) {
      lo = std::min(lo, p.min);
      hi = std::max(hi, p.max);
    }
  }
  if (rows.empty()) lo = 0.0, hi = 1.0;
  if (hi - lo < 0.02) {
    const double mid = 0.5 * (hi + lo);
    lo = mid - 0.01;
    hi = mid + 0.01;
  }
  const std::size_t n = vap.size();
  auto px = [&](std::size_t i) {
    return n <= 1 ? left + (W - left - right) / 2
                  : left + (W - left - right) * static_cast<double>(i) / static_cast<double>(n - 1);
  };
  auto py = [&](double v) { return top + (H - top - bottom) * (hi - v) / (hi - lo); };
  auto num = [](double v) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(2);
    s << v;
    return s.str();
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << H - bottom << "\" x2=\"" << W - right << "\" y2=\""
     << H - bottom << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
     << H - bottom << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    os << "<text x=\"" << left - 6 << "\" y=\"" << num(py(v) + 4)
       << "\" font-size=\"11\" text-anchor=\"end\">" << num(v) << "</text>\n";
  }
  for (std::size_t i = 0; i < n; ++i) {
    os << "<text x=\"" << num(px(i)) << "\" y=\"" << H - bottom + 16
       << "\" font-size=\"11\" text-anchor=\"middle\">" << vap[i].count << "</text>\n";
  }
  const std::string axis = rows.empty() ? "prompt" : to_string(rows.front().axis);
  os << "<text x=\"" << num((W + left - right) / 2) << "\" y=\"" << H - 8
     << "\" font-size=\"12\" text-anchor=\"middle\">number of " << axis << " prompts</text>\n";
  os << "<text x=\"14\" y=\"" << num((H - bottom + top) / 2)
     << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
     << num((H - bottom + top) / 2) << ")\">AUC</text>\n";

  struct Variant {
    const std::vector<BandPoint>* band;
    const char* name;
    const char* color;
  };
  const Variant variants[] = {{&vap, "VAP", "#d62728"}, {&vt, "Vis-TabPrompt", "#1f77b4"}};
  int legend = 0;
  for (const auto& v : variants) {
    const auto& b = *v.band;
    os << "<polygon class=\"band\" data-variant=\"" << v.name << "\" fill=\"" << v.color
       << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < b.size(); ++i) os << num(px(i)) << ',' << num(py(b[i].max)) << ' ';
    for (std::size_t i = b.size(); i-- > 0;) os << num(px(i)) << ',' << num(py(b[i].min)) << ' ';
    os << "\"/>\n";
    os << "<polyline class=\"mean\" data-variant=\"" << v.name << "\" fill=\"none\" stroke=\""
       << v.color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < b.size(); ++i) os << num(px(i)) << ',' << num(py(b[i].mean)) << ' ';
    os << "\"/>\n";
    const double ly = top + 4 + 16 * legend++;
    os << "<line x1=\"" << W - right - 120 << "\" y1=\"" << ly << "\" x2=\"" << W - right - 100
       << "\" y2=\"" << ly << "\" stroke=\"" << v.color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << W - right - 94 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">" << v.name
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace vapf
