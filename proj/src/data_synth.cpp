#include "vapf/data_synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "vapf/errors.hpp"
#include "vapf/json_util.hpp"
#include "vapf/rng.hpp"

namespace vapf {

namespace fs = std::filesystem;

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

char to_char(TaskId t) { return t == TaskId::A ? 'A' : 'B'; }

std::size_t SynthConfig::positives() const {
  return static_cast<std::size_t>(std::llround(positive_fraction * static_cast<double>(total())));
}

TaskParams SynthConfig::params(TaskId task) const {
  TaskParams p = task_a;
  if (task == TaskId::B) {
    const double gap = p.amp_pos - p.amp_neg;
    p.amp_pos = p.amp_neg + gap * perturbation.amplitude_gap_scale;
    for (std::size_t i = 0; i < 3; ++i) {
      p.center[i] += perturbation.center_shift[i] / static_cast<double>(volume[i]);
    }
    p.ptau_effect *= perturbation.tabular_effect_scale;
    p.ttau_effect *= perturbation.tabular_effect_scale;
    p.fdg_effect *= perturbation.tabular_effect_scale;
  }
  return p;
}

void SynthConfig::validate() const {
  for (auto d : volume)
    if (d == 0) throw ConfigError("data.volume extents must be positive");
  if (n_train == 0 || n_val == 0 || n_test == 0) throw ConfigError("data split sizes must be positive");
  if (!(positive_fraction > 0.0 && positive_fraction < 1.0)) {
    throw ConfigError("data.positive_fraction must lie in (0, 1)");
  }
  if (task_a.radius <= 0.0 || task_a.noise_sd < 0.0 || task_a.amplitude_sd < 0.0) {
    throw ConfigError("data.task_a: radius must be positive and spreads non-negative");
  }
}

nlohmann::json SynthConfig::to_json() const {
  const auto& t = task_a;
  return {{"volume", volume},
          {"n_train", n_train},
          {"n_val", n_val},
          {"n_test", n_test},
          {"positive_fraction", positive_fraction},
          {"seed", seed},
          {"task_a",
           {{"amp_neg", t.amp_neg},
            {"amp_pos", t.amp_pos},
            {"amplitude_sd", t.amplitude_sd},
            {"center", t.center},
            {"center_jitter", t.center_jitter},
            {"pos_offset", t.pos_offset},
            {"radius", t.radius},
            {"noise_sd", t.noise_sd},
            {"ptau_effect", t.ptau_effect},
            {"ttau_effect", t.ttau_effect},
            {"fdg_effect", t.fdg_effect}}},
          {"perturbation",
           {{"center_shift", perturbation.center_shift},
            {"amplitude_gap_scale", perturbation.amplitude_gap_scale},
            {"tabular_effect_scale", perturbation.tabular_effect_scale}}}};
}

SynthConfig SynthConfig::from_json(const nlohmann::json& j) {
  SynthConfig c;
  StrictObject o(j, "data");
  o.read("volume", c.volume);
  o.read("n_train", c.n_train);
  o.read("n_val", c.n_val);
  o.read("n_test", c.n_test);
  o.read("positive_fraction", c.positive_fraction);
  o.read("seed", c.seed);
  if (auto* t = o.object("task_a")) {
    StrictObject to(*t, "data.task_a");
    to.read("amp_neg", c.task_a.amp_neg);
    to.read("amp_pos", c.task_a.amp_pos);
    to.read("amplitude_sd", c.task_a.amplitude_sd);
    to.read("center", c.task_a.center);
    to.read("center_jitter", c.task_a.center_jitter);
    to.read("pos_offset", c.task_a.pos_offset);
    to.read("radius", c.task_a.radius);
    to.read("noise_sd", c.task_a.noise_sd);
    to.read("ptau_effect", c.task_a.ptau_effect);
    to.read("ttau_effect", c.task_a.ttau_effect);
    to.read("fdg_effect", c.task_a.fdg_effect);
    to.finish();
  }
  if (auto* p = o.object("perturbation")) {
    StrictObject po(*p, "data.perturbation");
    po.read("center_shift", c.perturbation.center_shift);
    po.read("amplitude_gap_scale", c.perturbation.amplitude_gap_scale);
    po.read("tabular_effect_scale", c.perturbation.tabular_effect_scale);
    po.finish();
  }
  o.finish();
  c.validate();
  return c;
}

namespace {

constexpr std::uint64_t task_key(TaskId t) { return t == TaskId::A ? 0xA0000000ULL : 0xB0000000ULL; }

double clamp_to(double v, const AttributeDescriptor& d) { return std::clamp(v, d.min, d.max); }

Sample make_sample(const SynthConfig& cfg, const TaskParams& p, const AttributeSchema& schema,
                   int label, Rng& rng) {
  Sample s;
  s.label = label;
  const double y = label;

  // Attributes in reference-schema order.
  const auto& a = schema.attributes;
  std::vector<double> v(7);
  v[0] = clamp_to(rng.normal(73.0, 7.0), a[0]);
  v[1] = static_cast<double>(rng.below(2));
  v[2] = clamp_to(rng.normal(15.0, 3.0), a[2]);
  const double u = rng.uniform();
  v[3] = u < 0.55 ? 0.0 : (u < 0.90 ? 1.0 : 2.0);
  v[4] = clamp_to(rng.normal(22.0 + y * p.ptau_effect * 8.0, 8.0), a[4]);
  v[5] = clamp_to(rng.normal(240.0 + y * p.ttau_effect * 70.0, 70.0), a[5]);
  v[6] = clamp_to(rng.normal(1.22 - y * p.fdg_effect * 0.12, 0.12), a[6]);
  s.record.values = std::move(v);

  const auto& dims = cfg.volume;
  const double amp = rng.normal(label ? p.amp_pos : p.amp_neg, p.amplitude_sd);
  std::array<double, 3> c{};
  for (std::size_t i = 0; i < 3; ++i) {
    c[i] = p.center[i] * static_cast<double>(dims[i]) + y * p.pos_offset[i] +
           rng.normal(0.0, p.center_jitter);
  }
  const double inv2r2 = 1.0 / (2.0 * p.radius * p.radius);
  s.volume.dims = dims;
  s.volume.voxels.resize(dims[0] * dims[1] * dims[2]);
  std::size_t idx = 0;
  for (std::size_t z = 0; z < dims[0]; ++z) {
    const double dz = static_cast<double>(z) - c[0];
    for (std::size_t yy = 0; yy < dims[1]; ++yy) {
      const double dy = static_cast<double>(yy) - c[1];
      for (std::size_t x = 0; x < dims[2]; ++x) {
        const double dx = static_cast<double>(x) - c[2];
        const double blob = amp * std::exp(-(dz * dz + dy * dy + dx * dx) * inv2r2);
        s.volume.voxels[idx++] = static_cast<float>(blob + p.noise_sd * rng.normal());
      }
    }
  }
  return s;
}

std::string indexed(const char* pattern, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), pattern, i);
  return buf;
}

std::uint64_t file_checksum(const fs::path& path, std::uint64_t h) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return fnv1a64(bytes.data(), bytes.size(), h);
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

Dataset generate(const SynthConfig& cfg, TaskId task) {
  cfg.validate();
  const TaskParams p = cfg.params(task);
  Dataset data;
  const std::size_t n = cfg.total();
  const std::size_t npos = cfg.positives();
  std::vector<int> labels(n, 0);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(npos), 1);
  Rng label_rng(cfg.seed, task_key(task));
  label_rng.shuffle(labels.begin(), labels.end());

  data.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(cfg.seed, task_key(task) + 1 + i);
    data.samples.push_back(make_sample(cfg, p, data.schema, labels[i], rng));
  }
  return data;
}

nlohmann::json write_dataset(const SynthConfig& cfg, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const AttributeSchema schema = AttributeSchema::reference();
  schema.save(dir / "schema.json");

  nlohmann::json manifest;
  manifest["format"] = "vapf-dataset-v1";
  manifest["config"] = cfg.to_json();
  for (TaskId task : {TaskId::A, TaskId::B}) {
    const std::string name = std::string("task_") + to_char(task);
    const fs::path tdir = dir / name;
    fs::create_directories(tdir, ec);
    if (ec) throw IoError("cannot create " + tdir.string() + ": " + ec.message());

    const Dataset data = generate(cfg, task);
    std::vector<TabularRow> rows;
    std::uint64_t vol_sum = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
      const auto& s = data.samples[i];
      const fs::path vp = tdir / indexed("vol_%05zu.f32", i);
      const fs::path hp = tdir / indexed("header_%05zu.txt", i);
      write_volume(vp, hp, s.volume);
      vol_sum = file_checksum(vp, vol_sum);
      vol_sum = file_checksum(hp, vol_sum);
      rows.push_back({s.record, s.label});
    }
    write_tabular_csv(tdir / "tabular.csv", data.schema, rows);
    {
      std::ofstream ls(tdir / "labels.csv", std::ios::binary);
      if (!ls) throw IoError("cannot write labels.csv");
      ls << "index,label\n";
      for (std::size_t i = 0; i < rows.size(); ++i) ls << i << ',' << rows[i].label << '\n';
    }
    std::size_t pos = 0;
    for (const auto& r : rows) pos += static_cast<std::size_t>(r.label);
    manifest["tasks"][name] = {
        {"samples", rows.size()},
        {"positives", pos},
        {"volumes_fnv1a64", hex64(vol_sum)},
        {"tabular_fnv1a64", hex64(file_checksum(tdir / "tabular.csv", 0xcbf29ce484222325ULL))},
        {"labels_fnv1a64", hex64(file_checksum(tdir / "labels.csv", 0xcbf29ce484222325ULL))}};
  }
  std::ofstream ms(dir / "manifest.json", std::ios::binary);
  if (!ms) throw IoError("cannot write manifest.json");
  ms << manifest.dump(2) << '\n';
  if (!ms) throw IoError("write failed for manifest.json");
  return manifest;
}

SynthConfig load_manifest_config(const fs::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw IoError("cannot read " + (dir / "manifest.json").string());
  nlohmann::json j;
  try {
    is >> j;
    return SynthConfig::from_json(j.at("config"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("manifest.json: " + std::string(e.what()));
  }
}

Dataset load_task(const fs::path& dir, TaskId task) {
  const fs::path tdir = dir / (std::string("task_") + to_char(task));
  Dataset data;
  if (fs::exists(dir / "schema.json")) data.schema = AttributeSchema::load(dir / "schema.json");
  const auto rows = read_tabular_csv(tdir / "tabular.csv", data.schema);
  data.samples.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Sample s;
    s.volume = read_volume(tdir / indexed("vol_%05zu.f32", i), tdir / indexed("header_%05zu.txt", i));
    s.record = rows[i].record;
    s.label = rows[i].label;
    data.samples.push_back(std::move(s));
  }
  return data;
}

SplitIndices split(const std::vector<int>& labels, const std::array<double, 3>& fractions,
                   std::uint64_t seed) {
  const double total = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  for (double f : fractions)
    if (f < 0.0) throw ConfigError("split fractions must be non-negative");

  SplitIndices out;
  for (int cls : {1, 0}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) idx.push_back(i);
    Rng rng(seed, 0x53504C54ULL + static_cast<std::uint64_t>(cls));
    rng.shuffle(idx.begin(), idx.end());
    const double n = static_cast<double>(idx.size());
    const auto n_train = static_cast<std::size_t>(std::llround(fractions[0] * n));
    const auto n_val = static_cast<std::size_t>(std::llround(fractions[1] * n));
    if (n_train + n_val > idx.size()) throw ConfigError("split rounding exceeds class size");
    const std::size_t n_test = idx.size() - n_train - n_val;
    const std::array<std::size_t, 3> counts{n_train, n_val, n_test};
    for (std::size_t k = 0; k < 3; ++k) {
      if (fractions[k] > 0.0 && counts[k] == 0) {
        throw ConfigError("class " + std::to_string(cls) + " has too few samples (" +
                          std::to_string(idx.size()) + ") to stratify");
      }
    }
    out.train.insert(out.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.val.insert(out.val.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                   idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    out.test.insert(out.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val),
                    idx.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

SplitIndices split_for(const SynthConfig& cfg, const Dataset& data) {
  const double n = static_cast<double>(cfg.total());
  return split(data.labels(),
               {static_cast<double>(cfg.n_train) / n, static_cast<double>(cfg.n_val) / n,
                static_cast<double>(cfg.n_test) / n},
               cfg.seed);
}

namespace {

// Plain batch-gradient logistic regression on standardized features.
struct Logistic {
  std::vector<double> mean, sd, w;
  double b = 0.0;

  void fit(const std::vector<std::vector<double>>& x, const std::vector<int>& y) {
    const std::size_t d = x.front().size();
    mean.assign(d, 0.0);
    sd.assign(d, 0.0);
    for (const auto& r : x)
      for (std::size_t j = 0; j < d; ++j) mean[j] += r[j];
    for (auto& m : mean) m /= static_cast<double>(x.size());
    for (const auto& r : x)
      for (std::size_t j = 0; j < d; ++j) sd[j] += (r[j] - mean[j]) * (r[j] - mean[j]);
    for (auto& s : sd) s = std::sqrt(s / static_cast<double>(x.size()));
    for (auto& s : sd)
      if (s == 0.0) s = 1.0;
    w.assign(d, 0.0);
    b = 0.0;
    const double lr = 0.5, l2 = 1e-3;
    for (int it = 0; it < 2000; ++it) {
      std::vector<double> gw(d, 0.0);
      double gb = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = prob(x[i]) - y[i];
        for (std::size_t j = 0; j < d; ++j) gw[j] += e * (x[i][j] - mean[j]) / sd[j];
        gb += e;
      }
      const double inv = 1.0 / static_cast<double>(x.size());
      for (std::size_t j = 0; j < d; ++j) w[j] -= lr * (gw[j] * inv + l2 * w[j]);
      b -= lr * gb * inv;
    }
  }

  double prob(const std::vector<double>& r) const {
    double z = b;
    for (std::size_t j = 0; j < r.size(); ++j) z += w[j] * (r[j] - mean[j]) / sd[j];
    return 1.0 / (1.0 + std::exp(-z));
  }
};

std::vector<double> tabular_features(const AttributeSchema& schema, const AttributeRecord& r) {
  std::vector<double> f;
  for (std::size_t i = 0; i < schema.attributes.size(); ++i) {
    const auto& a = schema.attributes[i];
    if (a.kind == AttributeKind::Categorical) {
      for (std::size_t l = 0; l < a.cardinality; ++l)
        f.push_back(static_cast<std::size_t>(r.values[i]) == l ? 1.0 : 0.0);
    } else {
      f.push_back(min_max_normalize(r.values[i], a));
    }
  }
  return f;
}

double volume_mean(const Volume& v) {
  double s = 0.0;
  for (float x : v.voxels) s += x;
  return s / static_cast<double>(v.voxels.size());
}

}  // namespace

BaselineScores unimodal_baselines(const Dataset& data, const SplitIndices& sp) {
  std::vector<std::vector<double>> xt, xv;
  std::vector<int> y;
  for (auto i : sp.train) {
    const auto& s = data.samples[i];
    xt.push_back(tabular_features(data.schema, s.record));
    xv.push_back({volume_mean(s.volume)});
    y.push_back(s.label);
  }
  Logistic tab, vis;
  tab.fit(xt, y);
  vis.fit(xv, y);

  BaselineScores out;
  for (auto i : sp.test) {
    const auto& s = data.samples[i];
    const double pt = tab.prob(tabular_features(data.schema, s.record));
    const double pv = vis.prob({volume_mean(s.volume)});
    out.tabular.scores.push_back(pt);
    out.visual.scores.push_back(pv);
    out.average.scores.push_back(0.5 * (pt + pv));
    for (auto* r : {&out.tabular, &out.visual, &out.average}) r->labels.push_back(s.label);
  }
  return out;
}

}  // namespace vapf
