#include <filesystem>
#include <fstream>
#include <iterator>

#include <gtest/gtest.h>

#include "vapf/checkpoint.hpp"
#include "vapf/config.hpp"
#include "vapf/errors.hpp"
#include "vapf/experiment.hpp"
#include "vapf/model.hpp"
#include "vapf/verify.hpp"

using namespace vapf;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("vapf_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
  const fs::path d = scratch("ckpt");
  VapFormer model(configure_for(Strategy::Vap, verification_model(), {4, 3}), 3);
  model.params().set_freeze_mask({"head.fc1.w"});
  const auto ck = ModelCheckpoint::capture(model.params(), {{"k", 1}}, {{"auc", 0.5}});
  ck.save(d / "a.ckpt");
  ModelCheckpoint::load(d / "a.ckpt").save(d / "b.ckpt");
  const std::string a = slurp(d / "a.ckpt");
  EXPECT_EQ(a.substr(0, 8), "VAPFCKPT");
  EXPECT_EQ(a, slurp(d / "b.ckpt"));

  const auto back = ModelCheckpoint::load(d / "a.ckpt");
  EXPECT_EQ(back.freeze_mask, ck.freeze_mask);
  EXPECT_EQ(back.metrics, ck.metrics);
  VapFormer other(configure_for(Strategy::Vap, verification_model(), {4, 3}), 99);
  back.load_into(other.params());
  for (const auto& e : model.params().entries()) {
    const auto& t = other.params().get(e.name);
    for (std::size_t i = 0; i < t.size(); ++i)
      ASSERT_EQ(t[i], static_cast<double>(static_cast<float>(e.tensor[i]))) << e.name;
  }
  fs::remove_all(d);
}

TEST(Checkpoint, MismatchListsMissingNames) {
  VapFormer plain(verification_model(), 0);
  VapFormer prompted(configure_for(Strategy::Vap, verification_model(), {4, 3}), 0);
  const auto ck = ModelCheckpoint::capture(plain.params());
  try {
    ck.load_into(prompted.params());
    FAIL();
  } catch (const CheckpointError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(".prompt.spatial"), std::string::npos) << msg;
    EXPECT_NE(msg.find("tab.prompt0"), std::string::npos) << msg;
  }
  EXPECT_NO_THROW(ck.load_into(prompted.params(), LoadPolicy::BackboneOnly));

  ModelConfig wider = verification_model();
  wider.fusion.head_hidden = 12;
  VapFormer w(wider, 0);
  EXPECT_THROW(ck.load_into(w.params()), CheckpointError);
}

TEST(Checkpoint, CorruptBytesRejected) {
  VapFormer plain(verification_model(), 0);
  auto bytes = ModelCheckpoint::capture(plain.params()).serialize();
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(ModelCheckpoint::deserialize(bad), CheckpointError);
  bytes.resize(bytes.size() - 3);
  EXPECT_THROW(ModelCheckpoint::deserialize(bytes), CheckpointError);
}

TEST(Config, RoundTripAndStrictKeys) {
  const fs::path d = scratch("cfg");
  ExperimentConfig c;
  c.model.visual.patch = 8;
  c.seeds = {4, 5};
  std::ofstream(d / "c.json") << c.to_json().dump(2);
  const ExperimentConfig back = ExperimentConfig::load(d / "c.json");
  EXPECT_EQ(back.to_json(), c.to_json());

  auto j = c.to_json();
  j["model"]["fusion"]["depht"] = 2;
  std::ofstream(d / "u.json") << j.dump();
  try {
    ExperimentConfig::load(d / "u.json");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("depht"), std::string::npos) << e.what();
  }

  j = c.to_json();
  j["prompts"]["visual"] = 7;
  std::ofstream(d / "odd.json") << j.dump();
  EXPECT_THROW(ExperimentConfig::load(d / "odd.json"), ConfigError);

  std::ofstream(d / "bad.json") << "{\"seeds\": [1,";
  EXPECT_THROW(ExperimentConfig::load(d / "bad.json"), ConfigError);
  EXPECT_THROW(ExperimentConfig::load(d / "absent.json"), IoError);
  fs::remove_all(d);
}

TEST(Config, DeskFileMatchesDefaultsApartFromPatch) {
  const ExperimentConfig desk = ExperimentConfig::load(fs::path(VAPF_SOURCE_DIR) / "configs" / "desk.json");
  ExperimentConfig c;
  c.model.visual.patch = desk.model.visual.patch;
  c.out = desk.out;
  EXPECT_EQ(desk.to_json(), c.to_json());
}

TEST(MetricsCsv, UpsertIsIdempotentAndSorted) {
  const fs::path d = scratch("csv");
  const MetricsRow a{"pt-s1", "pt", 1, 0.75, 0.5, 0.875, 10, 1000};
  const MetricsRow b{"ft-s0", "ft", 0, 0.625, 0.25, 0.8125, 1000, 1000};
  upsert_metrics_csv(d / "m.csv", {a});
  upsert_metrics_csv(d / "m.csv", {b});
  const std::string first = slurp(d / "m.csv");
  upsert_metrics_csv(d / "m.csv", {a, b});
  EXPECT_EQ(slurp(d / "m.csv"), first);
  EXPECT_EQ(first.rfind("run_id,strategy,seed,bacc,f1,auc,trainable_params,total_params\n", 0), 0u);
  const auto rows = read_metrics_csv(d / "m.csv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].run_id, "ft-s0");
  EXPECT_EQ(rows[1].auc, 0.875);
  EXPECT_EQ(rows[1].trainable_params, 10u);
  fs::remove_all(d);
}

TEST(Sweep, CsvBandsAndSvg) {
  const fs::path d = scratch("sweep");
  std::vector<SweepRow> rows;
  for (std::size_t count : {2, 10})
    for (std::uint64_t seed : {0, 1, 2})
      rows.push_back({SweepAxis::Visual, count, seed, 0.8 + 0.01 * seed, 0.79 + 0.02 * seed});
  write_sweep_csv(d / "s.csv", rows);
  const auto back = read_sweep_csv(d / "s.csv");
  ASSERT_EQ(back.size(), 6u);
  EXPECT_EQ(back[4].auc_vistab, rows[4].auc_vistab);

  const auto band = sweep_band(rows, true);
  ASSERT_EQ(band.size(), 2u);
  EXPECT_EQ(band[0].count, 2u);
  EXPECT_DOUBLE_EQ(band[0].min, 0.8);
  EXPECT_DOUBLE_EQ(band[0].max, 0.82);
  const std::string svg = sweep_svg(rows);
  std::size_t polys = 0;
  for (std::size_t p = svg.find("<polygon"); p != std::string::npos; p = svg.find("<polygon", p + 1)) ++polys;
  EXPECT_EQ(polys, 2u);
  EXPECT_THROW(parse_axis("diagonal"), ConfigError);
  fs::remove_all(d);
}
