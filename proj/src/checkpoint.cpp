#include "vapf/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <algorithm>
#include <fstream>
#include <iterator>

#include "vapf/errors.hpp"

namespace vapf {

namespace {

constexpr char kMagic[8] = {'V', 'A', 'P', 'F', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::vector<char>& out, T v) {
  const auto* p = reinterpret_cast<const char*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T take(const std::vector<char>& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw CheckpointError("checkpoint truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

ModelCheckpoint ModelCheckpoint::capture(const ParameterStore& store, nlohmann::json config,
                                         nlohmann::json metrics) {
  ModelCheckpoint ck;
  for (const auto& e : store.entries()) {
    CheckpointTensor t{e.name, e.tensor.shape(), {}};
    t.values.reserve(e.tensor.size());
    for (double v : e.tensor.data()) t.values.push_back(static_cast<float>(v));
    ck.tensors.push_back(std::move(t));
  }
  ck.freeze_mask = store.freeze_mask();
  ck.config = std::move(config);
  ck.metrics = std::move(metrics);
  return ck;
}

const CheckpointTensor* ModelCheckpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

void ModelCheckpoint::load_into(ParameterStore& store, LoadPolicy policy) const {
  std::vector<std::string> missing;
  std::vector<std::string> mismatched;
  for (const auto& e : store.entries()) {
    const bool optional = policy == LoadPolicy::BackboneOnly &&
                          (e.role == ParamRole::Prompt || e.role == ParamRole::GlobalTransform);
    if (optional) continue;
    const CheckpointTensor* t = find(e.name);
    if (!t) {
      missing.push_back(e.name);
    } else if (t->shape != e.tensor.shape()) {
      mismatched.push_back(e.name + " " + shape_str(t->shape) + "!=" + shape_str(e.tensor.shape()));
    }
  }
  if (!missing.empty() || !mismatched.empty()) {
    std::string msg = "checkpoint incompatible with model";
    if (!missing.empty()) {
      msg += "; missing:";
      for (const auto& n : missing) msg += " " + n;
    }
    if (!mismatched.empty()) {
      msg += "; shape mismatch:";
      for (const auto& n : mismatched) msg += " " + n;
    }
    throw CheckpointError(msg);
  }
  for (const auto& e : store.entries()) {
    const bool optional = policy == LoadPolicy::BackboneOnly &&
                          (e.role == ParamRole::Prompt || e.role == ParamRole::GlobalTransform);
    if (optional) continue;
    const CheckpointTensor* t = find(e.name);
    Tensor dst = e.tensor;
    auto d = dst.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<double>(t->values[i]);
  }
}

std::vector<char> ModelCheckpoint::serialize() const {
  nlohmann::json header;
  nlohmann::json tj = nlohmann::json::object();
  std::uint64_t offset = 0;
  for (const auto& t : tensors) {
    if (numel(t.shape) != t.values.size()) {
      throw CheckpointError("tensor '" + t.name + "' value count does not match its shape");
    }
    tj[t.name] = {{"shape", t.shape}, {"offset", offset}, {"dtype", "f32"}};
    offset += t.values.size() * sizeof(float);
  }
  header["tensors"] = std::move(tj);
  header["freeze_mask"] = freeze_mask;
  header["config"] = config;
  header["metrics"] = metrics;
  const std::string text = header.dump();

  std::vector<char> out;
  out.reserve(8 + 4 + 8 + text.size() + offset);
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& t : tensors) {
    const auto* p = reinterpret_cast<const char*>(t.values.data());
    out.insert(out.end(), p, p + t.values.size() * sizeof(float));
  }
  return out;
}

ModelCheckpoint ModelCheckpoint::deserialize(const std::vector<char>& bytes) {
  if (bytes.size() < 20 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw CheckpointError("not a vapf checkpoint (bad magic)");
  }
  std::size_t pos = 8;
  const auto version = take<std::uint32_t>(bytes, pos);
  if (version != kVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = take<std::uint64_t>(bytes, pos);
  if (pos + header_len > bytes.size()) throw CheckpointError("checkpoint header truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                   bytes.begin() + static_cast<std::ptrdiff_t>(pos + header_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  pos += header_len;
  const std::size_t payload = pos;

  ModelCheckpoint ck;
  try {
    std::vector<std::pair<std::uint64_t, CheckpointTensor>> by_offset;
    for (auto it = header.at("tensors").begin(); it != header.at("tensors").end(); ++it) {
      if (it.value().at("dtype").get<std::string>() != "f32") {
        throw CheckpointError("tensor '" + it.key() + "' has unsupported dtype");
      }
      CheckpointTensor t{it.key(), it.value().at("shape").get<Shape>(), {}};
      const auto off = it.value().at("offset").get<std::uint64_t>();
      const std::size_t n = numel(t.shape);
      if (payload + off + n * sizeof(float) > bytes.size()) {
        throw CheckpointError("tensor '" + t.name + "' extends past end of file");
      }
      t.values.resize(n);
      std::memcpy(t.values.data(), bytes.data() + payload + off, n * sizeof(float));
      by_offset.emplace_back(off, std::move(t));
    }
    std::sort(by_offset.begin(), by_offset.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [off, t] : by_offset) ck.tensors.push_back(std::move(t));
    ck.freeze_mask = header.at("freeze_mask").get<std::set<std::string>>();
    ck.config = header.at("config");
    ck.metrics = header.at("metrics");
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  }
  return ck;
}

void ModelCheckpoint::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write checkpoint " + path.string());
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write failed for " + path.string());
}

ModelCheckpoint ModelCheckpoint::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read checkpoint " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace vapf
