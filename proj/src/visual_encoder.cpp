#include "vapf/visual_encoder.hpp"

#include <cmath>

#include "vapf/errors.hpp"

namespace vapf {

void VisualEncoderConfig::validate() const {
  if (widths.empty()) throw ConfigError("visual encoder needs at least one stage");
  if (patch == 0) throw ConfigError("visual patch size must be positive");
  for (std::size_t i = 0; i < 3; ++i) {
    if (volume[i] == 0 || volume[i] % patch != 0) {
      throw ConfigError("volume extent " + std::to_string(volume[i]) +
                        " is not divisible by patch size " + std::to_string(patch));
    }
  }
  std::array<std::size_t, 3> g{volume[0] / patch, volume[1] / patch, volume[2] / patch};
  for (std::size_t s = 1; s < widths.size(); ++s) {
    if (downsample == 0) throw ConfigError("downsample factor must be positive");
    for (auto& e : g) {
      if (e % downsample != 0) {
        throw ConfigError("stage " + std::to_string(s) + ": token grid extent " +
                          std::to_string(e) + " not divisible by downsample " +
                          std::to_string(downsample));
      }
      e /= downsample;
    }
  }
  for (auto w : widths)
    if (w == 0) throw ConfigError("stage width must be positive");
  if (blocks_per_stage == 0) throw ConfigError("blocks_per_stage must be positive");
  if (prompts % 2 != 0) {
    throw ConfigError("visual prompt count must be even (split between spatial and channel), got " +
                      std::to_string(prompts));
  }
  if (global_prompt && prompts == 0) throw ConfigError("global prompt requires visual prompts");
}

std::array<std::size_t, 3> VisualEncoderConfig::grid(std::size_t stage) const {
  std::array<std::size_t, 3> g{volume[0] / patch, volume[1] / patch, volume[2] / patch};
  for (std::size_t s = 0; s < stage; ++s)
    for (auto& e : g) e /= downsample;
  return g;
}

std::size_t VisualEncoderConfig::tokens(std::size_t stage) const {
  auto g = grid(stage);
  return g[0] * g[1] * g[2];
}

std::vector<std::size_t> patchify_index(const std::array<std::size_t, 3>& dims, std::size_t p) {
  for (auto d : dims) {
    if (p == 0 || d % p != 0) {
      throw ConfigError("volume extent " + std::to_string(d) + " is not divisible by patch size " +
                        std::to_string(p));
    }
  }
  const std::size_t gd = dims[0] / p, gh = dims[1] / p, gw = dims[2] / p;
  std::vector<std::size_t> idx;
  idx.reserve(dims[0] * dims[1] * dims[2]);
  for (std::size_t z = 0; z < gd; ++z)
    for (std::size_t y = 0; y < gh; ++y)
      for (std::size_t x = 0; x < gw; ++x)
        for (std::size_t dz = 0; dz < p; ++dz)
          for (std::size_t dy = 0; dy < p; ++dy)
            for (std::size_t dx = 0; dx < p; ++dx)
              idx.push_back(((z * p + dz) * dims[1] + y * p + dy) * dims[2] + x * p + dx);
  return idx;
}

std::vector<std::size_t> merge_index(const std::array<std::size_t, 3>& grid, std::size_t channels,
                                     std::size_t f) {
  for (auto g : grid) {
    if (f == 0 || g % f != 0) throw ConfigError("token grid not divisible by merge factor");
  }
  const std::size_t od = grid[0] / f, oh = grid[1] / f, ow = grid[2] / f;
  std::vector<std::size_t> idx;
  idx.reserve(grid[0] * grid[1] * grid[2] * channels);
  for (std::size_t z = 0; z < od; ++z)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x)
        for (std::size_t dz = 0; dz < f; ++dz)
          for (std::size_t dy = 0; dy < f; ++dy)
            for (std::size_t dx = 0; dx < f; ++dx) {
              const std::size_t tok = ((z * f + dz) * grid[1] + y * f + dy) * grid[2] + x * f + dx;
              for (std::size_t c = 0; c < channels; ++c) idx.push_back(tok * channels + c);
            }
  return idx;
}

Tensor StageEmbedding::operator()(const Tensor& input) const {
  Tensor rows = ops::gather(input, index, gathered_shape);
  return ops::add(proj(rows), pos);
}

Tensor GlobalPromptTransform::operator()(const Tensor& prompt_outputs) const {
  return ops::add_row(ops::matmul(weight, prompt_outputs), bias);
}

EpaBlock::EpaBlock(ParameterStore& store, const std::string& prefix, std::size_t width,
                   std::size_t ffn_hidden, Initializer& init)
    : ln1(store, prefix + ".ln1", width, init),
      ln2(store, prefix + ".ln2", width, init),
      q(store, prefix + ".q_shared", width, width, init),
      k(store, prefix + ".k_shared", width, width, init),
      v_spatial(store, prefix + ".v_spatial", width, width, init),
      v_channel(store, prefix + ".v_channel", width, width, init),
      out_spatial(store, prefix + ".out_spatial", width, width, init),
      out_channel(store, prefix + ".out_channel", width, width, init),
      ffn(store, prefix + ".ffn", width, ffn_hidden, init) {}

Tensor EpaBlock::swa(const Tensor& seq) const {
  const double inv = 1.0 / std::sqrt(static_cast<double>(seq.dim(1)));
  Tensor a = ops::softmax(ops::scale(ops::matmul(q(seq), ops::transpose(k(seq))), inv), 1);
  return out_spatial(ops::matmul(a, v_spatial(seq)));
}

Tensor EpaBlock::cwa(const Tensor& seq) const {
  const double inv = 1.0 / std::sqrt(static_cast<double>(seq.dim(0)));
  Tensor a = ops::softmax(ops::scale(ops::matmul(ops::transpose(q(seq)), k(seq)), inv), 1);
  return out_channel(ops::matmul(v_channel(seq), ops::transpose(a)));
}

Tensor epa_prompt_forward(const EpaBlock& block, const std::optional<VisualPromptSet>& prompts,
                          const std::optional<GlobalPromptTransform>& gpt, const Tensor& tokens) {
  if (gpt && !prompts) throw ConfigError("global prompt transform without visual prompts");
  Tensor attn;
  if (!prompts) {
    Tensor z = block.ln1(tokens);
    attn = ops::add(block.swa(z), block.cwa(z));
  } else {
    const std::size_t half = prompts->spatial.dim(0);
    const std::size_t n = tokens.dim(0);
    if (prompts->channel.dim(0) != half || prompts->spatial.dim(1) != tokens.dim(1) ||
        prompts->channel.dim(1) != tokens.dim(1)) {
      throw ShapeError("visual prompts " + shape_str(prompts->spatial.shape()) + "/" +
                       shape_str(prompts->channel.shape()) + " vs tokens " +
                       shape_str(tokens.shape()));
    }
    auto s = ops::split(block.swa(block.ln1(ops::concat({prompts->spatial, tokens}, 0))), 0,
                        {half, n});
    auto c = ops::split(block.cwa(block.ln1(ops::concat({prompts->channel, tokens}, 0))), 0,
                        {half, n});
    attn = ops::add(s[1], c[1]);
    if (gpt) {
      Tensor g = (*gpt)(ops::concat({s[0], c[0]}, 0));
      attn = ops::mul_row(attn, g);
    }
  }
  Tensor y = ops::add(tokens, attn);
  return ops::add(y, block.ffn(block.ln2(y)));
}

VisualEncoder::VisualEncoder(ParameterStore& store, const std::string& prefix,
                             const VisualEncoderConfig& cfg, Initializer& init)
    : cfg_(cfg) {
  cfg_.validate();
  for (std::size_t s = 0; s < cfg_.widths.size(); ++s) {
    const std::string sp = prefix + ".stage" + std::to_string(s);
    const std::size_t width = cfg_.widths[s];
    const std::size_t n = cfg_.tokens(s);
    VisualStage stage;
    std::size_t in_width;
    if (s == 0) {
      stage.embed.index = patchify_index(cfg_.volume, cfg_.patch);
      in_width = cfg_.patch * cfg_.patch * cfg_.patch;
    } else {
      const std::size_t f = cfg_.downsample;
      stage.embed.index = merge_index(cfg_.grid(s - 1), cfg_.widths[s - 1], f);
      in_width = f * f * f * cfg_.widths[s - 1];
    }
    stage.embed.gathered_shape = {n, in_width};
    stage.embed.proj = Linear(store, sp + ".embed", in_width, width, init);
    stage.embed.pos = store.add(sp + ".pos", init.weight({n, width}));

    for (std::size_t b = 0; b < cfg_.blocks_per_stage; ++b) {
      const std::string bp = sp + ".block" + std::to_string(b);
      stage.blocks.emplace_back(store, bp, width, cfg_.ffn_ratio * width, init);
      std::optional<VisualPromptSet> ps;
      std::optional<GlobalPromptTransform> gpt;
      if (cfg_.prompts > 0) {
        const std::size_t half = cfg_.prompts / 2;
        ps = VisualPromptSet{
            store.add(bp + ".prompt.spatial", init.prompt({half, width}, width), ParamRole::Prompt),
            store.add(bp + ".prompt.channel", init.prompt({half, width}, width), ParamRole::Prompt)};
        if (cfg_.global_prompt) {
          // Bias starts at one so g ≈ 1 and the pretrained block is preserved.
          gpt = GlobalPromptTransform{
              store.add(bp + ".gpt.w", init.weight({1, cfg_.prompts}), ParamRole::GlobalTransform),
              store.add(bp + ".gpt.b", init.ones({width}), ParamRole::GlobalTransform)};
        }
      }
      stage.prompts.push_back(std::move(ps));
      stage.gpts.push_back(std::move(gpt));
    }
    stages_.push_back(std::move(stage));
  }
}

Tensor visual_encoder_forward(const std::vector<VisualStage>& stages, const Tensor& volume) {
  Tensor x = volume;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const auto& st = stages[s];
    if (st.prompts.size() != st.blocks.size() || st.gpts.size() != st.blocks.size()) {
      throw ConfigError("visual stage " + std::to_string(s) +
                        ": prompt/global-transform lists do not match block count");
    }
    x = st.embed(x);
    for (std::size_t b = 0; b < st.blocks.size(); ++b) {
      x = epa_prompt_forward(st.blocks[b], st.prompts[b], st.gpts[b], x);
    }
  }
  return x;
}

Tensor VisualEncoder::operator()(const Tensor& volume) const {
  if (volume.rank() != 3 || volume.dim(0) != cfg_.volume[0] || volume.dim(1) != cfg_.volume[1] ||
      volume.dim(2) != cfg_.volume[2]) {
    throw ShapeError("volume " + shape_str(volume.shape()) + " does not match configured " +
                     shape_str({cfg_.volume[0], cfg_.volume[1], cfg_.volume[2]}));
  }
  return visual_encoder_forward(stages_, volume);
}

}  // namespace vapf
