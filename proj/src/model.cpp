// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the scatterformer authors
#include "sf/model.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "sf/blob.hpp"
#include "sf/fft.hpp"
#include "sf/rng.hpp"

namespace sf::model {

Variant variant_from_string(const std::string& name) {
  if (name == "Proto" || name == "proto") return Variant::Proto;
  if (name == "ConvScat1" || name == "convscat1") return Variant::ConvScat1;
  if (name == "ConvScat2" || name == "convscat2") return Variant::ConvScat2;
  if (name == "ScatterFormer" || name == "scatterformer") return Variant::ScatterFormer;
  if (name == "FourierFormer" || name == "fourierformer") return Variant::FourierFormer;
  throw std::invalid_argument("unknown model variant: " + name);
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::Proto: return "Proto";
    case Variant::ConvScat1: return "ConvScat1";
    case Variant::ConvScat2: return "ConvScat2";
    case Variant::ScatterFormer: return "ScatterFormer";
    case Variant::FourierFormer: return "FourierFormer";
  }
  return "?";
}

ModelConfig ModelConfig::preset(Variant v, const std::string& scale) {
  ModelConfig cfg;
  cfg.variant = v;
  cfg.scale = scale;
  if (scale == "toy") {
    cfg.stage_dims = {32, 64, 96, 160};
    cfg.stage_depths = {1, 1, 2, 1};
    cfg.heads = {2, 2, 4, 4};
    cfg.in_h = 96;
    cfg.in_w = 256;
  } else if (scale == "paper") {
    cfg.stage_dims = {64, 128, 320, 512};
    cfg.stage_depths = {2, 2, 6, 2};
    cfg.heads = {2, 4, 8, 8};
    cfg.in_h = 768;
    cfg.in_w = 256;
  } else {
    throw std::invalid_argument("unknown scale: " + scale);
  }
  cfg.validate();
  return cfg;
}

void ModelConfig::validate() const {
  for (int s = 0; s < 4; ++s) {
    if (stage_dims[static_cast<std::size_t>(s)] <= 0 ||
        stage_depths[static_cast<std::size_t>(s)] <= 0)
      throw std::invalid_argument("ModelConfig: dims and depths must be positive");
    if (stage_dims[static_cast<std::size_t>(s)] % (2 * heads[static_cast<std::size_t>(s)]) != 0)
      throw std::invalid_argument("ModelConfig: widths must be divisible by 2*heads");
  }
  if (in_h % 4 != 0 || in_w % 4 != 0)
    throw std::invalid_argument("ModelConfig: input dims must be divisible by 4");
  if (num_classes < 2) throw std::invalid_argument("ModelConfig: need at least 2 classes");
}

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

template <typename T>
ad::Var<T> make_param(ParamStore<T>& store, const std::string& name,
                      std::vector<std::int64_t> shape, std::uint64_t seed,
                      const char* init) {
  Tensor<T> t(std::move(shape));
  Rng rng = Rng::derive(seed, {fnv1a(name)});
  if (std::string(init) == "trunc_normal") {
    for (auto& v : t.data) v = static_cast<T>(rng.truncated_normal(0.02));
  } else if (std::string(init) == "ones") {
    for (auto& v : t.data) v = T(1);
  }  // "zeros": already zero
  auto var = ad::leaf(std::move(t), /*requires_grad=*/true, name);
  store.params.emplace(name, var);
  return var;
}

enum class MergeKind { Conv, Scatter, Lfu };

MergeKind merge_kind(Variant v, int merge_index) {
  switch (v) {
    case Variant::ScatterFormer: return MergeKind::Scatter;
    case Variant::ConvScat2: return merge_index == 1 ? MergeKind::Scatter : MergeKind::Conv;
    case Variant::FourierFormer: return MergeKind::Lfu;
    default: return MergeKind::Conv;
  }
}

enum class StemKind { Conv, Scatter, Lfu };

StemKind stem_kind(Variant v) {
  switch (v) {
    case Variant::Proto: return StemKind::Conv;
    case Variant::FourierFormer: return StemKind::Lfu;
    default: return StemKind::Scatter;
  }
}

}  // namespace

template <typename T>
struct Model<T>::Stage {};

template <typename T>
const wavelets::FilterBank<T>& Model<T>::bank_for(const std::string& key, int J, int L,
                                                  std::int64_t h, std::int64_t w) {
  auto it = banks_.find(key);
  if (it == banks_.end()) {
    auto bank = std::make_shared<wavelets::FilterBank<T>>(
        wavelets::build_filter_bank<T>(J, L, fft::next_pow2(h), fft::next_pow2(w)));
    it = banks_.emplace(key, std::move(bank)).first;
  }
  return *it->second;
}

template <typename T>
ad::Var<T> Model<T>::param(const std::string& name) {
  auto it = params_.params.find(name);
  if (it == params_.params.end())
    throw std::logic_error("unknown parameter: " + name);
  return it->second;
}

template <typename T>
Model<T>::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  auto P = [&](const std::string& name, std::vector<std::int64_t> shape,
               const char* init = "trunc_normal") {
    return make_param(params_, name, std::move(shape), seed, init);
  };
  auto bn_params = [&](const std::string& prefix, std::int64_t c) {
    P(prefix + ".g", {c}, "ones");
    P(prefix + ".b", {c}, "zeros");
    params_.bn.emplace(prefix, ad::BnState<T>{});
  };

  const std::int64_t D0 = cfg_.stage_dims[0];
  const std::int64_t C = cfg_.in_channels;
  std::int64_t h = cfg_.in_h / 4, w = cfg_.in_w / 4;

  switch (stem_kind(cfg_.variant)) {
    case StemKind::Conv:
      P("stem.conv.w", {D0, C, 4, 4});
      break;
    case StemKind::Scatter: {
      const int maps = ad::scatter_embed_maps(cfg_.stem_J, cfg_.stem_L, cfg_.stem_order);
      P("stem.proj.w", {D0, C * maps, 1, 1});
      bank_for("stem", cfg_.stem_J, cfg_.stem_L, cfg_.in_h, cfg_.in_w);
      break;
    }
    case StemKind::Lfu:
      P("stem.lfu.re", {C, C});
      P("stem.lfu.im", {C, C});
      P("stem.conv.w", {D0, C, 4, 4});
      break;
  }
  bn_params("stem.bn", D0);

  for (int s = 0; s < 4; ++s) {
    const std::int64_t D = cfg_.stage_dims[static_cast<std::size_t>(s)];
    const std::int64_t Ch = D / 2;
    const std::string sp = "s" + std::to_string(s + 1);
    for (int b = 0; b < cfg_.stage_depths[static_cast<std::size_t>(s)]; ++b) {
      const std::string bp = sp + ".b" + std::to_string(b);
      bn_params(bp + ".attn.bn", D);
      if (cfg_.variant == Variant::Proto) {
        P(bp + ".xca.qkv.w", {3 * D, D, 1, 1});
        P(bp + ".xca.proj.w", {D, D, 1, 1});
        P(bp + ".xca.proj.b", {D}, "zeros");
        P(bp + ".xca.tau", {cfg_.heads[static_cast<std::size_t>(s)]}, "zeros");
      } else {
        if (cfg_.variant == Variant::FourierFormer) {
          P(bp + ".faa.lfu.re", {Ch, Ch});
          P(bp + ".faa.lfu.im", {Ch, Ch});
          P(bp + ".faa.qconv.w", {Ch, Ch, 3, 3});
        } else {
          const int maps = ad::scatter_embed_maps(cfg_.faa_J, cfg_.faa_L, 1);
          P(bp + ".faa.qproj.w", {Ch, Ch * maps, 1, 1});
          // FAA banks run on the (even-padded) stage grid
          const std::int64_t ph = h % 2 ? h + 1 : h, pw = w % 2 ? w + 1 : w;
          bank_for("faa" + std::to_string(s + 1), cfg_.faa_J, cfg_.faa_L, ph, pw);
        }
        bn_params(bp + ".faa.qbn", Ch);
        P(bp + ".faa.kconv.w", {Ch, Ch, 3, 3});
        bn_params(bp + ".faa.kbn", Ch);
        P(bp + ".faa.vconv.w", {Ch, Ch, 3, 3});
        bn_params(bp + ".faa.vbn", Ch);
        P(bp + ".faa.htau", {cfg_.heads[static_cast<std::size_t>(s)]}, "zeros");
        P(bp + ".faa.low.w", {3 * Ch, Ch, 3, 3});
        bn_params(bp + ".faa.lowbn", 3 * Ch);
        P(bp + ".faa.ltau", {cfg_.heads[static_cast<std::size_t>(s)]}, "zeros");
        P(bp + ".faa.fuse.w", {D, D, 1, 1});
        P(bp + ".faa.fuse.b", {D}, "zeros");
        P(bp + ".faa.lepe.w", {D, 1, 3, 3});
      }
      bn_params(bp + ".mlp.bn", D);
      const auto hidden = static_cast<std::int64_t>(cfg_.mlp_ratio * static_cast<double>(D));
      P(bp + ".mlp.fc1.w", {hidden, D, 1, 1});
      P(bp + ".mlp.fc1.b", {hidden}, "zeros");
      P(bp + ".mlp.fc2.w", {D, hidden, 1, 1});
      P(bp + ".mlp.fc2.b", {D}, "zeros");
    }
    if (s < 3) {
      const std::int64_t Dn = cfg_.stage_dims[static_cast<std::size_t>(s + 1)];
      const std::string mp = "merge" + std::to_string(s + 1);
      switch (merge_kind(cfg_.variant, s + 1)) {
        case MergeKind::Conv:
          P(mp + ".conv.w", {Dn, D, 3, 3});
          break;
        case MergeKind::Scatter: {
          const int maps = ad::scatter_embed_maps(cfg_.merge_J, cfg_.merge_L, 1);
          P(mp + ".proj.w", {Dn, D * maps, 1, 1});
          bank_for(mp, cfg_.merge_J, cfg_.merge_L, h, w);
          break;
        }
        case MergeKind::Lfu:
          P(mp + ".lfu.re", {D, D});
          P(mp + ".lfu.im", {D, D});
          P(mp + ".conv.w", {Dn, D, 3, 3});
          break;
      }
      bn_params(mp + ".bn", Dn);
      h = (h + 1) / 2;
      w = (w + 1) / 2;
    }
  }
  bn_params("head.bn", cfg_.stage_dims[3]);
  P("head.fc.w", {cfg_.num_classes, cfg_.stage_dims[3]});
  P("head.fc.b", {cfg_.num_classes}, "zeros");
}

template <typename T>
ad::Var<T> Model<T>::act(ad::Tape<T>& tape, ad::Var<T> x) {
  return cfg_.use_swish ? ad::swish(tape, x) : ad::mish(tape, x);
}

template <typename T>
ad::Var<T> Model<T>::block_forward(ad::Tape<T>& tape, ad::Var<T> x, int stage, int block,
                                   bool train, attn::FaaCapture<T>* cap) {
  const std::string bp = "s" + std::to_string(stage + 1) + ".b" + std::to_string(block);
  const int heads = cfg_.heads[static_cast<std::size_t>(stage)];
  const std::int64_t D = cfg_.stage_dims[static_cast<std::size_t>(stage)];

  auto u = ad::batch_norm(tape, x, param(bp + ".attn.bn.g"), param(bp + ".attn.bn.b"),
                          params_.bn.at(bp + ".attn.bn"), train);
  ad::Var<T> y;
  if (cfg_.variant == Variant::Proto) {
    auto qkv = ad::conv2d(tape, u, param(bp + ".xca.qkv.w"), ad::Var<T>{}, 1, 1, 0, 0, 1);
    auto q = ad::slice_channels(tape, qkv, 0, D);
    auto k = ad::slice_channels(tape, qkv, D, 2 * D);
    auto v = ad::slice_channels(tape, qkv, 2 * D, 3 * D);
    y = attn::xca(tape, q, k, v, param(bp + ".xca.tau"), heads);
    y = ad::conv2d(tape, y, param(bp + ".xca.proj.w"), param(bp + ".xca.proj.b"), 1, 1, 0, 0, 1);
  } else {
    attn::FaaWeights<T> w;
    if (cfg_.variant == Variant::FourierFormer) {
      w.lfu_re = param(bp + ".faa.lfu.re");
      w.lfu_im = param(bp + ".faa.lfu.im");
      w.q_conv_w = param(bp + ".faa.qconv.w");
    } else {
      w.q_proj_w = param(bp + ".faa.qproj.w");
    }
    w.q_bn_g = param(bp + ".faa.qbn.g");
    w.q_bn_b = param(bp + ".faa.qbn.b");
    w.k_conv_w = param(bp + ".faa.kconv.w");
    w.k_bn_g = param(bp + ".faa.kbn.g");
    w.k_bn_b = param(bp + ".faa.kbn.b");
    w.v_conv_w = param(bp + ".faa.vconv.w");
    w.v_bn_g = param(bp + ".faa.vbn.g");
    w.v_bn_b = param(bp + ".faa.vbn.b");
    w.high_tau = param(bp + ".faa.htau");
    w.low_conv_w = param(bp + ".faa.low.w");
    w.low_bn_g = param(bp + ".faa.lowbn.g");
    w.low_bn_b = param(bp + ".faa.lowbn.b");
    w.low_tau = param(bp + ".faa.ltau");
    w.fuse_w = param(bp + ".faa.fuse.w");
    w.fuse_b = param(bp + ".faa.fuse.b");
    w.lepe_w = param(bp + ".faa.lepe.w");
    w.q_bn = &params_.bn.at(bp + ".faa.qbn");
    w.k_bn = &params_.bn.at(bp + ".faa.kbn");
    w.v_bn = &params_.bn.at(bp + ".faa.vbn");
    w.low_bn = &params_.bn.at(bp + ".faa.lowbn");

    const std::int64_t H = u->val.shape[2], W = u->val.shape[3];
    const int pad_b = H % 2 ? 1 : 0, pad_r = W % 2 ? 1 : 0;
    auto uin = (pad_b || pad_r) ? ad::pad_hw(tape, u, 0, pad_b, 0, pad_r) : u;
    const attn::QMode mode =
        cfg_.variant == Variant::FourierFormer ? attn::QMode::Lfu : attn::QMode::Scatter;
    static const wavelets::FilterBank<T> no_bank{};  // LFU mode never reads it
    const wavelets::FilterBank<T>& bank =
        mode == attn::QMode::Scatter ? *banks_.at("faa" + std::to_string(stage + 1)) : no_bank;
    y = attn::faa(tape, uin, w, bank, heads, mode, train, cap);
    if (pad_b || pad_r) y = ad::crop_hw(tape, y, 0, 0, H, W);
  }
  x = ad::add(tape, x, y);

  auto u2 = ad::batch_norm(tape, x, param(bp + ".mlp.bn.g"), param(bp + ".mlp.bn.b"),
                           params_.bn.at(bp + ".mlp.bn"), train);
  auto hdn = ad::conv2d(tape, u2, param(bp + ".mlp.fc1.w"), param(bp + ".mlp.fc1.b"), 1, 1, 0, 0, 1);
  hdn = act(tape, hdn);
  hdn = ad::conv2d(tape, hdn, param(bp + ".mlp.fc2.w"), param(bp + ".mlp.fc2.b"), 1, 1, 0, 0, 1);
  return ad::add(tape, x, hdn);
}

template <typename T>
ad::Var<T> Model<T>::forward(ad::Tape<T>& tape, const Tensor<T>& batch, bool train,
                             ForwardCapture<T>* capture) {
  if (batch.rank() != 4 || batch.shape[1] != cfg_.in_channels ||
      batch.shape[2] != cfg_.in_h || batch.shape[3] != cfg_.in_w)
    throw std::invalid_argument("forward: batch shape " + shape_str(batch.shape) +
                                " does not match the model input " +
                                shape_str({-1, cfg_.in_channels, cfg_.in_h, cfg_.in_w}));
  auto x = ad::leaf(batch, false, "input");

  switch (stem_kind(cfg_.variant)) {
    case StemKind::Conv:
      x = ad::conv2d(tape, x, param("stem.conv.w"), ad::Var<T>{}, 4, 4, 0, 0, 1);
      break;
    case StemKind::Scatter: {
      auto e = ad::scatter_embed(tape, x, *banks_.at("stem"), cfg_.stem_order);
      x = ad::conv2d(tape, e, param("stem.proj.w"), ad::Var<T>{}, 1, 1, 0, 0, 1);
      break;
    }
    case StemKind::Lfu: {
      auto m = ad::lfu(tape, x, param("stem.lfu.re"), param("stem.lfu.im"));
      x = ad::conv2d(tape, m, param("stem.conv.w"), ad::Var<T>{}, 4, 4, 0, 0, 1);
      break;
    }
  }
  x = ad::batch_norm(tape, x, param("stem.bn.g"), param("stem.bn.b"), params_.bn.at("stem.bn"),
                     train);
  ad::check_finite(x, "stem");

  for (int s = 0; s < 4; ++s) {
    const int depth = cfg_.stage_depths[static_cast<std::size_t>(s)];
    for (int b = 0; b < depth; ++b) {
      attn::FaaCapture<T>* cap = nullptr;
      if (capture && capture->stage == s + 1 && b == depth - 1 && cfg_.variant != Variant::Proto)
        cap = &capture->faa;
      x = block_forward(tape, x, s, b, train, cap);
      ad::check_finite(x, "s" + std::to_string(s + 1) + ".b" + std::to_string(b));
    }
    if (capture && capture->stage == s + 1) {
      capture->stage_output = x->val;
      capture->has_faa = cfg_.variant != Variant::Proto;
    }
    if (s < 3) {
      const std::string mp = "merge" + std::to_string(s + 1);
      switch (merge_kind(cfg_.variant, s + 1)) {
        case MergeKind::Conv:
          x = ad::conv2d(tape, x, param(mp + ".conv.w"), ad::Var<T>{}, 2, 2, 1, 1, 1);
          break;
        case MergeKind::Scatter: {
          auto e = ad::scatter_embed(tape, x, *banks_.at(mp), 1);
          x = ad::conv2d(tape, e, param(mp + ".proj.w"), ad::Var<T>{}, 1, 1, 0, 0, 1);
          break;
        }
        case MergeKind::Lfu: {
          auto m = ad::lfu(tape, x, param(mp + ".lfu.re"), param(mp + ".lfu.im"));
          x = ad::conv2d(tape, m, param(mp + ".conv.w"), ad::Var<T>{}, 2, 2, 1, 1, 1);
          break;
        }
      }
      x = ad::batch_norm(tape, x, param(mp + ".bn.g"), param(mp + ".bn.b"),
                         params_.bn.at(mp + ".bn"), train);
      ad::check_finite(x, mp);
    }
  }

  x = ad::batch_norm(tape, x, param("head.bn.g"), param("head.bn.b"), params_.bn.at("head.bn"),
                     train);
  auto pooled = ad::global_avg_pool(tape, x);
  auto logits = ad::linear(tape, pooled, param("head.fc.w"), param("head.fc.b"));
  ad::check_finite(logits, "head");
  return logits;
}

// ---- checkpoints -------------------------------------------------------------

namespace {

std::string sanitize(const std::string& name) {
  std::string out = name;
  for (char& c : out)
    if (c == '/' || c == '.') c = '_';
  return out;
}

}  // namespace

template <typename T>
void checkpoint_save(const Model<T>& model, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "checkpoint-v1";
  manifest["variant"] = variant_name(model.config().variant);
  manifest["scale"] = model.config().scale;
  manifest["dtype"] = std::is_same_v<T, float> ? "f32" : "f64";
  auto& plist = manifest["params"] = nlohmann::json::array();
  for (const auto& [name, var] : model.params().params) {
    const std::string file = sanitize(name) + ".blob";
    blob::save(dir + "/" + file, var->val);
    plist.push_back({{"name", name}, {"file", file}, {"shape", var->val.shape}});
  }
  auto& blist = manifest["bn"] = nlohmann::json::array();
  for (const auto& [name, st] : model.params().bn) {
    const std::string fmean = sanitize(name) + "_mean.blob";
    const std::string fvar = sanitize(name) + "_var.blob";
    Tensor<T> mean = st.running_mean.data.empty() ? Tensor<T>({1}) : st.running_mean;
    Tensor<T> var = st.running_var.data.empty() ? Tensor<T>({1}, T(1)) : st.running_var;
    blob::save(dir + "/" + fmean, mean);
    blob::save(dir + "/" + fvar, var);
    blist.push_back({{"name", name},
                     {"mean", fmean},
                     {"var", fvar},
                     {"batches_seen", st.batches_seen}});
  }
  blob::write_file_atomic(dir + "/manifest.json", manifest.dump(2));
}

template <typename T>
void checkpoint_load(Model<T>& model, const std::string& dir) {
  std::ifstream f(dir + "/manifest.json");
  if (!f) throw std::runtime_error("checkpoint manifest missing in " + dir);
  nlohmann::json manifest = nlohmann::json::parse(f);
  const std::string want_dtype = std::is_same_v<T, float> ? "f32" : "f64";
  if (manifest.at("dtype") != want_dtype)
    throw std::runtime_error("checkpoint dtype mismatch: expected " + want_dtype);

  std::size_t seen = 0;
  for (const auto& entry : manifest.at("params")) {
    const std::string name = entry.at("name");
    auto it = model.params().params.find(name);
    if (it == model.params().params.end())
      throw std::runtime_error("checkpoint parameter not in model: " + name);
    const std::string path = dir + "/" + entry.at("file").get<std::string>();
    if (!std::filesystem::exists(path))
      throw std::runtime_error("checkpoint blob missing for parameter " + name);
    Tensor<T> loaded = blob::load<T>(path);
    if (loaded.shape != it->second->val.shape)
      throw std::runtime_error("checkpoint shape mismatch for parameter " + name);
    it->second->val = std::move(loaded);
    ++seen;
  }
  if (seen != model.params().params.size())
    throw std::runtime_error("checkpoint is missing parameters");
  for (const auto& entry : manifest.at("bn")) {
    const std::string name = entry.at("name");
    auto it = model.params().bn.find(name);
    if (it == model.params().bn.end())
      throw std::runtime_error("checkpoint bn state not in model: " + name);
    it->second.running_mean = blob::load<T>(dir + "/" + entry.at("mean").get<std::string>());
    it->second.running_var = blob::load<T>(dir + "/" + entry.at("var").get<std::string>());
    it->second.batches_seen = entry.at("batches_seen");
  }
}

template class Model<float>;
template class Model<double>;
template struct ParamStore<float>;
template struct ParamStore<double>;
template void checkpoint_save<float>(const Model<float>&, const std::string&);
template void checkpoint_save<double>(const Model<double>&, const std::string&);
template void checkpoint_load<float>(Model<float>&, const std::string&);
template void checkpoint_load<double>(Model<double>&, const std::string&);

}  // namespace sf::model
