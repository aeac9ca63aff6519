#include "wildfusion/model.hpp"

#include <algorithm>

namespace wildfusion {

const char* fusion_mode_name(FusionMode mode) {
  switch (mode) {
    case FusionMode::kImageOnly: return "image_only";
    case FusionMode::kMetadataOnly: return "metadata_only";
    case FusionMode::kLateFusion: return "late_fusion";
    case FusionMode::kEarlyFusion: return "early_fusion";
    case FusionMode::kCbam: return "cbam";
    case FusionMode::kMcbam: return "mcbam";
  }
  return "unknown";
}

FusionMode fusion_mode_from_name(const std::string& name) {
  if (name == "image_only") return FusionMode::kImageOnly;
  if (name == "metadata_only") return FusionMode::kMetadataOnly;
  if (name == "late_fusion") return FusionMode::kLateFusion;
  if (name == "early_fusion") return FusionMode::kEarlyFusion;
  if (name == "cbam") return FusionMode::kCbam;
  if (name == "mcbam") return FusionMode::kMcbam;
  throw DataError("unknown fusion mode '" + name + "'");
}

void FusionModelConfig::validate() const {
  if (num_classes < 2) throw DataError("model config: num_classes must be >= 2");
  if (mode_consumes_metadata(fusion_mode) && metadata_dim <= 0) {
    throw DataError(std::string("model config: fusion mode ") +
                    fusion_mode_name(fusion_mode) +
                    " requires metadata_dim > 0");
  }
  if (fusion_mode != FusionMode::kMetadataOnly) {
    if (stage_channel_widths.empty()) {
      throw DataError("model config: stage_channel_widths must be non-empty");
    }
    if (stage_channel_widths.size() != blocks_per_stage.size()) {
      throw DataError("model config: stage_channel_widths has " +
                      std::to_string(stage_channel_widths.size()) +
                      " stages but blocks_per_stage has " +
                      std::to_string(blocks_per_stage.size()));
    }
    for (int w : stage_channel_widths) {
      if (w < 1) throw DataError("model config: non-positive stage width");
    }
    for (int b : blocks_per_stage) {
      if (b < 1) throw DataError("model config: non-positive block count");
    }
    if (input_image_side < 1 || input_channels < 1) {
      throw DataError("model config: bad input dimensions");
    }
    // Spatial size must survive the stem pool and the stage strides.
    int side = input_image_side;
    if (stem_pool) side = (side - 2) / 2 + 1;
    for (std::size_t i = 1; i < stage_channel_widths.size(); ++i) {
      side = (side + 1) / 2;
    }
    if (side < 1) {
      throw DataError("model config: input side " +
                      std::to_string(input_image_side) +
                      " too small for the trunk depth");
    }
    for (int s : early_fusion_stages) {
      if (s < 0 || s >= static_cast<int>(stage_channel_widths.size())) {
        throw DataError("model config: early_fusion_stages index " +
                        std::to_string(s) + " out of range");
      }
    }
    if (cbam_reduction < 1) {
      throw DataError("model config: cbam_reduction must be >= 1");
    }
  }
  if (fusion_mode == FusionMode::kLateFusion) {
    const auto widths = resolved_late_head_widths();
    if (widths.size() != 3) {
      throw DataError("model config: late_head_widths must have exactly 3 layers");
    }
    if (widths[2] != num_classes) {
      throw DataError("model config: last late head width " +
                      std::to_string(widths[2]) + " must equal num_classes " +
                      std::to_string(num_classes));
    }
    for (int w : widths) {
      if (w < 1) throw DataError("model config: non-positive late head width");
    }
  }
  if (fusion_mode == FusionMode::kMetadataOnly) {
    if (mlp_hidden.empty()) {
      throw DataError("model config: mlp_hidden must be non-empty");
    }
    for (int h : mlp_hidden) {
      if (h < 1) throw DataError("model config: non-positive mlp hidden width");
    }
  }
}

std::vector<int> FusionModelConfig::resolved_late_head_widths() const {
  if (!late_head_widths.empty()) return late_head_widths;
  return {256, 128, num_classes};
}

bool FusionModelConfig::early_fusion_in_stage(int stage) const {
  if (early_fusion_stages.empty()) return true;
  return std::find(early_fusion_stages.begin(), early_fusion_stages.end(),
                   stage) != early_fusion_stages.end();
}

std::string FusionModelConfig::canonical_string() const {
  std::string s = "fusion_mode=";
  s += fusion_mode_name(fusion_mode);
  auto append_list = [&s](const char* key, const std::vector<int>& v) {
    s += ";";
    s += key;
    s += "=";
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(v[i]);
    }
  };
  s += ";input_image_side=" + std::to_string(input_image_side);
  s += ";input_channels=" + std::to_string(input_channels);
  append_list("stage_channel_widths", stage_channel_widths);
  append_list("blocks_per_stage", blocks_per_stage);
  s += ";metadata_dim=" + std::to_string(metadata_dim);
  s += ";num_classes=" + std::to_string(num_classes);
  append_list("late_head_widths", resolved_late_head_widths());
  append_list("mlp_hidden", mlp_hidden);
  s += ";cbam_reduction=" + std::to_string(cbam_reduction);
  s += ";stem_pool=" + std::to_string(stem_pool ? 1 : 0);
  append_list("early_fusion_stages", early_fusion_stages);
  return s;
}

std::string FusionModelConfig::digest() const {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a 64
  for (char c : canonical_string()) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

template <typename S>
FusionModel<S> FusionModel<S>::build(const FusionModelConfig& config,
                                     std::uint64_t seed) {
  config.validate();
  FusionModel<S> model;
  model.config_ = config;
  Rng rng(seed);

  if (config.fusion_mode == FusionMode::kMetadataOnly) {
    Eigen::Index in = config.metadata_dim;
    for (int hidden : config.mlp_hidden) {
      layers::Linear<S> fc;
      fc.init(in, hidden, rng);
      model.meta_mlp_.push_back(fc);
      in = hidden;
    }
    layers::Linear<S> out;
    out.init(in, config.num_classes, rng);
    model.meta_mlp_.push_back(out);
    return model;
  }

  const bool gates = config.fusion_mode == FusionMode::kEarlyFusion;
  const bool attn = config.fusion_mode == FusionMode::kCbam ||
                    config.fusion_mode == FusionMode::kMcbam;
  const bool attn_meta = config.fusion_mode == FusionMode::kMcbam;

  model.stem_conv_.init(config.input_channels, config.stage_channel_widths[0],
                        3, 1, 1, rng);
  model.stem_bn_.init(config.stage_channel_widths[0]);

  Eigen::Index in_ch = config.stage_channel_widths[0];
  model.stages_.resize(config.stage_channel_widths.size());
  for (std::size_t stage = 0; stage < config.stage_channel_widths.size();
       ++stage) {
    const Eigen::Index mid = config.stage_channel_widths[stage];
    for (int b = 0; b < config.blocks_per_stage[stage]; ++b) {
      const Eigen::Index stride = (stage > 0 && b == 0) ? 2 : 1;
      layers::Bottleneck<S> block;
      block.init(in_ch, mid, stride,
                 gates && config.early_fusion_in_stage(static_cast<int>(stage)),
                 attn, attn_meta, config.metadata_dim, config.cbam_reduction,
                 rng);
      in_ch = mid * layers::Bottleneck<S>::kExpansion;
      model.stages_[stage].push_back(std::move(block));
    }
  }
  const Eigen::Index feature_dim = in_ch;

  if (config.fusion_mode == FusionMode::kLateFusion) {
    const auto widths = config.resolved_late_head_widths();
    model.late_g1_.init(feature_dim + config.metadata_dim, widths[0], rng);
    model.late_g2_.init(widths[0], widths[1], rng);
    model.late_g3_.init(widths[1], widths[2], rng);
  } else {
    model.head_fc_.init(feature_dim, config.num_classes, rng);
  }
  return model;
}

template <typename S>
Tensor<S> FusionModel<S>::trunk_features(Tape<S>& tape,
                                         const Tensor<S>& images,
                                         const Tensor<S>* metadata,
                                         bool training) const {
  Tensor<S> x = stem_conv_.forward(tape, images);
  x = relu(tape, stem_bn_.forward(tape, x, training));
  if (config_.stem_pool) x = max_pool2d(tape, x, {2, 2});
  for (const auto& stage : stages_) {
    for (const auto& block : stage) {
      x = block.forward(tape, x, metadata, override_, training);
    }
  }
  return global_avg_pool(tape, x);  // [B, feature_dim]
}

template <typename S>
Tensor<S> FusionModel<S>::forward(Tape<S>& tape, const Tensor<S>* images,
                                  const Tensor<S>* metadata,
                                  bool training) const {
  const FusionMode mode = config_.fusion_mode;
  const Tensor<S>* meta = mode_consumes_metadata(mode) ? metadata : nullptr;
  if (mode_consumes_metadata(mode)) {
    if (meta == nullptr || !meta->defined()) {
      throw Error(std::string("forward: fusion mode ") +
                  fusion_mode_name(mode) + " requires metadata");
    }
    if (meta->rank() != 2 || meta->dim(1) != config_.metadata_dim) {
      throw ShapeError("forward: metadata must be [B," +
                       std::to_string(config_.metadata_dim) + "], got " +
                       shape_to_string(meta->shape()));
    }
  }

  if (mode == FusionMode::kMetadataOnly) {
    Tensor<S> x = *meta;
    for (std::size_t i = 0; i + 1 < meta_mlp_.size(); ++i) {
      x = relu(tape, meta_mlp_[i].forward(tape, x));
    }
    return meta_mlp_.back().forward(tape, x);
  }

  if (images == nullptr || !images->defined()) {
    throw Error(std::string("forward: fusion mode ") + fusion_mode_name(mode) +
                " requires images");
  }
  if (images->rank() != 4 || images->dim(1) != config_.input_channels ||
      images->dim(2) != config_.input_image_side ||
      images->dim(3) != config_.input_image_side) {
    throw ShapeError("forward: images must be [B," +
                     std::to_string(config_.input_channels) + "," +
                     std::to_string(config_.input_image_side) + "," +
                     std::to_string(config_.input_image_side) + "], got " +
                     shape_to_string(images->shape()));
  }
  if (meta != nullptr && meta->dim(0) != images->dim(0)) {
    throw ShapeError("forward: batch mismatch between images and metadata");
  }

  Tensor<S> features = trunk_features(tape, *images, meta, training);

  if (mode == FusionMode::kLateFusion) {
    // concat then three linear stages; the last stage emits raw logits.
    std::vector<Tensor<S>> parts = {features, *meta};
    Tensor<S> v = concat(tape, parts, 1);
    v = relu(tape, late_g1_.forward(tape, v));
    v = relu(tape, late_g2_.forward(tape, v));
    return late_g3_.forward(tape, v);
  }
  return head_fc_.forward(tape, features);
}

template <typename S>
NamedTensors<S> FusionModel<S>::named_state() const {
  NamedTensors<S> out;
  if (config_.fusion_mode == FusionMode::kMetadataOnly) {
    for (std::size_t i = 0; i < meta_mlp_.size(); ++i) {
      const std::string name = i + 1 == meta_mlp_.size()
                                   ? "meta.out"
                                   : "meta.fc" + std::to_string(i);
      meta_mlp_[i].collect(name, out);
    }
    return out;
  }
  stem_conv_.collect("stem.conv", out);
  stem_bn_.collect("stem.bn", out);
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    for (std::size_t b = 0; b < stages_[s].size(); ++b) {
      stages_[s][b].collect("s" + std::to_string(s) + ".b" + std::to_string(b),
                            out);
    }
  }
  if (config_.fusion_mode == FusionMode::kLateFusion) {
    late_g1_.collect("head.g1", out);
    late_g2_.collect("head.g2", out);
    late_g3_.collect("head.g3", out);
  } else {
    head_fc_.collect("head.fc", out);
  }
  return out;
}

template <typename S>
std::vector<Tensor<S>> FusionModel<S>::parameters() const {
  std::vector<Tensor<S>> params;
  for (auto& [name, tensor] : named_state()) {
    if (tensor.requires_grad()) params.push_back(tensor);
  }
  return params;
}

template <typename S>
void FusionModel<S>::load_state(const std::vector<TensorEntry>& entries) {
  auto state = named_state();
  std::map<std::string, Tensor<S>> by_name(state.begin(), state.end());
  std::size_t loaded = 0;
  for (const auto& e : entries) {
    auto it = by_name.find(e.name);
    if (it == by_name.end()) {
      throw DataError("load_state: model has no tensor named '" + e.name + "'");
    }
    from_entry(e, it->second);
    ++loaded;
  }
  if (loaded != by_name.size()) {
    throw DataError("load_state: checkpoint provides " +
                    std::to_string(loaded) + " of " +
                    std::to_string(by_name.size()) + " model tensors");
  }
}

template <typename S>
void FusionModel<S>::copy_matching_state(const FusionModel& source) {
  auto src = source.named_state();
  std::map<std::string, Tensor<S>> by_name(src.begin(), src.end());
  for (auto& [name, tensor] : named_state()) {
    auto it = by_name.find(name);
    if (it != by_name.end()) {
      tensor.values() = it->second.values();
    }
  }
}

template <typename S>
std::vector<std::pair<std::string, Tensor<S>>> FusionModel<S>::snapshot_state()
    const {
  std::vector<std::pair<std::string, Tensor<S>>> snap;
  for (const auto& [name, tensor] : named_state()) {
    snap.emplace_back(name, tensor.clone());
  }
  return snap;
}

template <typename S>
void FusionModel<S>::restore_state(
    const std::vector<std::pair<std::string, Tensor<S>>>& snap) {
  auto state = named_state();
  std::map<std::string, Tensor<S>> by_name(state.begin(), state.end());
  for (const auto& [name, tensor] : snap) {
    by_name.at(name).values() = tensor.values();
  }
}

template class FusionModel<float>;
template class FusionModel<double>;

}  // namespace wildfusion
