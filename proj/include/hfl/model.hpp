#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hfl/parameters.hpp"
#include "hfl/tensor.hpp"

namespace hfl {

enum class LayerKind {
  dense,
  conv1d,
  depthwise_separable_conv1d,
  dropout,
  activation,
  global_average_pool,
};

enum class Activation { linear, relu };

const char* layer_kind_name(LayerKind kind);

// One layer of the classifier. Convolutional kinds operate on {B, C, L}
// activations; dense on {B, F}. A rank-2 batch entering a conv layer with
// in_channels == 1 is viewed as a 1-channel sequence {B, 1, F}.
struct LayerSpec {
  LayerKind kind;
  std::string name;

  Index in_channels = 0;   // conv kinds
  Index out_channels = 0;  // conv kinds
  Index kernel = 0;        // conv kinds; odd, >= 1
  Index in_features = 0;   // dense
  Index out_features = 0;  // dense
  Activation act = Activation::linear;  // conv kinds and `activation`
  Scalar dropout_p = 0.0;  // dropout; 0 <= p < 1

  static LayerSpec Dense(Index in, Index out, std::string name = "");
  static LayerSpec Conv1d(Index in_ch, Index out_ch, Index kernel,
                          Activation act, std::string name = "");
  static LayerSpec DepthwiseSeparable(Index in_ch, Index out_ch, Index kernel,
                                      Activation act, std::string name = "");
  static LayerSpec Dropout(Scalar p, std::string name = "");
  static LayerSpec Act(Activation act, std::string name = "");
  static LayerSpec GlobalAveragePool(std::string name = "");
};

struct ModelSpec {
  Index input_width = 0;  // feature count of the incoming batch
  Index num_classes = 0;
  std::vector<LayerSpec> layers;

  // Checks per-layer invariants and that the shape chain from input_width
  // ends at {B, num_classes}. Throws naming the offending layer.
  void validate() const;
};

// conv1d(1 -> filters, relu), then one depthwise-separable block per width,
// dropout, global average pool, dense head to num_classes.
ModelSpec default_classifier_spec(Index input_width, Index num_classes,
                                  Scalar dropout_p = 0.1, Index conv_filters = 16,
                                  const std::vector<Index>& block_widths = {32, 32},
                                  Index kernel = 3);

// Same stack with every depthwise-separable block replaced by a standard
// conv1d of identical channel widths; the heavyweight comparison model.
ModelSpec standard_conv_classifier_spec(Index input_width, Index num_classes,
                                        Scalar dropout_p = 0.1,
                                        Index conv_filters = 16,
                                        const std::vector<Index>& block_widths = {32, 32},
                                        Index kernel = 3);

// Exact trainable parameter count (weights + biases).
std::int64_t param_count(const ModelSpec& spec);
std::int64_t layer_param_count(const LayerSpec& layer);

// Seeded Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases.
// Each layer draws from its own derived stream.
ModelParameters init_parameters(const ModelSpec& spec, std::uint64_t seed);

// Per-layer caches recorded by a training-mode forward pass.
struct ForwardTrace {
  std::vector<Tensor> inputs;   // input as seen by each layer
  std::vector<Tensor> hiddens;  // depthwise intermediate for ds-conv layers
  std::vector<Tensor> outputs;  // post-activation output of each layer
  std::vector<Vector> masks;    // scaled dropout masks
};

// Runs the layer stack on a {B, input_width} batch and returns
// {B, num_classes} logits. `seed` drives dropout masks; `trace`, when given,
// records what backward() needs.
Tensor forward(const ModelSpec& spec, const ModelParameters& params,
               const Tensor& batch, bool training = false,
               std::uint64_t seed = 0, ForwardTrace* trace = nullptr);

// Reverse pass over a recorded trace. Returns gradients congruent to
// `params`; activation gradients are left in the trace tensors' grad buffers.
ModelParameters backward(const ModelSpec& spec, const ModelParameters& params,
                         ForwardTrace& trace, const Tensor& dlogits);

}  // namespace hfl
