#include "hfl/model.hpp"

#include <random>

namespace hfl {

const char* layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv1d: return "conv1d";
    case LayerKind::depthwise_separable_conv1d:
      return "depthwise_separable_conv1d";
    case LayerKind::dropout: return "dropout";
    case LayerKind::activation: return "activation";
    case LayerKind::global_average_pool: return "global_average_pool";
  }
  return "?";
}

LayerSpec LayerSpec::Dense(Index in, Index out, std::string name) {
  LayerSpec l;
  l.kind = LayerKind::dense;
  l.in_features = in;
  l.out_features = out;
  l.name = std::move(name);
  return l;
}

LayerSpec LayerSpec::Conv1d(Index in_ch, Index out_ch, Index kernel,
                            Activation act, std::string name) {
  LayerSpec l;
  l.kind = LayerKind::conv1d;
  l.in_channels = in_ch;
  l.out_channels = out_ch;
  l.kernel = kernel;
  l.act = act;
  l.name = std::move(name);
  return l;
}

LayerSpec LayerSpec::DepthwiseSeparable(Index in_ch, Index out_ch, Index kernel,
                                        Activation act, std::string name) {
  LayerSpec l;
  l.kind = LayerKind::depthwise_separable_conv1d;
  l.in_channels = in_ch;
  l.out_channels = out_ch;
  l.kernel = kernel;
  l.act = act;
  l.name = std::move(name);
  return l;
}

LayerSpec LayerSpec::Dropout(Scalar p, std::string name) {
  LayerSpec l;
  l.kind = LayerKind::dropout;
  l.dropout_p = p;
  l.name = std::move(name);
  return l;
}

LayerSpec LayerSpec::Act(Activation act, std::string name) {
  LayerSpec l;
  l.kind = LayerKind::activation;
  l.act = act;
  l.name = std::move(name);
  return l;
}

LayerSpec LayerSpec::GlobalAveragePool(std::string name) {
  LayerSpec l;
  l.kind = LayerKind::global_average_pool;
  l.name = std::move(name);
  return l;
}

namespace {

bool is_conv(LayerKind k) {
  return k == LayerKind::conv1d || k == LayerKind::depthwise_separable_conv1d;
}

bool has_params(LayerKind k) { return k == LayerKind::dense || is_conv(k); }

[[noreturn]] void layer_error(const LayerSpec& layer, const std::string& msg) {
  throw StructuralError("layer '" + layer.name + "' (" +
                        layer_kind_name(layer.kind) + "): " + msg);
}

// Symbolic activation shape while walking the layer stack: {B, width} or
// {B, channels, length}.
struct ShapeState {
  bool rank3 = false;
  Index width = 0;     // rank-2
  Index channels = 0;  // rank-3
  Index length = 0;    // rank-3
};

ShapeState step_shape(const LayerSpec& layer, ShapeState s) {
  switch (layer.kind) {
    case LayerKind::dense:
      if (s.rank3)
        layer_error(layer, "dense layer on a {B,C,L} activation; pool first");
      if (s.width != layer.in_features)
        layer_error(layer, "input width " + std::to_string(s.width) +
                               ", expected " + std::to_string(layer.in_features));
      s.width = layer.out_features;
      return s;
    case LayerKind::conv1d:
    case LayerKind::depthwise_separable_conv1d:
      if (!s.rank3) {
        if (layer.in_channels != 1)
          layer_error(layer, "rank-2 input viewed as 1 channel, layer expects " +
                                 std::to_string(layer.in_channels));
        s.rank3 = true;
        s.channels = 1;
        s.length = s.width;
      } else if (s.channels != layer.in_channels) {
        layer_error(layer, "input channels " + std::to_string(s.channels) +
                               ", expected " + std::to_string(layer.in_channels));
      }
      s.channels = layer.out_channels;
      return s;
    case LayerKind::global_average_pool:
      if (!s.rank3) layer_error(layer, "pooling a rank-2 activation");
      s.rank3 = false;
      s.width = s.channels;
      return s;
    case LayerKind::dropout:
    case LayerKind::activation:
      return s;
  }
  return s;
}

void validate_layer(const LayerSpec& layer) {
  if (has_params(layer.kind) && layer.name.empty())
    throw StructuralError(std::string(layer_kind_name(layer.kind)) +
                          " layer needs a name");
  switch (layer.kind) {
    case LayerKind::dense:
      if (layer.in_features < 1 || layer.out_features < 1)
        layer_error(layer, "feature widths must be positive");
      break;
    case LayerKind::conv1d:
    case LayerKind::depthwise_separable_conv1d:
      if (layer.in_channels < 1 || layer.out_channels < 1)
        layer_error(layer, "channel counts must be positive");
      if (layer.kernel < 1 || layer.kernel % 2 == 0)
        layer_error(layer, "kernel size must be odd and >= 1, got " +
                               std::to_string(layer.kernel));
      break;
    case LayerKind::dropout:
      if (layer.dropout_p < 0.0 || layer.dropout_p >= 1.0)
        layer_error(layer, "dropout probability must be in [0,1), got " +
                               std::to_string(layer.dropout_p));
      break;
    default:
      break;
  }
}

}  // namespace

void ModelSpec::validate() const {
  if (input_width < 1) throw StructuralError("model input width must be positive");
  if (num_classes < 2) throw StructuralError("model needs >= 2 classes");
  ShapeState s;
  s.width = input_width;
  std::vector<std::string> names;
  for (const auto& layer : layers) {
    validate_layer(layer);
    if (has_params(layer.kind)) {
      for (const auto& n : names)
        if (n == layer.name)
          layer_error(layer, "duplicate layer name");
      names.push_back(layer.name);
    }
    s = step_shape(layer, s);
  }
  if (s.rank3)
    throw StructuralError("model output is {B,C,L}; a pool or dense head is missing");
  if (s.width != num_classes)
    throw StructuralError("model output width " + std::to_string(s.width) +
                          " does not match num_classes " +
                          std::to_string(num_classes));
}

ModelSpec default_classifier_spec(Index input_width, Index num_classes,
                                  Scalar dropout_p, Index conv_filters,
                                  const std::vector<Index>& block_widths,
                                  Index kernel) {
  ModelSpec spec;
  spec.input_width = input_width;
  spec.num_classes = num_classes;
  spec.layers.push_back(
      LayerSpec::Conv1d(1, conv_filters, kernel, Activation::relu, "conv1"));
  Index ch = conv_filters;
  for (std::size_t i = 0; i < block_widths.size(); ++i) {
    spec.layers.push_back(LayerSpec::DepthwiseSeparable(
        ch, block_widths[i], kernel, Activation::relu,
        "ds" + std::to_string(i + 1)));
    ch = block_widths[i];
  }
  spec.layers.push_back(LayerSpec::Dropout(dropout_p, "drop"));
  spec.layers.push_back(LayerSpec::GlobalAveragePool("pool"));
  spec.layers.push_back(LayerSpec::Dense(ch, num_classes, "head"));
  return spec;
}

ModelSpec standard_conv_classifier_spec(Index input_width, Index num_classes,
                                        Scalar dropout_p, Index conv_filters,
                                        const std::vector<Index>& block_widths,
                                        Index kernel) {
  ModelSpec spec = default_classifier_spec(input_width, num_classes, dropout_p,
                                           conv_filters, block_widths, kernel);
  for (auto& layer : spec.layers)
    if (layer.kind == LayerKind::depthwise_separable_conv1d)
      layer.kind = LayerKind::conv1d;
  return spec;
}

std::int64_t layer_param_count(const LayerSpec& layer) {
  switch (layer.kind) {
    case LayerKind::dense:
      return layer.in_features * layer.out_features + layer.out_features;
    case LayerKind::conv1d:
      return layer.kernel * layer.in_channels * layer.out_channels +
             layer.out_channels;
    case LayerKind::depthwise_separable_conv1d:
      // depthwise K-tap filter + bias per input channel, then 1x1 mix + bias
      return (layer.kernel * layer.in_channels + layer.in_channels) +
             (layer.in_channels * layer.out_channels + layer.out_channels);
    default:
      return 0;
  }
}

std::int64_t param_count(const ModelSpec& spec) {
  std::int64_t n = 0;
  for (const auto& layer : spec.layers) n += layer_param_count(layer);
  return n;
}

namespace {

Tensor glorot(std::vector<Index> shape, Index fan_in, Index fan_out, Rng& rng) {
  const Scalar a = std::sqrt(6.0 / static_cast<Scalar>(fan_in + fan_out));
  std::uniform_real_distribution<Scalar> dist(-a, a);
  Tensor t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t.values[i] = dist(rng);
  return t;
}

}  // namespace

ModelParameters init_parameters(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  ModelParameters params;
  std::uint64_t layer_index = 0;
  for (const auto& layer : spec.layers) {
    if (!has_params(layer.kind)) {
      ++layer_index;
      continue;
    }
    Rng rng(derive_seed(seed, "init", layer_index));
    switch (layer.kind) {
      case LayerKind::dense:
        params.entries.push_back(
            {layer.name,
             glorot({layer.in_features, layer.out_features}, layer.in_features,
                    layer.out_features, rng),
             Tensor({layer.out_features})});
        break;
      case LayerKind::conv1d:
        params.entries.push_back(
            {layer.name,
             glorot({layer.out_channels, layer.in_channels, layer.kernel},
                    layer.in_channels * layer.kernel,
                    layer.out_channels * layer.kernel, rng),
             Tensor({layer.out_channels})});
        break;
      case LayerKind::depthwise_separable_conv1d:
        params.entries.push_back(
            {layer.name + ".dw",
             glorot({layer.in_channels, layer.kernel}, layer.kernel,
                    layer.kernel, rng),
             Tensor({layer.in_channels})});
        params.entries.push_back(
            {layer.name + ".pw",
             glorot({layer.out_channels, layer.in_channels}, layer.in_channels,
                    layer.out_channels, rng),
             Tensor({layer.out_channels})});
        break;
      default:
        break;
    }
    ++layer_index;
  }
  return params;
}

namespace {

void apply_activation(Activation act, Vector& v) {
  if (act == Activation::relu) v = v.cwiseMax(0.0);
}

// d(relu)/dz from the post-activation output: out > 0 <=> z > 0.
void activation_backward(Activation act, const Vector& output, Vector& d) {
  if (act == Activation::relu)
    d = d.cwiseProduct((output.array() > 0.0).cast<Scalar>().matrix());
}

void check_entry(const LayerSpec& layer, const ParameterEntry& e,
                 const std::string& expect_name,
                 const std::vector<Index>& w_shape,
                 const std::vector<Index>& b_shape) {
  if (e.name != expect_name)
    layer_error(layer, "parameter entry '" + e.name + "', expected '" +
                           expect_name + "'");
  if (e.weights.shape != w_shape)
    layer_error(layer, "weight shape " + shape_string(e.weights.shape) +
                           ", expected " + shape_string(w_shape));
  if (e.biases.shape != b_shape)
    layer_error(layer, "bias shape " + shape_string(e.biases.shape) +
                           ", expected " + shape_string(b_shape));
}

// out[b,co,l] = sum_{ci,k} W[co,ci,k] * x[b,ci,l+k-P] + bias[co]
// (zero padding of (K-1)/2 keeps length)
void conv1d_forward(const Tensor& x, const Tensor& w, const Tensor& bias,
                    Tensor& out) {
  const Index B = x.dim(0), Ci = x.dim(1), L = x.dim(2);
  const Index Co = w.dim(0), K = w.dim(2);
  const Index P = (K - 1) / 2;
  for (Index b = 0; b < B; ++b) {
    for (Index co = 0; co < Co; ++co) {
      Scalar* o = out.data() + (b * Co + co) * L;
      for (Index l = 0; l < L; ++l) o[l] = bias.values[co];
      for (Index ci = 0; ci < Ci; ++ci) {
        const Scalar* xi = x.data() + (b * Ci + ci) * L;
        const Scalar* wk = w.data() + (co * Ci + ci) * K;
        for (Index k = 0; k < K; ++k) {
          const Index shift = k - P;
          const Index lo = std::max<Index>(0, -shift);
          const Index hi = std::min<Index>(L, L - shift);
          const Scalar wv = wk[k];
          for (Index l = lo; l < hi; ++l) o[l] += wv * xi[l + shift];
        }
      }
    }
  }
}

void conv1d_backward(const Tensor& x, const Tensor& w, const Tensor& d,
                     Tensor& dx, Tensor& dw, Tensor& db) {
  const Index B = x.dim(0), Ci = x.dim(1), L = x.dim(2);
  const Index Co = w.dim(0), K = w.dim(2);
  const Index P = (K - 1) / 2;
  for (Index b = 0; b < B; ++b) {
    for (Index co = 0; co < Co; ++co) {
      const Scalar* dd = d.data() + (b * Co + co) * L;
      for (Index l = 0; l < L; ++l) db.values[co] += dd[l];
      for (Index ci = 0; ci < Ci; ++ci) {
        const Scalar* xi = x.data() + (b * Ci + ci) * L;
        Scalar* dxi = dx.data() + (b * Ci + ci) * L;
        const Scalar* wk = w.data() + (co * Ci + ci) * K;
        Scalar* dwk = dw.data() + (co * Ci + ci) * K;
        for (Index k = 0; k < K; ++k) {
          const Index shift = k - P;
          const Index lo = std::max<Index>(0, -shift);
          const Index hi = std::min<Index>(L, L - shift);
          Scalar acc = 0.0;
          const Scalar wv = wk[k];
          for (Index l = lo; l < hi; ++l) {
            acc += dd[l] * xi[l + shift];
            dxi[l + shift] += dd[l] * wv;
          }
          dwk[k] += acc;
        }
      }
    }
  }
}

// Per-channel K-tap convolution with its own bias.
void depthwise_forward(const Tensor& x, const Tensor& w, const Tensor& bias,
                       Tensor& out) {
  const Index B = x.dim(0), C = x.dim(1), L = x.dim(2);
  const Index K = w.dim(1);
  const Index P = (K - 1) / 2;
  for (Index b = 0; b < B; ++b) {
    for (Index c = 0; c < C; ++c) {
      const Scalar* xi = x.data() + (b * C + c) * L;
      Scalar* o = out.data() + (b * C + c) * L;
      const Scalar* wk = w.data() + c * K;
      for (Index l = 0; l < L; ++l) o[l] = bias.values[c];
      for (Index k = 0; k < K; ++k) {
        const Index shift = k - P;
        const Index lo = std::max<Index>(0, -shift);
        const Index hi = std::min<Index>(L, L - shift);
        const Scalar wv = wk[k];
        for (Index l = lo; l < hi; ++l) o[l] += wv * xi[l + shift];
      }
    }
  }
}

void depthwise_backward(const Tensor& x, const Tensor& w, const Tensor& d,
                        Tensor& dx, Tensor& dw, Tensor& db) {
  const Index B = x.dim(0), C = x.dim(1), L = x.dim(2);
  const Index K = w.dim(1);
  const Index P = (K - 1) / 2;
  for (Index b = 0; b < B; ++b) {
    for (Index c = 0; c < C; ++c) {
      const Scalar* xi = x.data() + (b * C + c) * L;
      Scalar* dxi = dx.data() + (b * C + c) * L;
      const Scalar* dd = d.data() + (b * C + c) * L;
      const Scalar* wk = w.data() + c * K;
      Scalar* dwk = dw.data() + c * K;
      for (Index l = 0; l < L; ++l) db.values[c] += dd[l];
      for (Index k = 0; k < K; ++k) {
        const Index shift = k - P;
        const Index lo = std::max<Index>(0, -shift);
        const Index hi = std::min<Index>(L, L - shift);
        Scalar acc = 0.0;
        const Scalar wv = wk[k];
        for (Index l = lo; l < hi; ++l) {
          acc += dd[l] * xi[l + shift];
          dxi[l + shift] += dd[l] * wv;
        }
        dwk[k] += acc;
      }
    }
  }
}

// 1x1 channel mix: out[b,:,l] = Wp * h[b,:,l] + bp
void pointwise_forward(const Tensor& h, const Tensor& w, const Tensor& bias,
                       Tensor& out) {
  const Index B = h.dim(0), Ci = h.dim(1), L = h.dim(2);
  const Index Co = w.dim(0);
  ConstMatrixMap W(w.data(), Co, Ci);
  for (Index b = 0; b < B; ++b) {
    ConstMatrixMap H(h.data() + b * Ci * L, Ci, L);
    MatrixMap O(out.data() + b * Co * L, Co, L);
    O.noalias() = W * H;
    O.colwise() += ConstVectorMap(bias.data(), Co);
  }
}

void pointwise_backward(const Tensor& h, const Tensor& w, const Tensor& d,
                        Tensor& dh, Tensor& dw, Tensor& db) {
  const Index B = h.dim(0), Ci = h.dim(1), L = h.dim(2);
  const Index Co = w.dim(0);
  ConstMatrixMap W(w.data(), Co, Ci);
  MatrixMap dW(dw.data(), Co, Ci);
  for (Index b = 0; b < B; ++b) {
    ConstMatrixMap H(h.data() + b * Ci * L, Ci, L);
    ConstMatrixMap D(d.data() + b * Co * L, Co, L);
    MatrixMap dH(dh.data() + b * Ci * L, Ci, L);
    dW.noalias() += D * H.transpose();
    dH.noalias() = W.transpose() * D;
    VectorMap(db.data(), Co) += D.rowwise().sum();
  }
}

Tensor as_sequence(const Tensor& t) {
  // {B, F} viewed as a 1-channel sequence {B, 1, F}
  return Tensor({t.dim(0), 1, t.dim(1)}, t.values);
}

}  // namespace

Tensor forward(const ModelSpec& spec, const ModelParameters& params,
               const Tensor& batch, bool training, std::uint64_t seed,
               ForwardTrace* trace) {
  spec.validate();
  if (batch.rank() != 2)
    throw StructuralError("forward expects a {B, F} batch, got rank " +
                          std::to_string(batch.rank()));
  if (batch.dim(1) != spec.input_width)
    throw StructuralError("batch width " + std::to_string(batch.dim(1)) +
                          " does not match model input width " +
                          std::to_string(spec.input_width));
  if (batch.dim(0) < 1) throw ValidationError("empty batch");
  require_finite(batch.values, "forward input");

  const Index B = batch.dim(0);
  if (trace) {
    trace->inputs.clear();
    trace->hiddens.clear();
    trace->outputs.clear();
    trace->masks.clear();
  }

  Tensor cur = batch;
  std::size_t entry = 0;
  const auto next_entry = [&](const LayerSpec& layer) -> const ParameterEntry& {
    if (entry >= params.entries.size())
      layer_error(layer, "parameter entries exhausted");
    return params.entries[entry++];
  };

  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    const LayerSpec& layer = spec.layers[li];
    Tensor input = cur;
    Tensor hidden;
    Vector mask;
    Tensor out;

    switch (layer.kind) {
      case LayerKind::dense: {
        const auto& e = next_entry(layer);
        check_entry(layer, e, layer.name,
                    {layer.in_features, layer.out_features},
                    {layer.out_features});
        if (input.rank() != 2 || input.dim(1) != layer.in_features)
          layer_error(layer, "input shape " + shape_string(input.shape));
        out = Tensor({B, layer.out_features});
        out.mat().noalias() = input.mat() * e.weights.mat();
        out.mat().rowwise() +=
            ConstVectorMap(e.biases.data(), layer.out_features).transpose();
        break;
      }
      case LayerKind::conv1d: {
        const auto& e = next_entry(layer);
        check_entry(layer, e, layer.name,
                    {layer.out_channels, layer.in_channels, layer.kernel},
                    {layer.out_channels});
        if (input.rank() == 2 && layer.in_channels == 1)
          input = as_sequence(input);
        if (input.rank() != 3 || input.dim(1) != layer.in_channels)
          layer_error(layer, "input shape " + shape_string(input.shape));
        out = Tensor({B, layer.out_channels, input.dim(2)});
        conv1d_forward(input, e.weights, e.biases, out);
        apply_activation(layer.act, out.values);
        break;
      }
      case LayerKind::depthwise_separable_conv1d: {
        const auto& dw = next_entry(layer);
        check_entry(layer, dw, layer.name + ".dw",
                    {layer.in_channels, layer.kernel}, {layer.in_channels});
        const auto& pw = next_entry(layer);
        check_entry(layer, pw, layer.name + ".pw",
                    {layer.out_channels, layer.in_channels},
                    {layer.out_channels});
        if (input.rank() == 2 && layer.in_channels == 1)
          input = as_sequence(input);
        if (input.rank() != 3 || input.dim(1) != layer.in_channels)
          layer_error(layer, "input shape " + shape_string(input.shape));
        const Index L = input.dim(2);
        hidden = Tensor({B, layer.in_channels, L});
        depthwise_forward(input, dw.weights, dw.biases, hidden);
        out = Tensor({B, layer.out_channels, L});
        pointwise_forward(hidden, pw.weights, pw.biases, out);
        apply_activation(layer.act, out.values);
        break;
      }
      case LayerKind::dropout: {
        out = input;
        if (training && layer.dropout_p > 0.0) {
          Rng rng(derive_seed(seed, "dropout", li));
          const Scalar keep = 1.0 - layer.dropout_p;
          mask = Vector(input.size());
          for (Index i = 0; i < mask.size(); ++i)
            mask[i] = open_unit(rng) < keep ? 1.0 / keep : 0.0;
          out.values = input.values.cwiseProduct(mask);
        }
        break;
      }
      case LayerKind::activation: {
        out = input;
        apply_activation(layer.act, out.values);
        break;
      }
      case LayerKind::global_average_pool: {
        const Index C = input.dim(1), L = input.dim(2);
        out = Tensor({B, C});
        for (Index b = 0; b < B; ++b)
          for (Index c = 0; c < C; ++c)
            out.values[b * C + c] =
                ConstVectorMap(input.data() + (b * C + c) * L, L).mean();
        break;
      }
    }

    if (trace) {
      trace->inputs.push_back(std::move(input));
      trace->hiddens.push_back(std::move(hidden));
      trace->outputs.push_back(out);
      trace->masks.push_back(std::move(mask));
    }
    cur = std::move(out);
  }

  if (entry != params.entries.size())
    throw StructuralError("model used " + std::to_string(entry) +
                          " parameter entries, set holds " +
                          std::to_string(params.entries.size()));
  require_finite(cur.values, "forward output");
  return cur;
}

ModelParameters backward(const ModelSpec& spec, const ModelParameters& params,
                         ForwardTrace& trace, const Tensor& dlogits) {
  if (trace.inputs.size() != spec.layers.size())
    throw ProtocolError("backward needs a trace recorded by forward");
  require_finite(dlogits.values, "dlogits");

  ModelParameters grads = zeros_like(params);

  // per-layer first entry index into params.entries
  std::vector<std::size_t> entry_at(spec.layers.size(), 0);
  std::size_t entry = 0;
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    entry_at[li] = entry;
    if (spec.layers[li].kind == LayerKind::dense ||
        spec.layers[li].kind == LayerKind::conv1d)
      entry += 1;
    else if (spec.layers[li].kind == LayerKind::depthwise_separable_conv1d)
      entry += 2;
  }

  Tensor d = dlogits;
  for (std::size_t li = spec.layers.size(); li-- > 0;) {
    const LayerSpec& layer = spec.layers[li];
    Tensor& input = trace.inputs[li];
    const Tensor& output = trace.outputs[li];
    if (!same_shape(d, output))
      layer_error(layer, "upstream gradient shape " + shape_string(d.shape) +
                             ", expected " + shape_string(output.shape));
    Tensor dx = zeros_like(input);

    switch (layer.kind) {
      case LayerKind::dense: {
        const auto& e = params.entries[entry_at[li]];
        auto& g = grads.entries[entry_at[li]];
        g.weights.mat().noalias() += input.mat().transpose() * d.mat();
        VectorMap(g.biases.data(), g.biases.size()) +=
            d.mat().colwise().sum().transpose();
        dx.mat().noalias() = d.mat() * e.weights.mat().transpose();
        break;
      }
      case LayerKind::conv1d: {
        const auto& e = params.entries[entry_at[li]];
        auto& g = grads.entries[entry_at[li]];
        activation_backward(layer.act, output.values, d.values);
        conv1d_backward(input, e.weights, d, dx, g.weights, g.biases);
        break;
      }
      case LayerKind::depthwise_separable_conv1d: {
        const auto& dw = params.entries[entry_at[li]];
        const auto& pw = params.entries[entry_at[li] + 1];
        auto& gdw = grads.entries[entry_at[li]];
        auto& gpw = grads.entries[entry_at[li] + 1];
        activation_backward(layer.act, output.values, d.values);
        Tensor dh = zeros_like(trace.hiddens[li]);
        pointwise_backward(trace.hiddens[li], pw.weights, d, dh, gpw.weights,
                           gpw.biases);
        depthwise_backward(input, dw.weights, dh, dx, gdw.weights, gdw.biases);
        break;
      }
      case LayerKind::dropout: {
        if (trace.masks[li].size() > 0)
          dx.values = d.values.cwiseProduct(trace.masks[li]);
        else
          dx.values = d.values;
        break;
      }
      case LayerKind::activation: {
        activation_backward(layer.act, output.values, d.values);
        dx.values = d.values;
        break;
      }
      case LayerKind::global_average_pool: {
        const Index B = input.dim(0), C = input.dim(1), L = input.dim(2);
        for (Index b = 0; b < B; ++b)
          for (Index c = 0; c < C; ++c)
            VectorMap(dx.data() + (b * C + c) * L, L)
                .setConstant(d.values[b * C + c] / static_cast<Scalar>(L));
        break;
      }
    }

    input.grad = dx.values;
    d = std::move(dx);
  }

  grads.validate("gradient");
  return grads;
}

}  // namespace hfl
