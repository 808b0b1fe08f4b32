#include "sir/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sir {

namespace {

void accumulate(Tensor& dst, const Tensor& src) {
  double* d = dst.data();
  const double* s = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

}  // namespace

std::string layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::MaxPool2d: return "maxpool2d";
    case LayerKind::FullyConnected: return "fully-connected";
    case LayerKind::Relu: return "relu";
  }
  return "unknown";
}

LayerKind layer_kind_from_name(const std::string& name) {
  if (name == "conv2d") return LayerKind::Conv2d;
  if (name == "maxpool2d") return LayerKind::MaxPool2d;
  if (name == "fully-connected") return LayerKind::FullyConnected;
  if (name == "relu") return LayerKind::Relu;
  throw DataError("unknown layer kind '" + name + "'");
}

LayerSpec LayerSpec::conv2d(std::string name, int kh, int kw, int cin, int cout, Padding pad,
                            int stride) {
  LayerSpec s;
  s.kind = LayerKind::Conv2d;
  s.name = std::move(name);
  s.kernelH = kh;
  s.kernelW = kw;
  s.inChannels = cin;
  s.outChannels = cout;
  s.pad = pad;
  s.stride = stride;
  return s;
}

LayerSpec LayerSpec::maxpool2d(std::string name, int window, int stride) {
  LayerSpec s;
  s.kind = LayerKind::MaxPool2d;
  s.name = std::move(name);
  s.kernelH = window;
  s.kernelW = window;
  s.stride = stride;
  return s;
}

LayerSpec LayerSpec::fully_connected(std::string name, int inDim, int outDim) {
  LayerSpec s;
  s.kind = LayerKind::FullyConnected;
  s.name = std::move(name);
  s.inDim = inDim;
  s.outDim = outDim;
  return s;
}

LayerSpec LayerSpec::relu(std::string name) {
  LayerSpec s;
  s.kind = LayerKind::Relu;
  s.name = std::move(name);
  return s;
}

Padding LayerSpec::same_padding(int kh, int kw) {
  // Total padding k-1 per axis; the odd pixel goes to bottom/right.
  Padding p;
  p.top = (kh - 1) / 2;
  p.bottom = kh - 1 - p.top;
  p.left = (kw - 1) / 2;
  p.right = kw - 1 - p.left;
  return p;
}

std::size_t LayerSpec::parameter_count() const {
  switch (kind) {
    case LayerKind::Conv2d:
      return static_cast<std::size_t>(kernelH) * kernelW * inChannels * outChannels + outChannels;
    case LayerKind::FullyConnected:
      return static_cast<std::size_t>(inDim) * outDim + outDim;
    default:
      return 0;
  }
}

std::vector<std::size_t> layer_output_shape(const LayerSpec& spec,
                                            const std::vector<std::size_t>& in) {
  switch (spec.kind) {
    case LayerKind::Conv2d: {
      if (in.size() != 3) {
        throw ShapeError(spec.name + ": conv2d expects a rank-3 input, got " + shape_str(in));
      }
      if (static_cast<int>(in[2]) != spec.inChannels) {
        throw ShapeError(spec.name + ": input has " + std::to_string(in[2]) +
                         " channels, kernel expects " + std::to_string(spec.inChannels));
      }
      int padH = spec.pad.top + spec.pad.bottom;
      int padW = spec.pad.left + spec.pad.right;
      int numH = static_cast<int>(in[0]) + padH - spec.kernelH;
      int numW = static_cast<int>(in[1]) + padW - spec.kernelW;
      if (numH < 0 || numW < 0 || numH % spec.stride != 0 || numW % spec.stride != 0) {
        throw ShapeError(spec.name + ": padding/stride do not produce integer output dims for " +
                         shape_str(in));
      }
      return {static_cast<std::size_t>(numH / spec.stride + 1),
              static_cast<std::size_t>(numW / spec.stride + 1),
              static_cast<std::size_t>(spec.outChannels)};
    }
    case LayerKind::MaxPool2d: {
      if (in.size() != 3) {
        throw ShapeError(spec.name + ": maxpool2d expects a rank-3 input, got " + shape_str(in));
      }
      // Ceil mode: windows may run off the bottom/right edge and are
      // truncated there.
      auto ceilDim = [&](std::size_t d) {
        int num = static_cast<int>(d) - spec.kernelH;
        int out = num <= 0 ? 1 : (num + spec.stride - 1) / spec.stride + 1;
        return static_cast<std::size_t>(out);
      };
      return {ceilDim(in[0]), ceilDim(in[1]), in[2]};
    }
    case LayerKind::FullyConnected: {
      if (shape_numel(in) != static_cast<std::size_t>(spec.inDim)) {
        throw ShapeError(spec.name + ": input " + shape_str(in) + " has " +
                         std::to_string(shape_numel(in)) + " elements, weights expect " +
                         std::to_string(spec.inDim));
      }
      return {static_cast<std::size_t>(spec.outDim)};
    }
    case LayerKind::Relu:
      return in;
  }
  throw ShapeError("unreachable layer kind");
}

// ---------------------------------------------------------------------------
// conv2d
// ---------------------------------------------------------------------------

Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                      const Padding& pad, int stride) {
  if (input.rank() != 3) throw ShapeError("conv2d input must be rank 3, got " + shape_str(input.shape()));
  if (kernel.rank() != 4) throw ShapeError("conv2d kernel must be rank 4, got " + shape_str(kernel.shape()));
  const int H = static_cast<int>(input.dim(0));
  const int W = static_cast<int>(input.dim(1));
  const int Cin = static_cast<int>(input.dim(2));
  const int kh = static_cast<int>(kernel.dim(0));
  const int kw = static_cast<int>(kernel.dim(1));
  const int Cout = static_cast<int>(kernel.dim(3));
  if (static_cast<int>(kernel.dim(2)) != Cin) {
    throw ShapeError("conv2d channel mismatch: input " + shape_str(input.shape()) + " vs kernel " +
                     shape_str(kernel.shape()));
  }
  if (bias.size() != static_cast<std::size_t>(Cout)) {
    throw ShapeError("conv2d bias length " + std::to_string(bias.size()) + " != Cout " +
                     std::to_string(Cout));
  }

  LayerSpec probe = LayerSpec::conv2d("conv2d", kh, kw, Cin, Cout, pad, stride);
  auto outShape = layer_output_shape(probe, input.shape());
  const int Ho = static_cast<int>(outShape[0]);
  const int Wo = static_cast<int>(outShape[1]);

  Tensor out(outShape);
  const double* x = input.data();
  const double* k = kernel.data();
  double* o = out.data();

  for (int oy = 0; oy < Ho; ++oy) {
    for (int ox = 0; ox < Wo; ++ox) {
      double* oPix = o + (static_cast<std::size_t>(oy) * Wo + ox) * Cout;
      for (int co = 0; co < Cout; ++co) oPix[co] = bias[co];
      for (int ky = 0; ky < kh; ++ky) {
        int iy = oy * stride + ky - pad.top;
        if (iy < 0 || iy >= H) continue;
        for (int kx = 0; kx < kw; ++kx) {
          int ix = ox * stride + kx - pad.left;
          if (ix < 0 || ix >= W) continue;
          const double* xPix = x + (static_cast<std::size_t>(iy) * W + ix) * Cin;
          const double* kRow = k + ((static_cast<std::size_t>(ky) * kw + kx) * Cin) * Cout;
          for (int ci = 0; ci < Cin; ++ci) {
            double xv = xPix[ci];
            const double* kC = kRow + static_cast<std::size_t>(ci) * Cout;
            for (int co = 0; co < Cout; ++co) oPix[co] += xv * kC[co];
          }
        }
      }
    }
  }
  return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernel, const Padding& pad,
                            int stride, const Tensor& gradOut) {
  const int H = static_cast<int>(input.dim(0));
  const int W = static_cast<int>(input.dim(1));
  const int Cin = static_cast<int>(input.dim(2));
  const int kh = static_cast<int>(kernel.dim(0));
  const int kw = static_cast<int>(kernel.dim(1));
  const int Cout = static_cast<int>(kernel.dim(3));
  const int Ho = static_cast<int>(gradOut.dim(0));
  const int Wo = static_cast<int>(gradOut.dim(1));

  Conv2dGrads g{Tensor(input.shape()), Tensor(kernel.shape()),
                Tensor({static_cast<std::size_t>(Cout)})};
  const double* x = input.data();
  const double* k = kernel.data();
  const double* go = gradOut.data();
  double* gx = g.input.data();
  double* gk = g.kernel.data();
  double* gb = g.bias.data();

  for (int oy = 0; oy < Ho; ++oy) {
    for (int ox = 0; ox < Wo; ++ox) {
      const double* goPix = go + (static_cast<std::size_t>(oy) * Wo + ox) * Cout;
      for (int co = 0; co < Cout; ++co) gb[co] += goPix[co];
      for (int ky = 0; ky < kh; ++ky) {
        int iy = oy * stride + ky - pad.top;
        if (iy < 0 || iy >= H) continue;
        for (int kx = 0; kx < kw; ++kx) {
          int ix = ox * stride + kx - pad.left;
          if (ix < 0 || ix >= W) continue;
          const double* xPix = x + (static_cast<std::size_t>(iy) * W + ix) * Cin;
          double* gxPix = gx + (static_cast<std::size_t>(iy) * W + ix) * Cin;
          std::size_t kBase = (static_cast<std::size_t>(ky) * kw + kx) * Cin;
          for (int ci = 0; ci < Cin; ++ci) {
            const double* kC = k + (kBase + ci) * Cout;
            double* gkC = gk + (kBase + ci) * Cout;
            double xv = xPix[ci];
            double acc = 0.0;
            for (int co = 0; co < Cout; ++co) {
              double g0 = goPix[co];
              gkC[co] += xv * g0;
              acc += kC[co] * g0;
            }
            gxPix[ci] += acc;
          }
        }
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// maxpool2d
// ---------------------------------------------------------------------------

MaxPoolResult maxpool2d_forward(const Tensor& input, int window, int stride) {
  if (input.rank() != 3) throw ShapeError("maxpool2d input must be rank 3");
  const int H = static_cast<int>(input.dim(0));
  const int W = static_cast<int>(input.dim(1));
  const int C = static_cast<int>(input.dim(2));
  LayerSpec probe = LayerSpec::maxpool2d("maxpool2d", window, stride);
  auto outShape = layer_output_shape(probe, input.shape());
  const int Ho = static_cast<int>(outShape[0]);
  const int Wo = static_cast<int>(outShape[1]);

  MaxPoolResult res{Tensor(outShape), {}};
  res.argmax.resize(res.output.size());
  const double* x = input.data();
  double* o = res.output.data();

  for (int oy = 0; oy < Ho; ++oy) {
    int y0 = oy * stride;
    int y1 = std::min(y0 + window, H);
    for (int ox = 0; ox < Wo; ++ox) {
      int x0 = ox * stride;
      int x1 = std::min(x0 + window, W);
      std::size_t oBase = (static_cast<std::size_t>(oy) * Wo + ox) * C;
      for (int c = 0; c < C; ++c) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t bestIdx = 0;
        for (int iy = y0; iy < y1; ++iy) {
          for (int ix = x0; ix < x1; ++ix) {
            std::size_t idx = (static_cast<std::size_t>(iy) * W + ix) * C + c;
            if (x[idx] > best) {
              best = x[idx];
              bestIdx = idx;
            }
          }
        }
        o[oBase + c] = best;
        res.argmax[oBase + c] = bestIdx;
      }
    }
  }
  return res;
}

Tensor maxpool2d_backward(const std::vector<std::size_t>& inputShape,
                          const std::vector<std::size_t>& argmax, const Tensor& gradOut) {
  if (argmax.size() != gradOut.size()) {
    throw ShapeError("maxpool2d backward: argmax/gradOut size mismatch");
  }
  Tensor g(inputShape);
  double* gx = g.data();
  const double* go = gradOut.data();
  for (std::size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += go[i];
  return g;
}

// ---------------------------------------------------------------------------
// fully connected / relu / loss
// ---------------------------------------------------------------------------

Tensor fc_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  if (weights.rank() != 2) throw ShapeError("fc weights must be rank 2");
  const std::size_t n = weights.dim(0);
  const std::size_t m = weights.dim(1);
  if (input.size() != n) {
    throw ShapeError("fc input " + shape_str(input.shape()) + " has " +
                     std::to_string(input.size()) + " elements, weights " +
                     shape_str(weights.shape()) + " expect " + std::to_string(n));
  }
  if (bias.size() != m) throw ShapeError("fc bias length mismatch");

  Tensor out({m});
  const double* x = input.data();
  const double* w = weights.data();
  double* o = out.data();
  for (std::size_t j = 0; j < m; ++j) o[j] = bias[j];
  for (std::size_t i = 0; i < n; ++i) {
    double xv = x[i];
    if (xv == 0.0) continue;
    const double* wRow = w + i * m;
    for (std::size_t j = 0; j < m; ++j) o[j] += xv * wRow[j];
  }
  return out;
}

FcGrads fc_backward(const Tensor& input, const Tensor& weights, const Tensor& gradOut) {
  const std::size_t n = weights.dim(0);
  const std::size_t m = weights.dim(1);
  if (gradOut.size() != m) throw ShapeError("fc backward gradOut length mismatch");

  FcGrads g{Tensor(input.shape()), Tensor(weights.shape()), Tensor({m})};
  const double* x = input.data();
  const double* w = weights.data();
  const double* go = gradOut.data();
  double* gx = g.input.data();
  double* gw = g.weights.data();
  double* gb = g.bias.data();

  for (std::size_t j = 0; j < m; ++j) gb[j] = go[j];
  for (std::size_t i = 0; i < n; ++i) {
    const double* wRow = w + i * m;
    double* gwRow = gw + i * m;
    double xv = x[i];
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      gwRow[j] += xv * go[j];
      acc += wRow[j] * go[j];
    }
    gx[i] = acc;
  }
  return g;
}

Tensor relu_forward(const Tensor& input) {
  Tensor out(input.shape());
  const double* x = input.data();
  double* o = out.data();
  for (std::size_t i = 0; i < input.size(); ++i) o[i] = x[i] > 0.0 ? x[i] : 0.0;
  return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& gradOut) {
  Tensor g(input.shape());
  const double* x = input.data();
  const double* go = gradOut.data();
  double* gx = g.data();
  for (std::size_t i = 0; i < input.size(); ++i) gx[i] = x[i] > 0.0 ? go[i] : 0.0;
  return g;
}

LossValue squared_error_loss(const Tensor& pred, const Tensor& target) {
  if (!pred.same_shape(target)) {
    throw ShapeError("loss shape mismatch: " + shape_str(pred.shape()) + " vs " +
                     shape_str(target.shape()));
  }
  LossValue lv;
  lv.grad = Tensor(pred.shape());
  const double* p = pred.data();
  const double* t = target.data();
  double* g = lv.grad.data();
  for (std::size_t i = 0; i < pred.size(); ++i) {
    double d = p[i] - t[i];
    lv.value += d * d;
    g[i] = 2.0 * d;
  }
  return lv;
}

// ---------------------------------------------------------------------------
// stacks
// ---------------------------------------------------------------------------

std::vector<std::vector<std::size_t>> StackSpec::shape_chain() const {
  std::vector<std::vector<std::size_t>> chain;
  chain.push_back(inputShape);
  for (const LayerSpec& l : layers) chain.push_back(layer_output_shape(l, chain.back()));
  return chain;
}

std::size_t StackSpec::parameter_count() const {
  std::size_t n = 0;
  for (const LayerSpec& l : layers) n += l.parameter_count();
  return n;
}

StackWeights StackWeights::init(const StackSpec& spec, Rng& rng) {
  StackWeights w;
  for (const LayerSpec& l : spec.layers) {
    switch (l.kind) {
      case LayerKind::Conv2d: {
        double bound = 1.0 / std::sqrt(static_cast<double>(l.kernelH) * l.kernelW * l.inChannels);
        Tensor kernel({static_cast<std::size_t>(l.kernelH), static_cast<std::size_t>(l.kernelW),
                       static_cast<std::size_t>(l.inChannels),
                       static_cast<std::size_t>(l.outChannels)});
        for (double& v : kernel.values()) v = rng.uniform(-bound, bound);
        w.weights.push_back(std::move(kernel));
        w.biases.push_back(Tensor({static_cast<std::size_t>(l.outChannels)}));
        break;
      }
      case LayerKind::FullyConnected: {
        double bound = 1.0 / std::sqrt(static_cast<double>(l.inDim));
        Tensor weights({static_cast<std::size_t>(l.inDim), static_cast<std::size_t>(l.outDim)});
        for (double& v : weights.values()) v = rng.uniform(-bound, bound);
        w.weights.push_back(std::move(weights));
        w.biases.push_back(Tensor({static_cast<std::size_t>(l.outDim)}));
        break;
      }
      default:
        w.weights.emplace_back();
        w.biases.emplace_back();
    }
  }
  return w;
}

StackWeights StackWeights::zeros_like(const StackSpec& spec) {
  Rng dummy(0);
  StackWeights w = init(spec, dummy);
  w.set_zero();
  return w;
}

void StackWeights::set_zero() {
  for (Tensor& t : weights) t.fill(0.0);
  for (Tensor& t : biases) t.fill(0.0);
}

Tensor stack_forward(const StackSpec& spec, const StackWeights& w, const Tensor& input,
                     StackTape* tape) {
  if (w.weights.size() != spec.layers.size()) {
    throw ShapeError("stack weights do not match stack spec");
  }
  if (tape) {
    tape->inputs.clear();
    tape->poolArgmax.clear();
    tape->recorded = false;
  }
  Tensor cur = input;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    if (tape) tape->inputs.push_back(cur);
    switch (l.kind) {
      case LayerKind::Conv2d:
        cur = conv2d_forward(cur, w.weights[i], w.biases[i], l.pad, l.stride);
        break;
      case LayerKind::MaxPool2d: {
        MaxPoolResult res = maxpool2d_forward(cur, l.kernelH, l.stride);
        if (tape) tape->poolArgmax.push_back(std::move(res.argmax));
        cur = std::move(res.output);
        break;
      }
      case LayerKind::FullyConnected:
        cur = fc_forward(cur, w.weights[i], w.biases[i]);
        break;
      case LayerKind::Relu:
        cur = relu_forward(cur);
        break;
    }
  }
  if (tape) tape->recorded = true;
  return cur;
}

Tensor stack_backward(const StackSpec& spec, const StackWeights& w, const StackTape& tape,
                      const Tensor& gradOut, StackWeights& gradAccum) {
  if (!tape.recorded) throw StateError("stack_backward called before a forward pass was recorded");
  if (tape.inputs.size() != spec.layers.size()) {
    throw StateError("stack tape does not match stack spec");
  }
  Tensor grad = gradOut;
  std::size_t poolIdx = tape.poolArgmax.size();
  for (std::size_t ri = spec.layers.size(); ri-- > 0;) {
    const LayerSpec& l = spec.layers[ri];
    const Tensor& layerIn = tape.inputs[ri];
    switch (l.kind) {
      case LayerKind::Conv2d: {
        // gradOut arrives shaped like the layer output even when later fc
        // layers flattened it.
        Tensor shaped(layer_output_shape(l, layerIn.shape()), grad.values());
        Conv2dGrads g = conv2d_backward(layerIn, w.weights[ri], l.pad, l.stride, shaped);
        accumulate(gradAccum.weights[ri], g.kernel);
        accumulate(gradAccum.biases[ri], g.bias);
        grad = std::move(g.input);
        break;
      }
      case LayerKind::MaxPool2d: {
        Tensor shaped(layer_output_shape(l, layerIn.shape()), grad.values());
        grad = maxpool2d_backward(layerIn.shape(), tape.poolArgmax[--poolIdx], shaped);
        break;
      }
      case LayerKind::FullyConnected: {
        FcGrads g = fc_backward(layerIn, w.weights[ri], grad);
        accumulate(gradAccum.weights[ri], g.weights);
        accumulate(gradAccum.biases[ri], g.bias);
        grad = std::move(g.input);
        break;
      }
      case LayerKind::Relu:
        grad = relu_backward(layerIn, Tensor(layerIn.shape(), grad.values()));
        break;
    }
  }
  return grad;
}

void collect_params(const StackSpec& spec, const std::string& prefix, StackWeights& w,
                    StackWeights& grads, std::vector<ParamRef>& out) {
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    if (!l.has_params()) continue;
    std::string base = prefix.empty() ? l.name : prefix + "/" + l.name;
    out.push_back({base + "/weight", &w.weights[i], &grads.weights[i], false});
    out.push_back({base + "/bias", &w.biases[i], &grads.biases[i], true});
  }
}

}  // namespace sir
