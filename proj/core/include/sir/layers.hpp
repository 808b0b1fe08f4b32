#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "sir/rng.hpp"
#include "sir/tensor.hpp"

namespace sir {

enum class LayerKind { Conv2d, MaxPool2d, FullyConnected, Relu };

std::string layer_kind_name(LayerKind kind);
LayerKind layer_kind_from_name(const std::string& name);

// Per-side conv padding. Even-sized "same" kernels pad asymmetrically
// (bottom/right only), which is what keeps 29x29 and 15x15 maps at their
// input size under a 2x2 kernel.
struct Padding {
  int top = 0;
  int left = 0;
  int bottom = 0;
  int right = 0;
};

struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  std::string name;

  // conv2d / maxpool2d
  int kernelH = 0;
  int kernelW = 0;
  int inChannels = 0;   // conv2d only
  int outChannels = 0;  // conv2d only
  Padding pad;          // conv2d only
  int stride = 1;

  // fully connected
  int inDim = 0;
  int outDim = 0;

  static LayerSpec conv2d(std::string name, int kh, int kw, int cin, int cout, Padding pad,
                          int stride = 1);
  static LayerSpec maxpool2d(std::string name, int window = 2, int stride = 2);
  static LayerSpec fully_connected(std::string name, int inDim, int outDim);
  static LayerSpec relu(std::string name);

  // "same" conv padding for this kernel size: symmetric for odd kernels,
  // extra pixel on bottom/right for even ones.
  static Padding same_padding(int kh, int kw);

  bool has_params() const {
    return kind == LayerKind::Conv2d || kind == LayerKind::FullyConnected;
  }
  // Number of scalars in weights plus biases.
  std::size_t parameter_count() const;
};

// Output shape of a layer applied to `in`; throws ShapeError when the
// geometry does not work out (non-integer conv output, channel mismatch).
std::vector<std::size_t> layer_output_shape(const LayerSpec& spec,
                                            const std::vector<std::size_t>& in);

// ---------------------------------------------------------------------------
// Single-layer ops. Image tensors are (H, W, C) row-major; conv kernels are
// (kh, kw, Cin, Cout); fc weights are (in, out).
// ---------------------------------------------------------------------------

Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                      const Padding& pad, int stride);

struct Conv2dGrads {
  Tensor input;
  Tensor kernel;
  Tensor bias;
};
Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernel, const Padding& pad,
                            int stride, const Tensor& gradOut);

// Ceil-mode pooling: output dim ceil(H/stride) for window==stride, windows at
// the bottom/right edge are truncated to the valid region. Flat argmax
// indices are recorded for the backward pass.
struct MaxPoolResult {
  Tensor output;
  std::vector<std::size_t> argmax;
};
MaxPoolResult maxpool2d_forward(const Tensor& input, int window, int stride);
Tensor maxpool2d_backward(const std::vector<std::size_t>& inputShape,
                          const std::vector<std::size_t>& argmax, const Tensor& gradOut);

Tensor fc_forward(const Tensor& input, const Tensor& weights, const Tensor& bias);

struct FcGrads {
  Tensor input;
  Tensor weights;
  Tensor bias;
};
FcGrads fc_backward(const Tensor& input, const Tensor& weights, const Tensor& gradOut);

Tensor relu_forward(const Tensor& input);
Tensor relu_backward(const Tensor& input, const Tensor& gradOut);

// Squared-L2 regression loss: value = ||pred - target||^2 summed over
// components, grad = 2 (pred - target). Batches average this per example.
struct LossValue {
  double value = 0.0;
  Tensor grad;
};
LossValue squared_error_loss(const Tensor& pred, const Tensor& target);

// ---------------------------------------------------------------------------
// Layer stacks: a validated sequence of layers with shared forward/backward
// plumbing. This is the fixed-topology workhorse behind both network types.
// ---------------------------------------------------------------------------

struct StackSpec {
  std::vector<std::size_t> inputShape;
  std::vector<LayerSpec> layers;

  // Shapes after every layer, starting with inputShape. Throws on a
  // geometry error, naming the offending layer.
  std::vector<std::vector<std::size_t>> shape_chain() const;
  std::vector<std::size_t> output_shape() const { return shape_chain().back(); }
  std::size_t parameter_count() const;
};

struct StackWeights {
  std::vector<Tensor> weights;  // empty tensor for layers without parameters
  std::vector<Tensor> biases;

  static StackWeights init(const StackSpec& spec, Rng& rng);  // U(+-1/sqrt(fanIn)), zero bias
  static StackWeights zeros_like(const StackSpec& spec);
  void set_zero();
};

// Activations recorded by a forward pass, consumed by the backward pass.
struct StackTape {
  std::vector<Tensor> inputs;  // input seen by each layer
  std::vector<std::vector<std::size_t>> poolArgmax;
  bool recorded = false;
};

Tensor stack_forward(const StackSpec& spec, const StackWeights& w, const Tensor& input,
                     StackTape* tape = nullptr);

// Returns the gradient w.r.t. the stack input and accumulates parameter
// gradients into `gradAccum`. Throws StateError if no forward was recorded.
Tensor stack_backward(const StackSpec& spec, const StackWeights& w, const StackTape& tape,
                      const Tensor& gradOut, StackWeights& gradAccum);

// Named reference to one parameter tensor and its gradient, as visited by the
// optimizer and the checkpoint writer.
struct ParamRef {
  std::string path;
  Tensor* value = nullptr;
  Tensor* grad = nullptr;
  bool isBias = false;
};

void collect_params(const StackSpec& spec, const std::string& prefix, StackWeights& w,
                    StackWeights& grads, std::vector<ParamRef>& out);

}  // namespace sir
