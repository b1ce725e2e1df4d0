#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "certlab/tape.hpp"
#include "certlab/tensor.hpp"

namespace certlab {

/// Feedforward classifier with strictly alternating dense-linear / ReLU
/// layers; the first and last layers are linear. Layer index 0 is the input,
/// layer i the output of the i-th transformation, so a network with K linear
/// blocks has L = 2K - 1 layers.
class Network {
 public:
  struct Linear {
    Tensor weight;  // rows x cols
    Tensor bias;    // rows
  };

  Network() = default;
  explicit Network(std::vector<Linear> blocks);

  int input_dim() const { return blocks_.front().weight.cols(); }
  int output_dim() const { return blocks_.back().weight.rows(); }
  int num_linear() const { return static_cast<int>(blocks_.size()); }
  /// Number of layers L (linear blocks plus interleaved ReLUs).
  int num_layers() const { return 2 * num_linear() - 1; }
  /// True when layer index i (1-based) is a ReLU layer.
  static bool is_relu_layer(int layer) { return layer % 2 == 0; }
  /// Width of layer i; layer 0 is the input.
  int layer_dim(int layer) const;
  /// Linear block feeding layer `layer` (layer must be odd).
  const Linear& linear_at(int layer) const;
  Linear& linear_at(int layer);

  const std::vector<Linear>& blocks() const { return blocks_; }
  std::vector<Linear>& blocks() { return blocks_; }

  std::vector<int> dims() const;

  /// Plain forward pass, z = h(x). No tape.
  Tensor eval(const Tensor& x) const;

  /// Total parameter count (weights and biases).
  int num_params() const;
  /// Flattened parameter vector, weights then bias per block, block order.
  Tensor flat_params() const;
  void set_flat_params(const Tensor& theta);

 private:
  void check_invariants() const;
  std::vector<Linear> blocks_;
};

/// Comparison rows c_{y'} = e_{y'} - e_y for all y' != y.
struct Specification {
  int label = 0;
  int num_classes = 0;
  /// (num_classes - 1) x num_classes matrix of comparison rows.
  Tensor rows() const;
};

/// Linear layers with weights uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)],
/// zero biases; deterministic in the seed.
Network build_network(const std::vector<int>& dims, uint64_t seed);

/// Folds the comparison rows into the last linear layer: weight C*W_L, bias
/// C*b_L, output dimension num_classes - 1. Upper bounds of the resulting
/// outputs upper-bound c_{y'}^T z.
Network elide_spec(const Network& net, const Specification& spec);

void save_network(const Network& net, const std::string& path);
Network load_network(const std::string& path);

/// Network parameters as tape leaves, for differentiable passes.
struct TapedNetwork {
  std::vector<Var> weights;
  std::vector<Var> biases;
  const Network* net = nullptr;

  static TapedNetwork make(Tape& tape, const Network& net);
  /// Same parameters with the comparison rows folded into the last layer.
  TapedNetwork elided(Tape& tape, const Specification& spec) const;
};

/// Forward pass recorded on the tape; x may be a leaf to differentiate
/// w.r.t. the input.
Var net_forward(Tape& tape, const TapedNetwork& tnet, Var x);

}  // namespace certlab
