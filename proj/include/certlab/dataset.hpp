#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "certlab/tensor.hpp"

namespace certlab {

struct Dataset {
  Tensor inputs;  // examples x features
  std::vector<int> labels;
  int classes = 0;
  std::string split;

  int size() const { return labels.empty() ? 0 : inputs.rows(); }
  int dim() const { return inputs.cols(); }
  Tensor example(int i) const;
  Dataset head(int count) const;
  Dataset range(int from, int count) const;
  void check() const;
};

/// IDX image/label pair (big-endian magic 0x00000803 / 0x00000801, dimension
/// header, unsigned bytes); pixels scaled to [0,1] by 1/255.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Gaussian class blobs. With clip01 the means live well inside [0,1] and
/// samples are clipped, mimicking pixel data; otherwise features are
/// unconstrained. Deterministic in the seed.
Dataset synth_gaussian(int n, int dim, int classes, double noise, uint64_t seed, bool clip01,
                       const std::string& split);

struct PcaModel {
  Tensor mean;   // feature means of the fitted sample
  Tensor basis;  // features x dims, orthonormal columns
};

/// Projects n seeded samples of src onto the top principal directions,
/// computed by orthogonally-iterated power method on the sample covariance
/// (tolerance 1e-9, at most 10000 sweeps). Labels carry over.
Dataset build_toy_pca(const Dataset& src, int n, int dims, uint64_t seed, PcaModel* model = nullptr);

/// Projects any dataset with a previously fitted model.
Dataset apply_pca(const PcaModel& model, const Dataset& data);

}  // namespace certlab
