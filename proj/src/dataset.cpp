#include "certlab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "certlab/rng.hpp"

namespace certlab {

Tensor Dataset::example(int i) const {
  Tensor x({dim()});
  for (int c = 0; c < dim(); ++c) x[c] = inputs.at(i, c);
  return x;
}

Dataset Dataset::head(int count) const { return range(0, count); }

Dataset Dataset::range(int from, int count) const {
  count = std::min(count, size() - from);
  if (from < 0 || count < 0) throw Error("dataset range out of bounds");
  Dataset out;
  out.classes = classes;
  out.split = split;
  out.inputs = Tensor({count, dim()});
  out.labels.resize(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    out.labels[static_cast<size_t>(i)] = labels[static_cast<size_t>(from + i)];
    for (int c = 0; c < dim(); ++c) out.inputs.at(i, c) = inputs.at(from + i, c);
  }
  return out;
}

void Dataset::check() const {
  if (inputs.rank() != 2 || static_cast<int>(labels.size()) != inputs.rows())
    throw Error("dataset: inputs/labels size mismatch");
  for (int y : labels)
    if (y < 0 || y >= classes) throw Error("dataset: label out of range");
}

namespace {

uint32_t read_be32(std::ifstream& in, const std::string& path, long offset) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw Error(path + ": truncated at byte offset " + std::to_string(offset));
  return (static_cast<uint32_t>(b[0]) << 24) | (static_cast<uint32_t>(b[1]) << 16) |
         (static_cast<uint32_t>(b[2]) << 8) | static_cast<uint32_t>(b[3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw Error("cannot open " + images_path);
  uint32_t magic = read_be32(img, images_path, 0);
  if (magic != 0x00000803u)
    throw Error(images_path + ": bad magic 0x" + [&] {
      char buf[16];
      std::snprintf(buf, sizeof buf, "%08x", magic);
      return std::string(buf);
    }() + " at byte offset 0 (want 00000803)");
  uint32_t n = read_be32(img, images_path, 4);
  uint32_t rows = read_be32(img, images_path, 8);
  uint32_t cols = read_be32(img, images_path, 12);
  size_t pixels = static_cast<size_t>(n) * rows * cols;
  std::vector<unsigned char> raw(pixels);
  if (!img.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(pixels)))
    throw Error(images_path + ": truncated pixel data (want " + std::to_string(pixels) + " bytes from offset 16)");

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw Error("cannot open " + labels_path);
  uint32_t lmagic = read_be32(lab, labels_path, 0);
  if (lmagic != 0x00000801u) throw Error(labels_path + ": bad label magic at byte offset 0 (want 00000801)");
  uint32_t ln = read_be32(lab, labels_path, 4);
  if (ln != n) throw Error(labels_path + ": label count " + std::to_string(ln) + " != image count " + std::to_string(n));
  std::vector<unsigned char> lraw(ln);
  if (!lab.read(reinterpret_cast<char*>(lraw.data()), static_cast<std::streamsize>(ln)))
    throw Error(labels_path + ": truncated label data");

  Dataset out;
  out.inputs = Tensor({static_cast<int>(n), static_cast<int>(rows * cols)});
  for (size_t i = 0; i < pixels; ++i) out.inputs[static_cast<int>(i)] = static_cast<double>(raw[i]) / 255.0;
  out.labels.assign(lraw.begin(), lraw.end());
  out.classes = 10;
  out.split = "idx";
  out.check();
  return out;
}

Dataset synth_gaussian(int n, int dim, int classes, double noise, uint64_t seed, bool clip01,
                       const std::string& split) {
  Rng rng(seed);
  Tensor means({classes, dim});
  for (int c = 0; c < classes; ++c)
    for (int d = 0; d < dim; ++d)
      means.at(c, d) = clip01 ? rng.uniform(0.15, 0.85) : rng.normal() * 2.0;

  Dataset out;
  out.inputs = Tensor({n, dim});
  out.labels.resize(static_cast<size_t>(n));
  out.classes = classes;
  out.split = split;
  for (int i = 0; i < n; ++i) {
    int y = static_cast<int>(rng.uniform_int(0, classes - 1));
    out.labels[static_cast<size_t>(i)] = y;
    for (int d = 0; d < dim; ++d) {
      double v = means.at(y, d) + noise * rng.normal();
      if (clip01) v = std::max(0.0, std::min(1.0, v));
      out.inputs.at(i, d) = v;
    }
  }
  return out;
}

namespace {

// Orthonormalize columns in place (modified Gram-Schmidt). Returns the
// smallest column norm seen before normalization.
double orthonormalize(Tensor& v) {
  int d = v.rows(), k = v.cols();
  double min_norm = 1e300;
  for (int c = 0; c < k; ++c) {
    for (int p = 0; p < c; ++p) {
      double dot = 0;
      for (int r = 0; r < d; ++r) dot += v.at(r, c) * v.at(r, p);
      for (int r = 0; r < d; ++r) v.at(r, c) -= dot * v.at(r, p);
    }
    double norm = 0;
    for (int r = 0; r < d; ++r) norm += v.at(r, c) * v.at(r, c);
    norm = std::sqrt(norm);
    min_norm = std::min(min_norm, norm);
    if (norm > 0)
      for (int r = 0; r < d; ++r) v.at(r, c) /= norm;
  }
  return min_norm;
}

}  // namespace

Dataset build_toy_pca(const Dataset& src, int n, int dims, uint64_t seed, PcaModel* model) {
  src.check();
  if (src.size() < n) throw Error("build_toy_pca: source has fewer than n examples");
  if (dims > src.dim()) throw Error("build_toy_pca: dims exceeds feature count");

  // Seeded sample without replacement.
  Rng rng(seed);
  std::vector<int> idx(static_cast<size_t>(src.size()));
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  for (size_t i = idx.size() - 1; i > 0; --i)
    std::swap(idx[i], idx[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i)))]);
  idx.resize(static_cast<size_t>(n));

  int d = src.dim();
  Tensor mean = Tensor::zeros({d});
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c) mean[c] += src.inputs.at(idx[static_cast<size_t>(i)], c);
  for (int c = 0; c < d; ++c) mean[c] /= n;

  Tensor centered({n, d});
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c) centered.at(i, c) = src.inputs.at(idx[static_cast<size_t>(i)], c) - mean[c];

  Tensor cov({d, d});
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b) {
      double acc = 0;
      for (int i = 0; i < n; ++i) acc += centered.at(i, a) * centered.at(i, b);
      cov.at(a, b) = acc / n;
      cov.at(b, a) = cov.at(a, b);
    }

  Tensor basis({d, dims});
  for (int i = 0; i < basis.size(); ++i) basis[i] = rng.normal();
  orthonormalize(basis);

  Tensor next({d, dims});
  double diff = 1e300;
  for (int sweep = 0; sweep < 10000 && diff > 1e-9; ++sweep) {
    for (int c = 0; c < dims; ++c)
      for (int r = 0; r < d; ++r) {
        double acc = 0;
        for (int k = 0; k < d; ++k) acc += cov.at(r, k) * basis.at(k, c);
        next.at(r, c) = acc;
      }
    if (orthonormalize(next) < 1e-12) {
      int rank = 0;
      for (int c = 0; c < dims; ++c) {
        double q = 0;  // Rayleigh quotient of column c
        for (int r = 0; r < d; ++r) {
          double acc = 0;
          for (int k = 0; k < d; ++k) acc += cov.at(r, k) * next.at(k, c);
          q += next.at(r, c) * acc;
        }
        if (q > 1e-10) ++rank;
      }
      throw Error("build_toy_pca: sample covariance rank " + std::to_string(rank) + " below requested " +
                  std::to_string(dims));
    }
    diff = 0;
    for (int i = 0; i < basis.size(); ++i) diff = std::max(diff, std::fabs(next[i] - basis[i]));
    basis = next;
  }

  // Fix column signs for reproducibility across runs.
  for (int c = 0; c < dims; ++c) {
    int arg = 0;
    double best = 0;
    for (int r = 0; r < d; ++r)
      if (std::fabs(basis.at(r, c)) > best) {
        best = std::fabs(basis.at(r, c));
        arg = r;
      }
    if (basis.at(arg, c) < 0)
      for (int r = 0; r < d; ++r) basis.at(r, c) = -basis.at(r, c);
  }

  PcaModel pm{std::move(mean), std::move(basis)};
  Dataset sample;
  sample.inputs = std::move(centered);  // already centered with pm.mean
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c) sample.inputs.at(i, c) += pm.mean[c];
  sample.labels.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) sample.labels[static_cast<size_t>(i)] = src.labels[static_cast<size_t>(idx[static_cast<size_t>(i)])];
  sample.classes = src.classes;
  sample.split = src.split;

  Dataset out = apply_pca(pm, sample);
  out.split = "pca";
  if (model) *model = std::move(pm);
  return out;
}

Dataset apply_pca(const PcaModel& model, const Dataset& data) {
  int d = model.mean.size(), k = model.basis.cols();
  if (data.dim() != d) throw Error("apply_pca: dimension mismatch");
  Dataset out;
  out.inputs = Tensor({data.size(), k});
  out.labels = data.labels;
  out.classes = data.classes;
  out.split = data.split + "-pca";
  for (int i = 0; i < data.size(); ++i)
    for (int c = 0; c < k; ++c) {
      double acc = 0;
      for (int r = 0; r < d; ++r) acc += (data.inputs.at(i, r) - model.mean[r]) * model.basis.at(r, c);
      out.inputs.at(i, c) = acc;
    }
  return out;
}

}  // namespace certlab
