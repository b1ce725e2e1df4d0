#include "certlab/network.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "certlab/rng.hpp"

namespace certlab {

Network::Network(std::vector<Linear> blocks) : blocks_(std::move(blocks)) { check_invariants(); }

void Network::check_invariants() const {
  if (blocks_.empty()) throw Error("network: needs at least one linear layer");
  for (size_t i = 0; i < blocks_.size(); ++i) {
    const Linear& b = blocks_[i];
    if (b.weight.rank() != 2 || b.bias.rank() != 1 || b.bias.size() != b.weight.rows())
      throw Error("network: malformed linear block " + std::to_string(i));
    if (!b.weight.all_finite() || !b.bias.all_finite())
      throw Error("network: non-finite parameters in block " + std::to_string(i));
    if (i > 0 && blocks_[i - 1].weight.rows() != b.weight.cols())
      throw Error("network: dimension mismatch between blocks " + std::to_string(i - 1) + " and " +
                  std::to_string(i));
  }
}

int Network::layer_dim(int layer) const {
  if (layer == 0) return input_dim();
  int block = (layer - 1) / 2;  // layers 1,2 -> block 0; 3,4 -> block 1; ...
  return blocks_.at(static_cast<size_t>(block)).weight.rows();
}

const Network::Linear& Network::linear_at(int layer) const {
  if (is_relu_layer(layer)) throw Error("linear_at: layer " + std::to_string(layer) + " is a ReLU layer");
  return blocks_.at(static_cast<size_t>((layer - 1) / 2));
}

Network::Linear& Network::linear_at(int layer) {
  if (is_relu_layer(layer)) throw Error("linear_at: layer " + std::to_string(layer) + " is a ReLU layer");
  return blocks_.at(static_cast<size_t>((layer - 1) / 2));
}

std::vector<int> Network::dims() const {
  std::vector<int> d{input_dim()};
  for (const Linear& b : blocks_) d.push_back(b.weight.rows());
  return d;
}

Tensor Network::eval(const Tensor& x) const {
  if (x.size() != input_dim())
    throw Error("eval: input size " + std::to_string(x.size()) + " does not match input_dim " +
                std::to_string(input_dim()));
  Tensor cur = x;
  for (size_t i = 0; i < blocks_.size(); ++i) {
    const Linear& b = blocks_[i];
    Tensor next({b.weight.rows()});
    for (int r = 0; r < b.weight.rows(); ++r) {
      double acc = b.bias[r];
      const double* row = b.weight.data() + static_cast<size_t>(r) * b.weight.cols();
      for (int c = 0; c < b.weight.cols(); ++c) acc += row[c] * cur[c];
      next[r] = acc;
    }
    if (i + 1 < blocks_.size())
      for (int r = 0; r < next.size(); ++r) next[r] = std::max(0.0, next[r]);
    cur = std::move(next);
  }
  return cur;
}

int Network::num_params() const {
  int n = 0;
  for (const Linear& b : blocks_) n += b.weight.size() + b.bias.size();
  return n;
}

Tensor Network::flat_params() const {
  Tensor theta({num_params()});
  int k = 0;
  for (const Linear& b : blocks_) {
    for (int i = 0; i < b.weight.size(); ++i) theta[k++] = b.weight[i];
    for (int i = 0; i < b.bias.size(); ++i) theta[k++] = b.bias[i];
  }
  return theta;
}

void Network::set_flat_params(const Tensor& theta) {
  if (theta.size() != num_params()) throw Error("set_flat_params: size mismatch");
  int k = 0;
  for (Linear& b : blocks_) {
    for (int i = 0; i < b.weight.size(); ++i) b.weight[i] = theta[k++];
    for (int i = 0; i < b.bias.size(); ++i) b.bias[i] = theta[k++];
  }
}

Tensor Specification::rows() const {
  if (label < 0 || label >= num_classes) throw Error("specification: label out of range");
  Tensor c = Tensor::zeros({num_classes - 1, num_classes});
  int r = 0;
  for (int y2 = 0; y2 < num_classes; ++y2) {
    if (y2 == label) continue;
    c.at(r, y2) = 1.0;
    c.at(r, label) = -1.0;
    ++r;
  }
  return c;
}

Network build_network(const std::vector<int>& dims, uint64_t seed) {
  if (dims.size() < 2) throw Error("build_network: dims needs at least input and output widths");
  for (int d : dims)
    if (d <= 0) throw Error("build_network: dims must be positive");
  Rng rng(seed);
  std::vector<Network::Linear> blocks;
  for (size_t i = 1; i < dims.size(); ++i) {
    int rows = dims[i], cols = dims[i - 1];
    double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    Tensor w({rows, cols});
    for (int k = 0; k < w.size(); ++k) w[k] = rng.uniform(-bound, bound);
    blocks.push_back({std::move(w), Tensor::zeros({rows})});
  }
  return Network(std::move(blocks));
}

Network elide_spec(const Network& net, const Specification& spec) {
  const Network::Linear& last = net.blocks().back();
  if (last.weight.rows() != spec.num_classes) throw Error("elide_spec: class count mismatch");
  Tensor c = spec.rows();
  Tensor w({c.rows(), last.weight.cols()});
  Tensor b({c.rows()});
  for (int r = 0; r < c.rows(); ++r) {
    for (int j = 0; j < last.weight.cols(); ++j) {
      double acc = 0.0;
      for (int k = 0; k < spec.num_classes; ++k) acc += c.at(r, k) * last.weight.at(k, j);
      w.at(r, j) = acc;
    }
    double acc = 0.0;
    for (int k = 0; k < spec.num_classes; ++k) acc += c.at(r, k) * last.bias[k];
    b[r] = acc;
  }
  std::vector<Network::Linear> blocks(net.blocks().begin(), net.blocks().end() - 1);
  blocks.push_back({std::move(w), std::move(b)});
  return Network(std::move(blocks));
}

namespace {

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

class LineParser {
 public:
  explicit LineParser(const std::string& path) : path_(path), in_(path) {
    if (!in_) throw Error("cannot open network file: " + path);
  }

  std::string next_line() {
    std::string line;
    for (;;) {
      if (!std::getline(in_, line)) throw Error(path_ + ": unexpected end of file at line " + std::to_string(lineno_));
      ++lineno_;
      if (!line.empty()) return line;
    }
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(path_ + ":" + std::to_string(lineno_) + ": " + msg);
  }

  int lineno() const { return lineno_; }

 private:
  std::string path_;
  std::ifstream in_;
  int lineno_ = 0;
};

std::vector<double> parse_doubles(LineParser& p, const std::string& line, int expected) {
  std::vector<double> out;
  out.reserve(static_cast<size_t>(expected));
  const char* s = line.data();
  const char* end = s + line.size();
  while (s < end) {
    while (s < end && (*s == ' ' || *s == '\t')) ++s;
    if (s >= end) break;
    double v;
    auto res = std::from_chars(s, end, v);
    if (res.ec != std::errc()) p.fail("bad float near byte offset " + std::to_string(s - line.data()));
    out.push_back(v);
    s = res.ptr;
  }
  if (static_cast<int>(out.size()) != expected)
    p.fail("expected " + std::to_string(expected) + " floats, got " + std::to_string(out.size()));
  return out;
}

}  // namespace

void save_network(const Network& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write network file: " + path);
  out << "certlab-net v1\n";
  out << "dims:";
  for (int d : net.dims()) out << ' ' << d;
  out << '\n';
  for (const Network::Linear& b : net.blocks()) {
    out << "linear " << b.weight.rows() << ' ' << b.weight.cols() << '\n';
    for (int r = 0; r < b.weight.rows(); ++r) {
      for (int c = 0; c < b.weight.cols(); ++c) {
        if (c) out << ' ';
        out << format_double(b.weight.at(r, c));
      }
      out << '\n';
    }
    out << "bias";
    for (int r = 0; r < b.bias.size(); ++r) out << ' ' << format_double(b.bias[r]);
    out << '\n';
  }
  if (!out) throw Error("write failed: " + path);
}

Network load_network(const std::string& path) {
  LineParser p(path);
  if (p.next_line() != "certlab-net v1") p.fail("bad header, expected 'certlab-net v1'");

  std::string dims_line = p.next_line();
  if (dims_line.rfind("dims:", 0) != 0) p.fail("expected 'dims:' line");
  std::istringstream ds(dims_line.substr(5));
  std::vector<int> dims;
  int d;
  while (ds >> d) dims.push_back(d);
  if (dims.size() < 2) p.fail("dims line needs at least two widths");

  std::vector<Network::Linear> blocks;
  for (size_t i = 1; i < dims.size(); ++i) {
    std::string head = p.next_line();
    int rows = 0, cols = 0;
    if (std::sscanf(head.c_str(), "linear %d %d", &rows, &cols) != 2) p.fail("expected 'linear <rows> <cols>'");
    if (rows != dims[i] || cols != dims[i - 1])
      p.fail("linear block shape " + std::to_string(rows) + "x" + std::to_string(cols) +
             " does not chain with dims");
    Tensor w({rows, cols});
    for (int r = 0; r < rows; ++r) {
      auto vals = parse_doubles(p, p.next_line(), cols);
      for (int c = 0; c < cols; ++c) w.at(r, c) = vals[static_cast<size_t>(c)];
    }
    std::string bias_line = p.next_line();
    if (bias_line.rfind("bias", 0) != 0) p.fail("expected 'bias' line");
    auto vals = parse_doubles(p, bias_line.substr(4), rows);
    blocks.push_back({std::move(w), Tensor::vec(std::move(vals))});
  }
  return Network(std::move(blocks));
}

TapedNetwork TapedNetwork::make(Tape& tape, const Network& net) {
  TapedNetwork t;
  t.net = &net;
  for (const Network::Linear& b : net.blocks()) {
    t.weights.push_back(tape.leaf(b.weight));
    t.biases.push_back(tape.leaf(b.bias));
  }
  return t;
}

TapedNetwork TapedNetwork::elided(Tape& tape, const Specification& spec) const {
  TapedNetwork t = *this;
  Var c = tape.constant(spec.rows());
  t.weights.back() = tape.matmul(c, weights.back());
  t.biases.back() = tape.matvec(c, biases.back());
  return t;
}

Var net_forward(Tape& tape, const TapedNetwork& tnet, Var x) {
  Var cur = x;
  for (size_t i = 0; i < tnet.weights.size(); ++i) {
    cur = tape.add(tape.matvec(tnet.weights[i], cur), tnet.biases[i]);
    if (i + 1 < tnet.weights.size()) cur = tape.relu(cur);
  }
  return cur;
}

}  // namespace certlab
