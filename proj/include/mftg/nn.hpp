// Copyright 2026 The mftg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Feed-forward dense networks with exact reverse-mode gradients for both the
// parameters and the input, orthogonal initialization, Adam, and a textual
// checkpoint container.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "mftg/core.hpp"

namespace mftg::nn {

enum class Activation { Tanh, Relu, Linear };

inline const char* activation_name(Activation a) {
  switch (a) {
    case Activation::Tanh:
      return "tanh";
    case Activation::Relu:
      return "relu";
    case Activation::Linear:
      return "linear";
  }
  return "linear";
}

inline Activation parse_activation(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::Relu;
  if (s == "linear") return Activation::Linear;
  throw Error("unknown activation '" + s + "'");
}

struct LayerSpec {
  std::size_t out = 1;
  Activation activation = Activation::Linear;
};

// Parameters live in one flat vector; each layer owns a weight block stored
// row-major as [out][in] followed by its bias.
struct Layer {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation activation = Activation::Linear;
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
};

// Activations recorded by a forward pass, consumed by backward.
struct Tape {
  std::vector<std::vector<double>> inputs;   // input of each layer
  std::vector<std::vector<double>> outputs;  // post-activation output of each layer
  bool empty() const { return inputs.empty(); }
};

class DenseNet {
 public:
  DenseNet() = default;

  DenseNet(std::size_t input_dim, const std::vector<LayerSpec>& specs) : input_dim_(input_dim) {
    if (input_dim == 0 || specs.empty()) throw Error("network needs an input and a layer");
    std::size_t in = input_dim;
    std::size_t offset = 0;
    for (const auto& s : specs) {
      if (s.out == 0) throw Error("layer width must be positive");
      Layer l{in, s.out, s.activation, offset, offset + in * s.out};
      offset = l.bias_offset + s.out;
      layers_.push_back(l);
      in = s.out;
    }
    params_.assign(offset, 0.0);
  }

  std::size_t input_dim() const { return input_dim_; }
  std::size_t output_dim() const { return layers_.empty() ? 0 : layers_.back().out; }
  std::size_t num_params() const { return params_.size(); }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  std::span<double> weight(std::size_t layer) {
    const auto& l = layers_.at(layer);
    return {params_.data() + l.weight_offset, l.in * l.out};
  }
  std::span<const double> weight(std::size_t layer) const {
    const auto& l = layers_.at(layer);
    return {params_.data() + l.weight_offset, l.in * l.out};
  }
  std::span<double> bias(std::size_t layer) {
    const auto& l = layers_.at(layer);
    return {params_.data() + l.bias_offset, l.out};
  }
  std::span<const double> bias(std::size_t layer) const {
    const auto& l = layers_.at(layer);
    return {params_.data() + l.bias_offset, l.out};
  }

  std::vector<double> forward(std::span<const double> input, Tape* tape = nullptr) const {
    if (input.size() != input_dim_) {
      throw Error("input dimension " + std::to_string(input.size()) + " != " +
                  std::to_string(input_dim_));
    }
    if (tape) {
      tape->inputs.clear();
      tape->outputs.clear();
    }
    std::vector<double> x(input.begin(), input.end());
    for (const auto& l : layers_) {
      std::vector<double> y(l.out);
      const double* w = params_.data() + l.weight_offset;
      const double* b = params_.data() + l.bias_offset;
      for (std::size_t o = 0; o < l.out; ++o) {
        y[o] = b[o] + dot(w + o * l.in, x.data(), l.in);
      }
      activate(l.activation, y);
      if (tape) {
        tape->inputs.push_back(std::move(x));
        tape->outputs.push_back(y);
      }
      x = std::move(y);
    }
    return x;
  }

  // Accumulates d(output . output_grad)/d(params) into param_grads (sized
  // num_params) and returns the gradient with respect to the input.
  std::vector<double> backward(const Tape& tape, std::span<const double> output_grad,
                               std::span<double> param_grads) const {
    if (tape.empty() || tape.inputs.size() != layers_.size()) {
      throw Error("backward called without a cached forward pass");
    }
    if (output_grad.size() != output_dim()) throw Error("output gradient has wrong size");
    if (param_grads.size() != params_.size()) throw Error("gradient buffer has wrong size");
    std::vector<double> g(output_grad.begin(), output_grad.end());
    for (std::size_t li = layers_.size(); li-- > 0;) {
      const auto& l = layers_[li];
      const auto& y = tape.outputs[li];
      const auto& x = tape.inputs[li];
      switch (l.activation) {
        case Activation::Tanh:
          for (std::size_t o = 0; o < l.out; ++o) g[o] *= 1.0 - y[o] * y[o];
          break;
        case Activation::Relu:
          for (std::size_t o = 0; o < l.out; ++o) g[o] = y[o] > 0.0 ? g[o] : 0.0;
          break;
        case Activation::Linear:
          break;
      }
      const double* w = params_.data() + l.weight_offset;
      double* dw = param_grads.data() + l.weight_offset;
      double* db = param_grads.data() + l.bias_offset;
      std::vector<double> dx(l.in, 0.0);
      for (std::size_t o = 0; o < l.out; ++o) {
        const double go = g[o];
        db[o] += go;
        if (go == 0.0) continue;
        const double* wr = w + o * l.in;
        double* dwr = dw + o * l.in;
        for (std::size_t k = 0; k < l.in; ++k) {
          dwr[k] += go * x[k];
          dx[k] += go * wr[k];
        }
      }
      g = std::move(dx);
    }
    return g;
  }

  bool all_finite() const {
    return std::all_of(params_.begin(), params_.end(), [](double v) { return std::isfinite(v); });
  }

 private:
  static double dot(const double* a, const double* b, std::size_t n) {
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
    std::size_t k = 0;
    for (; k + 4 <= n; k += 4) {
      s0 += a[k] * b[k];
      s1 += a[k + 1] * b[k + 1];
      s2 += a[k + 2] * b[k + 2];
      s3 += a[k + 3] * b[k + 3];
    }
    for (; k < n; ++k) s0 += a[k] * b[k];
    return (s0 + s1) + (s2 + s3);
  }

  static void activate(Activation a, std::vector<double>& y) {
    switch (a) {
      case Activation::Tanh:
        for (double& v : y) v = std::tanh(v);
        break;
      case Activation::Relu:
        for (double& v : y) v = v > 0.0 ? v : 0.0;
        break;
      case Activation::Linear:
        break;
    }
  }

  std::size_t input_dim_ = 0;
  std::vector<Layer> layers_;
  std::vector<double> params_;
};

// ---------------------------------------------------------------------------
// Initialization

// rows x cols matrix (row-major) whose shorter dimension is orthonormal,
// scaled by gain.
inline std::vector<double> orthogonal_init(std::size_t rows, std::size_t cols, double gain,
                                           Rng& rng) {
  if (rows == 0 || cols == 0) throw Error("orthogonal_init: empty shape");
  const bool by_rows = rows <= cols;
  const std::size_t count = by_rows ? rows : cols;  // vectors to orthonormalize
  const std::size_t len = by_rows ? cols : rows;
  std::vector<std::vector<double>> v(count, std::vector<double>(len));
  for (auto& vec : v) {
    for (double& e : vec) e = rng.normal();
  }
  for (std::size_t i = 0; i < count; ++i) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t j = 0; j < i; ++j) {
        double d = 0.0;
        for (std::size_t k = 0; k < len; ++k) d += v[i][k] * v[j][k];
        for (std::size_t k = 0; k < len; ++k) v[i][k] -= d * v[j][k];
      }
    }
    double norm = 0.0;
    for (double e : v[i]) norm += e * e;
    norm = std::sqrt(norm);
    if (norm < 1e-12) throw Error("orthogonal_init: degenerate draw");
    for (double& e : v[i]) e /= norm;
  }
  std::vector<double> w(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      w[r * cols + c] = gain * (by_rows ? v[r][c] : v[c][r]);
    }
  }
  return w;
}

inline double default_gain(Activation a) {
  return a == Activation::Relu ? std::sqrt(2.0) : 1.0;
}

// Orthogonal weights and zero biases; `output_gain` overrides the last layer.
inline void init_network(DenseNet& net, Rng& rng, std::optional<double> output_gain = {}) {
  const auto& layers = net.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    double gain = default_gain(layers[i].activation);
    if (i + 1 == layers.size() && output_gain) gain = *output_gain;
    const auto w = orthogonal_init(layers[i].out, layers[i].in, gain, rng);
    std::copy(w.begin(), w.end(), net.weight(i).begin());
    std::fill(net.bias(i).begin(), net.bias(i).end(), 0.0);
  }
}

// ---------------------------------------------------------------------------
// Softmax

inline std::vector<double> log_softmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double z : logits) s += std::exp(z - m);
  const double lse = m + std::log(s);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

inline std::vector<double> softmax(std::span<const double> logits) {
  auto out = log_softmax(logits);
  double total = 0.0;
  for (double& v : out) {
    v = std::exp(v);
    total += v;
  }
  for (double& v : out) v /= total;
  return out;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  AdamState(std::size_t n, double learning_rate) : m(n, 0.0), v(n, 0.0), lr(learning_rate) {}
};

inline void adam_step(std::span<double> params, std::span<const double> grads, AdamState& s) {
  if (params.size() != grads.size() || s.m.size() != params.size()) {
    throw Error("adam_step: shape mismatch");
  }
  for (double g : grads) {
    if (!std::isfinite(g)) throw Error("gradient blow-up");
  }
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * grads[i];
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * grads[i] * grads[i];
    const double mhat = s.m[i] / c1;
    const double vhat = s.v[i] / c2;
    params[i] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
  }
}

// ---------------------------------------------------------------------------
// Checkpoints
//
//   MFTG-CKPT-1
//   name <network name>
//   input_dim <n>
//   layers <L>
//   layer <i> <activation> <out>
//   ...
//   tensor <i> weight <out> <in>
//   <out*in hex floats, row-major>
//   tensor <i> bias <out>
//   <out hex floats>
//   end

inline constexpr const char* kCheckpointMagic = "MFTG-CKPT-1";

inline std::string hex_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

inline std::string serialize_network(const DenseNet& net, const std::string& name) {
  std::ostringstream out;
  out << kCheckpointMagic << '\n';
  out << "name " << name << '\n';
  out << "input_dim " << net.input_dim() << '\n';
  out << "layers " << net.layers().size() << '\n';
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    const auto& l = net.layers()[i];
    out << "layer " << i << ' ' << activation_name(l.activation) << ' ' << l.out << '\n';
  }
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    const auto& l = net.layers()[i];
    out << "tensor " << i << " weight " << l.out << ' ' << l.in << '\n';
    const auto w = net.weight(i);
    for (std::size_t k = 0; k < w.size(); ++k) {
      out << hex_double(w[k]) << ((k + 1) % l.in == 0 ? '\n' : ' ');
    }
    out << "tensor " << i << " bias " << l.out << '\n';
    const auto b = net.bias(i);
    for (std::size_t k = 0; k < b.size(); ++k) {
      out << hex_double(b[k]) << (k + 1 == b.size() ? '\n' : ' ');
    }
  }
  out << "end\n";
  return out.str();
}

inline DenseNet deserialize_network(const std::string& text, std::string* name_out = nullptr) {
  std::istringstream in(text);
  std::string tok;
  auto expect = [&](const std::string& want) {
    if (!(in >> tok) || tok != want) throw Error("checkpoint: expected '" + want + "'");
  };
  std::string magic;
  std::getline(in, magic);
  if (magic != kCheckpointMagic) throw Error("checkpoint: bad magic header");
  std::string name;
  expect("name");
  in >> name;
  if (name_out) *name_out = name;
  std::size_t input_dim = 0, n_layers = 0;
  expect("input_dim");
  in >> input_dim;
  expect("layers");
  in >> n_layers;
  std::vector<LayerSpec> specs(n_layers);
  for (std::size_t i = 0; i < n_layers; ++i) {
    std::size_t idx = 0;
    std::string act;
    expect("layer");
    in >> idx >> act >> specs[i].out;
    if (idx != i) throw Error("checkpoint: layers out of order");
    specs[i].activation = parse_activation(act);
  }
  if (!in) throw Error("checkpoint: truncated header");
  DenseNet net(input_dim, specs);
  auto read_values = [&](std::span<double> dst) {
    for (double& d : dst) {
      if (!(in >> tok)) throw Error("checkpoint: truncated tensor");
      d = std::strtod(tok.c_str(), nullptr);
    }
  };
  for (std::size_t i = 0; i < n_layers; ++i) {
    std::size_t idx = 0, rows = 0, cols = 0;
    expect("tensor");
    in >> idx;
    expect("weight");
    in >> rows >> cols;
    const auto& l = net.layers()[i];
    if (idx != i || rows != l.out || cols != l.in) throw Error("checkpoint: weight shape mismatch");
    read_values(net.weight(i));
    expect("tensor");
    in >> idx;
    expect("bias");
    in >> rows;
    if (idx != i || rows != l.out) throw Error("checkpoint: bias shape mismatch");
    read_values(net.bias(i));
  }
  expect("end");
  return net;
}

// Writes through a temporary file and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp);
    out << content;
    if (!out) throw Error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline void save_network(const DenseNet& net, const std::string& name,
                         const std::filesystem::path& path) {
  write_file_atomic(path, serialize_network(net, name));
}

inline DenseNet load_network(const std::filesystem::path& path) {
  return deserialize_network(read_file(path));
}

}  // namespace mftg::nn
