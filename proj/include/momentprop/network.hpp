#pragma once

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "momentprop/rng.hpp"
#include "momentprop/types.hpp"

namespace momentprop {

enum class LayerKind { kDropout, kDense, kRelu };

// One layer of a fully connected dropout network. Dropout carries the drop
// probability p_star, Dense carries its dimensions, ReLU is parameter-free.
struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  double p_star = 0.0;
  Index in_dim = 0;
  Index out_dim = 0;

  static LayerSpec dropout(double p_star) {
    if (!(p_star >= 0.0 && p_star <= 1.0)) {
      throw std::invalid_argument("dropout probability must lie in [0, 1], got " + std::to_string(p_star));
    }
    LayerSpec s;
    s.kind = LayerKind::kDropout;
    s.p_star = p_star;
    return s;
  }

  static LayerSpec dense(Index in_dim, Index out_dim) {
    if (in_dim < 1 || out_dim < 1) {
      throw std::invalid_argument("dense dimensions must be positive");
    }
    LayerSpec s;
    s.kind = LayerKind::kDense;
    s.in_dim = in_dim;
    s.out_dim = out_dim;
    return s;
  }

  static LayerSpec relu() {
    LayerSpec s;
    s.kind = LayerKind::kRelu;
    return s;
  }
};

template <class Scalar>
struct DenseWeights {
  MatrixX<Scalar> W;  // out_dim x in_dim
  VectorX<Scalar> b;  // out_dim
};

// Checks p_star ranges, positive dims, and that consecutive dense layers
// chain (dropout and ReLU preserve width). Returns {input_dim, output_dim}.
inline std::pair<Index, Index> validate_layer_chain(const std::vector<LayerSpec>& layers) {
  if (layers.empty()) throw std::invalid_argument("layer list is empty");
  Index width = 0;  // 0 = not pinned down yet
  Index input_dim = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    switch (l.kind) {
      case LayerKind::kDropout:
        if (!(l.p_star >= 0.0 && l.p_star <= 1.0)) {
          throw std::invalid_argument("layer " + std::to_string(i) + ": dropout probability out of [0, 1]");
        }
        break;
      case LayerKind::kDense:
        if (l.in_dim < 1 || l.out_dim < 1) {
          throw std::invalid_argument("layer " + std::to_string(i) + ": dense dimensions must be positive");
        }
        if (width != 0 && l.in_dim != width) {
          throw std::invalid_argument("layer " + std::to_string(i) + ": dense expects width " +
                                      std::to_string(l.in_dim) + " but previous layer produces " +
                                      std::to_string(width));
        }
        if (input_dim == 0) input_dim = l.in_dim;
        width = l.out_dim;
        break;
      case LayerKind::kRelu:
        break;
    }
  }
  if (input_dim == 0) throw std::invalid_argument("network needs at least one dense layer");
  return {input_dim, width};
}

// Fully connected dropout network: an ordered layer list plus the trained
// weights of its dense layers. Immutable in normal use; the trainer mutates
// a private copy through mutable_dense().
template <class Scalar>
class Network {
 public:
  Network() = default;

  Network(std::vector<LayerSpec> layers, std::vector<DenseWeights<Scalar>> weights)
      : layers_(std::move(layers)), weights_(std::move(weights)) {
    auto dims = validate_layer_chain(layers_);
    input_dim_ = dims.first;
    output_dim_ = dims.second;
    dense_slot_.assign(layers_.size(), -1);
    Index slot = 0;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (layers_[i].kind == LayerKind::kDense) dense_slot_[i] = slot++;
    }
    if (static_cast<Index>(weights_.size()) != slot) {
      throw std::invalid_argument("expected " + std::to_string(slot) + " dense weight blocks, got " +
                                  std::to_string(weights_.size()));
    }
    validate_weights();
  }

  const std::vector<LayerSpec>& layers() const { return layers_; }
  Index input_dim() const { return input_dim_; }
  Index output_dim() const { return output_dim_; }
  Index dense_count() const { return static_cast<Index>(weights_.size()); }

  const DenseWeights<Scalar>& dense(Index slot) const { return weights_.at(static_cast<std::size_t>(slot)); }
  DenseWeights<Scalar>& mutable_dense(Index slot) { return weights_.at(static_cast<std::size_t>(slot)); }

  // Dense slot for layer index i, -1 for non-dense layers.
  Index dense_slot(std::size_t layer_index) const { return dense_slot_.at(layer_index); }

  Index parameter_count() const {
    Index n = 0;
    for (const auto& d : weights_) n += d.W.size() + d.b.size();
    return n;
  }

  // Shape and finiteness checks; used after construction, loading, training.
  void validate_weights() const {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (layers_[i].kind != LayerKind::kDense) continue;
      const auto& d = weights_[static_cast<std::size_t>(dense_slot_[i])];
      if (d.W.rows() != layers_[i].out_dim || d.W.cols() != layers_[i].in_dim) {
        throw std::invalid_argument("weight matrix shape does not match layer spec at layer " + std::to_string(i));
      }
      if (d.b.size() != layers_[i].out_dim) {
        throw std::invalid_argument("bias length does not match layer spec at layer " + std::to_string(i));
      }
      if (!d.W.allFinite() || !d.b.allFinite()) {
        throw std::invalid_argument("non-finite weights at layer " + std::to_string(i));
      }
    }
  }

 private:
  std::vector<LayerSpec> layers_;
  std::vector<DenseWeights<Scalar>> weights_;
  std::vector<Index> dense_slot_;
  Index input_dim_ = 0;
  Index output_dim_ = 0;
};

// Builds a network with seed-deterministic Gaussian weights: standard
// deviation sqrt(2/in_dim) for dense layers feeding a ReLU, sqrt(1/in_dim)
// otherwise. Biases start at zero.
template <class Scalar = double>
Network<Scalar> build_network(const std::vector<LayerSpec>& specs, std::uint64_t seed) {
  validate_layer_chain(specs);
  Rng rng(RngStream{seed, 0});
  std::vector<DenseWeights<Scalar>> weights;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (specs[i].kind != LayerKind::kDense) continue;
    bool feeds_relu = false;
    for (std::size_t j = i + 1; j < specs.size(); ++j) {
      if (specs[j].kind == LayerKind::kDropout) continue;
      feeds_relu = (specs[j].kind == LayerKind::kRelu);
      break;
    }
    const double sd = std::sqrt((feeds_relu ? 2.0 : 1.0) / static_cast<double>(specs[i].in_dim));
    DenseWeights<Scalar> d;
    d.W.resize(specs[i].out_dim, specs[i].in_dim);
    for (Index r = 0; r < d.W.rows(); ++r) {
      for (Index c = 0; c < d.W.cols(); ++c) {
        d.W(r, c) = static_cast<Scalar>(sd * rng.normal());
      }
    }
    d.b = VectorX<Scalar>::Zero(specs[i].out_dim);
    weights.push_back(std::move(d));
  }
  return Network<Scalar>(specs, std::move(weights));
}

// Standard-dropout inference pass: dropout layers rescale by (1 - p_star),
// nothing is sampled. Referentially transparent.
template <class Scalar>
VectorX<Scalar> forward_deterministic(const Network<Scalar>& net, const VectorX<Scalar>& x) {
  if (x.size() != net.input_dim()) {
    throw std::invalid_argument("input width " + std::to_string(x.size()) + " does not match network input " +
                                std::to_string(net.input_dim()));
  }
  if (!x.allFinite()) throw std::invalid_argument("input vector has non-finite entries");
  VectorX<Scalar> v = x;
  const auto& layers = net.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    switch (layers[i].kind) {
      case LayerKind::kDropout:
        v *= static_cast<Scalar>(1.0 - layers[i].p_star);
        break;
      case LayerKind::kDense: {
        const auto& d = net.dense(net.dense_slot(i));
        v = (d.W * v + d.b).eval();
        break;
      }
      case LayerKind::kRelu:
        v = v.cwiseMax(Scalar(0));
        break;
    }
  }
  return v;
}

namespace detail {

inline std::string format_hex_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return std::string(buf);
}

inline double parse_double_token(const std::string& tok, const std::string& context) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw std::runtime_error("network file: malformed number '" + tok + "' in " + context);
  }
  return v;
}

}  // namespace detail

inline constexpr int kNetworkFormatVersion = 1;

// Writes a network as a self-describing text file: version tag, layer list,
// then row-major hex-float weight blocks. Hex floats round-trip bit-exactly.
inline void save_network(const Network<double>& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "momentprop-net " << kNetworkFormatVersion << "\n";
  out << "layers " << net.layers().size() << "\n";
  for (const auto& l : net.layers()) {
    switch (l.kind) {
      case LayerKind::kDropout:
        out << "dropout " << detail::format_hex_double(l.p_star) << "\n";
        break;
      case LayerKind::kDense:
        out << "dense " << l.in_dim << " " << l.out_dim << "\n";
        break;
      case LayerKind::kRelu:
        out << "relu\n";
        break;
    }
  }
  for (Index s = 0; s < net.dense_count(); ++s) {
    const auto& d = net.dense(s);
    out << "W " << d.W.rows() << " " << d.W.cols() << "\n";
    for (Index r = 0; r < d.W.rows(); ++r) {
      for (Index c = 0; c < d.W.cols(); ++c) {
        out << detail::format_hex_double(d.W(r, c)) << (c + 1 == d.W.cols() ? "\n" : " ");
      }
    }
    out << "b " << d.b.size() << "\n";
    for (Index r = 0; r < d.b.size(); ++r) {
      out << detail::format_hex_double(d.b(r)) << (r + 1 == d.b.size() ? "\n" : " ");
    }
  }
  out << "end\n";
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

inline Network<double> load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");

  auto next_token = [&in](const std::string& context) {
    std::string tok;
    if (!(in >> tok)) throw std::runtime_error("network file: truncated while reading " + context);
    return tok;
  };
  auto next_index = [&](const std::string& context) {
    const std::string tok = next_token(context);
    try {
      return static_cast<Index>(std::stoll(tok));
    } catch (const std::exception&) {
      throw std::runtime_error("network file: malformed integer '" + tok + "' in " + context);
    }
  };

  if (next_token("magic") != "momentprop-net") {
    throw std::runtime_error("network file: unrecognized format (bad magic)");
  }
  const Index version = next_index("version");
  if (version != kNetworkFormatVersion) {
    throw std::runtime_error("network file: unsupported version " + std::to_string(version));
  }
  if (next_token("header") != "layers") throw std::runtime_error("network file: expected 'layers'");
  const Index n_layers = next_index("layer count");
  if (n_layers < 1) throw std::runtime_error("network file: layer count must be positive");

  std::vector<LayerSpec> layers;
  layers.reserve(static_cast<std::size_t>(n_layers));
  for (Index i = 0; i < n_layers; ++i) {
    const std::string kind = next_token("layer kind");
    if (kind == "dropout") {
      layers.push_back(LayerSpec::dropout(detail::parse_double_token(next_token("p_star"), "dropout layer")));
    } else if (kind == "dense") {
      const Index in_dim = next_index("dense in_dim");
      const Index out_dim = next_index("dense out_dim");
      layers.push_back(LayerSpec::dense(in_dim, out_dim));
    } else if (kind == "relu") {
      layers.push_back(LayerSpec::relu());
    } else {
      throw std::runtime_error("network file: unknown layer kind '" + kind + "'");
    }
  }

  std::vector<DenseWeights<double>> weights;
  for (const auto& l : layers) {
    if (l.kind != LayerKind::kDense) continue;
    if (next_token("weight block") != "W") throw std::runtime_error("network file: expected 'W'");
    const Index rows = next_index("W rows");
    const Index cols = next_index("W cols");
    if (rows != l.out_dim || cols != l.in_dim) {
      throw std::runtime_error("network file: weight block " + std::to_string(rows) + "x" + std::to_string(cols) +
                               " disagrees with declared dense " + std::to_string(l.in_dim) + "->" +
                               std::to_string(l.out_dim));
    }
    DenseWeights<double> d;
    d.W.resize(rows, cols);
    for (Index r = 0; r < rows; ++r) {
      for (Index c = 0; c < cols; ++c) {
        d.W(r, c) = detail::parse_double_token(next_token("weight entry"), "weight block");
      }
    }
    if (next_token("bias block") != "b") throw std::runtime_error("network file: expected 'b'");
    const Index blen = next_index("bias length");
    if (blen != l.out_dim) {
      throw std::runtime_error("network file: bias length " + std::to_string(blen) +
                               " disagrees with declared dense output " + std::to_string(l.out_dim));
    }
    d.b.resize(blen);
    for (Index r = 0; r < blen; ++r) {
      d.b(r) = detail::parse_double_token(next_token("bias entry"), "bias block");
    }
    weights.push_back(std::move(d));
  }
  if (next_token("trailer") != "end") throw std::runtime_error("network file: missing end marker");
  return Network<double>(std::move(layers), std::move(weights));
}

}  // namespace momentprop
