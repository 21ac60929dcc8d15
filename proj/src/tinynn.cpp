#include "vnav/tinynn.hpp"

#include <cctype>
#include <sstream>

namespace vnav::nn {

namespace {

struct Token {
  std::string kind;
  std::vector<Index> args;
};

Token parse_token(const std::string& text) {
  Token t;
  const auto open = text.find('(');
  if (open == std::string::npos) {
    t.kind = text;
    return t;
  }
  if (text.back() != ')') throw ArchitectureError("malformed layer token '" + text + "'");
  t.kind = text.substr(0, open);
  std::stringstream args(text.substr(open + 1, text.size() - open - 2));
  std::string item;
  while (std::getline(args, item, ',')) {
    try {
      std::size_t used = 0;
      const long v = std::stol(item, &used);
      if (used != item.size() || v < 1) throw std::invalid_argument(item);
      t.args.push_back(v);
    } catch (const std::exception&) {
      throw ArchitectureError("bad argument '" + item + "' in '" + text + "'");
    }
  }
  return t;
}

Shape3 parse_input(const std::string& text) {
  if (text.rfind("in=", 0) != 0) throw ArchitectureError("descriptor must start with in=<shape>");
  std::vector<Index> dims;
  std::stringstream in(text.substr(3));
  std::string item;
  while (std::getline(in, item, 'x')) {
    try {
      std::size_t used = 0;
      const long v = std::stol(item, &used);
      if (used != item.size() || v < 1) throw std::invalid_argument(item);
      dims.push_back(v);
    } catch (const std::exception&) {
      throw ArchitectureError("bad input shape '" + text + "'");
    }
  }
  if (dims.size() == 1) return {1, 1, dims[0]};
  if (dims.size() == 3) return {dims[0], dims[1], dims[2]};
  throw ArchitectureError("input shape must be N or CxHxW");
}

template <typename Scalar>
void fill_uniform(Matrix<Scalar>& m, Scalar limit, Rng& rng) {
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(rng.uniform(-limit, limit));
}

}  // namespace

template <typename Scalar>
Network<Scalar>::Network(std::string_view descriptor, std::uint64_t seed) {
  std::stringstream in{std::string(descriptor)};
  std::string word;
  if (!(in >> word)) throw ArchitectureError("empty architecture descriptor");
  input_shape_ = parse_input(word);
  std::ostringstream canonical;
  canonical << word;

  // Current activation shape; `flat` once spatial structure is dropped.
  Shape3 shape = input_shape_;
  bool flat = input_shape_.channels == 1 && input_shape_.height == 1;
  while (in >> word) {
    const Token t = parse_token(word);
    canonical << ' ' << word;
    if (t.kind == "dense") {
      if (t.args.size() != 1) throw ArchitectureError("dense takes one argument");
      if (!flat) throw ArchitectureError("dense needs a flat input; add flatten");
      layers_.emplace_back(Dense<Scalar>(shape.size(), t.args[0]));
      shape = {1, 1, t.args[0]};
    } else if (t.kind == "conv") {
      if (t.args.size() != 3) throw ArchitectureError("conv takes (out_channels,kernel,stride)");
      if (flat) throw ArchitectureError("conv needs a spatial input");
      try {
        Conv2D<Scalar> conv(shape, t.args[0], t.args[1], t.args[2]);
        shape = conv.out_shape();
        layers_.emplace_back(std::move(conv));
      } catch (const ShapeError& e) {
        throw ArchitectureError(e.what());
      }
    } else if (t.kind == "relu" && t.args.empty()) {
      layers_.emplace_back(ReLU<Scalar>{});
    } else if (t.kind == "flatten" && t.args.empty()) {
      layers_.emplace_back(Flatten<Scalar>{});
      shape = {1, 1, shape.size()};
      flat = true;
    } else if (t.kind == "linear" && t.args.empty()) {
      layers_.emplace_back(Linear<Scalar>{});
    } else {
      throw ArchitectureError("unknown layer '" + word + "'");
    }
  }
  if (layers_.empty()) throw ArchitectureError("network has no layers");
  if (!std::holds_alternative<Linear<Scalar>>(layers_.back()) &&
      !std::holds_alternative<Dense<Scalar>>(layers_.back()))
    throw ArchitectureError("output layer must be linear");
  descriptor_ = canonical.str();
  output_size_ = shape.size();

  Rng rng(seed);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    bool feeds_relu = false;
    for (std::size_t j = i + 1; j < layers_.size(); ++j) {
      if (std::holds_alternative<Flatten<Scalar>>(layers_[j])) continue;
      feeds_relu = std::holds_alternative<ReLU<Scalar>>(layers_[j]);
      break;
    }
    const auto init = [&](Matrix<Scalar>& w, Index fan_in, Index fan_out) {
      const double limit = feeds_relu ? std::sqrt(6.0 / static_cast<double>(fan_in))
                                      : std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      fill_uniform(w, static_cast<Scalar>(limit), rng);
    };
    if (auto* d = std::get_if<Dense<Scalar>>(&layers_[i])) {
      init(d->weight, d->in_size(), d->out_size());
    } else if (auto* c = std::get_if<Conv2D<Scalar>>(&layers_[i])) {
      const Index k2 = c->kernel() * c->kernel();
      init(c->weight, c->in_shape().channels * k2, c->out_shape().channels * k2);
    }
  }
}

template <typename Scalar>
std::vector<Parameter<Scalar>> Network<Scalar>::parameters() {
  std::vector<Parameter<Scalar>> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const std::string prefix = "layer" + std::to_string(i) + ".";
    if (auto* d = std::get_if<Dense<Scalar>>(&layers_[i])) {
      out.push_back({prefix + "weight", &d->weight, &d->grad_weight});
      out.push_back({prefix + "bias", &d->bias, &d->grad_bias});
    } else if (auto* c = std::get_if<Conv2D<Scalar>>(&layers_[i])) {
      out.push_back({prefix + "weight", &c->weight, &c->grad_weight});
      out.push_back({prefix + "bias", &c->bias, &c->grad_bias});
    }
  }
  return out;
}

template <typename Scalar>
std::vector<ConstParameter<Scalar>> Network<Scalar>::parameters() const {
  std::vector<ConstParameter<Scalar>> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const std::string prefix = "layer" + std::to_string(i) + ".";
    if (const auto* d = std::get_if<Dense<Scalar>>(&layers_[i])) {
      out.push_back({prefix + "weight", &d->weight});
      out.push_back({prefix + "bias", &d->bias});
    } else if (const auto* c = std::get_if<Conv2D<Scalar>>(&layers_[i])) {
      out.push_back({prefix + "weight", &c->weight});
      out.push_back({prefix + "bias", &c->bias});
    }
  }
  return out;
}

template class Network<double>;
template class Network<float>;

}  // namespace vnav::nn
