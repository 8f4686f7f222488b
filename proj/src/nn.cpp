#include "lipreach/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "lipreach/error.hpp"

namespace lipreach::nn {

double activate(Activation kind, double z) {
  switch (kind) {
    case Activation::ReLU: return z > 0.0 ? z : 0.0;
    case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
    case Activation::Tanh: return std::tanh(z);
    case Activation::Linear: return z;
  }
  return z;
}

double activation_slope_bound(Activation kind) {
  return kind == Activation::Sigmoid ? 0.25 : 1.0;
}

Activation activation_from_name(std::string_view name) {
  if (name == "relu") return Activation::ReLU;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "tanh") return Activation::Tanh;
  if (name == "linear") return Activation::Linear;
  throw ModelError("unknown activation '" + std::string(name) + "'");
}

std::string_view activation_name(Activation kind) {
  switch (kind) {
    case Activation::ReLU: return "relu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
    case Activation::Linear: return "linear";
  }
  return "linear";
}

Controller::Controller(std::vector<Layer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ModelError("controller has no layers");
  for (std::size_t j = 0; j < layers_.size(); ++j) {
    const Layer& l = layers_[j];
    const std::string where = "layer " + std::to_string(j + 1);
    if (l.in_dim == 0 || l.out_dim == 0) throw ModelError(where + " has an empty weight matrix");
    if (l.weights.size() != l.in_dim * l.out_dim) throw ModelError(where + ": weight matrix is not rectangular");
    if (l.bias.size() != l.out_dim) {
      throw ModelError(where + ": bias length " + std::to_string(l.bias.size()) + " does not match " +
                       std::to_string(l.out_dim) + " weight rows");
    }
    const auto finite = [](double v) { return std::isfinite(v); };
    if (!std::all_of(l.weights.begin(), l.weights.end(), finite) ||
        !std::all_of(l.bias.begin(), l.bias.end(), finite)) {
      throw ModelError(where + ": non-finite weight");
    }
    if (j > 0 && layers_[j - 1].out_dim != l.in_dim) {
      throw ModelError("dimension mismatch at layer " + std::to_string(j + 1) + ": expects " +
                       std::to_string(l.in_dim) + " inputs, previous layer produces " +
                       std::to_string(layers_[j - 1].out_dim));
    }
    max_width_ = std::max({max_width_, l.in_dim, l.out_dim});
  }
}

std::vector<double> Controller::forward(std::span<const double> y) const {
  std::vector<double> out(output_dim());
  std::vector<double> scratch(2 * max_width_);
  forward(y, out, scratch);
  return out;
}

void Controller::forward(std::span<const double> y, std::span<double> out, std::span<double> scratch) const {
  if (y.size() != input_dim()) {
    throw ModelError("controller expects " + std::to_string(input_dim()) + " inputs, got " +
                     std::to_string(y.size()));
  }
  std::span<double> a = scratch.subspan(0, max_width_);
  std::span<double> b = scratch.subspan(max_width_, max_width_);
  std::copy(y.begin(), y.end(), a.begin());
  for (const Layer& l : layers_) {
    for (std::size_t r = 0; r < l.out_dim; ++r) {
      double z = l.bias[r];
      const double* row = l.weights.data() + r * l.in_dim;
      for (std::size_t c = 0; c < l.in_dim; ++c) z += row[c] * a[c];
      b[r] = activate(l.activation, z);
    }
    std::swap(a, b);
  }
  std::copy_n(a.begin(), output_dim(), out.begin());
}

Layer make_layer(const std::vector<std::vector<double>>& weights, std::vector<double> bias,
                 Activation activation) {
  Layer l;
  l.out_dim = weights.size();
  l.in_dim = weights.empty() ? 0 : weights.front().size();
  for (std::size_t r = 0; r < weights.size(); ++r) {
    if (weights[r].size() != l.in_dim) {
      throw ModelError("weight row " + std::to_string(r) + " has length " + std::to_string(weights[r].size()) +
                       ", expected " + std::to_string(l.in_dim));
    }
    l.weights.insert(l.weights.end(), weights[r].begin(), weights[r].end());
  }
  l.bias = std::move(bias);
  l.activation = activation;
  return l;
}

namespace {

double number_at(const nlohmann::json& v, const std::string& path) {
  if (!v.is_number()) throw ModelError(path + ": expected a number");
  return v.get<double>();
}

}  // namespace

Controller load_controller(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("layers") || !doc["layers"].is_array()) {
    throw ModelError("/layers: expected an array of layers");
  }
  std::vector<Layer> layers;
  const auto& arr = doc["layers"];
  for (std::size_t j = 0; j < arr.size(); ++j) {
    const std::string base = "/layers/" + std::to_string(j);
    const auto& lj = arr[j];
    if (!lj.is_object()) throw ModelError(base + ": expected an object");
    if (!lj.contains("weights") || !lj["weights"].is_array()) throw ModelError(base + "/weights: expected a matrix");
    if (!lj.contains("bias") || !lj["bias"].is_array()) throw ModelError(base + "/bias: expected an array");

    std::vector<std::vector<double>> w;
    for (std::size_t r = 0; r < lj["weights"].size(); ++r) {
      const auto& row = lj["weights"][r];
      const std::string rp = base + "/weights/" + std::to_string(r);
      if (!row.is_array()) throw ModelError(rp + ": expected an array");
      std::vector<double> vals;
      for (std::size_t c = 0; c < row.size(); ++c) vals.push_back(number_at(row[c], rp + "/" + std::to_string(c)));
      w.push_back(std::move(vals));
    }
    std::vector<double> bias;
    for (std::size_t r = 0; r < lj["bias"].size(); ++r) {
      bias.push_back(number_at(lj["bias"][r], base + "/bias/" + std::to_string(r)));
    }
    Activation act = Activation::Linear;
    if (lj.contains("activation")) {
      if (!lj["activation"].is_string()) throw ModelError(base + "/activation: expected a string");
      try {
        act = activation_from_name(lj["activation"].get<std::string>());
      } catch (const ModelError& e) {
        throw ModelError(base + "/activation: " + e.what());
      }
    }
    try {
      layers.push_back(make_layer(w, std::move(bias), act));
    } catch (const ModelError& e) {
      throw ModelError(base + "/weights: " + e.what());
    }
  }
  return Controller(std::move(layers));
}

double lipschitz_upper_bound(const Controller& c) {
  double bound = 1.0;
  for (const Layer& l : c.layers()) {
    double norm = 0.0;
    for (std::size_t r = 0; r < l.out_dim; ++r) {
      double row_sum = 0.0;
      for (std::size_t col = 0; col < l.in_dim; ++col) row_sum += std::fabs(l.weight(r, col));
      norm = std::max(norm, row_sum);
    }
    bound *= norm * activation_slope_bound(l.activation);
  }
  return bound;
}

}  // namespace lipreach::nn
