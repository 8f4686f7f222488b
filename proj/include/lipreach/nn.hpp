#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace lipreach::nn {

enum class Activation { ReLU, Sigmoid, Tanh, Linear };

double activate(Activation kind, double z);

/// Upper bound on |activate(kind, a) - activate(kind, b)| / |a - b|.
double activation_slope_bound(Activation kind);

Activation activation_from_name(std::string_view name);
std::string_view activation_name(Activation kind);

/// Dense layer z = act(W y + b); W is row-major, out_dim x in_dim.
struct Layer {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::vector<double> weights;
  std::vector<double> bias;
  Activation activation = Activation::Linear;

  double weight(std::size_t row, std::size_t col) const { return weights[row * in_dim + col]; }
};

/// Feedforward controller u = sigma_k(... sigma_1(y)).
class Controller {
public:
  /// Validates the dimension chain and finiteness of every entry.
  /// Throws ModelError("dimension mismatch at layer j") with j 1-based.
  explicit Controller(std::vector<Layer> layers);

  std::size_t input_dim() const noexcept { return layers_.front().in_dim; }
  std::size_t output_dim() const noexcept { return layers_.back().out_dim; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }

  std::vector<double> forward(std::span<const double> y) const;

  /// Allocation-free variant; `out` must have output_dim() entries and
  /// `scratch` at least 2 * max layer width.
  void forward(std::span<const double> y, std::span<double> out, std::span<double> scratch) const;

  std::size_t max_width() const noexcept { return max_width_; }

private:
  std::vector<Layer> layers_;
  std::size_t max_width_ = 0;
};

/// Builds a layer from nested row vectors; validates row lengths.
Layer make_layer(const std::vector<std::vector<double>>& weights, std::vector<double> bias,
                 Activation activation);

/// Reads {"layers": [{"weights": [[...]], "bias": [...], "activation": "..."}]}.
Controller load_controller(const nlohmann::json& doc);

/// prod_j ||W_j||_inf * s_j, with s_j the activation slope bound.
double lipschitz_upper_bound(const Controller& c);

}  // namespace lipreach::nn
