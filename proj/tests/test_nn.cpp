#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "lipreach/error.hpp"
#include "lipreach/nn.hpp"

using namespace lipreach;
using namespace lipreach::nn;
using nlohmann::json;

namespace {

std::string error_of(const json& doc) {
  try {
    load_controller(doc);
  } catch (const ModelError& e) {
    return e.what();
  }
  return {};
}

Controller random_controller(std::mt19937_64& rng, std::size_t in, std::size_t depth) {
  std::uniform_real_distribution<double> w(-1.5, 1.5);
  std::vector<Layer> layers;
  std::size_t width = in;
  const Activation kinds[] = {Activation::ReLU, Activation::Sigmoid, Activation::Tanh, Activation::Linear};
  for (std::size_t d = 0; d < depth; ++d) {
    const std::size_t out = d + 1 == depth ? 2 : 2 + rng() % 6;
    std::vector<std::vector<double>> W(out, std::vector<double>(width));
    for (auto& row : W) for (auto& v : row) v = w(rng);
    std::vector<double> b(out);
    for (auto& v : b) v = w(rng);
    layers.push_back(make_layer(W, b, kinds[rng() % 4]));
    width = out;
  }
  return Controller(std::move(layers));
}

}  // namespace

TEST_CASE("activations") {
  CHECK(activate(Activation::Sigmoid, 0.0) == 0.5);
  CHECK(activate(Activation::Tanh, 0.0) == 0.0);
  CHECK(activate(Activation::ReLU, -1.0) == 0.0);
  CHECK(activate(Activation::ReLU, 2.5) == 2.5);
  CHECK(activate(Activation::Linear, -3.0) == -3.0);
  CHECK(activate(Activation::Sigmoid, -1000.0) == 0.0);
  CHECK(activate(Activation::Sigmoid, 1000.0) == 1.0);
}

TEST_CASE("activations are nondecreasing") {
  for (Activation k : {Activation::ReLU, Activation::Sigmoid, Activation::Tanh, Activation::Linear}) {
    double prev = activate(k, -50.0);
    for (double z = -50.0; z <= 50.0; z += 0.01) {
      const double v = activate(k, z);
      CHECK(v >= prev);
      prev = v;
    }
  }
}

TEST_CASE("load_controller examples") {
  const Controller id = load_controller(
      json::parse(R"({"layers":[{"weights":[[1]],"bias":[0],"activation":"linear"}]})"));
  CHECK(id.input_dim() == 1);
  CHECK(id.output_dim() == 1);
  CHECK(id.forward(std::vector<double>{-4.25})[0] == -4.25);

  const Controller two = load_controller(json::parse(R"({"layers":[
      {"weights":[[1,0],[0,1],[1,1]],"bias":[0,0,0],"activation":"tanh"},
      {"weights":[[1,1,1]],"bias":[0],"activation":"linear"}]})"));
  CHECK(two.input_dim() == 2);
  CHECK(two.output_dim() == 1);

  const std::string err = error_of(json::parse(R"({"layers":[
      {"weights":[[1,0],[0,1],[1,1]],"bias":[0,0,0],"activation":"tanh"},
      {"weights":[[1,1,1,1]],"bias":[0],"activation":"linear"}]})"));
  CHECK(err.find("dimension mismatch at layer 2") != std::string::npos);
}

TEST_CASE("load_controller rejects malformed documents") {
  CHECK(error_of(json::parse(R"({"layers":[{"weights":[[1]],"bias":[0],"activation":"softplus"}]})"))
            .find("unknown activation") != std::string::npos);
  CHECK(error_of(json::parse(R"({"layers":[{"weights":[[1]],"bias":[0, 1]}]})")).find("bias") != std::string::npos);
  CHECK(error_of(json::parse(R"({"layers":[{"weights":[[1, 2],[3]],"bias":[0, 1]}]})")).find("/layers/0/weights") !=
        std::string::npos);
  CHECK(error_of(json::parse(R"({"layers":[{"weights":[["a"]],"bias":[0]}]})")).find("/layers/0/weights/0/0") !=
        std::string::npos);
  CHECK(!error_of(json::parse(R"({"layers":[]})")).empty());
  CHECK(!error_of(json::parse(R"({"nope":1})")).empty());

  Layer bad = make_layer({{1.0}}, {0.0}, Activation::Linear);
  bad.weights[0] = std::nan("");
  CHECK_THROWS_AS(Controller({bad}), ModelError);
}

TEST_CASE("forward examples") {
  const Controller lin({make_layer({{1, 0}, {0, 1}}, {0, 0}, Activation::Linear)});
  CHECK(lin.forward(std::vector<double>{-1, 2}) == std::vector<double>{-1, 2});
  const Controller relu({make_layer({{1, 0}, {0, 1}}, {0, 0}, Activation::ReLU)});
  CHECK(relu.forward(std::vector<double>{-1, 2}) == std::vector<double>{0, 2});
  const Controller sig({make_layer({{2}}, {0}, Activation::Sigmoid)});
  CHECK(sig.forward(std::vector<double>{0})[0] == 0.5);
  CHECK_THROWS_AS(lin.forward(std::vector<double>{1}), ModelError);
}

TEST_CASE("forward matches an independent matrix evaluation") {
  // Reference values from numpy: sigmoid(W2 tanh(W1 y + b1) + b2).
  const Controller c({make_layer({{0.5, -1}, {2, 0.25}, {-0.3, 0.8}}, {0.1, -0.2, 0.05}, Activation::Tanh),
                      make_layer({{1, -0.5, 0.75}}, {0.2}, Activation::Sigmoid)});
  CHECK(c.forward(std::vector<double>{0.4, -0.7})[0] == doctest::Approx(0.5847947250210314).epsilon(1e-14));

  const Controller r({make_layer({{1.0, -2.0}, {0.5, 0.5}}, {0.3, -0.1}, Activation::ReLU)});
  const auto out = r.forward(std::vector<double>{0.4, -0.7});
  CHECK(out[0] == doctest::Approx(2.1));
  CHECK(out[1] == 0.0);
}

TEST_CASE("lipschitz_upper_bound examples") {
  CHECK(lipschitz_upper_bound(Controller({make_layer({{1}}, {0}, Activation::Linear)})) == 1.0);
  CHECK(lipschitz_upper_bound(Controller({make_layer({{4}}, {0}, Activation::Sigmoid)})) == 1.0);
  const Controller two({make_layer({{1, -1}, {0.5, 0.5}}, {0, 0}, Activation::Tanh),
                        make_layer({{2, -1}}, {0}, Activation::Tanh)});
  CHECK(lipschitz_upper_bound(two) == 6.0);
}

TEST_CASE("forward respects the Lipschitz upper bound") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> coord(-3.0, 3.0);
  int violations = 0;
  for (int net = 0; net < 20; ++net) {
    const Controller c = random_controller(rng, 3, 1 + net % 4);
    const double L = lipschitz_upper_bound(c);
    for (int k = 0; k < 500; ++k) {
      std::vector<double> y(3);
      std::vector<double> z(3);
      double dy = 0.0;
      for (std::size_t i = 0; i < 3; ++i) {
        y[i] = coord(rng);
        z[i] = coord(rng);
        dy = std::max(dy, std::fabs(y[i] - z[i]));
      }
      const auto fy = c.forward(y);
      const auto fz = c.forward(z);
      double du = 0.0;
      for (std::size_t i = 0; i < fy.size(); ++i) du = std::max(du, std::fabs(fy[i] - fz[i]));
      if (du > L * dy + 1e-9) ++violations;
    }
  }
  CHECK(violations == 0);
}

TEST_CASE("deep saturating networks stay finite") {
  std::vector<Layer> layers;
  for (int d = 0; d < 50; ++d) layers.push_back(make_layer({{40.0, -40.0}, {35.0, 30.0}}, {5, -5}, Activation::Tanh));
  layers.push_back(make_layer({{1e6, 1e6}}, {0}, Activation::Sigmoid));
  const Controller c(std::move(layers));
  for (double v : {-1e300, -1.0, 0.0, 1.0, 1e300}) {
    CHECK(std::isfinite(c.forward(std::vector<double>{v, -v})[0]));
  }
}
