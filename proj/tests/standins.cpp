#include "standins.hpp"

#include <stdexcept>

namespace standins {

using lipreach::expr::Ast;
using lipreach::nn::Activation;
using lipreach::nn::Controller;
using lipreach::nn::Layer;

namespace {

std::vector<Ast> parse_all(const std::vector<std::string>& texts) {
  std::vector<Ast> out;
  for (const auto& t : texts) out.push_back(lipreach::expr::parse(t));
  return out;
}

// Hidden layer with the given activation followed by a linear output layer.
Controller two_layer(std::uint64_t seed, std::size_t in, std::size_t hidden, std::size_t out, Activation act,
                     double scale) {
  Weights w(seed);
  std::vector<std::vector<double>> w1(hidden, std::vector<double>(in));
  std::vector<double> b1(hidden);
  for (auto& row : w1) for (auto& v : row) v = w.next(-1.0, 1.0);
  for (auto& v : b1) v = w.next(-0.5, 0.5);
  std::vector<std::vector<double>> w2(out, std::vector<double>(hidden));
  std::vector<double> b2(out);
  for (auto& row : w2) for (auto& v : row) v = w.next(-scale, scale);
  for (auto& v : b2) v = w.next(-0.1, 0.1);
  return Controller({lipreach::nn::make_layer(w1, b1, act), lipreach::nn::make_layer(w2, b2, Activation::Linear)});
}

StandIn make(std::string name, std::vector<std::string> dynamics, Controller c, std::vector<double> lo,
             std::vector<double> hi) {
  lipreach::sim::NncsModel m(parse_all(dynamics), {}, std::move(c), 0.1);
  return {std::move(name), std::move(m), lipreach::reach::Box(std::move(lo), std::move(hi))};
}

}  // namespace

std::vector<StandIn> all() {
  std::vector<StandIn> out;
  out.push_back(make("oscillator_tanh", {"x2", "-x1 - 0.2*x2 + 0.1*x1^2 + u1"},
                     two_layer(101, 2, 8, 1, Activation::Tanh, 0.3), {0.4, -0.1}, {0.6, 0.1}));
  out.push_back(make("cubic_sigmoid", {"-0.3*x1 + x2 - 0.1*x1^3", "-x1 + 0.5*u1"},
                     two_layer(202, 2, 8, 1, Activation::Sigmoid, 0.5), {-0.1, 0.3}, {0.1, 0.5}));
  out.push_back(make("bilinear_relu", {"x2 + 0.05*x1*x2", "-0.5*x1 - 0.1*x2 + u1"},
                     two_layer(303, 2, 8, 1, Activation::ReLU, 0.3), {0.2, 0.2}, {0.4, 0.4}));
  out.push_back(make("coupled3_tanh", {"-0.2*x1 + x2", "-x1 - 0.2*x2 + 0.1*x3^2", "-0.3*x3 + u1"},
                     two_layer(404, 3, 8, 1, Activation::Tanh, 0.3), {0.0, 0.4, -0.1}, {0.2, 0.6, 0.1}));
  out.push_back(make("chain3_relu", {"x2 - 0.1*x1^3", "-x1 + u1", "-0.5*x3 + 0.2*x1*x2 + u2"},
                     two_layer(505, 3, 8, 2, Activation::ReLU, 0.3), {0.3, -0.1, 0.0}, {0.5, 0.1, 0.2}));
  return out;
}

StandIn by_name(const std::string& name) {
  for (auto& s : all()) {
    if (s.name == name) return std::move(s);
  }
  throw std::invalid_argument("unknown stand-in " + name);
}

}  // namespace standins
