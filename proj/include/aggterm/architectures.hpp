#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "aggterm/graph.hpp"
#include "aggterm/registry.hpp"
#include "aggterm/term.hpp"

namespace aggterm {

enum class ArchKind { MeanGNN, GCN, GAT, GPS, GPS_RW };
enum class Activation { Relu, Sigmoid, Identity };
enum class OutputMap { Softmax, Identity };

struct ArchConfig {
  ArchKind kind = ArchKind::MeanGNN;
  int layers = 3;
  int hidden = 16;
  int classes = 5;
  int input_dim = 16;
  int rw_length = 0;  // GPS_RW only
  Activation activation = Activation::Relu;
  OutputMap output = OutputMap::Softmax;
  /// (l1, l2): the layer-l1 embedding is added to the output of layer l2.
  std::vector<std::pair<int, int>> skip;
  /// Feed the global mean of the previous layer into every update.
  bool global_readout = false;
  std::uint64_t seed = 0;

  void validate() const;
  /// Width of the layer-0 embedding (input features, plus rw for GPS_RW).
  int input_width() const;
  /// Single vector dimension shared by every sub-term of the compiled program.
  int program_dim() const;
};

std::string to_string(ArchKind kind);
ArchKind arch_kind_from_string(const std::string& s);

struct LayerWeights {
  Matrix W;  // hidden x (k * in): update over [self?; aggregate; global?]
  Vector b;
  Matrix W_att;  // GAT: hidden x in
  Vector a;      // GAT: 2 * hidden score vector
  Matrix Q, K, V;  // GPS attention: hidden x in
};

struct WeightSet {
  std::vector<LayerWeights> layers;
  Matrix W_out;  // classes x hidden
  Vector b_out;

  friend bool operator==(const WeightSet& a, const WeightSet& b);
};

/// Entries i.i.d. uniform on [-1/sqrt(fan_in), 1/sqrt(fan_in)].
WeightSet init_weights(const ArchConfig& config, std::uint64_t seed);
inline WeightSet init_weights(const ArchConfig& config) { return init_weights(config, config.seed); }

/// A closed term plus the registry holding its learned maps.
struct CompiledModel {
  TermPtr term;
  FunctionRegistry registry;
  int dim = 0;      // program dimension
  int outputs = 0;  // meaningful leading coordinates of the result
  int input_dim = 0;
};

CompiledModel compile(const ArchConfig& config, const WeightSet& weights);

/// Direct message passing on dense matrices, no term machinery. Uses the first
/// input_dim feature columns of g. Returns the `classes`-vector output.
Vector reference_forward(const ArchConfig& config, const WeightSet& weights,
                         const FeaturedGraph& g);

/// Evaluates a compiled model on g (features padded to the program dimension)
/// and returns the leading `outputs` coordinates.
Vector run_compiled(const CompiledModel& model, const FeaturedGraph& g);

}  // namespace aggterm
