#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dmtn/tensor.hpp"

namespace dmtn {

/// Role of a parameter. Only weights carry the L2 penalty.
enum class ParamKind : std::uint8_t { kWeight = 0, kBias = 1, kEmbedding = 2 };

struct NamedParameter {
  std::string name;
  ParamKind kind;
  Tensor value;
};

/// Named trainable tensors, kept in insertion order.
class ParameterStore {
 public:
  Tensor& add(std::string name, ParamKind kind, Tensor value);

  bool contains(std::string_view name) const;
  const Tensor& get(std::string_view name) const;
  Tensor& get(std::string_view name);
  ParamKind kind(std::string_view name) const;

  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }

  std::vector<std::string> names() const;

  friend bool operator==(const ParameterStore& a, const ParameterStore& b);

 private:
  std::size_t index_of(std::string_view name) const;

  std::vector<NamedParameter> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Parameter name -> d(loss)/d(parameter), same shape as the parameter.
using GradientMap = std::map<std::string, Tensor>;

// Initializers. Slice tensors (rank 3 and 4) use the trailing two dimensions
// as fan-out/fan-in of each slice.
Tensor xavier_uniform(Shape shape, std::mt19937_64& rng);
Tensor uniform(Shape shape, double limit, std::mt19937_64& rng);

}  // namespace dmtn
