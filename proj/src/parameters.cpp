#include "dmtn/parameters.hpp"

#include <cmath>

#include "dmtn/errors.hpp"

namespace dmtn {

Tensor& ParameterStore::add(std::string name, ParamKind kind, Tensor value) {
  if (index_.count(name)) throw ArgumentError("duplicate parameter '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.push_back({std::move(name), kind, std::move(value)});
  return entries_.back().value;
}

bool ParameterStore::contains(std::string_view name) const {
  return index_.find(std::string(name)) != index_.end();
}

std::size_t ParameterStore::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ArgumentError("unknown parameter '" + std::string(name) + "'");
  return it->second;
}

const Tensor& ParameterStore::get(std::string_view name) const {
  return entries_[index_of(name)].value;
}

Tensor& ParameterStore::get(std::string_view name) { return entries_[index_of(name)].value; }

ParamKind ParameterStore::kind(std::string_view name) const {
  return entries_[index_of(name)].kind;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

std::vector<std::string> ParameterStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.name);
  return out;
}

bool operator==(const ParameterStore& a, const ParameterStore& b) {
  if (a.entries_.size() != b.entries_.size()) return false;
  for (std::size_t i = 0; i < a.entries_.size(); ++i) {
    const auto& x = a.entries_[i];
    const auto& y = b.entries_[i];
    if (x.name != y.name || x.kind != y.kind || !(x.value == y.value)) return false;
  }
  return true;
}

Tensor uniform(Shape shape, double limit, std::mt19937_64& rng) {
  Tensor t(shape);
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& v : t.data()) v = dist(rng);
  return t;
}

Tensor xavier_uniform(Shape shape, std::mt19937_64& rng) {
  const std::size_t r = shape.rank();
  const double fan_out = r >= 2 ? static_cast<double>(shape[r - 2]) : 1.0;
  const double fan_in = static_cast<double>(shape[r - 1]);
  return uniform(shape, std::sqrt(6.0 / (fan_in + fan_out)), rng);
}

}  // namespace dmtn
