#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mfm/autograd.hpp"
#include "mfm/rng.hpp"
#include "mfm/tensor_io.hpp"

namespace mfm {

/// Ordered collection of named trainable tensors. Modules keep Var handles that
/// share nodes with the store, so in-place updates are seen everywhere.
class ParamStore {
 public:
  ad::Var add(std::string name, ad::Shape shape, std::vector<double> values);
  ad::Var add_zeros(std::string name, ad::Shape shape);
  ad::Var add_constant(std::string name, ad::Shape shape, double value);
  /// Gaussian init with standard deviation `stddev`.
  ad::Var add_normal(std::string name, ad::Shape shape, double stddev, Rng& rng);

  const ad::Var& get(std::string_view name) const;
  bool contains(std::string_view name) const;

  const std::vector<std::pair<std::string, ad::Var>>& entries() const { return entries_; }
  std::size_t parameter_count() const;
  void zero_grad();

  io::NamedTensors to_named() const;
  /// Loads values by name; every entry must be present with a matching element count.
  void load_named(const io::NamedTensors& tensors);

 private:
  std::vector<std::pair<std::string, ad::Var>> entries_;
};

}  // namespace mfm
