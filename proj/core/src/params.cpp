#include "mfm/params.hpp"

#include <algorithm>

#include "mfm/error.hpp"

namespace mfm {

ad::Var ParamStore::add(std::string name, ad::Shape shape, std::vector<double> values) {
  if (contains(name)) throw ValidationError("duplicate parameter " + name);
  auto v = ad::Var::parameter(std::move(shape), std::move(values));
  entries_.emplace_back(std::move(name), v);
  return v;
}

ad::Var ParamStore::add_zeros(std::string name, ad::Shape shape) {
  return add_constant(std::move(name), std::move(shape), 0.0);
}

ad::Var ParamStore::add_constant(std::string name, ad::Shape shape, double value) {
  const auto n = ad::shape_size(shape);
  return add(std::move(name), std::move(shape), std::vector<double>(n, value));
}

ad::Var ParamStore::add_normal(std::string name, ad::Shape shape, double stddev, Rng& rng) {
  std::vector<double> values(ad::shape_size(shape));
  for (double& v : values) v = stddev * standard_normal(rng);
  return add(std::move(name), std::move(shape), std::move(values));
}

const ad::Var& ParamStore::get(std::string_view name) const {
  for (const auto& [n, v] : entries_)
    if (n == name) return v;
  throw ValidationError("unknown parameter " + std::string(name));
}

bool ParamStore::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == name; });
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.second.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.second.zero_grad();
}

io::NamedTensors ParamStore::to_named() const {
  io::NamedTensors out;
  out.reserve(entries_.size());
  for (const auto& [name, var] : entries_) {
    io::RawTensor raw;
    const auto& shape = var.shape();
    if (shape.size() > 4) {
      // Collapse leading axes; the loader restores the shape from the live parameter.
      std::size_t lead = 1;
      for (std::size_t i = 0; i + 3 < shape.size(); ++i) lead *= shape[i];
      raw.dims = {static_cast<std::uint32_t>(lead), static_cast<std::uint32_t>(shape[shape.size() - 3]),
                  static_cast<std::uint32_t>(shape[shape.size() - 2]),
                  static_cast<std::uint32_t>(shape.back())};
    } else {
      for (std::size_t i = 0; i < shape.size(); ++i)
        raw.dims[4 - shape.size() + i] = static_cast<std::uint32_t>(shape[i]);
    }
    raw.values.assign(var.value().begin(), var.value().end());
    out.emplace_back(name, std::move(raw));
  }
  return out;
}

void ParamStore::load_named(const io::NamedTensors& tensors) {
  if (tensors.size() != entries_.size()) {
    throw ValidationError("checkpoint has " + std::to_string(tensors.size()) + " tensors, model expects " +
                          std::to_string(entries_.size()));
  }
  for (auto& [name, var] : entries_) {
    auto it = std::find_if(tensors.begin(), tensors.end(), [&](const auto& t) { return t.first == name; });
    if (it == tensors.end()) throw ValidationError("checkpoint is missing " + name);
    if (it->second.values.size() != var.size()) {
      throw ShapeError("checkpoint tensor " + name + " has " + std::to_string(it->second.values.size()) +
                       " values, expected " + std::to_string(var.size()));
    }
    std::copy(it->second.values.begin(), it->second.values.end(), var.mutable_value().begin());
  }
}

}  // namespace mfm
