#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vidrec/autograd.hpp"
#include "vidrec/tensor.hpp"

namespace vidrec {

// Named model parameters, kept in insertion order.
class ParamStore {
 public:
  void add(const std::string& name, Tensor value);
  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);

  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }
  std::size_t scalar_count() const;

  // Checkpoint: per tensor a `name: <name>` line followed by its text dump.
  void save(std::ostream& out) const;
  static ParamStore load(std::istream& in);

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::map<std::string, std::size_t> index_;
};

// Parameters visible to a forward pass: either watched on a tape (training,
// gradient checks) or plain constants (inference).
class BoundParams {
 public:
  static BoundParams constants(const ParamStore& store);
  static BoundParams watched(const ParamStore& store, Tape& tape);
  // Binds names[i] to vars[i].
  static BoundParams bind(const std::vector<std::string>& names, std::span<const Var> vars);

  const Var& operator[](const std::string& name) const;
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<Var>& vars() const { return vars_; }

 private:
  std::vector<std::string> names_;
  std::vector<Var> vars_;
  std::map<std::string, std::size_t> index_;
};

// Seeded uniform(-a, a) with a = gain/sqrt(fan_in).
Tensor uniform_init(Shape shape, std::size_t fan_in, std::mt19937_64& rng, double gain = 1.0);

}  // namespace vidrec
