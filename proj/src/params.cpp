#include "vidrec/params.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace vidrec {

void ParamStore::add(const std::string& name, Tensor value) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  index_[name] = names_.size();
  names_.push_back(name);
  values_.push_back(std::move(value));
}

const Tensor& ParamStore::get(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return values_[it->second];
}

Tensor& ParamStore::get(const std::string& name) {
  const auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return values_[it->second];
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const Tensor& t : values_) n += t.size();
  return n;
}

void ParamStore::save(std::ostream& out) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    out << "name: " << names_[i] << '\n';
    write_tensor(out, values_[i]);
  }
}

ParamStore ParamStore::load(std::istream& in) {
  ParamStore store;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("name: ", 0) != 0) throw std::runtime_error("checkpoint: expected 'name:' line, got '" + line + "'");
    store.add(line.substr(6), read_tensor(in));
  }
  return store;
}

BoundParams BoundParams::constants(const ParamStore& store) {
  BoundParams b;
  for (const std::string& name : store.names()) {
    b.index_[name] = b.vars_.size();
    b.names_.push_back(name);
    b.vars_.push_back(constant(store.get(name)));
  }
  return b;
}

BoundParams BoundParams::watched(const ParamStore& store, Tape& tape) {
  BoundParams b;
  for (const std::string& name : store.names()) {
    b.index_[name] = b.vars_.size();
    b.names_.push_back(name);
    b.vars_.push_back(tape.watch(store.get(name)));
  }
  return b;
}

BoundParams BoundParams::bind(const std::vector<std::string>& names, std::span<const Var> vars) {
  if (names.size() != vars.size()) throw std::invalid_argument("bind: one var per name expected");
  BoundParams b;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!b.index_.emplace(names[i], i).second) throw std::invalid_argument("bind: duplicate name '" + names[i] + "'");
    b.names_.push_back(names[i]);
    b.vars_.push_back(vars[i]);
  }
  return b;
}

const Var& BoundParams::operator[](const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return vars_[it->second];
}

Tensor uniform_init(Shape shape, std::size_t fan_in, std::mt19937_64& rng, double gain) {
  if (fan_in == 0) throw std::invalid_argument("fan_in must be positive");
  const double a = gain / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-a, a);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = dist(rng);
  return t;
}

}  // namespace vidrec
