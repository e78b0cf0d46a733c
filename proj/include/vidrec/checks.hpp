#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vidrec {

struct CheckResult {
  std::string name;
  double value = 0.0;      // max abs difference or max relative gradient error
  double tolerance = 0.0;  // pass iff value < tolerance

  bool pass() const { return value < tolerance; }
};

// stm_attention against mixing_reference over S in {1,4,9}, T in {1,2,4,8},
// d_h in {4,8,64}, t_w in {0,1,2} with d_h >= 2 t_w + 1 (two heads, seeded
// normal inputs), plus the exact reductions: t_w = 0 equals spatial
// attention, one frame equals full space-time attention.
std::vector<CheckResult> equivalence_suite(std::uint64_t seed);

// Central-difference gradient checks on small shapes: attention variants,
// GSF layer (both fusions), multitask loss, toy GSF backbone and toy XViT.
std::vector<CheckResult> gradient_suite(std::uint64_t seed);

}  // namespace vidrec
