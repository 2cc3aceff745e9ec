#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ham/nn.hpp"

namespace ham {

// Central-difference gradient verification of the reverse-mode engine.
//
// For each case a scalar loss is rebuilt from scratch per evaluation, every
// parameter entry is perturbed by +/-h (h = 1e-5), and the finite-difference
// slope is compared against the taped gradient. The error metric is
// |ad - fd| / max(|ad|, |fd|, 1e-4); the floor keeps near-zero gradient pairs
// from dividing by zero while still bounding their absolute disagreement.

struct GradCheckCase {
  std::string op;
  std::string shape;
  double max_rel_err = 0.0;
  bool pass = false;
};

struct GradCheckReport {
  std::vector<GradCheckCase> cases;

  bool all_pass() const {
    for (const auto& c : cases) {
      if (!c.pass) return false;
    }
    return !cases.empty();
  }

  double worst() const {
    double w = 0.0;
    for (const auto& c : cases) w = std::max(w, c.max_rel_err);
    return w;
  }
};

// Max relative error between taped and central-difference gradients over
// every entry of every parameter in `ps`. `build` must be a pure function of
// the parameter values (internal randomness must be freshly seeded per call).
double max_rel_err_fd(ParamStore& ps, const std::function<Var(Tape&)>& build,
                      double h = 1e-5);

// Runs the full per-operation suite: every differentiable operation at three
// or more shapes, plus composite end-to-end cases.
GradCheckReport run_gradient_suite(std::uint64_t seed = 20240817);

constexpr double kGradCheckTolerance = 1e-4;

}  // namespace ham
