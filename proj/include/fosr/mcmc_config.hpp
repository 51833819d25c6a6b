#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "fosr/errors.hpp"

namespace fosr {

// Pin the Gamma-shape and tail hyperparameters instead of slice sampling
// them; used by ablations and stationarity tests.
struct FixedHypers {
  double a_mu1 = 2.0;
  double a_mu2 = 2.0;
  double a_gamma1 = 2.0;
  double a_gamma2 = 2.0;
  double nu_gamma = 65.0;
};

struct McmcConfig {
  int K = 6;
  int n_iter = 8000;
  int burn_in = 2000;
  int thin = 3;
  std::uint64_t seed = 1;
  bool fix_basis = false;
  std::optional<FixedHypers> fixed_hypers;

  int num_draws() const { return (n_iter - burn_in) / thin; }
};

inline void validate_config(const McmcConfig& c) {
  if (c.K < 1) throw ValidationError("K must be at least 1");
  if (c.n_iter < 1) throw ValidationError("n_iter must be positive");
  if (c.burn_in < 0 || c.burn_in >= c.n_iter)
    throw ValidationError("burn_in must lie in [0, n_iter)");
  if (c.thin < 1) throw ValidationError("thin must be at least 1");
  if (c.num_draws() < 1) throw ValidationError("no draws retained; lower burn_in or thin");
}

inline McmcConfig config_from_json(const nlohmann::json& j) {
  McmcConfig c;
  try {
    c.K = j.value("K", c.K);
    c.n_iter = j.value("n_iter", c.n_iter);
    c.burn_in = j.value("burn_in", c.burn_in);
    c.thin = j.value("thin", c.thin);
    c.seed = j.value("seed", c.seed);
    c.fix_basis = j.value("fix_basis", c.fix_basis);
    if (j.contains("fixed_hypers") && !j["fixed_hypers"].is_null()) {
      const auto& h = j["fixed_hypers"];
      FixedHypers f;
      f.a_mu1 = h.value("a_mu1", f.a_mu1);
      f.a_mu2 = h.value("a_mu2", f.a_mu2);
      f.a_gamma1 = h.value("a_gamma1", f.a_gamma1);
      f.a_gamma2 = h.value("a_gamma2", f.a_gamma2);
      f.nu_gamma = h.value("nu_gamma", f.nu_gamma);
      c.fixed_hypers = f;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad config JSON: ") + e.what());
  }
  return c;
}

inline nlohmann::json config_to_json(const McmcConfig& c) {
  nlohmann::json j{{"K", c.K},       {"n_iter", c.n_iter}, {"burn_in", c.burn_in},
                   {"thin", c.thin}, {"seed", c.seed},     {"fix_basis", c.fix_basis}};
  if (c.fixed_hypers) {
    const auto& h = *c.fixed_hypers;
    j["fixed_hypers"] = {{"a_mu1", h.a_mu1},
                         {"a_mu2", h.a_mu2},
                         {"a_gamma1", h.a_gamma1},
                         {"a_gamma2", h.a_gamma2},
                         {"nu_gamma", h.nu_gamma}};
  }
  return j;
}

}  // namespace fosr
