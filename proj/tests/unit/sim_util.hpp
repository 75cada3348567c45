#pragma once

#include "test_util.hpp"

namespace simutil {

// Instances with templated baselines rendered from their fault plans.
inline std::vector<shapnarr::Instance> instances_from(const shapnarr::SyntheticCorpus& c, int n) {
  std::vector<shapnarr::Instance> out;
  for (std::size_t i = 0; i < c.tables.size(); ++i)
    out.push_back({c.tables[i], c.info, shapnarr::render_templated_narrative(c.tables[i], n, c.plans[i])});
  return out;
}

inline shapnarr::RunConfig simlab_config(shapnarr::Design d, int max_rounds = 3, int n = 4) {
  shapnarr::RunConfig c;
  c.run_id = "test";
  c.design = d;
  c.max_rounds = max_rounds;
  c.n_features = n;
  c.models = {"sim", "sim", "sim", "sim"};
  return c;
}

inline std::unique_ptr<shapnarr::Gateway> simlab_gateway(shapnarr::ReviserPolicy policy, std::uint64_t seed = 1) {
  auto g = std::make_unique<shapnarr::Gateway>();
  shapnarr::SimlabOptions o;
  o.reviser = policy;
  o.seed = seed;
  g->register_model("sim", shapnarr::make_simlab_provider(o));
  return g;
}

}  // namespace simutil
