#pragma once

#include <vector>

#include "mces/model.hpp"

// Three-field toy data shared by the model and evolve tests.
namespace fixtures {

inline mces::FeatureSchema toy_schema() {
  using mces::FieldKind;
  return mces::FeatureSchema(
      {{"a", FieldKind::kNumeric, 4}, {"b", FieldKind::kNumeric, 4}, {"c", FieldKind::kCategorical, 3}});
}

inline mces::ModelConfig toy_config() {
  mces::ModelConfig c;
  c.embed_dim = 2;
  c.hidden = 4;
  c.adam.lr = 0.01;
  return c;
}

// Random buckets; simulated label = 5 + bucket(a) - 0.5 bucket(b), observed
// every day at simulated - offset.
inline mces::Window toy_window(mces::Rng& rng, std::size_t length, double offset = 0.0) {
  mces::Window w;
  w.length = length;
  w.fields = 3;
  for (std::size_t t = 0; t < length; ++t) {
    const int a = mces::uniform_int(rng, 0, 3);
    const int b = mces::uniform_int(rng, 0, 3);
    w.buckets.insert(w.buckets.end(), {a, b, mces::uniform_int(rng, 0, 2)});
    const double y = 5.0 + a - 0.5 * b;
    w.sim_epi.push_back(y);
    w.sim_hyp.push_back(y / 2);
    w.obs_epi.push_back(y - offset);
    w.obs_hyp.push_back(0.0);
    w.mask_epi.push_back(1);
    w.mask_hyp.push_back(0);
  }
  return w;
}

inline std::vector<mces::Window> toy_windows(mces::Rng& rng, std::size_t count, std::size_t length,
                                             double offset = 0.0) {
  std::vector<mces::Window> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(toy_window(rng, length, offset));
  return out;
}

inline mces::Predictor toy_model(std::uint64_t seed) {
  mces::Rng rng(seed);
  mces::Genome g = mces::init_genome(3, rng);
  return mces::Predictor(toy_schema(), g, toy_config(), rng);
}

inline mces::Batch all_of(const std::vector<mces::Window>& ws) {
  mces::Batch b;
  for (const mces::Window& w : ws) b.push_back(&w);
  return b;
}

}  // namespace fixtures
