#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pansharp/coregistration.hpp"
#include "pansharp/loss.hpp"
#include "pansharp/model.hpp"
#include "pansharp/raster.hpp"

namespace pansharp::adapt {

using ad::i64;

struct AdaptationConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  i64 iterations = 100;
  std::uint64_t seed = 0;
  i64 tile = 256;       // processing tile edge at PAN scale
  i64 n_clusters = 16;  // representative tiles kept by fast adaptation
  bool fast = false;    // one selected tile per iteration vs full cover
  std::string descriptor = "stats";  // tile feature extractor
  SensorSpec sensor;
  loss::LossConfig loss;

  void validate() const;
};

struct IterationRecord {
  i64 iter = 0;
  loss::LossBreakdown breakdown;
  double wall_ms = 0.0;
};

struct AdaptationResult {
  model::ModelWeights weights;
  std::vector<IterationRecord> trajectory;
  bool aborted = false;
  i64 abort_iteration = -1;
  std::string abort_reason;
};

// Representative tiles: anchors at PAN scale, cluster id and the full
// descriptor per selected tile. Selected tiles are cluster medoids.
struct TileSet {
  i64 tile = 0;
  std::vector<std::array<i64, 2>> anchors;  // (row, col)
  std::vector<i64> clusters;
  std::vector<std::vector<double>> features;
};

// Per-band mean/std, PAN gradient-magnitude mean/std, 16-bin PAN
// histogram, mean local PAN-band correlation: 3B + 18 entries, all
// scale-normalized.
std::vector<double> extract_tile_features(const Raster& pan_tile,
                                          const Raster& mtilde_tile);

struct Pca3 {
  std::vector<std::array<double, 3>> projected;
  std::vector<double> mean;
  std::array<std::vector<double>, 3> basis;  // unit rows, top eigenvalue first
  std::array<double, 3> explained{};         // fractions, non-increasing
  int rank = 0;                              // < 3 means zero-padded output
};
Pca3 pca3(const std::vector<std::vector<double>>& features);

struct Clustering {
  std::vector<i64> assignment;
  std::vector<i64> medoids;  // one point index per cluster
};
// Seeded k-means++ start, Lloyd iterations to movement < 1e-8 or 100
// rounds; empty clusters are re-seeded from the farthest point.
Clustering kmeans_medoids(const std::vector<std::array<double, 3>>& points,
                          i64 k, std::uint64_t seed);

// Tiling, descriptors, pca3, k-means; k is reduced with a warning when
// fewer full tiles exist than cfg.n_clusters unless strict is set.
TileSet select_tiles(const Raster& pan, const Raster& ms,
                     const AdaptationConfig& cfg, bool strict = false);

// Iterative fine-tuning against the target pair. Full mode accumulates
// gradients over a covering tile grid per step; fast mode steps on the
// selected representative tiles round-robin. A non-finite loss aborts
// and returns the last finite weights.
AdaptationResult target_adapt(const model::ModelWeights& w0, const Raster& pan,
                              const Raster& ms,
                              const coreg::CoregistrationProduct& product,
                              const AdaptationConfig& cfg);

// Epoch loop over shuffled crops with the per-crop coregistration
// products computed up front; one crop is exactly target_adapt.
// epoch_losses, when given, receives the mean crop loss per epoch.
model::ModelWeights pretrain(const model::ModelWeights& w0,
                             const std::vector<std::pair<Raster, Raster>>& crops,
                             const AdaptationConfig& cfg,
                             std::vector<double>* epoch_losses = nullptr);

}  // namespace pansharp::adapt
