#include "pansharp/adaptation.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <random>
#include <utility>

#include "pansharp/errors.hpp"
#include "pansharp/ops.hpp"
#include "pansharp/resample.hpp"

namespace pansharp::adapt {

namespace {

double u01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Raster crop_raster(const Raster& r, i64 y0, i64 x0, i64 h, i64 w) {
  Raster out = Raster::make(r.bands, h, w, 0.0, r.radiometric_range);
  for (i64 b = 0; b < r.bands; ++b)
    for (i64 y = 0; y < h; ++y)
      for (i64 x = 0; x < w; ++x) out.at(b, y, x) = r.at(b, y0 + y, x0 + x);
  return out;
}

metrics::CorrelationField crop_field(const metrics::CorrelationField& f, i64 y0,
                                     i64 x0, i64 h, i64 w) {
  metrics::CorrelationField out;
  out.bands = f.bands;
  out.height = h;
  out.width = w;
  out.window = f.window;
  out.values.assign(static_cast<size_t>(f.bands * h * w), 0.0);
  out.mask = Mask::full(f.bands, h, w, false);
  for (i64 b = 0; b < f.bands; ++b)
    for (i64 y = 0; y < h; ++y)
      for (i64 x = 0; x < w; ++x) {
        out.values[static_cast<size_t>((b * h + y) * w + x)] =
            f.at(b, y0 + y, x0 + x);
        out.mask.set(b, y, x, f.mask.at(b, y0 + y, x0 + x));
      }
  return out;
}

struct TileBox {
  i64 row = 0, col = 0, h = 0, w = 0;
};

// Anchors every `c` pixels plus a tail tile pulled back to the border;
// tail tiles overlap their neighbor, slightly over-weighting the seam.
std::vector<i64> cover_anchors(i64 extent, i64 c) {
  std::vector<i64> a;
  if (extent <= c) {
    a.push_back(0);
    return a;
  }
  for (i64 p = 0; p + c < extent; p += c) a.push_back(p);
  a.push_back(extent - c);
  return a;
}

std::vector<TileBox> cover_boxes(i64 h, i64 w, i64 c) {
  const std::vector<i64> rows = cover_anchors(h, c);
  const std::vector<i64> cols = cover_anchors(w, c);
  std::vector<TileBox> boxes;
  for (i64 r : rows)
    for (i64 cc : cols) boxes.push_back({r, cc, std::min(c, h), std::min(c, w)});
  return boxes;
}

// Everything the loss needs for one tile, cropped once up front. The
// alignment shifts are global, so only the reference field is cropped.
struct TileData {
  Raster pan, ms, mtilde;
  coreg::CoregistrationProduct product;
};

TileData make_tile(const Raster& pan, const Raster& ms, const Raster& mtilde,
                   const coreg::CoregistrationProduct& product, const TileBox& b,
                   int ratio) {
  TileData t;
  t.pan = crop_raster(pan, b.row, b.col, b.h, b.w);
  t.ms = crop_raster(ms, b.row / ratio, b.col / ratio, b.h / ratio, b.w / ratio);
  t.mtilde = crop_raster(mtilde, b.row, b.col, b.h, b.w);
  t.product.a = product.a;
  t.product.scores = product.scores;
  t.product.zero_scores = product.zero_scores;
  t.product.rho_max = crop_field(product.rho_max, b.row, b.col, b.h, b.w);
  return t;
}

class Adam {
 public:
  Adam(const AdaptationConfig& cfg, const std::vector<std::vector<double>>& params)
      : cfg_(cfg) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const auto& p : params) {
      m_.emplace_back(p.size(), 0.0);
      v_.emplace_back(p.size(), 0.0);
    }
  }

  void step(std::vector<std::vector<double>>& params,
            const std::vector<std::vector<double>>& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t k = 0; k < params.size(); ++k) {
      auto& p = params[k];
      const auto& g = grads[k];
      auto& m = m_[k];
      auto& v = v_[k];
      for (size_t i = 0; i < p.size(); ++i) {
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
        const double mh = m[i] / c1;
        const double vh = v[i] / c2;
        p[i] -= cfg_.lr * mh / (std::sqrt(vh) + cfg_.adam_eps);
      }
    }
  }

 private:
  AdaptationConfig cfg_;
  i64 t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

model::ModelWeights weights_from(const model::ModelWeights& proto,
                                 const std::vector<std::vector<double>>& vals) {
  model::ModelWeights w;
  w.bands = proto.bands;
  w.seed = proto.seed;
  const auto& specs = model::layout(proto.bands);
  w.params.reserve(vals.size());
  for (size_t k = 0; k < vals.size(); ++k)
    w.params.push_back(ad::Tensor::from_data(specs[k].shape, vals[k]));
  return w;
}

struct BatchOutcome {
  loss::LossBreakdown breakdown;
  std::vector<std::vector<double>> grads;
  bool ok = true;
  std::string reason;
};

// Mean loss gradient over the batch. Tiles without any scorable
// correlation window are skipped; a non-finite loss or gradient fails
// the whole batch.
BatchOutcome evaluate_batch(const model::ModelWeights& cur,
                            const std::vector<const TileData*>& batch,
                            double range, const AdaptationConfig& cfg) {
  BatchOutcome out;
  for (const auto& p : cur.params)
    out.grads.emplace_back(static_cast<size_t>(p.numel()), 0.0);

  i64 used = 0;
  for (const TileData* tile : batch) {
    ad::Tape tape;
    model::ModelWeights lw = cur.leafed(tape);
    loss::LossBreakdown bd;
    ad::Tensor l;
    try {
      const ad::Tensor mhat = model::forward_t(lw, tile->pan.to_tensor(),
                                               tile->mtilde.to_tensor(), range);
      l = loss::total_loss(mhat, tile->pan, tile->ms, tile->product, cfg.sensor,
                           cfg.loss, bd);
    } catch (const NumericFailure& e) {
      out.ok = false;
      out.reason = e.what();
      return out;
    } catch (const InsufficientSupport&) {
      continue;
    }
    const ad::Gradients g = tape.backward(l);
    for (size_t k = 0; k < lw.params.size(); ++k) {
      const auto src = g.of(lw.params[k]);
      auto& dst = out.grads[k];
      for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
    out.breakdown.total += bd.total;
    out.breakdown.spectral_dlambda += bd.spectral_dlambda;
    out.breakdown.spectral_ergas += bd.spectral_ergas;
    out.breakdown.spatial += bd.spatial;
    out.breakdown.fraction_active += bd.fraction_active;
    ++used;
  }
  if (used == 0) {
    out.ok = false;
    out.reason = "adaptation: no tile produced a scorable loss";
    return out;
  }
  const double inv = 1.0 / static_cast<double>(used);
  for (auto& g : out.grads)
    for (double& x : g) x *= inv;
  out.breakdown.total *= inv;
  out.breakdown.spectral_dlambda *= inv;
  out.breakdown.spectral_ergas *= inv;
  out.breakdown.spatial *= inv;
  out.breakdown.fraction_active *= inv;
  for (const auto& g : out.grads)
    for (double x : g)
      if (!std::isfinite(x)) {
        out.ok = false;
        out.reason = "adaptation: non-finite gradient";
        return out;
      }
  return out;
}

void check_pair(const Raster& pan, const Raster& ms, const SensorSpec& spec,
                const char* who) {
  pan.validate(std::string(who) + " pan");
  ms.validate(std::string(who) + " ms");
  if (pan.bands != 1)
    throw ContractViolation(std::string(who) + ": pan must be single band");
  if (pan.height != ms.height * spec.ratio || pan.width != ms.width * spec.ratio)
    throw ContractViolation(std::string(who) +
                            ": pan must be ratio x the ms grid");
}

void check_product(const coreg::CoregistrationProduct& product, const Raster& pan,
                   const Raster& ms) {
  if (static_cast<i64>(product.a.shifts.size()) != ms.bands)
    throw ContractViolation("adaptation: product has " +
                            std::to_string(product.a.shifts.size()) +
                            " shifts for " + std::to_string(ms.bands) + " bands");
  product.a.validate();
  if (product.rho_max.bands != ms.bands || product.rho_max.height != pan.height ||
      product.rho_max.width != pan.width)
    throw ContractViolation("adaptation: reference field does not match the pair");
}

std::vector<std::vector<double>> param_values(const model::ModelWeights& w) {
  std::vector<std::vector<double>> vals;
  vals.reserve(w.params.size());
  for (const auto& p : w.params) {
    const auto d = p.data();
    vals.emplace_back(d.begin(), d.end());
  }
  return vals;
}

void check_weights_for(const model::ModelWeights& w, const Raster& ms) {
  if (w.bands != ms.bands)
    throw ContractViolation("adaptation: weights are for " +
                            std::to_string(w.bands) + " bands, ms has " +
                            std::to_string(ms.bands));
  if (w.params.size() != model::layout(w.bands).size())
    throw ContractViolation("adaptation: weight list does not match the layout");
}

}  // namespace

void AdaptationConfig::validate() const {
  if (!(lr > 0.0))
    throw ContractViolation("adaptation: step size must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ContractViolation("adaptation: moment decays must lie in [0, 1)");
  if (!(adam_eps > 0.0))
    throw ContractViolation("adaptation: optimizer eps must be positive");
  if (iterations < 0)
    throw ContractViolation("adaptation: iterations must be >= 0");
  if (tile <= 0 || tile % sensor.ratio != 0)
    throw ContractViolation("adaptation: tile size must be a positive multiple "
                            "of the resolution ratio");
  if (n_clusters <= 0)
    throw ContractViolation("adaptation: cluster count must be positive");
  if (descriptor != "stats")
    throw UnsupportedConfig("adaptation: unknown descriptor variant '" +
                            descriptor + "'");
  sensor.validate();
  loss.validate();
}

std::vector<double> extract_tile_features(const Raster& pan_tile,
                                          const Raster& mtilde_tile) {
  pan_tile.validate("feature pan tile");
  mtilde_tile.validate("feature ms tile");
  if (pan_tile.bands != 1)
    throw ContractViolation("features: pan tile must be single band");
  if (pan_tile.height != mtilde_tile.height || pan_tile.width != mtilde_tile.width)
    throw ContractViolation("features: tiles must share the PAN-scale grid");

  const i64 h = pan_tile.height, w = pan_tile.width, bands = mtilde_tile.bands;
  const double n = static_cast<double>(h * w);
  std::vector<double> f;
  f.reserve(static_cast<size_t>(3 * bands + 18));

  const double mspan = mtilde_tile.range_span();
  for (i64 b = 0; b < bands; ++b) {
    double mu = 0.0;
    for (i64 y = 0; y < h; ++y)
      for (i64 x = 0; x < w; ++x) mu += mtilde_tile.at(b, y, x);
    mu /= n;
    double var = 0.0;
    for (i64 y = 0; y < h; ++y)
      for (i64 x = 0; x < w; ++x) {
        const double d = mtilde_tile.at(b, y, x) - mu;
        var += d * d;
      }
    var /= n;
    f.push_back(mu / mspan);
    f.push_back(std::sqrt(var) / mspan);
  }

  const double pspan = pan_tile.range_span();
  std::vector<double> gmag(static_cast<size_t>(h * w));
  auto rd = [&](i64 y, i64 x) {
    return pan_tile.at(0, std::clamp<i64>(y, 0, h - 1), std::clamp<i64>(x, 0, w - 1));
  };
  for (i64 y = 0; y < h; ++y)
    for (i64 x = 0; x < w; ++x) {
      const double gx = 0.5 * (rd(y, x + 1) - rd(y, x - 1));
      const double gy = 0.5 * (rd(y + 1, x) - rd(y - 1, x));
      gmag[static_cast<size_t>(y * w + x)] = std::hypot(gx, gy);
    }
  double gmu = 0.0;
  for (double v : gmag) gmu += v;
  gmu /= n;
  double gvar = 0.0;
  for (double v : gmag) gvar += (v - gmu) * (v - gmu);
  gvar /= n;
  f.push_back(gmu / pspan);
  f.push_back(std::sqrt(gvar) / pspan);

  std::array<double, 16> hist{};
  const double lo = pan_tile.radiometric_range[0];
  for (i64 y = 0; y < h; ++y)
    for (i64 x = 0; x < w; ++x) {
      const double t = (pan_tile.at(0, y, x) - lo) / pspan * 16.0;
      const i64 bin = std::clamp<i64>(static_cast<i64>(std::floor(t)), 0, 15);
      hist[static_cast<size_t>(bin)] += 1.0;
    }
  for (double c : hist) f.push_back(c / n);

  const metrics::CorrelationField corr =
      metrics::local_correlation_field(pan_tile, mtilde_tile, 4, 1e-8);
  for (i64 b = 0; b < bands; ++b) {
    double acc = 0.0;
    i64 cnt = 0;
    for (i64 y = 0; y < h; ++y)
      for (i64 x = 0; x < w; ++x)
        if (corr.mask.at(b, y, x)) {
          acc += corr.at(b, y, x);
          ++cnt;
        }
    f.push_back(cnt > 0 ? acc / static_cast<double>(cnt) : 0.0);
  }
  return f;
}

Pca3 pca3(const std::vector<std::vector<double>>& features) {
  const i64 n = static_cast<i64>(features.size());
  if (n < 4) throw ContractViolation("pca3: needs at least 4 vectors");
  const i64 d = static_cast<i64>(features[0].size());
  if (d < 1) throw ContractViolation("pca3: empty feature vectors");
  for (const auto& f : features)
    if (static_cast<i64>(f.size()) != d)
      throw ContractViolation("pca3: inconsistent feature lengths");

  Eigen::MatrixXd x(n, d);
  for (i64 i = 0; i < n; ++i)
    for (i64 j = 0; j < d; ++j) x(i, j) = features[static_cast<size_t>(i)][static_cast<size_t>(j)];
  const Eigen::RowVectorXd mu = x.colwise().mean();
  x.rowwise() -= mu;
  const Eigen::MatrixXd cov = (x.adjoint() * x) / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success)
    throw NumericFailure("pca3: eigendecomposition failed");

  Pca3 out;
  out.mean.assign(mu.data(), mu.data() + d);
  const auto& evals = es.eigenvalues();  // ascending
  double total = 0.0;
  for (i64 j = 0; j < d; ++j) total += std::max(evals(j), 0.0);
  const double top = std::max(evals(d - 1), 0.0);

  for (int r = 0; r < 3; ++r) {
    out.basis[static_cast<size_t>(r)].assign(static_cast<size_t>(d), 0.0);
    const i64 j = d - 1 - r;
    if (j < 0) continue;
    const double ev = std::max(evals(j), 0.0);
    if (!(ev > top * 1e-9) || total <= 0.0) continue;
    Eigen::VectorXd v = es.eigenvectors().col(j);
    i64 imax = 0;
    for (i64 i = 1; i < d; ++i)
      if (std::abs(v(i)) > std::abs(v(imax))) imax = i;
    if (v(imax) < 0.0) v = -v;
    for (i64 i = 0; i < d; ++i)
      out.basis[static_cast<size_t>(r)][static_cast<size_t>(i)] = v(i);
    out.explained[static_cast<size_t>(r)] = ev / total;
    ++out.rank;
  }
  if (out.rank < 3)
    std::cerr << "pca3: data rank " << out.rank
              << " < 3, padding projections with zeros\n";

  out.projected.assign(static_cast<size_t>(n), {0.0, 0.0, 0.0});
  for (i64 i = 0; i < n; ++i)
    for (int r = 0; r < out.rank; ++r) {
      double dot = 0.0;
      for (i64 j = 0; j < d; ++j)
        dot += x(i, j) * out.basis[static_cast<size_t>(r)][static_cast<size_t>(j)];
      out.projected[static_cast<size_t>(i)][static_cast<size_t>(r)] = dot;
    }
  return out;
}

Clustering kmeans_medoids(const std::vector<std::array<double, 3>>& points,
                          i64 k, std::uint64_t seed) {
  const i64 n = static_cast<i64>(points.size());
  if (k < 1 || k > n)
    throw ContractViolation("kmeans: k must lie in [1, point count]");

  auto dist2 = [&](const std::array<double, 3>& a, const std::array<double, 3>& b) {
    const double d0 = a[0] - b[0], d1 = a[1] - b[1], d2 = a[2] - b[2];
    return d0 * d0 + d1 * d1 + d2 * d2;
  };

  std::mt19937_64 rng(seed);
  std::vector<std::array<double, 3>> centers;
  std::vector<char> chosen(static_cast<size_t>(n), 0);
  {
    const i64 first = static_cast<i64>(rng() % static_cast<std::uint64_t>(n));
    centers.push_back(points[static_cast<size_t>(first)]);
    chosen[static_cast<size_t>(first)] = 1;
  }
  std::vector<double> d2(static_cast<size_t>(n));
  while (static_cast<i64>(centers.size()) < k) {
    double total = 0.0;
    for (i64 i = 0; i < n; ++i) {
      double best = dist2(points[static_cast<size_t>(i)], centers[0]);
      for (size_t c = 1; c < centers.size(); ++c)
        best = std::min(best, dist2(points[static_cast<size_t>(i)], centers[c]));
      d2[static_cast<size_t>(i)] = best;
      total += best;
    }
    i64 pick = -1;
    if (total > 0.0) {
      const double r = u01(rng) * total;
      double acc = 0.0;
      for (i64 i = 0; i < n; ++i) {
        acc += d2[static_cast<size_t>(i)];
        if (acc >= r) {
          pick = i;
          break;
        }
      }
      if (pick < 0) pick = n - 1;
    } else {
      // All remaining mass is at the chosen centers (duplicate points):
      // fall back to the smallest unchosen index.
      for (i64 i = 0; i < n; ++i)
        if (!chosen[static_cast<size_t>(i)]) {
          pick = i;
          break;
        }
      if (pick < 0) pick = 0;
    }
    centers.push_back(points[static_cast<size_t>(pick)]);
    chosen[static_cast<size_t>(pick)] = 1;
  }

  std::vector<i64> assign(static_cast<size_t>(n), 0);
  auto assign_all = [&]() {
    for (i64 i = 0; i < n; ++i) {
      i64 best = 0;
      double bd = dist2(points[static_cast<size_t>(i)], centers[0]);
      for (i64 c = 1; c < k; ++c) {
        const double dc = dist2(points[static_cast<size_t>(i)], centers[static_cast<size_t>(c)]);
        if (dc < bd) {
          bd = dc;
          best = c;
        }
      }
      assign[static_cast<size_t>(i)] = best;
    }
  };
  auto fix_empty = [&]() {
    for (i64 pass = 0; pass < k; ++pass) {
      std::vector<i64> count(static_cast<size_t>(k), 0);
      for (i64 i = 0; i < n; ++i) ++count[static_cast<size_t>(assign[static_cast<size_t>(i)])];
      i64 empty = -1;
      for (i64 c = 0; c < k; ++c)
        if (count[static_cast<size_t>(c)] == 0) {
          empty = c;
          break;
        }
      if (empty < 0) return;
      // Re-seed from the farthest point in any cluster that can spare one.
      i64 far = -1;
      double fd = -1.0;
      for (i64 i = 0; i < n; ++i) {
        const i64 c = assign[static_cast<size_t>(i)];
        if (count[static_cast<size_t>(c)] < 2) continue;
        const double dc = dist2(points[static_cast<size_t>(i)], centers[static_cast<size_t>(c)]);
        if (dc > fd) {
          fd = dc;
          far = i;
        }
      }
      if (far < 0) return;
      centers[static_cast<size_t>(empty)] = points[static_cast<size_t>(far)];
      assign_all();
    }
  };

  for (int it = 0; it < 100; ++it) {
    assign_all();
    fix_empty();
    double move = 0.0;
    for (i64 c = 0; c < k; ++c) {
      std::array<double, 3> mean{0.0, 0.0, 0.0};
      i64 cnt = 0;
      for (i64 i = 0; i < n; ++i)
        if (assign[static_cast<size_t>(i)] == c) {
          for (int j = 0; j < 3; ++j) mean[static_cast<size_t>(j)] += points[static_cast<size_t>(i)][static_cast<size_t>(j)];
          ++cnt;
        }
      if (cnt == 0) continue;
      for (int j = 0; j < 3; ++j) mean[static_cast<size_t>(j)] /= static_cast<double>(cnt);
      move = std::max(move, std::sqrt(dist2(mean, centers[static_cast<size_t>(c)])));
      centers[static_cast<size_t>(c)] = mean;
    }
    if (move < 1e-8) break;
  }
  assign_all();
  fix_empty();

  Clustering out;
  out.assignment = assign;
  out.medoids.assign(static_cast<size_t>(k), -1);
  std::vector<char> used(static_cast<size_t>(n), 0);
  for (i64 c = 0; c < k; ++c) {
    i64 best = -1;
    double bd = std::numeric_limits<double>::infinity();
    for (i64 i = 0; i < n; ++i) {
      if (assign[static_cast<size_t>(i)] != c) continue;
      double s = 0.0;
      for (i64 j = 0; j < n; ++j)
        if (assign[static_cast<size_t>(j)] == c)
          s += std::sqrt(dist2(points[static_cast<size_t>(i)], points[static_cast<size_t>(j)]));
      if (s < bd) {
        bd = s;
        best = i;
      }
    }
    if (best < 0) {
      // Pathological duplicates: keep determinism with the smallest
      // index not yet used as a medoid.
      for (i64 i = 0; i < n; ++i)
        if (!used[static_cast<size_t>(i)]) {
          best = i;
          break;
        }
    }
    out.medoids[static_cast<size_t>(c)] = best;
    used[static_cast<size_t>(best)] = 1;
  }
  return out;
}

TileSet select_tiles(const Raster& pan, const Raster& ms,
                     const AdaptationConfig& cfg, bool strict) {
  cfg.validate();
  check_pair(pan, ms, cfg.sensor, "select_tiles");
  const i64 c = cfg.tile;
  const i64 ny = pan.height / c, nx = pan.width / c;
  const i64 n = ny * nx;
  if (n == 0)
    throw InsufficientSupport("select_tiles: no full " + std::to_string(c) +
                              "x" + std::to_string(c) + " tile fits the image");
  i64 k = cfg.n_clusters;
  if (n < k) {
    if (strict)
      throw InsufficientSupport("select_tiles: " + std::to_string(n) +
                                " tiles cannot fill " + std::to_string(k) +
                                " clusters");
    std::cerr << "select_tiles: only " << n << " candidate tiles, reducing "
              << "clusters from " << k << "\n";
    k = n;
  }

  const Raster mtilde = upsample_poly23(ms, cfg.sensor.ratio);
  std::vector<std::vector<double>> features;
  features.reserve(static_cast<size_t>(n));
  for (i64 t = 0; t < n; ++t) {
    const i64 row = (t / nx) * c, col = (t % nx) * c;
    features.push_back(
        extract_tile_features(crop_raster(pan, row, col, c, c),
                              crop_raster(mtilde, row, col, c, c)));
  }

  std::vector<i64> medoids;
  std::vector<i64> cluster_of;
  if (k == n) {
    medoids.resize(static_cast<size_t>(n));
    cluster_of.resize(static_cast<size_t>(n));
    for (i64 t = 0; t < n; ++t) {
      medoids[static_cast<size_t>(t)] = t;
      cluster_of[static_cast<size_t>(t)] = t;
    }
  } else {
    const Pca3 p = pca3(features);
    const Clustering cl = kmeans_medoids(p.projected, k, cfg.seed);
    medoids = cl.medoids;
    cluster_of.resize(static_cast<size_t>(k));
    for (i64 cid = 0; cid < k; ++cid) cluster_of[static_cast<size_t>(cid)] = cid;
  }

  TileSet out;
  out.tile = c;
  for (i64 cid = 0; cid < k; ++cid) {
    const i64 t = medoids[static_cast<size_t>(cid)];
    out.anchors.push_back({(t / nx) * c, (t % nx) * c});
    out.clusters.push_back(cluster_of[static_cast<size_t>(cid)]);
    out.features.push_back(features[static_cast<size_t>(t)]);
  }
  return out;
}

AdaptationResult target_adapt(const model::ModelWeights& w0, const Raster& pan,
                              const Raster& ms,
                              const coreg::CoregistrationProduct& product,
                              const AdaptationConfig& cfg) {
  cfg.validate();
  check_pair(pan, ms, cfg.sensor, "target_adapt");
  check_product(product, pan, ms);
  check_weights_for(w0, ms);

  AdaptationResult res;
  res.weights = w0;
  if (cfg.iterations == 0) return res;

  const Raster mtilde = upsample_poly23(ms, cfg.sensor.ratio);
  std::vector<TileBox> boxes;
  if (cfg.fast) {
    const TileSet sel = select_tiles(pan, ms, cfg, false);
    for (const auto& a : sel.anchors)
      boxes.push_back({a[0], a[1], sel.tile, sel.tile});
  } else {
    boxes = cover_boxes(pan.height, pan.width, cfg.tile);
  }
  std::vector<TileData> tiles;
  tiles.reserve(boxes.size());
  for (const TileBox& b : boxes)
    tiles.push_back(make_tile(pan, ms, mtilde, product, b, cfg.sensor.ratio));

  std::vector<std::vector<double>> params = param_values(w0);
  Adam opt(cfg, params);
  const double range = pan.range_span();

  for (i64 iter = 0; iter < cfg.iterations; ++iter) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<const TileData*> batch;
    if (cfg.fast)
      batch.push_back(&tiles[static_cast<size_t>(iter % static_cast<i64>(tiles.size()))]);
    else
      for (const TileData& t : tiles) batch.push_back(&t);

    const model::ModelWeights cur = weights_from(w0, params);
    const BatchOutcome outcome = evaluate_batch(cur, batch, range, cfg);
    if (!outcome.ok) {
      res.weights = cur;
      res.aborted = true;
      res.abort_iteration = iter;
      res.abort_reason = outcome.reason;
      return res;
    }
    opt.step(params, outcome.grads);

    IterationRecord rec;
    rec.iter = iter;
    rec.breakdown = outcome.breakdown;
    rec.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    res.trajectory.push_back(rec);
  }
  res.weights = weights_from(w0, params);
  return res;
}

model::ModelWeights pretrain(const model::ModelWeights& w0,
                             const std::vector<std::pair<Raster, Raster>>& crops,
                             const AdaptationConfig& cfg,
                             std::vector<double>* epoch_losses) {
  cfg.validate();
  if (crops.empty()) throw ContractViolation("pretrain: needs at least one crop");
  for (const auto& [pan, ms] : crops) check_pair(pan, ms, cfg.sensor, "pretrain");
  check_weights_for(w0, crops.front().second);

  coreg::SearchConfig scfg;
  scfg.eps = cfg.loss.eps;
  scfg.rho_max_at_zero_shift = !cfg.loss.alignment_enabled;

  std::vector<std::vector<TileData>> crop_tiles;
  std::vector<double> ranges;
  for (const auto& [pan, ms] : crops) {
    const coreg::CoregistrationProduct product =
        coreg::estimate_band_shifts(pan, ms, cfg.sensor, scfg);
    const Raster mtilde = upsample_poly23(ms, cfg.sensor.ratio);
    std::vector<TileData> tiles;
    for (const TileBox& b : cover_boxes(pan.height, pan.width, cfg.tile))
      tiles.push_back(make_tile(pan, ms, mtilde, product, b, cfg.sensor.ratio));
    crop_tiles.push_back(std::move(tiles));
    ranges.push_back(pan.range_span());
  }

  std::vector<std::vector<double>> params = param_values(w0);
  Adam opt(cfg, params);
  std::mt19937_64 rng(cfg.seed);
  const i64 ncrops = static_cast<i64>(crops.size());

  if (epoch_losses) epoch_losses->clear();
  for (i64 epoch = 0; epoch < cfg.iterations; ++epoch) {
    std::vector<i64> order(static_cast<size_t>(ncrops));
    for (i64 i = 0; i < ncrops; ++i) order[static_cast<size_t>(i)] = i;
    for (i64 i = ncrops - 1; i > 0; --i) {
      const i64 j = static_cast<i64>(rng() % static_cast<std::uint64_t>(i + 1));
      std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
    }
    double epoch_total = 0.0;
    for (i64 idx : order) {
      const auto& tiles = crop_tiles[static_cast<size_t>(idx)];
      std::vector<const TileData*> batch;
      for (const TileData& t : tiles) batch.push_back(&t);
      const model::ModelWeights cur = weights_from(w0, params);
      const BatchOutcome outcome =
          evaluate_batch(cur, batch, ranges[static_cast<size_t>(idx)], cfg);
      if (!outcome.ok)
        throw NumericFailure("pretrain: aborted at epoch " +
                             std::to_string(epoch) + ", crop " +
                             std::to_string(idx) + ": " + outcome.reason);
      opt.step(params, outcome.grads);
      epoch_total += outcome.breakdown.total;
    }
    if (epoch_losses)
      epoch_losses->push_back(epoch_total / static_cast<double>(ncrops));
  }
  return weights_from(w0, params);
}

}  // namespace pansharp::adapt
