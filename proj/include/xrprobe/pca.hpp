#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "xrprobe/bundle.hpp"
#include "xrprobe/error.hpp"
#include "xrprobe/rng.hpp"

namespace xrprobe::pca {

/// Row-major n x d sample matrix.
struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;

  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
};

struct PcaModel {
  std::vector<double> mean;
  std::vector<std::vector<double>> components;  // k unit vectors of length d
  std::vector<double> eigenvalues;
  std::vector<double> explained_ratio;  // eigenvalue / total variance
};

struct PowerIterationOptions {
  double tol = 1e-8;
  int max_iter = 10000;
};

/// Sample covariance (n - 1 denominator) of the rows.
inline std::vector<double> covariance(const Matrix& x, const std::vector<double>& mean) {
  const std::size_t d = x.cols;
  std::vector<double> cov(d * d, 0.0), row(d);
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t j = 0; j < d; ++j) row[j] = x(r, j) - mean[j];
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j) cov[i * d + j] += row[i] * row[j];
  }
  const double inv = 1.0 / static_cast<double>(x.rows - 1);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) cov[j * d + i] = cov[i * d + j] *= inv;
  return cov;
}

/// Flips the sign so the largest-magnitude coordinate is positive.
inline void canonical_sign(std::vector<double>& v) {
  std::size_t arg = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
  if (v[arg] < 0)
    for (auto& x : v) x = -x;
}

/// Top-k principal components by power iteration with deflation on the
/// sample covariance. Convergence: ||v_t - v_{t-1}|| < tol after sign
/// alignment. A component of zero variance terminates with a basis vector
/// orthogonal to the previous components.
inline PcaModel pca_fit(const Matrix& x, std::size_t k, const PowerIterationOptions& opt = {}) {
  const std::size_t n = x.rows, d = x.cols;
  if (n < 2) throw DataError("pca: need at least 2 rows");
  if (k > std::min(n, d)) throw std::invalid_argument("pca: k exceeds min(n, d)");
  PcaModel m;
  m.mean.assign(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d; ++j) m.mean[j] += x(r, j);
  for (auto& v : m.mean) v /= static_cast<double>(n);
  auto cov = covariance(x, m.mean);
  double total = 0;
  for (std::size_t i = 0; i < d; ++i) total += cov[i * d + i];

  auto matvec = [&](const std::vector<double>& v) {
    std::vector<double> out(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < d; ++j) s += cov[i * d + j] * v[j];
      out[i] = s;
    }
    return out;
  };
  auto orthogonalize = [&](std::vector<double>& v) {
    for (const auto& c : m.components) {
      double dot = 0;
      for (std::size_t i = 0; i < d; ++i) dot += v[i] * c[i];
      for (std::size_t i = 0; i < d; ++i) v[i] -= dot * c[i];
    }
  };
  auto normalize = [&](std::vector<double>& v) {
    double s = 0;
    for (double t : v) s += t * t;
    s = std::sqrt(s);
    if (s > 0)
      for (auto& t : v) t /= s;
    return s;
  };

  CounterRng rng(derive_key({0x9CAULL, d}));
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> v(d);
    for (auto& t : v) t = rng.normal();
    orthogonalize(v);
    normalize(v);
    double lambda = 0;
    bool converged = false;
    double change = 0;
    for (int it = 0; it < opt.max_iter; ++it) {
      auto w = matvec(v);
      orthogonalize(w);  // deflation against found components
      const double norm = normalize(w);
      if (norm <= 1e-12 * total || norm == 0) {
        // Remaining variance is zero: any orthogonal direction is an eigenvector.
        converged = true;
        lambda = 0;
        break;
      }
      double dot = 0;
      for (std::size_t i = 0; i < d; ++i) dot += w[i] * v[i];
      if (dot < 0)
        for (auto& t : w) t = -t;
      change = 0;
      for (std::size_t i = 0; i < d; ++i) change += (w[i] - v[i]) * (w[i] - v[i]);
      change = std::sqrt(change);
      v = std::move(w);
      if (change < opt.tol) {
        converged = true;
        break;
      }
    }
    if (!converged) {
      const auto av = matvec(v);
      double rq = 0, res = 0;
      for (std::size_t i = 0; i < d; ++i) rq += v[i] * av[i];
      for (std::size_t i = 0; i < d; ++i) res += (av[i] - rq * v[i]) * (av[i] - rq * v[i]);
      std::ostringstream msg;
      msg << "pca: power iteration for component " << c << " did not converge in " << opt.max_iter
          << " iterations (residual " << std::sqrt(res) << ", step change " << change << ")";
      throw NumericError(msg.str());
    }
    const auto av = matvec(v);
    lambda = 0;
    for (std::size_t i = 0; i < d; ++i) lambda += v[i] * av[i];
    canonical_sign(v);
    m.components.push_back(std::move(v));
    m.eigenvalues.push_back(std::max(lambda, 0.0));
    m.explained_ratio.push_back(total > 0 ? std::max(lambda, 0.0) / total : 0.0);
  }
  return m;
}

inline std::vector<double> project(const PcaModel& m, std::span<const float> row) {
  std::vector<double> out(m.components.size(), 0.0);
  for (std::size_t c = 0; c < m.components.size(); ++c)
    for (std::size_t i = 0; i < row.size(); ++i) out[c] += (row[i] - m.mean[i]) * m.components[c][i];
  return out;
}

inline std::vector<double> reconstruct(const PcaModel& m, std::span<const double> scores) {
  std::vector<double> out = m.mean;
  for (std::size_t c = 0; c < scores.size(); ++c)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += scores[c] * m.components[c][i];
  return out;
}

/// Component scores over a patch grid: rows x cols x k, each component
/// min-max normalized to [0, 1] over the grid (constant -> 0).
struct ComponentGrid {
  std::size_t rows = 0, cols = 0, k = 0;
  std::vector<double> values;
};

inline ComponentGrid project_patch_grid(const EmbeddingRecord& rec, const PcaModel& m, std::size_t k) {
  if (!rec.has_patches()) throw DataError("record '" + rec.image_id + "' has no patch grid");
  if (k > 3 || k > m.components.size()) throw std::invalid_argument("project_patch_grid: k must be <= 3 and <= fitted components");
  ComponentGrid g{rec.h, rec.w, k, std::vector<double>(std::size_t{rec.h} * rec.w * k)};
  if (k == 0) return g;
  for (std::size_t r = 0; r < rec.h; ++r)
    for (std::size_t c = 0; c < rec.w; ++c) {
      const auto s = project(m, rec.patch(r, c));
      for (std::size_t j = 0; j < k; ++j) g.values[(r * rec.w + c) * k + j] = s[j];
    }
  for (std::size_t j = 0; j < k; ++j) {
    double lo = g.values[j], hi = g.values[j];
    for (std::size_t p = 0; p < std::size_t{rec.h} * rec.w; ++p) {
      lo = std::min(lo, g.values[p * k + j]);
      hi = std::max(hi, g.values[p * k + j]);
    }
    for (std::size_t p = 0; p < std::size_t{rec.h} * rec.w; ++p) {
      double& v = g.values[p * k + j];
      v = hi > lo ? (v - lo) / (hi - lo) : 0.0;
    }
  }
  return g;
}

/// Binary PPM (P6), one pixel per patch; component j drives channel j
/// (R, G, B), missing channels are 0. Byte = round(255 * value).
inline std::string encode_ppm(const ComponentGrid& g) {
  std::string out = "P6\n" + std::to_string(g.cols) + " " + std::to_string(g.rows) + "\n255\n";
  for (std::size_t p = 0; p < g.rows * g.cols; ++p)
    for (std::size_t ch = 0; ch < 3; ++ch) {
      const double v = ch < g.k ? std::clamp(g.values[p * g.k + ch], 0.0, 1.0) : 0.0;
      out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v))));
    }
  return out;
}

inline void render_component_map(const ComponentGrid& g, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open '" + path + "' for writing");
  const auto bytes = encode_ppm(g);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw DataError("write failed for '" + path + "'");
}

inline nlohmann::json to_json(const PcaModel& m) {
  return {{"mean", m.mean}, {"components", m.components}, {"eigenvalues", m.eigenvalues}, {"explained_ratio", m.explained_ratio}};
}

/// Stacks all patch vectors of the given records into one sample matrix.
inline Matrix patch_rows(const std::vector<const EmbeddingRecord*>& recs) {
  Matrix x;
  for (const auto* r : recs) {
    if (!r->has_patches()) throw DataError("record '" + r->image_id + "' has no patch grid");
    x.cols = r->cls.size();
    for (float v : r->patches) x.data.push_back(v);
  }
  x.rows = x.cols ? x.data.size() / x.cols : 0;
  return x;
}

}  // namespace xrprobe::pca
