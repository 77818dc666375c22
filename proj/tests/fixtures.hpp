#pragma once

// Data shared by the unit and acceptance suites.

#include <utility>
#include <vector>

#include "xrprobe/metrics/nlg.hpp"
#include "xrprobe/pca.hpp"
#include "xrprobe/rng.hpp"

namespace fixtures {

// ---- NLG golden corpus. Expected values from tests/oracles/nlg_golden.py.

inline const std::vector<std::pair<const char*, std::vector<const char*>>>& nlg_corpus() {
  static const std::vector<std::pair<const char*, std::vector<const char*>>> c{
      {"The heart is normal in size.", {"The heart size is normal."}},
      {"No pleural effusion or pneumothorax.", {"No pleural effusion. No pneumothorax."}},
      {"Lungs are clear.", {"The lungs are clear bilaterally."}},
      {"Mild cardiomegaly with small left effusion.", {"Mild cardiomegaly. Small left pleural effusion."}},
      {"the the the the", {"The cat is on the mat."}},
      {"Stable appearance of the chest.", {"Stable chest radiograph.", "Appearance of the chest is stable."}},
      {"Right lower lobe opacity, concerning for pneumonia.", {"Right lower lobe opacity may represent pneumonia."}},
      {"No acute cardiopulmonary process.", {"No acute cardiopulmonary process."}},
      {"Endotracheal tube in place.", {"ET tube terminates 4 cm above the carina."}},
      {"Degenerative changes of the spine are noted.", {"Degenerative changes in the thoracic spine."}},
  };
  return c;
}

struct NlgExpected {
  double bleu[4] = {0.6495377162043767, 0.4985881908132372, 0.38241454969444316, 0.2888843625933967};
  double rouge_l = 0.6687535932759213;
  double cider = 3.733660766132053;
  double rouge_pairs[10] = {0.7393939393939394, 0.8, 0.7176470588235294, 0.8333333333333334, 0.3860759493670886,
                            0.7155425219941348, 0.7142857142857143, 1.0, 0.15721649484536082, 0.6240409207161125};
  double cider_pairs[10] = {3.309863663665042, 3.9009523902152807, 5.363008099366356, 3.2024190902604515,
                            0.5954501080623388, 3.997635776957375, 4.6607142857142865, 10.0, 0.4708033854787697,
                            1.835760861600636};
};

inline void nlg_tokens(std::vector<xrprobe::metrics::Tokens>& cands,
                       std::vector<std::vector<xrprobe::metrics::Tokens>>& refs) {
  for (const auto& [c, rs] : nlg_corpus()) {
    cands.push_back(xrprobe::metrics::tokenize(c));
    refs.emplace_back();
    for (const char* r : rs) refs.back().push_back(xrprobe::metrics::tokenize(r));
  }
}

// ---- PCA data

/// n rows of z * M with z ~ N(0, I) and a random mixing matrix M.
inline xrprobe::pca::Matrix mixed_gaussian(std::size_t n, std::size_t d, std::uint64_t seed) {
  xrprobe::CounterRng rng(seed);
  std::vector<double> mix(d * d);
  for (auto& v : mix) v = rng.normal();
  xrprobe::pca::Matrix x{n, d, std::vector<double>(n * d, 0.0)};
  std::vector<double> z(d);
  for (std::size_t r = 0; r < n; ++r) {
    for (auto& v : z) v = rng.normal();
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) x(r, j) += z[i] * mix[i * d + j];
  }
  return x;
}

/// Sample covariance, computed row by row.
inline std::vector<std::vector<double>> covariance_rows(const xrprobe::pca::Matrix& x) {
  std::vector<double> mean(x.cols, 0.0);
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t j = 0; j < x.cols; ++j) mean[j] += x(r, j) / static_cast<double>(x.rows);
  std::vector<std::vector<double>> c(x.cols, std::vector<double>(x.cols, 0.0));
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t i = 0; i < x.cols; ++i)
      for (std::size_t j = 0; j < x.cols; ++j)
        c[i][j] += (x(r, i) - mean[i]) * (x(r, j) - mean[j]) / static_cast<double>(x.rows - 1);
  return c;
}

}  // namespace fixtures
