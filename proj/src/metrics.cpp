#include "sphgp/metrics.hpp"

#include "sphgp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace sphgp {

double roc_auc(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels) {
  if (scores.size() != labels.size()) throw DimensionError("AUC: scores and labels differ in length");
  const Eigen::Index n = scores.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return scores[a] < scores[b]; });

  // Mann-Whitney U with mid-ranks, which equals the trapezoidal ROC area.
  double positive_rank_sum = 0.0;
  Eigen::Index positives = 0;
  for (Eigen::Index i = 0; i < n;) {
    Eigen::Index j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (Eigen::Index k = i; k < j; ++k) {
      const double y = labels[order[k]];
      if (y != 0.0 && y != 1.0) throw DataError("AUC needs 0/1 labels");
      if (y == 1.0) {
        positive_rank_sum += mid_rank;
        ++positives;
      }
    }
    i = j;
  }
  const Eigen::Index negatives = n - positives;
  if (positives == 0 || negatives == 0) throw DataError("AUC is undefined when one class is absent");
  const double p = static_cast<double>(positives);
  const double u = positive_rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(negatives));
}

double auc_null_sd(Eigen::Index positives, Eigen::Index negatives) {
  const double n1 = static_cast<double>(positives);
  const double n0 = static_cast<double>(negatives);
  return std::sqrt((n0 + n1 + 1.0) / (12.0 * n0 * n1));
}

}  // namespace sphgp
