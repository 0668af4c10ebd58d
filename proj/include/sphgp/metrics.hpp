#pragma once

#include <Eigen/Core>

namespace sphgp {

/// Area under the ROC curve by the trapezoidal rule (ties count half).
/// Labels must be 0/1 with both classes present; throws DataError otherwise.
double roc_auc(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels);

/// Standard deviation of the AUC under random labels (Mann-Whitney null, no ties):
/// sqrt((n0 + n1 + 1) / (12 n0 n1)).
double auc_null_sd(Eigen::Index positives, Eigen::Index negatives);

}  // namespace sphgp
