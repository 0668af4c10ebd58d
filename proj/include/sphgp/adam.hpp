#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>

namespace sphgp {

/// Adam with bias correction, written for ascent on a flat parameter vector.
/// Per-coordinate learning rates let parameter groups share one optimizer.
class Adam {
 public:
  struct Options {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
  };

  Adam() = default;
  explicit Adam(Eigen::Index size) : Adam(size, Options{}) {}
  Adam(Eigen::Index size, Options options)
      : options_(options), first_(Eigen::VectorXd::Zero(size)), second_(Eigen::VectorXd::Zero(size)) {}

  void ascend(Eigen::VectorXd& params, const Eigen::VectorXd& grad, const Eigen::VectorXd& learning_rates) {
    if (grad.size() != first_.size() || params.size() != first_.size() || learning_rates.size() != first_.size()) {
      throw std::invalid_argument("Adam: size mismatch");
    }
    ++step_;
    first_ = options_.beta1 * first_ + (1.0 - options_.beta1) * grad;
    second_ = options_.beta2 * second_ + (1.0 - options_.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(step_));
    params.array() += learning_rates.array() * (first_.array() / c1) /
                      ((second_.array() / c2).sqrt() + options_.epsilon);
  }

  long step() const { return step_; }
  const Eigen::VectorXd& first_moment() const { return first_; }
  const Eigen::VectorXd& second_moment() const { return second_; }
  const Options& options() const { return options_; }

  /// Restores moments from a checkpoint.
  void restore(long step, Eigen::VectorXd first, Eigen::VectorXd second) {
    if (first.size() != second.size()) throw std::invalid_argument("Adam: moment sizes differ");
    step_ = step;
    first_ = std::move(first);
    second_ = std::move(second);
  }

 private:
  Options options_;
  Eigen::VectorXd first_;
  Eigen::VectorXd second_;
  long step_ = 0;
};

}  // namespace sphgp
