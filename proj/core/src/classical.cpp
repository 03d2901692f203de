#include "finkey/classical.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "finkey/errors.hpp"
#include "finkey/losses.hpp"

namespace finkey {

std::string_view to_string(ClassicalKind kind) {
  switch (kind) {
    case ClassicalKind::NaiveBayes: return "nbm";
    case ClassicalKind::Logistic: return "lr";
    case ClassicalKind::LinearSvm: return "svm";
  }
  return "lr";
}

std::optional<ClassicalKind> parse_classical_kind(std::string_view text) {
  if (text == "nbm") return ClassicalKind::NaiveBayes;
  if (text == "lr") return ClassicalKind::Logistic;
  if (text == "svm") return ClassicalKind::LinearSvm;
  return std::nullopt;
}

namespace {

double dot(const std::vector<double>& w, std::span<const double> x) {
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * x[i];
  return s;
}

void fit_naive_bayes(ClassicalClassifier& clf, const std::vector<std::vector<double>>& x,
                     std::span<const int> y, double floor) {
  const std::size_t dim = x[0].size();
  std::size_t count[2] = {0, 0};
  for (int c = 0; c < 2; ++c) {
    clf.mean[c].assign(dim, 0.0);
    clf.variance[c].assign(dim, 0.0);
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    const int c = y[i];
    ++count[c];
    for (std::size_t k = 0; k < dim; ++k) clf.mean[c][k] += x[i][k];
  }
  for (int c = 0; c < 2; ++c)
    for (auto& m : clf.mean[c]) m /= static_cast<double>(count[c]);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const int c = y[i];
    for (std::size_t k = 0; k < dim; ++k) {
      const double diff = x[i][k] - clf.mean[c][k];
      clf.variance[c][k] += diff * diff;
    }
  }
  for (int c = 0; c < 2; ++c) {
    for (auto& v : clf.variance[c]) v = std::max(v / static_cast<double>(count[c]), floor);
    clf.log_prior[c] = std::log(static_cast<double>(count[c]) / static_cast<double>(x.size()));
  }
}

void fit_linear(ClassicalClassifier& clf, const std::vector<std::vector<double>>& x,
                std::span<const int> y, const ClassicalOptions& opt) {
  const std::size_t dim = x[0].size();
  const double n = static_cast<double>(x.size());
  clf.weights.assign(dim, 0.0);
  clf.bias = 0.0;
  std::vector<double> gw(dim);
  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    std::fill(gw.begin(), gw.end(), 0.0);
    double gb = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double z = dot(clf.weights, x[i]) + clf.bias;
      double g = 0.0;
      if (clf.kind == ClassicalKind::Logistic) {
        g = sigmoid(z) - static_cast<double>(y[i]);
      } else {
        const double t = y[i] == 1 ? 1.0 : -1.0;
        if (t * z < 1.0) g = -t;
      }
      if (g == 0.0) continue;
      for (std::size_t k = 0; k < dim; ++k) gw[k] += g * x[i][k];
      gb += g;
    }
    for (std::size_t k = 0; k < dim; ++k) {
      double grad = gw[k] / n;
      if (clf.kind == ClassicalKind::LinearSvm) grad += opt.l2 * clf.weights[k];
      clf.weights[k] -= opt.learning_rate * grad;
    }
    clf.bias -= opt.learning_rate * gb / n;
  }
}

}  // namespace

ClassicalClassifier classical_fit(ClassicalKind kind, const std::vector<std::vector<double>>& vectors,
                                  std::span<const int> labels, const ClassicalOptions& options) {
  if (vectors.empty() || vectors.size() != labels.size()) {
    throw ConfigError("classical_fit: need one label per vector");
  }
  const std::size_t dim = vectors[0].size();
  bool seen[2] = {false, false};
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].size() != dim) throw ConfigError("classical_fit: vectors differ in dimension");
    if (labels[i] != 0 && labels[i] != 1) throw ConfigError("classical_fit: labels must be 0 or 1");
    seen[labels[i]] = true;
  }
  if (!seen[0] || !seen[1]) throw ConfigError("classical_fit: both classes must be present");

  ClassicalClassifier clf;
  clf.kind = kind;
  if (kind == ClassicalKind::NaiveBayes) fit_naive_bayes(clf, vectors, labels, options.variance_floor);
  else fit_linear(clf, vectors, labels, options);

  std::size_t correct = 0;
  for (std::size_t i = 0; i < vectors.size(); ++i)
    correct += classical_predict(clf, vectors[i]) == labels[i];
  clf.training_accuracy = static_cast<double>(correct) / static_cast<double>(vectors.size());
  return clf;
}

int classical_predict(const ClassicalClassifier& clf, std::span<const double> vector) {
  if (clf.kind == ClassicalKind::NaiveBayes) {
    double log_post[2];
    for (int c = 0; c < 2; ++c) {
      double lp = clf.log_prior[c];
      for (std::size_t k = 0; k < vector.size(); ++k) {
        const double var = clf.variance[c][k];
        const double diff = vector[k] - clf.mean[c][k];
        lp += -0.5 * std::log(2.0 * std::numbers::pi * var) - diff * diff / (2.0 * var);
      }
      log_post[c] = lp;
    }
    return log_post[1] > log_post[0] ? 1 : 0;
  }
  return dot(clf.weights, vector) + clf.bias >= 0.0 ? 1 : 0;
}

}  // namespace finkey
