#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace finkey {

/// Baseline heads over fixed feature vectors.
enum class ClassicalKind { NaiveBayes, Logistic, LinearSvm };

std::string_view to_string(ClassicalKind kind);
std::optional<ClassicalKind> parse_classical_kind(std::string_view text);

struct ClassicalOptions {
  std::size_t epochs = 500;       // full-batch gradient steps (LR, SVM)
  double learning_rate = 0.5;
  double l2 = 1e-4;               // SVM penalty
  double variance_floor = 1e-9;   // NBM
};

struct ClassicalClassifier {
  ClassicalKind kind = ClassicalKind::Logistic;
  // LR and SVM
  std::vector<double> weights;
  double bias = 0.0;
  // NBM, indexed by class 0/1
  std::vector<double> mean[2];
  std::vector<double> variance[2];
  double log_prior[2] = {0.0, 0.0};

  double training_accuracy = 0.0;
};

/// Fits on binary labels {0, 1}. Throws ConfigError when the vectors differ
/// in dimension, the label count mismatches, or only one class is present.
ClassicalClassifier classical_fit(ClassicalKind kind, const std::vector<std::vector<double>>& vectors,
                                  std::span<const int> labels,
                                  const ClassicalOptions& options = {});

int classical_predict(const ClassicalClassifier& clf, std::span<const double> vector);

}  // namespace finkey
