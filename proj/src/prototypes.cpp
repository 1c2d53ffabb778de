#include "ppot/prototypes.hpp"

#include <stdexcept>

namespace ppot {

namespace {

void validate_labelled(const std::vector<Point>& features,
                       const std::vector<int>& labels,
                       std::size_t num_classes) {
  if (features.size() != labels.size())
    throw std::invalid_argument("prototypes: features/labels size mismatch");
  if (features.empty()) throw std::invalid_argument("prototypes: empty input");
  const std::size_t dim = features.front().size();
  for (const Point& f : features)
    if (f.size() != dim)
      throw std::invalid_argument("prototypes: ragged feature dimensions");
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes)
      throw std::invalid_argument("prototypes: label out of range");
}

}  // namespace

PrototypeSet compute_prototypes(const std::vector<Point>& features,
                                const std::vector<int>& labels,
                                std::size_t num_classes, double ema_lambda) {
  validate_labelled(features, labels, num_classes);
  if (!(ema_lambda >= 0.0 && ema_lambda <= 1.0))
    throw std::invalid_argument("prototypes: ema_lambda outside [0, 1]");
  const std::size_t dim = features.front().size();
  PrototypeSet bank;
  bank.ema_lambda = ema_lambda;
  bank.prototypes.assign(num_classes, Point(dim, 0.0));
  bank.class_mass.assign(num_classes, 0.0);
  Vec counts(num_classes, 0.0);
  for (std::size_t i = 0; i < features.size(); ++i) {
    const std::size_t y = static_cast<std::size_t>(labels[i]);
    counts[y] += 1.0;
    for (std::size_t d = 0; d < dim; ++d)
      bank.prototypes[y][d] += features[i][d];
  }
  for (std::size_t k = 0; k < num_classes; ++k) {
    if (counts[k] == 0.0)
      throw std::invalid_argument("prototypes: class with no samples");
    for (double& v : bank.prototypes[k]) v /= counts[k];
    bank.class_mass[k] = counts[k] / static_cast<double>(features.size());
  }
  return bank;
}

PrototypeSet ema_update(const PrototypeSet& bank,
                        const std::vector<Point>& batch_features,
                        const std::vector<int>& batch_labels) {
  validate_labelled(batch_features, batch_labels, bank.size());
  const std::size_t dim = bank.prototypes.front().size();
  if (batch_features.front().size() != dim)
    throw std::invalid_argument("ema_update: feature dimension mismatch");

  std::vector<Point> means(bank.size(), Point(dim, 0.0));
  Vec counts(bank.size(), 0.0);
  for (std::size_t i = 0; i < batch_features.size(); ++i) {
    const std::size_t y = static_cast<std::size_t>(batch_labels[i]);
    counts[y] += 1.0;
    for (std::size_t d = 0; d < dim; ++d) means[y][d] += batch_features[i][d];
  }
  PrototypeSet out = bank;
  const double lam = bank.ema_lambda;
  for (std::size_t k = 0; k < bank.size(); ++k) {
    if (counts[k] == 0.0) continue;  // absent class keeps its prototype
    for (std::size_t d = 0; d < dim; ++d) {
      const double batch_mean = means[k][d] / counts[k];
      out.prototypes[k][d] = lam * batch_mean + (1.0 - lam) * bank.prototypes[k][d];
    }
  }
  return out;
}

DiscreteMeasure prototype_measure(const PrototypeSet& bank) {
  if (bank.prototypes.size() != bank.class_mass.size())
    throw std::invalid_argument("prototype_measure: size mismatch");
  DiscreteMeasure mu;
  mu.support = bank.prototypes;
  mu.mass = bank.class_mass;
  mu.validate();
  return mu;
}

}  // namespace ppot
