#pragma once

#include <cstddef>
#include <vector>

#include "ppot/measure.hpp"

namespace ppot {

// One prototype per class: the mean of the feature vectors labelled with that
// class. class_mass[k] is the label-frequency weight assigned to prototype k
// when the bank is read as a discrete measure.
struct PrototypeSet {
  std::vector<Point> prototypes;
  Vec class_mass;
  double ema_lambda = 0.1;

  std::size_t size() const { return prototypes.size(); }
};

// Means over the full labelled set; class_mass[k] = count(k) / total. Every
// class in [0, num_classes) must appear at least once.
PrototypeSet compute_prototypes(const std::vector<Point>& features,
                                const std::vector<int>& labels,
                                std::size_t num_classes,
                                double ema_lambda = 0.1);

// Per-batch exponential moving average: prototype_k <- lambda * batch_mean_k
// + (1 - lambda) * prototype_k. Classes absent from the batch keep their
// prototype unchanged; class masses are not touched.
PrototypeSet ema_update(const PrototypeSet& bank,
                        const std::vector<Point>& batch_features,
                        const std::vector<int>& batch_labels);

// the bank as a weighted discrete measure (supports = prototypes,
// masses = class_mass)
DiscreteMeasure prototype_measure(const PrototypeSet& bank);

}  // namespace ppot
