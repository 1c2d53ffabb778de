#include "ppot/scenario.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <stdexcept>

namespace ppot {

namespace {

constexpr double kPi = 3.14159265358979323846;

// two orthonormal vectors spanning the plane the class means live in; fixed
// axes for feature_dim == 2, a seeded random subspace otherwise
std::pair<Point, Point> subspace_axes(std::size_t dim, Rng& rng) {
  Point u(dim, 0.0), v(dim, 0.0);
  if (dim == 2) {
    u[0] = 1.0;
    v[1] = 1.0;
    return {u, v};
  }
  while (true) {
    double nu = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      u[d] = rng.normal(0.0, 1.0);
      nu += u[d] * u[d];
    }
    if (nu < 1e-12) continue;
    nu = std::sqrt(nu);
    for (double& x : u) x /= nu;
    double dot_uv = 0.0, nv = 0.0;
    for (std::size_t d = 0; d < dim; ++d) v[d] = rng.normal(0.0, 1.0);
    for (std::size_t d = 0; d < dim; ++d) dot_uv += u[d] * v[d];
    for (std::size_t d = 0; d < dim; ++d) v[d] -= dot_uv * u[d];
    for (double x : v) nv += x * x;
    if (nv < 1e-12) continue;
    nv = std::sqrt(nv);
    for (double& x : v) x /= nv;
    return {u, v};
  }
}

Point embed(const Point& u, const Point& v, double x, double y) {
  Point p(u.size());
  for (std::size_t d = 0; d < u.size(); ++d) p[d] = x * u[d] + y * v[d];
  return p;
}

void sample_cluster(const Point& mean, double sigma, std::size_t count,
                    Rng& rng, Mat* out, std::size_t* row) {
  for (std::size_t i = 0; i < count; ++i, ++*row)
    for (std::size_t d = 0; d < mean.size(); ++d)
      (*out)(*row, d) = mean[d] + rng.normal(0.0, sigma);
}

}  // namespace

void ScenarioConfig::validate() const {
  if (n_common < 1) throw std::invalid_argument("need at least one common class");
  if (samples_per_class < 1)
    throw std::invalid_argument("samples_per_class must be positive");
  if (feature_dim < 2)
    throw std::invalid_argument("feature_dim must be at least 2");
  if (!(noise_sigma > 0.0))
    throw std::invalid_argument("noise_sigma must be positive");
  if (!(class_separation > 0.0))
    throw std::invalid_argument("class_separation must be positive");
}

ScenarioDataset generate_scenario(const ScenarioConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const std::size_t total_classes =
      config.n_common + config.n_source_private + config.n_target_private;
  const auto [u, v] = subspace_axes(config.feature_dim, rng);

  // one mean slot per distinct class, evenly spread on the circle so that
  // adjacent means are ~class_separation apart
  const double radius =
      config.class_separation * static_cast<double>(total_classes) / (2.0 * kPi);
  std::vector<Point> means(total_classes);
  for (std::size_t k = 0; k < total_classes; ++k) {
    const double theta =
        2.0 * kPi * static_cast<double>(k) / static_cast<double>(total_classes);
    means[k] = embed(u, v, radius * std::cos(theta), radius * std::sin(theta));
  }

  ScenarioDataset data;
  const std::size_t spc = config.samples_per_class;
  const std::size_t n_src_classes = config.num_source_classes();
  const std::size_t n_tgt_classes = config.n_common + config.n_target_private;
  data.source_inputs = Mat(n_src_classes * spc, config.feature_dim);
  data.target_inputs = Mat(n_tgt_classes * spc, config.feature_dim);
  data.source_labels.reserve(data.source_inputs.rows);
  data.target_hidden_labels.reserve(data.target_inputs.rows);
  data.target_known.reserve(data.target_inputs.rows);

  std::size_t row = 0;
  for (std::size_t k = 0; k < n_src_classes; ++k) {
    sample_cluster(means[k], config.noise_sigma, spc, rng,
                   &data.source_inputs, &row);
    data.source_labels.insert(data.source_labels.end(), spc,
                              static_cast<int>(k));
  }

  row = 0;
  for (std::size_t k = 0; k < config.n_common; ++k) {
    Point shifted = means[k];
    for (std::size_t d = 0; d < shifted.size(); ++d)
      shifted[d] += config.domain_shift * u[d];
    sample_cluster(shifted, config.noise_sigma, spc, rng, &data.target_inputs,
                   &row);
    data.target_hidden_labels.insert(data.target_hidden_labels.end(), spc,
                                     static_cast<int>(k));
    data.target_known.insert(data.target_known.end(), spc, 1);
  }
  for (std::size_t k = 0; k < config.n_target_private; ++k) {
    // private target clusters reuse the mean slots no source class occupies
    sample_cluster(means[n_src_classes + k], config.noise_sigma, spc, rng,
                   &data.target_inputs, &row);
    data.target_hidden_labels.insert(data.target_hidden_labels.end(), spc,
                                     config.unknown_label());
    data.target_known.insert(data.target_known.end(), spc, 0);
  }

  data.true_alpha = static_cast<double>(config.n_common) /
                    static_cast<double>(n_tgt_classes);
  data.true_beta = static_cast<double>(config.n_common) /
                   static_cast<double>(n_src_classes);
  return data;
}

void export_scenario_csv(const ScenarioDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << std::setprecision(17);
  const std::size_t dim = data.source_inputs.cols;
  for (std::size_t d = 0; d < dim; ++d) out << "x" << d << ",";
  out << "label,domain,known_flag\n";
  for (std::size_t i = 0; i < data.source_inputs.rows; ++i) {
    for (std::size_t d = 0; d < dim; ++d) out << data.source_inputs(i, d) << ",";
    out << data.source_labels[i] << ",source,1\n";
  }
  for (std::size_t i = 0; i < data.target_inputs.rows; ++i) {
    for (std::size_t d = 0; d < dim; ++d) out << data.target_inputs(i, d) << ",";
    out << data.target_hidden_labels[i] << ",target," << data.target_known[i]
        << "\n";
  }
  if (!out) throw std::runtime_error("write to " + path + " failed");
}

}  // namespace ppot
