#include "ppot/net.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace ppot {

namespace {

// out = x * wT + bias, one sample per row
Mat affine(const Mat& x, const Mat& w, const Vec& b) {
  if (x.cols != w.cols)
    throw std::invalid_argument("net: input dimension mismatch");
  Mat out(x.rows, w.rows);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t r = 0; r < w.rows; ++r) {
      double acc = b[r];
      for (std::size_t c = 0; c < w.cols; ++c) acc += x(i, c) * w(r, c);
      out(i, r) = acc;
    }
  return out;
}

// grad wrt w/b of an affine layer given upstream row gradients
void affine_backward(const Mat& x, const Mat& w, const Mat& dout, Mat* dw,
                     Vec* db, Mat* dx) {
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t r = 0; r < w.rows; ++r) {
      const double g = dout(i, r);
      if (g == 0.0) continue;
      (*db)[r] += g;
      for (std::size_t c = 0; c < w.cols; ++c) (*dw)(r, c) += g * x(i, c);
    }
  if (dx) {
    for (std::size_t i = 0; i < x.rows; ++i)
      for (std::size_t c = 0; c < w.cols; ++c) {
        double acc = 0.0;
        for (std::size_t r = 0; r < w.rows; ++r)
          acc += dout(i, r) * w(r, c);
        (*dx)(i, c) = acc;
      }
  }
}

Mat softmax_rows(const Mat& logits) {
  Mat p(logits.rows, logits.cols);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    double mx = logits(i, 0);
    for (std::size_t j = 1; j < logits.cols; ++j)
      mx = std::max(mx, logits(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < logits.cols; ++j) {
      p(i, j) = std::exp(logits(i, j) - mx);
      z += p(i, j);
    }
    for (std::size_t j = 0; j < logits.cols; ++j) p(i, j) /= z;
  }
  return p;
}

// gradient of -sum_j p_j floored_log(p_j) wrt the row's logits, scaled by
// `coef`, accumulated into dlogits
void entropy_row_gradient(const Mat& p, std::size_t i, double coef,
                          Mat* dlogits) {
  if (coef == 0.0) return;
  const std::size_t L = p.cols;
  double mean = 0.0;
  Vec t(L);
  for (std::size_t j = 0; j < L; ++j) {
    const double pj = p(i, j);
    t[j] = std::log(std::max(pj, kProbabilityFloor)) +
           (pj > kProbabilityFloor ? 1.0 : 0.0);
    mean += pj * t[j];
  }
  for (std::size_t j = 0; j < L; ++j)
    (*dlogits)(i, j) += coef * (-p(i, j) * (t[j] - mean));
}

// transport-term gradient wrt target features; the plan and prototypes are
// constants, rows of `plan` index prototypes
double ot_loss_and_feature_grad(const TransportPlan& plan,
                                const PrototypeSet& bank, const Mat& features,
                                double coef, Mat* dfeatures) {
  const Mat& pi = plan.entries;
  if (pi.rows != bank.size() || pi.cols != features.rows)
    throw std::invalid_argument("net: plan shape mismatch");
  double loss = 0.0;
  for (std::size_t k = 0; k < pi.rows; ++k) {
    const Point& c = bank.prototypes[k];
    if (c.size() != features.cols)
      throw std::invalid_argument("net: prototype dimension mismatch");
    for (std::size_t j = 0; j < pi.cols; ++j) {
      const double mass = pi(k, j);
      if (mass == 0.0) continue;
      double d2 = 0.0;
      for (std::size_t e = 0; e < features.cols; ++e) {
        const double diff = features(j, e) - c[e];
        d2 += diff * diff;
      }
      const double d = std::sqrt(d2);
      loss += mass * d;
      if (dfeatures && d > 0.0) {
        const double scale = coef * mass / d;
        for (std::size_t e = 0; e < features.cols; ++e)
          (*dfeatures)(j, e) += scale * (features(j, e) - c[e]);
      }
    }
  }
  return loss;
}

void backprop_from_head(const NetworkParams& params, const Mat& inputs,
                        const ForwardResult& fwd, const Mat& dlogits,
                        const Mat* dfeatures_extra, Gradients* g) {
  Mat dfeat(fwd.features.rows, fwd.features.cols);
  affine_backward(fwd.features, params.w3, dlogits, &g->w3, &g->b3, &dfeat);
  if (dfeatures_extra)
    for (std::size_t k = 0; k < dfeat.data.size(); ++k)
      dfeat.data[k] += dfeatures_extra->data[k];
  Mat dhidden(fwd.hidden.rows, fwd.hidden.cols);
  affine_backward(fwd.hidden, params.w2, dfeat, &g->w2, &g->b2, &dhidden);
  // tanh' = 1 - tanh^2
  for (std::size_t k = 0; k < dhidden.data.size(); ++k) {
    const double a = fwd.hidden.data[k];
    dhidden.data[k] *= 1.0 - a * a;
  }
  affine_backward(inputs, params.w1, dhidden, &g->w1, &g->b1, nullptr);
}

}  // namespace

NetworkParams init_network(std::size_t input_dim, std::size_t hidden_dim,
                           std::size_t feature_dim, std::size_t num_classes,
                           Rng& rng) {
  if (input_dim == 0 || hidden_dim == 0 || feature_dim == 0 || num_classes == 0)
    throw std::invalid_argument("init_network: zero dimension");
  NetworkParams p;
  auto fill = [&rng](Mat& w, std::size_t rows, std::size_t cols) {
    w = Mat(rows, cols);
    const double sigma = 1.0 / std::sqrt(static_cast<double>(cols));
    for (double& v : w.data) v = rng.normal(0.0, sigma);
  };
  fill(p.w1, hidden_dim, input_dim);
  p.b1.assign(hidden_dim, 0.0);
  fill(p.w2, feature_dim, hidden_dim);
  p.b2.assign(feature_dim, 0.0);
  fill(p.w3, num_classes, feature_dim);
  p.b3.assign(num_classes, 0.0);
  return p;
}

ForwardResult forward(const NetworkParams& params, const Mat& inputs) {
  ForwardResult out;
  out.hidden = affine(inputs, params.w1, params.b1);
  for (double& v : out.hidden.data) v = std::tanh(v);
  out.features = affine(out.hidden, params.w2, params.b2);
  out.logits = affine(out.features, params.w3, params.b3);
  out.probabilities = softmax_rows(out.logits);
  return out;
}

Gradients zero_gradients(const NetworkParams& params) {
  Gradients g;
  g.w1 = Mat(params.w1.rows, params.w1.cols);
  g.b1.assign(params.b1.size(), 0.0);
  g.w2 = Mat(params.w2.rows, params.w2.cols);
  g.b2.assign(params.b2.size(), 0.0);
  g.w3 = Mat(params.w3.rows, params.w3.cols);
  g.b3.assign(params.b3.size(), 0.0);
  return g;
}

LossBreakdown compute_losses(const NetworkParams& params,
                             const Mat& source_inputs,
                             const std::vector<int>& source_labels,
                             const Mat& target_inputs,
                             const TransportPlan& plan,
                             const PrototypeSet& bank,
                             const WeightVectors& weights,
                             const LossWeights& loss_weights) {
  const ForwardResult src = forward(params, source_inputs);
  const ForwardResult tgt = forward(params, target_inputs);
  LossBreakdown out;
  out.rce = reweighted_ce_loss(src.probabilities, source_labels,
                               weights.source_class);
  out.pe = reweighted_entropy_loss(tgt.probabilities, weights.target_known);
  out.ne = negative_entropy_loss(tgt.probabilities, weights.target_unknown);
  out.ot = ot_loss_and_feature_grad(plan, bank, tgt.features, 0.0, nullptr);
  out.total = total_loss(out.rce, out.pe, out.ne, out.ot, loss_weights);
  return out;
}

BackwardResult backward(const NetworkParams& params, const Mat& source_inputs,
                        const std::vector<int>& source_labels,
                        const Mat& target_inputs, const TransportPlan& plan,
                        const PrototypeSet& bank, const WeightVectors& weights,
                        const LossWeights& loss_weights) {
  BackwardResult res;
  res.grads = zero_gradients(params);

  // source side: class-reweighted cross-entropy
  const ForwardResult src = forward(params, source_inputs);
  res.losses.rce = reweighted_ce_loss(src.probabilities, source_labels,
                                      weights.source_class);
  {
    Mat dlogits(src.logits.rows, src.logits.cols);
    for (std::size_t i = 0; i < src.logits.rows; ++i) {
      const std::size_t y = static_cast<std::size_t>(source_labels[i]);
      const double py = src.probabilities(i, y);
      // the floored log is constant below the floor, so its gradient is zero
      if (py <= kProbabilityFloor) continue;
      const double wy = weights.source_class[y];
      if (wy == 0.0) continue;
      for (std::size_t j = 0; j < src.logits.cols; ++j)
        dlogits(i, j) = wy * (src.probabilities(i, j) - (j == y ? 1.0 : 0.0));
    }
    backprop_from_head(params, source_inputs, src, dlogits, nullptr,
                       &res.grads);
  }

  // target side: the two entropy terms plus the transport term
  const ForwardResult tgt = forward(params, target_inputs);
  res.losses.pe =
      reweighted_entropy_loss(tgt.probabilities, weights.target_known);
  res.losses.ne =
      negative_entropy_loss(tgt.probabilities, weights.target_unknown);
  {
    Mat dlogits(tgt.logits.rows, tgt.logits.cols);
    for (std::size_t i = 0; i < tgt.logits.rows; ++i) {
      const double coef = loss_weights.eta2 * weights.target_known[i] -
                          loss_weights.eta3 * weights.target_unknown[i];
      entropy_row_gradient(tgt.probabilities, i, coef, &dlogits);
    }
    Mat dfeatures(tgt.features.rows, tgt.features.cols);
    res.losses.ot = ot_loss_and_feature_grad(plan, bank, tgt.features,
                                             loss_weights.eta1, &dfeatures);
    backprop_from_head(params, target_inputs, tgt, dlogits, &dfeatures,
                       &res.grads);
  }

  res.losses.total = total_loss(res.losses.rce, res.losses.pe, res.losses.ne,
                                res.losses.ot, loss_weights);
  return res;
}

BackwardResult backward_cross_entropy(const NetworkParams& params,
                                      const Mat& inputs,
                                      const std::vector<int>& labels,
                                      const Vec& class_weights) {
  BackwardResult res;
  res.grads = zero_gradients(params);
  const ForwardResult fwd = forward(params, inputs);
  res.losses.rce = reweighted_ce_loss(fwd.probabilities, labels, class_weights);
  res.losses.total = res.losses.rce;
  Mat dlogits(fwd.logits.rows, fwd.logits.cols);
  for (std::size_t i = 0; i < fwd.logits.rows; ++i) {
    const std::size_t y = static_cast<std::size_t>(labels[i]);
    const double py = fwd.probabilities(i, y);
    if (py <= kProbabilityFloor) continue;
    const double wy = class_weights[y];
    if (wy == 0.0) continue;
    for (std::size_t j = 0; j < fwd.logits.cols; ++j)
      dlogits(i, j) = wy * (fwd.probabilities(i, j) - (j == y ? 1.0 : 0.0));
  }
  backprop_from_head(params, inputs, fwd, dlogits, nullptr, &res.grads);
  return res;
}

OptimizerState make_optimizer(const NetworkParams& params, double base_lr,
                              long total_steps) {
  if (!(base_lr > 0.0) || total_steps <= 0)
    throw std::invalid_argument("make_optimizer: bad learning rate or steps");
  OptimizerState st;
  st.momentum = zero_gradients(params);
  st.base_lr = base_lr;
  st.total_steps = total_steps;
  return st;
}

double current_learning_rate(const OptimizerState& state) {
  const double t = static_cast<double>(state.step) /
                   static_cast<double>(state.total_steps);
  return state.base_lr * std::pow(1.0 + state.schedule_a * t,
                                  -state.schedule_power);
}

namespace {

void nesterov_update(Vec& param, const Vec& grad, Vec& momentum, double lr,
                     double mu, double wd) {
  for (std::size_t k = 0; k < param.size(); ++k) {
    const double g = grad[k] + wd * param[k];
    momentum[k] = mu * momentum[k] + g;
    param[k] -= lr * (g + mu * momentum[k]);
  }
}

}  // namespace

void sgd_step(NetworkParams& params, const Gradients& grads,
              OptimizerState& state) {
  const double lr = current_learning_rate(state);
  nesterov_update(params.w1.data, grads.w1.data, state.momentum.w1.data, lr,
                  state.momentum_coef, state.weight_decay);
  nesterov_update(params.b1, grads.b1, state.momentum.b1, lr,
                  state.momentum_coef, state.weight_decay);
  nesterov_update(params.w2.data, grads.w2.data, state.momentum.w2.data, lr,
                  state.momentum_coef, state.weight_decay);
  nesterov_update(params.b2, grads.b2, state.momentum.b2, lr,
                  state.momentum_coef, state.weight_decay);
  nesterov_update(params.w3.data, grads.w3.data, state.momentum.w3.data, lr,
                  state.momentum_coef, state.weight_decay);
  nesterov_update(params.b3, grads.b3, state.momentum.b3, lr,
                  state.momentum_coef, state.weight_decay);
  ++state.step;
}

ClassBalancedSampler::ClassBalancedSampler(const std::vector<int>& labels,
                                           std::size_t num_classes,
                                           std::size_t batch_size,
                                           std::uint64_t seed)
    : pools_(num_classes), cursors_(num_classes, 0), rng_(seed) {
  if (num_classes == 0 || batch_size == 0 || batch_size % num_classes != 0)
    throw std::invalid_argument(
        "sampler: batch size must be a positive multiple of the class count");
  per_class_ = batch_size / num_classes;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes)
      throw std::invalid_argument("sampler: label out of range");
    pools_[static_cast<std::size_t>(y)].push_back(i);
  }
  for (auto& pool : pools_) {
    if (pool.empty())
      throw std::invalid_argument("sampler: class with no samples");
    rng_.shuffle(pool);
  }
}

std::vector<std::size_t> ClassBalancedSampler::next_batch() {
  std::vector<std::size_t> batch;
  batch.reserve(per_class_ * pools_.size());
  for (std::size_t k = 0; k < pools_.size(); ++k) {
    for (std::size_t take = 0; take < per_class_; ++take) {
      if (cursors_[k] >= pools_[k].size()) {
        rng_.shuffle(pools_[k]);
        cursors_[k] = 0;
      }
      batch.push_back(pools_[k][cursors_[k]++]);
    }
  }
  return batch;
}

void save_network(const NetworkParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_network: cannot open " + path);
  out << "ppot-net 1\n";
  out << std::setprecision(17);
  auto dump_mat = [&out](const char* name, const Mat& m) {
    out << name << ' ' << m.rows << ' ' << m.cols << '\n';
    for (std::size_t i = 0; i < m.rows; ++i) {
      for (std::size_t j = 0; j < m.cols; ++j)
        out << (j ? " " : "") << m(i, j);
      out << '\n';
    }
  };
  auto dump_vec = [&out](const char* name, const Vec& v) {
    out << name << " 1 " << v.size() << '\n';
    for (std::size_t j = 0; j < v.size(); ++j) out << (j ? " " : "") << v[j];
    out << '\n';
  };
  dump_mat("w1", params.w1);
  dump_vec("b1", params.b1);
  dump_mat("w2", params.w2);
  dump_vec("b2", params.b2);
  dump_mat("w3", params.w3);
  dump_vec("b3", params.b3);
  if (!out) throw std::runtime_error("save_network: write failed");
}

NetworkParams load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_network: cannot open " + path);
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "ppot-net" || version != 1)
    throw std::runtime_error("load_network: unrecognized checkpoint header");
  NetworkParams p;
  auto read_mat = [&in, &path](const char* want) {
    std::string name;
    std::size_t rows = 0, cols = 0;
    in >> name >> rows >> cols;
    if (!in || name != want)
      throw std::runtime_error("load_network: corrupt checkpoint " + path);
    Mat m(rows, cols);
    for (double& v : m.data) in >> v;
    return m;
  };
  p.w1 = read_mat("w1");
  p.b1 = read_mat("b1").data;
  p.w2 = read_mat("w2");
  p.b2 = read_mat("b2").data;
  p.w3 = read_mat("w3");
  p.b3 = read_mat("b3").data;
  if (!in) throw std::runtime_error("load_network: truncated checkpoint");
  return p;
}

}  // namespace ppot
