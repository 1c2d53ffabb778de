#include "ppot/config.hpp"

#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace ppot {

namespace {

double parse_real(const std::string& text) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("not a number: '" + text + "'");
  }
  if (pos != text.size())
    throw std::invalid_argument("trailing characters in number: '" + text + "'");
  return v;
}

std::uint64_t parse_count(const std::string& text) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("not a count: '" + text + "'");
  }
  if (pos != text.size())
    throw std::invalid_argument("trailing characters in count: '" + text + "'");
  return v;
}

std::string fmt(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

std::string fmt(std::uint64_t v) { return std::to_string(v); }

struct Field {
  const char* section;
  const char* key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define REAL_FIELD(sec, name, expr)                                        \
  Field{sec, #name, [](ExperimentConfig& c, const std::string& t) {        \
          c.expr = parse_real(t);                                          \
        },                                                                 \
        [](const ExperimentConfig& c) { return fmt(c.expr); }}
#define COUNT_FIELD(sec, name, expr)                                       \
  Field{sec, #name, [](ExperimentConfig& c, const std::string& t) {        \
          c.expr = static_cast<std::size_t>(parse_count(t));               \
        },                                                                 \
        [](const ExperimentConfig& c) {                                    \
          return fmt(static_cast<std::uint64_t>(c.expr));                  \
        }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      COUNT_FIELD("scenario", n_common, scenario.n_common),
      COUNT_FIELD("scenario", n_source_private, scenario.n_source_private),
      COUNT_FIELD("scenario", n_target_private, scenario.n_target_private),
      COUNT_FIELD("scenario", samples_per_class, scenario.samples_per_class),
      COUNT_FIELD("scenario", feature_dim, scenario.feature_dim),
      REAL_FIELD("scenario", class_separation, scenario.class_separation),
      REAL_FIELD("scenario", domain_shift, scenario.domain_shift),
      REAL_FIELD("scenario", noise_sigma, scenario.noise_sigma),
      REAL_FIELD("solver", epsilon, solver.epsilon),
      COUNT_FIELD("solver", max_iterations, solver.max_iterations),
      REAL_FIELD("solver", marginal_tolerance, solver.marginal_tolerance),
      REAL_FIELD("solver", stationarity_tolerance,
                 solver.stationarity_tolerance),
      REAL_FIELD("loss", eta1, loss_weights.eta1),
      REAL_FIELD("loss", eta2, loss_weights.eta2),
      REAL_FIELD("loss", eta3, loss_weights.eta3),
      REAL_FIELD("loss", tau1, tau1),
      REAL_FIELD("loss", tau2, tau2),
      REAL_FIELD("loss", xi, xi),
      REAL_FIELD("loss", keep_fraction, keep_fraction),
      REAL_FIELD("loss", lambda1, lambda1),
      REAL_FIELD("loss", lambda2, lambda2),
      REAL_FIELD("loss", ema_lambda, ema_lambda),
      COUNT_FIELD("train", epochs, epochs),
      COUNT_FIELD("train", iters_per_epoch, iters_per_epoch),
      COUNT_FIELD("train", batch_size, batch_size),
      REAL_FIELD("train", base_lr, base_lr),
      Field{"train", "seed",
            [](ExperimentConfig& c, const std::string& t) {
              c.seed = parse_count(t);
            },
            [](const ExperimentConfig& c) { return fmt(c.seed); }},
      COUNT_FIELD("net", hidden_dim, hidden_dim),
      COUNT_FIELD("net", bottleneck_dim, bottleneck_dim),
  };
  return table;
}

#undef REAL_FIELD
#undef COUNT_FIELD

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

void ExperimentConfig::validate() const {
  scenario.validate();
  if (!(solver.epsilon > 0.0))
    throw std::invalid_argument("solver epsilon must be positive");
  if (!(xi > 0.0 && xi < 1.0))
    throw std::invalid_argument("xi must lie in (0, 1)");
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0))
    throw std::invalid_argument("keep_fraction must lie in (0, 1]");
  if (!(tau1 > 0.0 && tau1 <= 1.0) || !(tau2 > 0.0 && tau2 <= 1.0))
    throw std::invalid_argument("tau thresholds must lie in (0, 1]");
  if (lambda1 < 0.0 || lambda1 >= 1.0 || lambda2 < 0.0 || lambda2 >= 1.0)
    throw std::invalid_argument("EMA rates must lie in [0, 1)");
  if (ema_lambda < 0.0 || ema_lambda > 1.0)
    throw std::invalid_argument("prototype EMA rate must lie in [0, 1]");
  if (epochs == 0 || iters_per_epoch == 0 || batch_size == 0)
    throw std::invalid_argument("epochs, iterations, and batch size must be positive");
  if (!(base_lr > 0.0))
    throw std::invalid_argument("base_lr must be positive");
  if (hidden_dim == 0 || bottleneck_dim == 0)
    throw std::invalid_argument("network dims must be positive");
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig config;
  std::string line, section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line.substr(0, line.find('#')));
    if (text.empty()) continue;
    if (text.front() == '[') {
      if (text.back() != ']')
        throw std::invalid_argument("line " + std::to_string(line_no) +
                                    ": unterminated section header");
      section = trim(text.substr(1, text.size() - 2));
      bool known = false;
      for (const Field& f : fields()) known = known || section == f.section;
      if (!known)
        throw std::invalid_argument("line " + std::to_string(line_no) +
                                    ": unknown section '" + section + "'");
      continue;
    }
    const std::size_t eq = text.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("line " + std::to_string(line_no) +
                                  ": expected key = value");
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    const Field* match = nullptr;
    for (const Field& f : fields())
      if (section == f.section && key == f.key) match = &f;
    if (!match)
      throw std::invalid_argument("line " + std::to_string(line_no) +
                                  ": unknown key '" + key + "' in section [" +
                                  section + "]");
    try {
      match->set(config, value);
    } catch (const std::invalid_argument& err) {
      throw std::invalid_argument("line " + std::to_string(line_no) + ": " +
                                  err.what());
    }
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  return parse_config(in);
}

std::string serialize_config(const ExperimentConfig& config) {
  std::ostringstream out;
  std::string section;
  for (const Field& f : fields()) {
    if (section != f.section) {
      if (!section.empty()) out << "\n";
      section = f.section;
      out << "[" << section << "]\n";
    }
    out << f.key << " = " << f.get(config) << "\n";
  }
  return out.str();
}

void save_config(const ExperimentConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << serialize_config(config);
  if (!out) throw std::runtime_error("write to " + path + " failed");
}

std::uint64_t config_hash(const ExperimentConfig& config) {
  const std::string text = serialize_config(config);
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace ppot
