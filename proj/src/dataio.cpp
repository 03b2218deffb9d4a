#include "mb/dataio.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "mb/rng.hpp"

namespace mb {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

[[noreturn]] void csv_error(const std::string& path, std::size_t line,
                            const std::string& msg) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + msg);
}

}  // namespace

Dataset Dataset::from_parts(Mat features, std::vector<int> labels) {
  if (features.rows != labels.size())
    throw std::invalid_argument("dataset: feature/label count mismatch");
  if (features.rows == 0) throw std::invalid_argument("dataset: empty");
  require_finite(features.data, "dataset features");

  Dataset ds;
  ds.feature_dim = features.cols;
  ds.features = std::move(features);
  ds.labels = std::move(labels);
  const int max_label = *std::max_element(ds.labels.begin(), ds.labels.end());
  const int min_label = *std::min_element(ds.labels.begin(), ds.labels.end());
  if (min_label < 0) throw std::invalid_argument("dataset: negative label");
  ds.num_classes = max_label + 1;
  ds.by_class.assign(ds.num_classes, {});
  for (std::size_t i = 0; i < ds.labels.size(); ++i)
    ds.by_class[ds.labels[i]].push_back(i);
  for (int c = 0; c < ds.num_classes; ++c)
    if (ds.by_class[c].empty())
      throw std::invalid_argument("dataset: class " + std::to_string(c) +
                                  " is empty (labels must be contiguous)");
  return ds;
}

Dataset gen_gaussian_clusters(int num_classes, std::size_t per_class,
                              std::size_t dim, double center_scale,
                              double noise_sigma, std::uint64_t seed) {
  if (num_classes <= 0 || per_class == 0 || dim == 0)
    throw std::invalid_argument("gen_gaussian_clusters: counts must be positive");
  if (noise_sigma < 0.0)
    throw std::invalid_argument("gen_gaussian_clusters: negative noise_sigma");
  Rng rng(seed);
  Mat centers(num_classes, dim);
  for (double& v : centers.data) v = rng.uniform(-center_scale, center_scale);

  const std::size_t m = static_cast<std::size_t>(num_classes) * per_class;
  Mat features(m, dim);
  std::vector<int> labels(m);
  std::size_t row = 0;
  for (int c = 0; c < num_classes; ++c) {
    for (std::size_t s = 0; s < per_class; ++s, ++row) {
      labels[row] = c;
      for (std::size_t j = 0; j < dim; ++j)
        features.at(row, j) = centers.at(c, j) + noise_sigma * rng.normal();
    }
  }
  return Dataset::from_parts(std::move(features), std::move(labels));
}

Dataset equidistant_trio() {
  Mat features(3, 3);
  features.at(0, 0) = 1.0;  // class 0
  features.at(1, 2) = 1.0;  // class 0
  features.at(2, 1) = 1.0;  // class 1
  return Dataset::from_parts(std::move(features), {0, 0, 1});
}

Dataset ambiguous_quad() {
  Mat features(4, 2);
  // class 0 twice, straddling the class-1 sample; class 2 close to class 1.
  features.at(0, 0) = 0.0;
  features.at(1, 0) = 2.0;
  features.at(2, 0) = 1.0;
  features.at(3, 0) = 1.0;
  features.at(3, 1) = -1.6;
  return Dataset::from_parts(std::move(features), {0, 0, 1, 2});
}

Dataset load_dataset_csv(const std::string& path,
                         std::vector<long long>* label_map) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::string line;
  std::size_t lineno = 0;

  if (!std::getline(in, line)) csv_error(path, 1, "empty file");
  ++lineno;
  std::size_t dim = 0;
  {
    std::stringstream ss(line);
    std::string cell;
    if (!std::getline(ss, cell, ',') || cell != "label")
      csv_error(path, lineno, "header must start with 'label'");
    while (std::getline(ss, cell, ',')) {
      if (cell != "f" + std::to_string(dim))
        csv_error(path, lineno, "unexpected header column '" + cell + "'");
      ++dim;
    }
    if (dim == 0) csv_error(path, lineno, "no feature columns");
  }

  std::vector<long long> raw_labels;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t pos = 0;
        if (col == 0) {
          raw_labels.push_back(std::stoll(cell, &pos));
        } else {
          values.push_back(std::stod(cell, &pos));
        }
        if (pos != cell.size()) throw std::invalid_argument("trailing junk");
      } catch (const std::exception&) {
        csv_error(path, lineno, "cannot parse '" + cell + "'");
      }
      ++col;
    }
    if (col != dim + 1)
      csv_error(path, lineno,
                "expected " + std::to_string(dim + 1) + " columns, got " +
                    std::to_string(col));
  }
  if (raw_labels.empty()) csv_error(path, lineno, "no data rows");

  std::map<long long, int> remap;
  for (long long l : raw_labels) remap.emplace(l, 0);
  int next_id = 0;
  for (auto& [raw, id] : remap) id = next_id++;
  if (label_map) {
    label_map->assign(remap.size(), 0);
    for (const auto& [raw, id] : remap) (*label_map)[id] = raw;
  }

  Mat features(raw_labels.size(), dim);
  features.data = std::move(values);
  std::vector<int> labels(raw_labels.size());
  for (std::size_t i = 0; i < raw_labels.size(); ++i)
    labels[i] = remap[raw_labels[i]];
  try {
    return Dataset::from_parts(std::move(features), std::move(labels));
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

void save_dataset_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << "label";
  for (std::size_t j = 0; j < ds.feature_dim; ++j) out << ",f" << j;
  out << "\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << ds.labels[i];
    for (std::size_t j = 0; j < ds.feature_dim; ++j)
      out << "," << fmt_double(ds.features.at(i, j));
    out << "\n";
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

void save_checkpoint(const EmbeddingState& state, const std::string& path) {
  nlohmann::json j;
  j["spec"]["kind"] = state.spec.kind == ModelKind::linear ? "linear" : "mlp";
  j["spec"]["dims"] = state.spec.dims;
  j["weights"] = state.weights;
  j["theta"] = state.theta;
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error(path + ": write failed");
}

EmbeddingState load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": invalid JSON: " + e.what());
  }
  EmbeddingState state;
  try {
    const std::string kind = j.at("spec").at("kind").get<std::string>();
    if (kind == "linear")
      state.spec.kind = ModelKind::linear;
    else if (kind == "mlp")
      state.spec.kind = ModelKind::mlp;
    else
      throw std::runtime_error("unknown model kind '" + kind + "'");
    state.spec.dims = j.at("spec").at("dims").get<std::vector<std::size_t>>();
    state.weights = j.at("weights").get<Vec>();
    state.theta = j.at("theta").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": malformed checkpoint: " + e.what());
  }
  state.spec.validate();
  if (state.weights.size() != weight_count(state.spec))
    throw std::runtime_error(path + ": weight vector does not match spec");
  require_finite(state.weights, "checkpoint weights");
  return state;
}

}  // namespace mb
