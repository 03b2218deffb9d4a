#pragma once
// Synthetic dataset generation, CSV ingestion, and checkpoint persistence.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mb/model.hpp"
#include "mb/tensor.hpp"

namespace mb {

// Labeled feature vectors with contiguous class ids 0..num_classes-1;
// every class is nonempty and all features share one dimension.
struct Dataset {
  std::size_t feature_dim = 0;
  int num_classes = 0;
  Mat features;  // size() x feature_dim
  std::vector<int> labels;
  std::vector<std::vector<std::size_t>> by_class;

  std::size_t size() const { return labels.size(); }
  std::span<const double> sample(std::size_t i) const {
    return features.row_span(i);
  }

  // Validates the invariants and builds the class index.
  static Dataset from_parts(Mat features, std::vector<int> labels);
};

// Class centers uniform in [-center_scale, center_scale]^dim, samples are
// center + N(0, noise_sigma^2 I). Deterministic per seed.
Dataset gen_gaussian_clusters(int num_classes, std::size_t per_class,
                              std::size_t dim, double center_scale,
                              double noise_sigma, std::uint64_t seed);

// Three samples on unit basis vectors, two classes: {e1, e3} vs {e2}.
// Every pairwise squared distance is 2, so no threshold separates the
// classes, yet a linear multiclass scorer splits them easily.
Dataset equidistant_trio();

// Demo fixture: four samples of three classes where, at theta = 2, only one
// cross-class pair sits inside the margin band. Singleton pair updates are
// mostly unhelpful here; scoring all pairs of a batch is what finds the
// useful direction.
Dataset ambiguous_quad();

// CSV schema: header "label,f0,...,f{dim-1}", one sample per row. Labels may
// be arbitrary integers; they are remapped to contiguous ids in ascending
// order, and the original value for each id is reported through label_map
// when provided. Parse errors name the offending line.
Dataset load_dataset_csv(const std::string& path,
                         std::vector<long long>* label_map = nullptr);
void save_dataset_csv(const Dataset& ds, const std::string& path);

// Checkpoint JSON: {"spec": {"kind", "dims"}, "weights": [...], "theta": x}.
// Round trips preserve every parameter bit-exactly.
void save_checkpoint(const EmbeddingState& state, const std::string& path);
EmbeddingState load_checkpoint(const std::string& path);

}  // namespace mb
