// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace nav::analysis {

// Feature rows with their position labels and source episode.
struct Dataset {
  int dim = 0;
  std::vector<float> features;  // size() x dim, row-major
  std::vector<int> labels;      // floor ids
  std::vector<int> episodes;

  std::size_t size() const { return labels.size(); }
  std::span<const float> row(std::size_t i) const {
    return {features.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
  void add(std::span<const float> x, int label, int episode);
};

// Linear multinomial classifier over standardised features.
struct DecoderModel {
  int num_classes = 0;
  int dim = 0;
  std::vector<double> mean, inv_std;  // feature standardisation
  std::vector<double> weights;        // num_classes x dim
  std::vector<double> bias;

  int predict(std::span<const float> x) const;
  double accuracy(const Dataset& d) const;
};

struct DecoderOptions {
  int holdout_every = 4;  // every 4th distinct episode goes to the held-out split
  int max_iters = 1000;
  int patience = 50;      // iterations without held-out loss improvement
  double l2 = 1e-4;
};

struct DecoderResult {
  DecoderModel model;
  double train_accuracy = 0;
  double heldout_accuracy = 0;
  int iterations = 0;
  std::size_t train_size = 0;
  std::size_t heldout_size = 0;
};

// Full-batch Nesterov gradient descent (step 1/L from a power-iteration bound on the
// loss curvature) with early stopping on held-out cross-entropy. The split is
// by episode. Throws DataError when fewer than two classes are present or a
// split ends up empty.
DecoderResult train_position_decoder(const Dataset& data, int num_classes,
                                     const DecoderOptions& opt = {});

}  // namespace nav::analysis
