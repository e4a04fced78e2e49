#pragma once

// Shared toy datasets for unit tests.

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "ckd/ingest.hpp"
#include "ckd/matrix.hpp"
#include "ckd/rng.hpp"

namespace fixtures {

// Labels follow the sign of the sum of the first `informative` features;
// remaining features are independent noise.
struct Toy {
  ckd::Matrix x;
  std::vector<int> y;
};

inline Toy linear_toy(std::size_t n, std::size_t d, std::size_t informative,
                      std::uint64_t seed, double noise = 0.0, double margin = 0.0) {
  ckd::Rng rng(seed);
  Toy t;
  t.x = ckd::Matrix(n, d);
  t.y.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    double sum = 0.0;
    do {
      sum = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double v = rng.normal();
        t.x.at(r, c) = v;
        if (c < informative) sum += v;
      }
    } while (margin > 0.0 && std::fabs(sum) < margin);
    sum += noise * rng.normal();
    t.y[r] = sum > 0.0 ? 1 : 0;
  }
  return t;
}

inline Toy xor_toy() {
  Toy t;
  t.x = ckd::Matrix(4, 2);
  const double pts[4][2] = {{-1, -1}, {-1, 1}, {1, -1}, {1, 1}};
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 2; ++c) t.x.at(r, c) = pts[r][c];
  t.y = {0, 1, 1, 0};
  return t;
}

inline ckd::Dataset arff_from_string(const std::string& text,
                                     const std::string& target = "class") {
  std::istringstream in(text);
  return ckd::load_arff(in, target);
}

inline ckd::Dataset csv_from_string(const std::string& text,
                                    const std::string& target = "class") {
  std::istringstream in(text);
  return ckd::load_csv(in, target);
}

inline ckd::EncodedMatrix plain_matrix(const ckd::Matrix& x, const std::vector<int>& y) {
  ckd::EncodedMatrix m;
  m.values = x;
  m.labels = y;
  m.missing.assign(x.rows * x.cols, false);
  m.feature_categorical.assign(x.cols, false);
  m.feature_categories.resize(x.cols);
  m.label_names = {"a", "b"};
  for (std::size_t c = 0; c < x.cols; ++c)
    m.feature_names.push_back("f" + std::to_string(c));
  return m;
}

}  // namespace fixtures
