#pragma once

#include <string>
#include <tuple>
#include <vector>

#include "momentprop/config.hpp"
#include "momentprop/types.hpp"

namespace momentprop {

// Regression dataset, one row per sample.
struct Dataset {
  MatrixXd X;  // N x Q
  VectorXd y;  // N

  Index n() const { return X.rows(); }
  Index q() const { return X.cols(); }

  void check_invariants() const;
  Dataset rows(const std::vector<Index>& idx) const;
};

// Standardization fitted on a training set: zero mean, unit variance per
// feature column and for the target. Constant columns pass through with a
// divisor of one and are flagged.
struct Scaler {
  VectorXd x_mean;
  VectorXd x_scale;
  double y_mean = 0.0;
  double y_scale = 1.0;
  std::vector<Index> constant_features;
  bool constant_target = false;

  static Scaler fit(const Dataset& train);
  Dataset transform(const Dataset& d) const;

  double original_prediction(double standardized) const { return standardized * y_scale + y_mean; }
  double original_variance(double standardized_var) const { return standardized_var * y_scale * y_scale; }
  // Change-of-variables correction for a log density of the target.
  double nll_offset() const { return std::log(y_scale); }
};

// Features and targets standardized with statistics of `train` only.
std::tuple<Dataset, Dataset, Scaler> standardize(const Dataset& train, const Dataset& test);

// How to read a raw dataset file. Delimiter "auto" sniffs comma, semicolon,
// tab, then whitespace; target_col -1 means the last column; ignore_cols are
// dropped entirely (secondary targets in some UCI files).
struct CsvFormat {
  std::string delimiter = "auto";
  long long target_col = -1;
  std::vector<long long> ignore_cols;
  std::string header = "auto";  // auto | yes | no

  static CsvFormat from_config(const KeyValueConfig& cfg);
};

Dataset load_dataset_csv(const std::string& path, const CsvFormat& format = CsvFormat{});

}  // namespace momentprop
