#include "momentprop/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

namespace momentprop {

void Dataset::check_invariants() const {
  if (X.rows() < 1 || X.cols() < 1) throw std::invalid_argument("dataset: needs at least one row and one feature");
  if (y.size() != X.rows()) throw std::invalid_argument("dataset: target length does not match row count");
  if (!X.allFinite() || !y.allFinite()) throw std::invalid_argument("dataset: non-finite entries");
}

Dataset Dataset::rows(const std::vector<Index>& idx) const {
  Dataset out;
  out.X.resize(static_cast<Index>(idx.size()), X.cols());
  out.y.resize(static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.X.row(static_cast<Index>(i)) = X.row(idx[i]);
    out.y(static_cast<Index>(i)) = y(idx[i]);
  }
  return out;
}

Scaler Scaler::fit(const Dataset& train) {
  train.check_invariants();
  Scaler s;
  const double n = static_cast<double>(train.n());
  s.x_mean = train.X.colwise().mean();
  s.x_scale.resize(train.q());
  for (Index j = 0; j < train.q(); ++j) {
    const double var = (train.X.col(j).array() - s.x_mean(j)).square().sum() / n;
    const double sd = std::sqrt(var);
    if (sd < 1e-12) {
      s.x_scale(j) = 1.0;
      s.constant_features.push_back(j);
    } else {
      s.x_scale(j) = sd;
    }
  }
  s.y_mean = train.y.mean();
  const double y_var = (train.y.array() - s.y_mean).square().sum() / n;
  const double y_sd = std::sqrt(y_var);
  if (y_sd < 1e-12) {
    s.y_scale = 1.0;
    s.constant_target = true;
  } else {
    s.y_scale = y_sd;
  }
  return s;
}

Dataset Scaler::transform(const Dataset& d) const {
  if (d.q() != x_mean.size()) throw std::invalid_argument("scaler: feature count mismatch");
  Dataset out;
  out.X = (d.X.rowwise() - x_mean.transpose()).array().rowwise() / x_scale.transpose().array();
  out.y = (d.y.array() - y_mean) / y_scale;
  return out;
}

std::tuple<Dataset, Dataset, Scaler> standardize(const Dataset& train, const Dataset& test) {
  Scaler s = Scaler::fit(train);
  return {s.transform(train), s.transform(test), s};
}

CsvFormat CsvFormat::from_config(const KeyValueConfig& cfg) {
  CsvFormat f;
  f.delimiter = cfg.get_string("delimiter", f.delimiter);
  f.target_col = cfg.get_int("target_col", f.target_col);
  f.ignore_cols = cfg.get_int_list("ignore_cols", f.ignore_cols);
  f.header = cfg.get_string("header", f.header);
  return f;
}

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> toks;
  if (delim == ' ') {  // any whitespace run
    std::string item;
    for (char c : line) {
      if (c == ' ' || c == '\t' || c == '\r') {
        if (!item.empty()) toks.push_back(item);
        item.clear();
      } else {
        item.push_back(c);
      }
    }
    if (!item.empty()) toks.push_back(item);
  } else {
    std::string item;
    for (char c : line) {
      if (c == delim) {
        toks.push_back(item);
        item.clear();
      } else if (c != '\r') {
        item.push_back(c);
      }
    }
    toks.push_back(item);
    while (!toks.empty() && toks.back().empty()) toks.pop_back();
  }
  return toks;
}

bool parse_number(const std::string& tok, double* out) {
  if (tok.empty()) return false;
  const char* begin = tok.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') return false;
  *out = v;
  return true;
}

char sniff_delimiter(const std::string& line) {
  if (line.find(',') != std::string::npos) return ',';
  if (line.find(';') != std::string::npos) return ';';
  if (line.find('\t') != std::string::npos) return '\t';
  return ' ';
}

}  // namespace

Dataset load_dataset_csv(const std::string& path, const CsvFormat& format) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("dataset: cannot open '" + path + "'");

  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    // skip blank lines (some UCI files end with one)
    bool blank = true;
    for (char c : line) {
      if (c != ' ' && c != '\t' && c != '\r') {
        blank = false;
        break;
      }
    }
    if (!blank) lines.push_back(line);
  }
  if (lines.empty()) throw std::runtime_error("dataset: '" + path + "' is empty");

  char delim;
  if (format.delimiter == "auto") {
    delim = sniff_delimiter(lines.front());
  } else if (format.delimiter == "comma") {
    delim = ',';
  } else if (format.delimiter == "semicolon") {
    delim = ';';
  } else if (format.delimiter == "tab") {
    delim = '\t';
  } else if (format.delimiter == "whitespace") {
    delim = ' ';
  } else if (format.delimiter.size() == 1) {
    delim = format.delimiter[0];
  } else {
    throw std::runtime_error("dataset: unknown delimiter spec '" + format.delimiter + "'");
  }

  std::size_t first_row = 0;
  if (format.header == "yes") {
    first_row = 1;
  } else if (format.header == "auto") {
    double tmp;
    const auto toks = split_line(lines.front(), delim);
    bool numeric = !toks.empty();
    for (const auto& t : toks) {
      if (!parse_number(t, &tmp)) {
        numeric = false;
        break;
      }
    }
    if (!numeric) first_row = 1;
  } else if (format.header != "no") {
    throw std::runtime_error("dataset: header must be auto|yes|no");
  }
  if (first_row >= lines.size()) throw std::runtime_error("dataset: '" + path + "' has no data rows");

  const std::size_t n_rows = lines.size() - first_row;
  const std::size_t n_cols = split_line(lines[first_row], delim).size();
  if (n_cols < 2) throw std::runtime_error("dataset: need at least one feature column and one target column");

  const long long target =
      format.target_col < 0 ? static_cast<long long>(n_cols) + format.target_col : format.target_col;
  if (target < 0 || target >= static_cast<long long>(n_cols)) {
    throw std::runtime_error("dataset: target column " + std::to_string(format.target_col) + " out of range");
  }
  std::vector<bool> keep(n_cols, true);
  keep[static_cast<std::size_t>(target)] = false;
  for (long long ic : format.ignore_cols) {
    const long long c = ic < 0 ? static_cast<long long>(n_cols) + ic : ic;
    if (c < 0 || c >= static_cast<long long>(n_cols)) {
      throw std::runtime_error("dataset: ignore column " + std::to_string(ic) + " out of range");
    }
    if (c == target) throw std::runtime_error("dataset: target column cannot be ignored");
    keep[static_cast<std::size_t>(c)] = false;
  }
  Index n_features = 0;
  for (bool k : keep) n_features += k ? 1 : 0;
  if (n_features < 1) throw std::runtime_error("dataset: no feature columns left");

  Dataset d;
  d.X.resize(static_cast<Index>(n_rows), n_features);
  d.y.resize(static_cast<Index>(n_rows));
  for (std::size_t r = 0; r < n_rows; ++r) {
    const auto toks = split_line(lines[first_row + r], delim);
    if (toks.size() != n_cols) {
      throw std::runtime_error("dataset: line " + std::to_string(first_row + r + 1) + " has " +
                               std::to_string(toks.size()) + " fields, expected " + std::to_string(n_cols));
    }
    Index fc = 0;
    for (std::size_t c = 0; c < n_cols; ++c) {
      double v;
      if (!parse_number(toks[c], &v)) {
        throw std::runtime_error("dataset: line " + std::to_string(first_row + r + 1) + ": non-numeric field '" +
                                 toks[c] + "'");
      }
      if (static_cast<long long>(c) == target) {
        d.y(static_cast<Index>(r)) = v;
      } else if (keep[c]) {
        d.X(static_cast<Index>(r), fc++) = v;
      }
    }
  }
  d.check_invariants();
  return d;
}

}  // namespace momentprop
