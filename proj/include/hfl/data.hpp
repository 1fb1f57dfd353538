#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hfl/tensor.hpp"

namespace hfl {

enum class ColumnKind { numeric, categorical };
enum class Scaling { minmax, zscore };

struct DatasetSchema {
  struct Column {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
  };
  std::vector<Column> features;
  std::string label_column;
  std::vector<std::string> class_names;

  void validate() const;  // unique names, >= 1 feature, >= 2 classes
  Index num_classes() const { return static_cast<Index>(class_names.size()); }
};

// Typed CSV contents: categoricals and labels kept as text, missing cells
// flagged. Feature columns are aligned with the schema order.
struct RawTable {
  struct Column {
    std::vector<Scalar> numeric;       // numeric kind
    std::vector<std::string> text;     // categorical kind
    std::vector<std::uint8_t> missing; // per row
  };
  std::vector<Column> columns;
  std::vector<std::string> labels;
  Index rows = 0;
};

// Per-column fitted transform: imputation value, categorical code book in
// first-appearance order, and the scaling statistics.
struct PreprocessorState {
  struct ColumnState {
    Scalar impute = 0.0;                   // numeric median
    std::vector<std::string> categories;   // categorical vocabulary
    Scalar a = 0.0;                        // min (minmax) or mean (zscore)
    Scalar b = 0.0;                        // max (minmax) or stddev (zscore)
  };
  Scaling scaling = Scaling::zscore;
  std::vector<ColumnState> columns;
};

struct FeatureMatrix {
  Tensor X;               // {rows, width}
  std::vector<Index> y;   // class indices in [0, num_classes)
  std::optional<PreprocessorState> scaler;  // present iff scaling was applied

  Index rows() const { return X.rank() == 2 ? X.dim(0) : 0; }
  Index width() const { return X.rank() == 2 ? X.dim(1) : 0; }
  FeatureMatrix select(const std::vector<Index>& row_indices) const;
  void validate(Index num_classes) const;
};

// UTF-8 CSV, header row, comma-separated, double-quoted fields supported.
// Columns beyond the schema are ignored; schema columns must all be present.
RawTable load_csv(const std::string& path, const DatasetSchema& schema);
RawTable parse_csv(std::istream& in, const DatasetSchema& schema,
                   const std::string& origin);

// Fits imputation, categorical codes, and the chosen scaling on `table`,
// producing a matrix whose scaler can be replayed on held-out data.
// minmax maps each column to [0,1] (constant columns to 0); zscore uses the
// population standard deviation (constant columns map to 0 as well).
FeatureMatrix preprocess(const RawTable& table, const DatasetSchema& schema,
                         Scaling scaling);

// Applies a previously fitted state without refitting.
FeatureMatrix apply_preprocessor(const RawTable& table,
                                 const DatasetSchema& schema,
                                 const PreprocessorState& state);

// Matrix-level scaling for data that never passes through a RawTable
// (the synthetic generator); same column math as preprocess/apply.
FeatureMatrix fit_matrix_scaler(const FeatureMatrix& m, Scaling scaling);
FeatureMatrix apply_matrix_scaler(const FeatureMatrix& m,
                                  const PreprocessorState& state);

// Label text -> class index per the schema's class list.
std::vector<Index> map_labels(const RawTable& table, const DatasetSchema& schema);
RawTable select_rows(const RawTable& table, const DatasetSchema& schema,
                     const std::vector<Index>& rows);

// Stratified split: per class, round(fraction * n_k) rows go to train
// (clamped so a class with >= 2 rows keeps one row on each side).
std::pair<std::vector<Index>, std::vector<Index>> stratified_split_indices(
    const std::vector<Index>& y, Index num_classes, Scalar fraction,
    std::uint64_t seed);
std::pair<FeatureMatrix, FeatureMatrix> split_train_test(
    const FeatureMatrix& matrix, Index num_classes, Scalar fraction,
    std::uint64_t seed);

// Label-skew partition: per class, row shares drawn from
// Dirichlet(gamma, ..., gamma) over the clients. Shares are disjoint, cover
// every training row, and no client is left empty.
struct PartitionPlan {
  std::vector<std::vector<Index>> client_rows;
  Scalar gamma = 0.0;
  std::uint64_t seed = 0;

  Index num_clients() const { return static_cast<Index>(client_rows.size()); }
  std::vector<Index> client_sizes() const;
  void validate(Index total_rows) const;
};

PartitionPlan partition_non_iid(const FeatureMatrix& train, Index clients,
                                Scalar gamma, std::uint64_t seed);

// Balanced isotropic Gaussian blobs (unit noise). Class means are two-level
// piecewise-constant profiles on a level grid; adjacent class means sit
// separation * sqrt(2) apart.
FeatureMatrix generate_synthetic(Index num_classes, Index width, Index rows,
                                 Scalar separation, std::uint64_t seed);

}  // namespace hfl
