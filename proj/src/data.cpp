#include "hfl/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace hfl {

void DatasetSchema::validate() const {
  if (features.empty()) throw ValidationError("schema declares no feature columns");
  if (class_names.size() < 2)
    throw ValidationError("schema must declare >= 2 classes");
  if (label_column.empty()) throw ValidationError("schema has no label column");
  std::vector<std::string> names;
  names.push_back(label_column);
  for (const auto& f : features) names.push_back(f.name);
  std::sort(names.begin(), names.end());
  for (std::size_t i = 1; i < names.size(); ++i)
    if (names[i] == names[i - 1])
      throw ValidationError("duplicate column name '" + names[i] + "' in schema");
  for (std::size_t i = 0; i < class_names.size(); ++i)
    for (std::size_t j = i + 1; j < class_names.size(); ++j)
      if (class_names[i] == class_names[j])
        throw ValidationError("duplicate class name '" + class_names[i] + "'");
}

FeatureMatrix FeatureMatrix::select(const std::vector<Index>& row_indices) const {
  const Index n = rows(), w = width();
  FeatureMatrix out;
  out.X = Tensor({static_cast<Index>(row_indices.size()), w});
  out.y.reserve(row_indices.size());
  Index r = 0;
  for (Index idx : row_indices) {
    if (idx < 0 || idx >= n)
      throw ValidationError("row index " + std::to_string(idx) +
                            " outside matrix with " + std::to_string(n) + " rows");
    out.X.values.segment(r * w, w) = X.values.segment(idx * w, w);
    out.y.push_back(y[idx]);
    ++r;
  }
  out.scaler = scaler;
  return out;
}

void FeatureMatrix::validate(Index num_classes) const {
  if (X.rank() != 2) throw StructuralError("feature matrix must be rank 2");
  require_finite(X.values, "feature matrix");
  if (static_cast<Index>(y.size()) != rows())
    throw StructuralError("label count does not match row count");
  for (Index v : y)
    if (v < 0 || v >= num_classes)
      throw ValidationError("class index " + std::to_string(v) +
                            " outside [0," + std::to_string(num_classes) + ")");
}

// ---------------------------------------------------------------- CSV ----

namespace {

std::vector<std::vector<std::string>> tokenize_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> fields;
  std::string cur;
  bool in_quotes = false;
  bool any = false;
  const auto end_field = [&] {
    fields.push_back(cur);
    cur.clear();
  };
  const auto end_record = [&] {
    end_field();
    records.push_back(std::move(fields));
    fields.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    any = true;
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n') {
      if (!cur.empty() && cur.back() == '\r') cur.pop_back();
      end_record();
    } else {
      cur.push_back(c);
    }
  }
  if (in_quotes) throw IngestionError("unterminated quoted field at end of input");
  if (!cur.empty() || !fields.empty()) {
    if (!cur.empty() && cur.back() == '\r') cur.pop_back();
    end_record();
  }
  if (!any) return {};
  return records;
}

bool parse_number(const std::string& s, Scalar& out) {
  const char* begin = s.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  if (end == begin) return false;
  while (*end == ' ' || *end == '\t') ++end;
  return *end == '\0';
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

}  // namespace

RawTable parse_csv(std::istream& in, const DatasetSchema& schema,
                   const std::string& origin) {
  schema.validate();
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  auto records = tokenize_csv(text);
  if (records.empty()) throw IngestionError(origin + ": empty file");

  const auto& header = records.front();
  const auto column_of = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (trim(header[i]) == name) return static_cast<int>(i);
    throw IngestionError(origin + ": missing column '" + name + "' in header");
  };
  std::vector<int> feature_pos;
  feature_pos.reserve(schema.features.size());
  for (const auto& f : schema.features) feature_pos.push_back(column_of(f.name));
  const int label_pos = column_of(schema.label_column);

  RawTable table;
  table.columns.resize(schema.features.size());
  const Index data_rows = static_cast<Index>(records.size()) - 1;
  for (auto& col : table.columns) col.missing.reserve(data_rows);

  for (Index r = 0; r < data_rows; ++r) {
    const auto& rec = records[r + 1];
    if (rec.size() != header.size())
      throw IngestionError(origin + ": row " + std::to_string(r + 1) + " has " +
                           std::to_string(rec.size()) + " fields, header has " +
                           std::to_string(header.size()));
    for (std::size_t j = 0; j < schema.features.size(); ++j) {
      const std::string cell = trim(rec[feature_pos[j]]);
      auto& col = table.columns[j];
      const bool missing = cell.empty();
      col.missing.push_back(missing ? 1 : 0);
      if (schema.features[j].kind == ColumnKind::numeric) {
        Scalar v = 0.0;
        if (!missing && !parse_number(cell, v))
          throw IngestionError(origin + ": row " + std::to_string(r + 1) +
                               ", column '" + schema.features[j].name +
                               "': cannot parse numeric value '" + cell + "'");
        col.numeric.push_back(v);
      } else {
        col.text.push_back(cell);
      }
    }
    const std::string label = trim(rec[label_pos]);
    if (label.empty())
      throw IngestionError(origin + ": row " + std::to_string(r + 1) +
                           ": empty label cell");
    table.labels.push_back(label);
  }
  table.rows = data_rows;
  return table;
}

RawTable load_csv(const std::string& path, const DatasetSchema& schema) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IngestionError("cannot open " + path);
  return parse_csv(f, schema, path);
}

// ------------------------------------------------------------ preprocess ----

namespace {

Scalar median_of(std::vector<Scalar> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<Index> map_labels_impl(const RawTable& table,
                                   const DatasetSchema& schema) {
  std::vector<Index> y;
  y.reserve(table.rows);
  for (Index r = 0; r < table.rows; ++r) {
    const auto& label = table.labels[r];
    auto it = std::find(schema.class_names.begin(), schema.class_names.end(), label);
    if (it == schema.class_names.end())
      throw IngestionError("row " + std::to_string(r + 1) + ": label '" + label +
                           "' is not a declared class");
    y.push_back(static_cast<Index>(it - schema.class_names.begin()));
  }
  return y;
}

// Raw (unscaled) column values after imputation / encoding, fitting the
// state when `fit` is set.
std::vector<Scalar> encode_column(const RawTable::Column& col, ColumnKind kind,
                                  const std::string& name, Index rows, bool fit,
                                  PreprocessorState::ColumnState& state) {
  std::vector<Scalar> out(rows);
  if (kind == ColumnKind::numeric) {
    if (fit) {
      std::vector<Scalar> present;
      for (Index r = 0; r < rows; ++r)
        if (!col.missing[r]) present.push_back(col.numeric[r]);
      if (present.empty())
        throw ValidationError("column '" + name + "' has no values to impute from");
      state.impute = median_of(std::move(present));
    }
    for (Index r = 0; r < rows; ++r)
      out[r] = col.missing[r] ? state.impute : col.numeric[r];
  } else {
    if (fit) {
      state.categories.clear();
      for (Index r = 0; r < rows; ++r) {
        if (col.missing[r]) continue;
        if (std::find(state.categories.begin(), state.categories.end(),
                      col.text[r]) == state.categories.end())
          state.categories.push_back(col.text[r]);
      }
    }
    // code after the last known category stands for missing / unseen
    const Scalar unknown = static_cast<Scalar>(state.categories.size());
    for (Index r = 0; r < rows; ++r) {
      if (col.missing[r]) {
        out[r] = unknown;
        continue;
      }
      auto it = std::find(state.categories.begin(), state.categories.end(),
                          col.text[r]);
      out[r] = it == state.categories.end()
                   ? unknown
                   : static_cast<Scalar>(it - state.categories.begin());
    }
  }
  return out;
}

void fit_scale(Scaling scaling, const std::vector<Scalar>& v,
               PreprocessorState::ColumnState& state) {
  if (scaling == Scaling::minmax) {
    state.a = *std::min_element(v.begin(), v.end());
    state.b = *std::max_element(v.begin(), v.end());
  } else {
    Scalar mean = std::accumulate(v.begin(), v.end(), 0.0) /
                  static_cast<Scalar>(v.size());
    Scalar var = 0.0;
    for (Scalar x : v) var += (x - mean) * (x - mean);
    var /= static_cast<Scalar>(v.size());  // population variance
    state.a = mean;
    state.b = std::sqrt(var);
  }
}

Scalar apply_scale(Scaling scaling, Scalar x,
                   const PreprocessorState::ColumnState& state) {
  if (scaling == Scaling::minmax) {
    const Scalar range = state.b - state.a;
    return range == 0.0 ? 0.0 : (x - state.a) / range;  // constant column -> 0
  }
  return state.b == 0.0 ? 0.0 : (x - state.a) / state.b;
}

FeatureMatrix build_matrix(const RawTable& table, const DatasetSchema& schema,
                           Scaling scaling, bool fit, PreprocessorState& state) {
  schema.validate();
  if (table.columns.size() != schema.features.size())
    throw StructuralError("table does not conform to schema: " +
                          std::to_string(table.columns.size()) + " columns vs " +
                          std::to_string(schema.features.size()) + " features");
  const Index rows = table.rows;
  if (rows < 1) throw ValidationError("table has no rows");
  const Index width = static_cast<Index>(schema.features.size());
  if (fit) state.columns.assign(width, {});

  FeatureMatrix m;
  m.X = Tensor({rows, width});
  for (Index j = 0; j < width; ++j) {
    auto& cs = state.columns[j];
    auto raw = encode_column(table.columns[j], schema.features[j].kind,
                             schema.features[j].name, rows, fit, cs);
    if (fit) fit_scale(scaling, raw, cs);
    for (Index r = 0; r < rows; ++r)
      m.X.values[r * width + j] = apply_scale(scaling, raw[r], cs);
  }
  m.y = map_labels_impl(table, schema);
  m.scaler = state;
  m.validate(schema.num_classes());
  return m;
}

}  // namespace

FeatureMatrix preprocess(const RawTable& table, const DatasetSchema& schema,
                         Scaling scaling) {
  PreprocessorState state;
  state.scaling = scaling;
  return build_matrix(table, schema, scaling, true, state);
}

FeatureMatrix apply_preprocessor(const RawTable& table,
                                 const DatasetSchema& schema,
                                 const PreprocessorState& state) {
  if (state.columns.size() != schema.features.size())
    throw StructuralError("preprocessor state does not match schema width");
  PreprocessorState copy = state;
  return build_matrix(table, schema, state.scaling, false, copy);
}

FeatureMatrix fit_matrix_scaler(const FeatureMatrix& m, Scaling scaling) {
  const Index rows = m.rows(), width = m.width();
  if (rows < 1) throw ValidationError("cannot fit a scaler on an empty matrix");
  PreprocessorState state;
  state.scaling = scaling;
  state.columns.assign(width, {});
  FeatureMatrix out;
  out.X = Tensor({rows, width});
  out.y = m.y;
  std::vector<Scalar> col(rows);
  for (Index j = 0; j < width; ++j) {
    for (Index r = 0; r < rows; ++r) col[r] = m.X.values[r * width + j];
    fit_scale(scaling, col, state.columns[j]);
    for (Index r = 0; r < rows; ++r)
      out.X.values[r * width + j] = apply_scale(scaling, col[r], state.columns[j]);
  }
  out.scaler = std::move(state);
  return out;
}

FeatureMatrix apply_matrix_scaler(const FeatureMatrix& m,
                                  const PreprocessorState& state) {
  const Index rows = m.rows(), width = m.width();
  if (static_cast<Index>(state.columns.size()) != width)
    throw StructuralError("scaler state does not match matrix width");
  FeatureMatrix out;
  out.X = Tensor({rows, width});
  out.y = m.y;
  for (Index j = 0; j < width; ++j)
    for (Index r = 0; r < rows; ++r)
      out.X.values[r * width + j] =
          apply_scale(state.scaling, m.X.values[r * width + j], state.columns[j]);
  out.scaler = state;
  return out;
}

std::vector<Index> map_labels(const RawTable& table, const DatasetSchema& schema) {
  return map_labels_impl(table, schema);
}

RawTable select_rows(const RawTable& table, const DatasetSchema& schema,
                     const std::vector<Index>& rows) {
  if (table.columns.size() != schema.features.size())
    throw StructuralError("table does not conform to schema");
  RawTable out;
  out.columns.resize(table.columns.size());
  out.rows = static_cast<Index>(rows.size());
  for (Index r : rows) {
    if (r < 0 || r >= table.rows)
      throw ValidationError("row index " + std::to_string(r) +
                            " outside table with " + std::to_string(table.rows) +
                            " rows");
    for (std::size_t j = 0; j < table.columns.size(); ++j) {
      const auto& src = table.columns[j];
      auto& dst = out.columns[j];
      dst.missing.push_back(src.missing[r]);
      if (schema.features[j].kind == ColumnKind::numeric)
        dst.numeric.push_back(src.numeric[r]);
      else
        dst.text.push_back(src.text[r]);
    }
    out.labels.push_back(table.labels[r]);
  }
  return out;
}

// ------------------------------------------------------------------ split ----

std::pair<std::vector<Index>, std::vector<Index>> stratified_split_indices(
    const std::vector<Index>& y, Index num_classes, Scalar fraction,
    std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw ValidationError("split fraction must lie in (0,1), got " +
                          std::to_string(fraction));
  const Index rows = static_cast<Index>(y.size());
  if (static_cast<Scalar>(rows) <
      static_cast<Scalar>(num_classes) / (1.0 - fraction))
    throw ValidationError("too few rows (" + std::to_string(rows) +
                          ") to place every class in the test split");
  std::vector<std::vector<Index>> per_class(num_classes);
  for (Index i = 0; i < rows; ++i) per_class[y[i]].push_back(i);

  std::vector<Index> train, test;
  for (Index k = 0; k < num_classes; ++k) {
    auto& idx = per_class[k];
    const Index n = static_cast<Index>(idx.size());
    if (n < 2)
      throw ValidationError("class " + std::to_string(k) + " has " +
                            std::to_string(n) + " rows; need >= 2 to split");
    Rng rng(derive_seed(seed, "split", static_cast<std::uint64_t>(k)));
    std::shuffle(idx.begin(), idx.end(), rng);
    Index n_train = static_cast<Index>(
        std::llround(fraction * static_cast<Scalar>(n)));
    n_train = std::clamp<Index>(n_train, 1, n - 1);
    train.insert(train.end(), idx.begin(), idx.begin() + n_train);
    test.insert(test.end(), idx.begin() + n_train, idx.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

std::pair<FeatureMatrix, FeatureMatrix> split_train_test(
    const FeatureMatrix& matrix, Index num_classes, Scalar fraction,
    std::uint64_t seed) {
  auto [train_idx, test_idx] =
      stratified_split_indices(matrix.y, num_classes, fraction, seed);
  return {matrix.select(train_idx), matrix.select(test_idx)};
}

// -------------------------------------------------------------- partition ----

std::vector<Index> PartitionPlan::client_sizes() const {
  std::vector<Index> sizes;
  sizes.reserve(client_rows.size());
  for (const auto& rows : client_rows)
    sizes.push_back(static_cast<Index>(rows.size()));
  return sizes;
}

void PartitionPlan::validate(Index total_rows) const {
  std::vector<std::uint8_t> seen(total_rows, 0);
  for (const auto& rows : client_rows) {
    if (rows.empty()) throw ValidationError("partition left a client empty");
    for (Index r : rows) {
      if (r < 0 || r >= total_rows)
        throw ValidationError("partition row " + std::to_string(r) +
                              " outside [0," + std::to_string(total_rows) + ")");
      if (seen[r]++)
        throw ValidationError("partition assigns row " + std::to_string(r) +
                              " twice");
    }
  }
  for (Index r = 0; r < total_rows; ++r)
    if (!seen[r])
      throw ValidationError("partition misses row " + std::to_string(r));
}

PartitionPlan partition_non_iid(const FeatureMatrix& train, Index clients,
                                Scalar gamma, std::uint64_t seed) {
  if (clients < 1) throw ValidationError("need >= 1 client");
  if (!(gamma > 0.0))
    throw ValidationError("dirichlet concentration must be > 0, got " +
                          std::to_string(gamma));
  const Index rows = train.rows();
  if (clients > rows)
    throw ValidationError("cannot partition " + std::to_string(rows) +
                          " rows over " + std::to_string(clients) + " clients");
  const Index num_classes =
      train.y.empty() ? 0 : *std::max_element(train.y.begin(), train.y.end()) + 1;
  std::vector<std::vector<Index>> per_class(num_classes);
  for (Index i = 0; i < rows; ++i) per_class[train.y[i]].push_back(i);
  for (Index k = 0; k < num_classes; ++k)
    if (per_class[k].empty())
      throw ValidationError("class " + std::to_string(k) +
                            " has no training rows");

  PartitionPlan plan;
  plan.gamma = gamma;
  plan.seed = seed;
  plan.client_rows.assign(clients, {});

  for (Index k = 0; k < num_classes; ++k) {
    auto& idx = per_class[k];
    Rng shuffle_rng(derive_seed(seed, "partition-shuffle", k));
    std::shuffle(idx.begin(), idx.end(), shuffle_rng);

    Rng prop_rng(derive_seed(seed, "partition-dirichlet", k));
    std::gamma_distribution<Scalar> g(gamma, 1.0);
    std::vector<Scalar> w(clients);
    Scalar total = 0.0;
    for (Index c = 0; c < clients; ++c) total += (w[c] = g(prop_rng));
    if (total <= 0.0) {
      std::fill(w.begin(), w.end(), 1.0);
      total = static_cast<Scalar>(clients);
    }

    // cumulative rounding: counts sum exactly to the class size
    const Index n = static_cast<Index>(idx.size());
    Scalar cum = 0.0;
    Index taken = 0;
    for (Index c = 0; c < clients; ++c) {
      cum += w[c] / total;
      const Index upto = std::min<Index>(
          n, static_cast<Index>(std::llround(cum * static_cast<Scalar>(n))));
      for (Index i = taken; i < upto; ++i)
        plan.client_rows[c].push_back(idx[i]);
      taken = std::max(taken, upto);
    }
    for (Index i = taken; i < n; ++i)
      plan.client_rows[clients - 1].push_back(idx[i]);
  }

  // repair: every client must hold at least one row
  for (Index c = 0; c < clients; ++c) {
    while (plan.client_rows[c].empty()) {
      Index largest = 0;
      for (Index o = 1; o < clients; ++o)
        if (plan.client_rows[o].size() > plan.client_rows[largest].size())
          largest = o;
      if (plan.client_rows[largest].size() <= 1)
        throw ValidationError("cannot repair empty client " + std::to_string(c));
      plan.client_rows[c].push_back(plan.client_rows[largest].back());
      plan.client_rows[largest].pop_back();
    }
  }
  for (auto& rows_c : plan.client_rows) std::sort(rows_c.begin(), rows_c.end());
  plan.validate(rows);
  return plan;
}

// -------------------------------------------------------------- synthetic ----

FeatureMatrix generate_synthetic(Index num_classes, Index width, Index rows,
                                 Scalar separation, std::uint64_t seed) {
  if (num_classes < 1 || width < 1 || rows < 1)
    throw ValidationError("synthetic dimensions must be positive");
  if (rows < num_classes)
    throw ValidationError("need at least one row per class");
  if (separation < 0.0)
    throw ValidationError("separation must be >= 0");

  // Class means are piecewise-constant two-level profiles: the first third
  // of the coordinates sits at level p_k, the rest at level q_k, and the
  // (p_k, q_k) pairs lie on a grid whose per-axis gaps are sized so that
  // adjacent class means are separation * sqrt(2) apart along either axis.
  // Levels are the statistic average pooling preserves, so the blobs stay
  // separable for pooled convolutional readers.
  const Index block = std::max<Index>(1, width / 3);
  const Index rest = width - block;
  const Index grid = static_cast<Index>(
      std::ceil(std::sqrt(static_cast<Scalar>(num_classes))));
  const Scalar gap_p =
      separation * std::sqrt(2.0) / (2.0 * std::sqrt(static_cast<Scalar>(block)));
  const Scalar gap_q =
      rest >= 1 ? separation * std::sqrt(2.0) /
                      (2.0 * std::sqrt(static_cast<Scalar>(rest)))
                : 0.0;
  Matrix means(num_classes, width);
  for (Index k = 0; k < num_classes; ++k) {
    const Index col = k % grid;
    const Index row = k / grid;
    const Scalar p = (2.0 * static_cast<Scalar>(col) -
                      static_cast<Scalar>(grid - 1)) * gap_p;
    const Scalar q = (2.0 * static_cast<Scalar>(row) -
                      static_cast<Scalar>(grid - 1)) * gap_q;
    for (Index j = 0; j < width; ++j) means(k, j) = j < block ? p : q;
  }
  std::normal_distribution<Scalar> gauss(0.0, 1.0);

  FeatureMatrix m;
  m.X = Tensor({rows, width});
  m.y.reserve(rows);
  const Index base = rows / num_classes;
  const Index extra = rows % num_classes;
  Index r = 0;
  for (Index k = 0; k < num_classes; ++k) {
    const Index nk = base + (k < extra ? 1 : 0);
    Rng noise_rng(derive_seed(seed, "synthetic-noise", k));
    for (Index i = 0; i < nk; ++i, ++r) {
      for (Index j = 0; j < width; ++j)
        m.X.values[r * width + j] = means(k, j) + gauss(noise_rng);
      m.y.push_back(k);
    }
  }
  m.validate(std::max<Index>(num_classes, 2));
  return m;
}

}  // namespace hfl
