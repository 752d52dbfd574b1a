#include "ai4ef/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>

#include "ai4ef/error.hpp"
#include "ai4ef/fsutil.hpp"
#include "ai4ef/random.hpp"

namespace ai4ef::ingest {

using domain::ColumnKind;
using domain::ColumnSpec;
using domain::Task;

namespace {

std::string trim(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  return std::string(text);
}

std::optional<double> parse_number(const std::string& text) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::optional<double> parse_bool(std::string text) {
  std::transform(text.begin(), text.end(), text.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (text == "1" || text == "true" || text == "yes" || text == "1.0") return 1.0;
  if (text == "0" || text == "false" || text == "no" || text == "0.0") return 0.0;
  return std::nullopt;
}

// Coerces one non-blank cell; nullopt on failure.
std::optional<Cell> coerce(const ColumnSpec& column, const std::string& text) {
  switch (column.kind) {
    case ColumnKind::Continuous:
      if (auto v = parse_number(text)) return Cell{*v};
      return std::nullopt;
    case ColumnKind::Boolean:
      if (auto v = parse_bool(text)) return Cell{*v};
      return std::nullopt;
    case ColumnKind::OrdinalClass:
      try {
        return Cell{domain::parse_energy_class(text).label_string()};
      } catch (const Error&) {
        return std::nullopt;
      }
    case ColumnKind::Categorical:
      return Cell{text};
  }
  return std::nullopt;
}

double as_number(const Cell& cell, const std::string& column) {
  if (const auto* v = std::get_if<double>(&cell)) return *v;
  throw Error(ErrorCode::InvalidValue, "column '" + column + "' expects a number", column);
}

const std::string& as_text(const Cell& cell, const std::string& column) {
  if (const auto* v = std::get_if<std::string>(&cell)) return *v;
  throw Error(ErrorCode::InvalidValue, "column '" + column + "' expects text", column);
}

}  // namespace

// ---------------------------------------------------------------------------

CleanTable CleanTable::subset(std::span<const std::size_t> indices) const {
  CleanTable out;
  out.schema = schema;
  out.rows_in = indices.size();
  for (const auto i : indices) {
    out.rows.push_back(rows.at(i));
    out.source_rows.push_back(source_rows.at(i));
  }
  return out;
}

CleanTable clean(const RawTable& raw, const DatasetSchema& schema) {
  schema.validate();
  std::vector<ColumnSpec> columns = schema.features;
  columns.insert(columns.end(), schema.targets.begin(), schema.targets.end());

  std::vector<std::size_t> positions;
  std::string missing;
  for (const auto& column : columns) {
    const auto it = std::find_if(raw.header.begin(), raw.header.end(), [&](const std::string& h) {
      return domain::canonical_column_name(h) == column.name;
    });
    if (it == raw.header.end()) {
      missing += (missing.empty() ? "" : ", ") + column.name;
    } else {
      positions.push_back(static_cast<std::size_t>(it - raw.header.begin()));
    }
  }
  if (!missing.empty()) {
    throw Error(ErrorCode::SchemaMismatch, "header lacks column(s): " + missing, missing);
  }

  CleanTable table;
  table.schema = schema;
  table.rows_in = raw.rows.size();
  const std::size_t n_features = schema.features.size();

  for (std::size_t r = 0; r < raw.rows.size(); ++r) {
    Row row;
    row.reserve(columns.size());
    std::string reason;
    std::size_t imputed = 0;
    for (std::size_t c = 0; c < columns.size() && reason.empty(); ++c) {
      const auto& column = columns[c];
      const std::string text = trim(raw.rows[r][positions[c]]);
      const bool is_target = c >= n_features;
      if (text.empty()) {
        if (is_target) {
          reason = "missing target '" + column.name + "'";
        } else if (column.optional) {
          row.emplace_back(std::monostate{});
          ++imputed;
        } else {
          reason = "missing feature '" + column.name + "'";
        }
        continue;
      }
      auto cell = coerce(column, text);
      if (!cell) {
        reason = "coercion failure: column '" + column.name + "' value '" + text + "'";
        continue;
      }
      row.push_back(std::move(*cell));
    }
    if (!reason.empty()) {
      table.dropped.push_back({r, std::move(reason)});
      continue;
    }
    table.imputed_cells += imputed;
    table.rows.push_back(std::move(row));
    table.source_rows.push_back(r);
  }
  return table;
}

std::string fingerprint(const CleanTable& table) {
  std::string canonical;
  for (const auto& name : table.schema.column_names()) canonical += name + '\x1f';
  canonical += '\x1e';
  for (const auto& row : table.rows) {
    for (const auto& cell : row) {
      if (const auto* v = std::get_if<double>(&cell)) {
        canonical += fsutil::format_double(*v);
      } else if (const auto* s = std::get_if<std::string>(&cell)) {
        canonical += *s;
      } else {
        canonical += "\x15";  // blank
      }
      canonical += '\x1f';
    }
    canonical += '\x1e';
  }
  return fsutil::sha256_hex(canonical);
}

// ---------------------------------------------------------------------------

std::string_view to_string(ScalerKind kind) {
  switch (kind) {
    case ScalerKind::MinMax: return "minmax";
    case ScalerKind::Ordinal: return "ordinal";
    case ScalerKind::OneHot: return "onehot";
    case ScalerKind::Passthrough: return "passthrough";
  }
  return "passthrough";
}

namespace {

ScalerKind parse_scaler_kind(std::string_view text) {
  for (auto kind : {ScalerKind::MinMax, ScalerKind::Ordinal, ScalerKind::OneHot, ScalerKind::Passthrough}) {
    if (to_string(kind) == text) return kind;
  }
  throw Error(ErrorCode::InvalidValue, "unknown scaler kind '" + std::string(text) + "'");
}

ColumnScaler fit_column(const ColumnSpec& column, const std::vector<Row>& rows, std::size_t index,
                        bool scale_continuous) {
  ColumnScaler s;
  s.column = column.name;
  switch (column.kind) {
    case ColumnKind::Continuous: {
      if (!scale_continuous) {
        s.kind = ScalerKind::Passthrough;
        break;
      }
      s.kind = ScalerKind::MinMax;
      double lo = INFINITY, hi = -INFINITY, sum = 0.0;
      std::size_t count = 0;
      for (const auto& row : rows) {
        if (const auto* v = std::get_if<double>(&row[index])) {
          lo = std::min(lo, *v);
          hi = std::max(hi, *v);
          sum += *v;
          ++count;
        }
      }
      if (count == 0) {
        throw Error(ErrorCode::EmptyTable, "column '" + column.name + "' has no observed values", column.name);
      }
      s.min = lo;
      s.max = hi;
      s.degenerate = !(hi > lo);
      if (column.optional) s.mean = sum / static_cast<double>(count);
      break;
    }
    case ColumnKind::OrdinalClass:
      s.kind = ScalerKind::Ordinal;
      for (int o = 1; o <= domain::kEnergyClassCount; ++o) {
        s.vocab.push_back(domain::EnergyClass::from_ordinal(o).label_string());
      }
      break;
    case ColumnKind::Categorical: {
      s.kind = ScalerKind::OneHot;
      std::set<std::string> distinct;
      for (const auto& row : rows) distinct.insert(as_text(row[index], column.name));
      s.vocab.assign(distinct.begin(), distinct.end());
      break;
    }
    case ColumnKind::Boolean:
      s.kind = ScalerKind::Passthrough;
      break;
  }
  return s;
}

void encode_cell(const ColumnScaler& s, const Cell& cell, std::vector<double>& out) {
  switch (s.kind) {
    case ScalerKind::MinMax: {
      double x = 0.0;
      if (std::holds_alternative<std::monostate>(cell)) {
        if (!s.mean) throw Error(ErrorCode::MissingField, "column '" + s.column + "' is blank", s.column);
        x = *s.mean;
      } else {
        x = as_number(cell, s.column);
      }
      out.push_back(s.degenerate ? 0.0 : (x - s.min) / (s.max - s.min));
      return;
    }
    case ScalerKind::Ordinal: {
      const auto& label = as_text(cell, s.column);
      const auto it = std::find(s.vocab.begin(), s.vocab.end(), label);
      if (it == s.vocab.end()) {
        throw Error(ErrorCode::UnseenCategory, "column '" + s.column + "' has unknown class '" + label + "'",
                    s.column);
      }
      const auto ordinal = static_cast<double>(it - s.vocab.begin() + 1);
      out.push_back(ordinal / static_cast<double>(s.vocab.size()));
      return;
    }
    case ScalerKind::OneHot: {
      const auto& value = as_text(cell, s.column);
      const auto it = std::find(s.vocab.begin(), s.vocab.end(), value);
      if (it == s.vocab.end()) {
        throw Error(ErrorCode::UnseenCategory,
                    "column '" + s.column + "' value '" + value + "' was not seen during fitting", s.column);
      }
      for (auto v = s.vocab.begin(); v != s.vocab.end(); ++v) out.push_back(v == it ? 1.0 : 0.0);
      return;
    }
    case ScalerKind::Passthrough:
      out.push_back(as_number(cell, s.column));
      return;
  }
}

Cell decode_cell(const ColumnScaler& s, std::span<const double> block) {
  switch (s.kind) {
    case ScalerKind::MinMax:
      return Cell{s.degenerate ? s.min : s.min + block[0] * (s.max - s.min)};
    case ScalerKind::Ordinal: {
      const auto n = static_cast<double>(s.vocab.size());
      const auto ordinal = static_cast<long>(std::lround(block[0] * n));
      if (ordinal < 1 || ordinal > static_cast<long>(s.vocab.size())) {
        throw Error(ErrorCode::OutOfRange, "encoded class for '" + s.column + "' out of range", s.column);
      }
      return Cell{s.vocab[static_cast<std::size_t>(ordinal - 1)]};
    }
    case ScalerKind::OneHot: {
      const auto it = std::max_element(block.begin(), block.end());
      return Cell{s.vocab[static_cast<std::size_t>(it - block.begin())]};
    }
    case ScalerKind::Passthrough:
      return Cell{block[0]};
  }
  return Cell{};
}

Row decode_block(const std::vector<ColumnScaler>& scalers, std::span<const double> encoded) {
  Row row;
  std::size_t offset = 0;
  for (const auto& s : scalers) {
    const auto width = s.width();
    if (offset + width > encoded.size()) {
      throw Error(ErrorCode::ShapeMismatch, "encoded vector too short", s.column);
    }
    row.push_back(decode_cell(s, encoded.subspan(offset, width)));
    offset += width;
  }
  if (offset != encoded.size()) throw Error(ErrorCode::ShapeMismatch, "encoded vector too long");
  return row;
}

std::vector<double> encode_block(const std::vector<ColumnScaler>& scalers, std::span<const Cell> cells) {
  if (cells.size() != scalers.size()) {
    throw Error(ErrorCode::ShapeMismatch, "expected " + std::to_string(scalers.size()) + " cells, got " +
                                              std::to_string(cells.size()));
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < scalers.size(); ++i) encode_cell(scalers[i], cells[i], out);
  return out;
}

Json scaler_to_json(const ColumnScaler& s) {
  Json j;
  j["column"] = s.column;
  j["kind"] = to_string(s.kind);
  if (s.kind == ScalerKind::MinMax) {
    j["min"] = s.min;
    j["max"] = s.max;
    j["degenerate"] = s.degenerate;
  }
  if (!s.vocab.empty()) j["vocab"] = s.vocab;
  if (s.mean) j["mean"] = *s.mean;
  return j;
}

ColumnScaler scaler_from_json(const Json& j) {
  ColumnScaler s;
  s.column = j.at("column").get<std::string>();
  s.kind = parse_scaler_kind(j.at("kind").get<std::string>());
  if (s.kind == ScalerKind::MinMax) {
    s.min = j.at("min").get<double>();
    s.max = j.at("max").get<double>();
    s.degenerate = j.at("degenerate").get<bool>();
  }
  if (j.contains("vocab")) s.vocab = j.at("vocab").get<std::vector<std::string>>();
  if (j.contains("mean")) s.mean = j.at("mean").get<double>();
  if ((s.kind == ScalerKind::OneHot || s.kind == ScalerKind::Ordinal) && s.vocab.empty()) {
    throw Error(ErrorCode::InvalidValue, "empty vocabulary for '" + s.column + "'", s.column);
  }
  return s;
}

}  // namespace

std::size_t ScalerSet::feature_width() const {
  std::size_t width = 0;
  for (const auto& s : features) width += s.width();
  return width;
}

std::vector<std::string> ScalerSet::encoded_feature_names() const {
  std::vector<std::string> names;
  for (const auto& s : features) {
    if (s.kind == ScalerKind::OneHot) {
      for (const auto& v : s.vocab) names.push_back(s.column + "=" + v);
    } else {
      names.push_back(s.column);
    }
  }
  return names;
}

std::vector<std::string> ScalerSet::target_names() const {
  std::vector<std::string> names;
  for (const auto& s : targets) names.push_back(s.column);
  return names;
}

Json ScalerSet::to_json() const {
  Json j;
  j["format_version"] = 1;
  j["fingerprint"] = fingerprint;
  j["targets_scaled"] = targets_scaled;
  j["features"] = Json::array();
  for (const auto& s : features) j["features"].push_back(scaler_to_json(s));
  j["targets"] = Json::array();
  for (const auto& s : targets) j["targets"].push_back(scaler_to_json(s));
  return j;
}

ScalerSet ScalerSet::from_json(const Json& j) {
  try {
    ScalerSet set;
    set.fingerprint = j.at("fingerprint").get<std::string>();
    set.targets_scaled = j.at("targets_scaled").get<bool>();
    for (const auto& s : j.at("features")) set.features.push_back(scaler_from_json(s));
    for (const auto& s : j.at("targets")) set.targets.push_back(scaler_from_json(s));
    return set;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::InvalidValue, std::string("malformed scalers document: ") + e.what());
  }
}

ScalerSet fit_scalers(const CleanTable& table) {
  if (table.rows.empty()) throw Error(ErrorCode::EmptyTable, "cannot fit scalers on an empty table");
  ScalerSet set;
  const auto& schema = table.schema;
  set.targets_scaled = schema.task == Task::Regressor;
  for (std::size_t c = 0; c < schema.features.size(); ++c) {
    set.features.push_back(fit_column(schema.features[c], table.rows, c, true));
  }
  for (std::size_t t = 0; t < schema.targets.size(); ++t) {
    set.targets.push_back(
        fit_column(schema.targets[t], table.rows, schema.features.size() + t, set.targets_scaled));
  }
  set.fingerprint = fingerprint(table);
  return set;
}

std::vector<double> transform_features(const ScalerSet& scalers, std::span<const Cell> features) {
  return encode_block(scalers.features, features);
}

Row inverse_transform_features(const ScalerSet& scalers, std::span<const double> encoded) {
  return decode_block(scalers.features, encoded);
}

std::vector<double> transform_targets(const ScalerSet& scalers, std::span<const Cell> targets) {
  return encode_block(scalers.targets, targets);
}

std::vector<double> inverse_transform_targets(const ScalerSet& scalers, std::span<const double> encoded) {
  std::vector<double> out;
  for (const auto& cell : decode_block(scalers.targets, encoded)) out.push_back(std::get<double>(cell));
  return out;
}

std::vector<double> transform(const ScalerSet& scalers, const Row& row) {
  const auto n = scalers.features.size();
  if (row.size() != n + scalers.targets.size()) {
    throw Error(ErrorCode::ShapeMismatch, "row width does not match the scaler set");
  }
  const std::span<const Cell> cells(row);
  auto out = transform_features(scalers, cells.first(n));
  const auto targets = transform_targets(scalers, cells.subspan(n));
  out.insert(out.end(), targets.begin(), targets.end());
  return out;
}

Row inverse_transform(const ScalerSet& scalers, std::span<const double> encoded) {
  const auto width = scalers.feature_width();
  if (encoded.size() != width + scalers.target_width()) {
    throw Error(ErrorCode::ShapeMismatch, "encoded width does not match the scaler set");
  }
  auto row = inverse_transform_features(scalers, encoded.first(width));
  for (auto& cell : decode_block(scalers.targets, encoded.subspan(width))) row.push_back(std::move(cell));
  return row;
}

// ---------------------------------------------------------------------------

SplitIndices split(std::size_t n_rows, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw Error(ErrorCode::BadRatio, "split ratio must lie in (0, 1)", "split_ratio");
  }
  if (n_rows < 2) throw Error(ErrorCode::TooFewRows, "need at least 2 rows to split");

  std::vector<std::size_t> order(n_rows);
  for (std::size_t i = 0; i < n_rows; ++i) order[i] = i;
  SplitMix64 rng(seed);
  rng.shuffle(std::span<std::size_t>(order));

  auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n_rows)));
  n_train = std::clamp<std::size_t>(n_train, 1, n_rows - 1);
  SplitIndices out;
  out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return out;
}

SplitDataset encode_split(const CleanTable& table, const SplitIndices& indices, const ScalerSet& scalers,
                          double ratio, std::uint64_t seed) {
  SplitDataset ds;
  ds.split_ratio = ratio;
  ds.seed = seed;
  ds.feature_names = scalers.encoded_feature_names();
  ds.target_names = scalers.target_names();
  const auto nf = table.feature_count();

  auto fill = [&](const std::vector<std::size_t>& idx, Matrix& x, Matrix& y, std::vector<std::size_t>& ids) {
    x = Matrix(idx.size(), scalers.feature_width());
    y = Matrix(idx.size(), scalers.target_width());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const std::span<const Cell> cells(table.rows.at(idx[i]));
      const auto fx = transform_features(scalers, cells.first(nf));
      const auto fy = transform_targets(scalers, cells.subspan(nf));
      std::copy(fx.begin(), fx.end(), x.row(i).begin());
      std::copy(fy.begin(), fy.end(), y.row(i).begin());
      ids.push_back(table.source_rows.at(idx[i]));
    }
  };
  fill(indices.train, ds.train_x, ds.train_y, ds.train_rows);
  fill(indices.test, ds.test_x, ds.test_y, ds.test_rows);
  return ds;
}

// ---------------------------------------------------------------------------

namespace {

std::string matrix_csv(const std::vector<std::string>& x_names, const std::vector<std::string>& y_names,
                       const Matrix& x, const Matrix& y) {
  csv::Document doc;
  doc.header = x_names;
  doc.header.insert(doc.header.end(), y_names.begin(), y_names.end());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    csv::Record rec;
    for (const double v : x.row(r)) rec.push_back(fsutil::format_double(v));
    for (const double v : y.row(r)) rec.push_back(fsutil::format_double(v));
    doc.rows.push_back(std::move(rec));
  }
  return csv::format(doc);
}

void read_matrix_csv(const fs::path& path, std::size_t x_width, Matrix& x, Matrix& y) {
  const auto doc = csv::parse(fsutil::read_file(path));
  if (doc.header.size() < x_width) {
    throw Error(ErrorCode::SchemaMismatch, "'" + path.string() + "' is narrower than the scaler set");
  }
  const auto y_width = doc.header.size() - x_width;
  x = Matrix(doc.rows.size(), x_width);
  y = Matrix(doc.rows.size(), y_width);
  for (std::size_t r = 0; r < doc.rows.size(); ++r) {
    for (std::size_t c = 0; c < doc.header.size(); ++c) {
      const auto v = parse_number(doc.rows[r][c]);
      if (!v) throw Error(ErrorCode::MalformedCsv, "non-numeric cell in '" + path.string() + "'");
      if (c < x_width) {
        x(r, c) = *v;
      } else {
        y(r, c - x_width) = *v;
      }
    }
  }
}

template <typename Fn>
auto step(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    if (!e.step().empty()) throw;
    throw e.with_step(name);
  }
}

}  // namespace

IngestArtifacts run_ingestion(const IngestOptions& options, const fs::path& out_dir) {
  fsutil::DirectoryLock lock(out_dir);

  const auto source = step("validate_source", [&] { return validate_source(options.input); });
  const auto raw = step("fetch", [&] { return fetch(source, options.connector); });
  const auto table = step("clean", [&] { return clean(raw, options.schema); });
  const auto split_indices =
      step("split", [&] { return split(table.rows.size(), options.split_ratio, options.seed); });
  const auto train_table = table.subset(split_indices.train);
  const auto scalers = step("fit_scalers", [&] { return fit_scalers(train_table); });

  // Test rows whose categories never occur in the training partition cannot be encoded.
  auto indices = split_indices;
  std::vector<DroppedRow> unseen;
  std::erase_if(indices.test, [&](std::size_t i) {
    try {
      transform(scalers, table.rows[i]);
      return false;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UnseenCategory) throw;
      unseen.push_back({table.source_rows[i], std::string("test row skipped: ") + e.what()});
      return true;
    }
  });
  const auto data = step("transform", [&] {
    return encode_split(table, indices, scalers, options.split_ratio, options.seed);
  });

  IngestArtifacts artifacts;
  artifacts.train_data = out_dir / kTrainFile;
  artifacts.test_data = out_dir / kTestFile;
  artifacts.scalers = out_dir / kScalersFile;
  artifacts.metadata = out_dir / kMetaFile;
  artifacts.rows_in = table.rows_in;
  artifacts.rows_retained = table.rows.size();
  if (indices.test.empty()) {
    throw Error(ErrorCode::TooFewRows, "test partition is empty after encoding").with_step("transform");
  }

  step("persist", [&] {
    fsutil::write_file_atomic(artifacts.train_data,
                              matrix_csv(data.feature_names, data.target_names, data.train_x, data.train_y));
    fsutil::write_file_atomic(artifacts.test_data,
                              matrix_csv(data.feature_names, data.target_names, data.test_x, data.test_y));
    fsutil::write_file_atomic(artifacts.scalers, scalers.to_json().dump(2) + "\n");

    Json meta;
    meta["format_version"] = 1;
    meta["source"] = options.input;
    meta["task"] = domain::to_string(options.schema.task);
    meta["feature_cols"] = Json::array();
    for (const auto& c : options.schema.features) meta["feature_cols"].push_back(c.name);
    meta["target_cols"] = Json::array();
    for (const auto& c : options.schema.targets) meta["target_cols"].push_back(c.name);
    meta["rows_in"] = table.rows_in;
    meta["rows_retained"] = table.rows.size();
    meta["rows_dropped"] = table.dropped.size();
    meta["dropped"] = Json::array();
    for (const auto& d : table.dropped) meta["dropped"].push_back({{"row", d.source_row}, {"reason", d.reason}});
    meta["unencodable_test_rows"] = Json::array();
    for (const auto& d : unseen) {
      meta["unencodable_test_rows"].push_back({{"row", d.source_row}, {"reason", d.reason}});
    }
    meta["imputed_cells"] = table.imputed_cells;
    meta["split_ratio"] = options.split_ratio;
    meta["seed"] = options.seed;
    meta["train_rows"] = data.train_rows;
    meta["test_rows"] = data.test_rows;
    meta["dataset_fingerprint"] = fingerprint(table);
    meta["scalers_fingerprint"] = scalers.fingerprint;
    fsutil::write_file_atomic(artifacts.metadata, meta.dump(2) + "\n");
    return 0;
  });
  return artifacts;
}

bool has_ingest_artifacts(const fs::path& dir) {
  return fs::is_regular_file(dir / kTrainFile) && fs::is_regular_file(dir / kTestFile) &&
         fs::is_regular_file(dir / kScalersFile);
}

ScalerSet load_scalers(const fs::path& path) {
  try {
    return ScalerSet::from_json(Json::parse(fsutil::read_file(path)));
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::InvalidValue, "'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

SplitDataset load_split(const fs::path& dir) {
  if (!has_ingest_artifacts(dir)) {
    throw Error(ErrorCode::MissingArtifact, "no ingestion artifacts in '" + dir.string() + "'", "train-data");
  }
  const auto scalers = load_scalers(dir / kScalersFile);
  SplitDataset ds;
  ds.feature_names = scalers.encoded_feature_names();
  ds.target_names = scalers.target_names();
  read_matrix_csv(dir / kTrainFile, scalers.feature_width(), ds.train_x, ds.train_y);
  read_matrix_csv(dir / kTestFile, scalers.feature_width(), ds.test_x, ds.test_y);
  if (ds.train_y.cols() != scalers.target_width() || ds.test_y.cols() != scalers.target_width()) {
    throw Error(ErrorCode::SchemaMismatch, "ingestion artifacts disagree with scalers.json");
  }
  if (fs::is_regular_file(dir / kMetaFile)) {
    const auto meta = Json::parse(fsutil::read_file(dir / kMetaFile));
    ds.split_ratio = meta.value("split_ratio", 0.8);
    ds.seed = meta.value("seed", std::uint64_t{42});
    ds.train_rows = meta.value("train_rows", std::vector<std::size_t>{});
    ds.test_rows = meta.value("test_rows", std::vector<std::size_t>{});
  }
  return ds;
}

}  // namespace ai4ef::ingest
