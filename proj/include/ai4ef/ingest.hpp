#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ai4ef/csv.hpp"
#include "ai4ef/domain.hpp"
#include "ai4ef/matrix.hpp"

namespace ai4ef::ingest {

namespace fs = std::filesystem;
using domain::DatasetSchema;

// ---------------------------------------------------------------------------
// Sources
// ---------------------------------------------------------------------------

struct LocalFile {
  std::string path;
  friend bool operator==(const LocalFile&, const LocalFile&) = default;
};
struct HttpEndpoint {
  std::string url;
  friend bool operator==(const HttpEndpoint&, const HttpEndpoint&) = default;
};
struct ConnectionString {
  std::string dsn;
  friend bool operator==(const ConnectionString&, const ConnectionString&) = default;
};
using DataSource = std::variant<LocalFile, HttpEndpoint, ConnectionString>;

/// Classifies `text` as URL, then DSN, then file path. Throws UnrecognizedSource.
DataSource validate_source(std::string_view text);

inline constexpr std::string_view kConsumerHeader = "X-Consumer-Agent-Id";
inline constexpr std::string_view kProviderHeader = "X-Provider-Agent-Id";

/// Credentials for an authenticated data-space fetch.
struct ConnectorConfig {
  std::string authorization;      // "APIKEY-..."
  std::string consumer_agent_id;  // urn:...
  std::string provider_agent_id;

  /// Throws InvalidValue naming the offending field.
  void validate() const;
};

using RawTable = csv::Document;

/// Reads a CSV from a local file or an HTTP endpoint. With a connector, HTTP
/// requests carry Authorization, X-Consumer-Agent-Id and X-Provider-Agent-Id.
/// Errors: IoError, HttpStatus (status() holds the code), MalformedCsv,
/// UnsupportedSource for database DSNs.
RawTable fetch(const DataSource& source, const std::optional<ConnectorConfig>& connector = std::nullopt);

// ---------------------------------------------------------------------------
// Cleaning
// ---------------------------------------------------------------------------

/// monostate marks a blank optional feature awaiting imputation; booleans and
/// continuous values are doubles; energy classes and categories are strings.
using Cell = std::variant<std::monostate, double, std::string>;
using Row = std::vector<Cell>;

struct DroppedRow {
  std::size_t source_row;  // 0-based data row in the raw table
  std::string reason;
};

struct CleanTable {
  DatasetSchema schema;
  std::vector<Row> rows;                 // features then targets, schema order
  std::vector<std::size_t> source_rows;  // raw row index of each retained row
  std::size_t rows_in = 0;
  std::size_t imputed_cells = 0;
  std::vector<DroppedRow> dropped;

  std::size_t feature_count() const { return schema.features.size(); }
  CleanTable subset(std::span<const std::size_t> indices) const;
};

/// Throws SchemaMismatch listing schema columns absent from the header.
CleanTable clean(const RawTable& raw, const DatasetSchema& schema);

/// Content hash of a table's rows; identifies the data a scaler set was fit on.
std::string fingerprint(const CleanTable& table);

// ---------------------------------------------------------------------------
// Scaling
// ---------------------------------------------------------------------------

enum class ScalerKind { MinMax, Ordinal, OneHot, Passthrough };
std::string_view to_string(ScalerKind kind);

struct ColumnScaler {
  std::string column;
  ScalerKind kind = ScalerKind::Passthrough;
  double min = 0.0;
  double max = 0.0;
  bool degenerate = false;
  std::vector<std::string> vocab;
  std::optional<double> mean;  // optional continuous columns only

  std::size_t width() const { return kind == ScalerKind::OneHot ? vocab.size() : 1; }
  friend bool operator==(const ColumnScaler&, const ColumnScaler&) = default;
};

struct ScalerSet {
  std::vector<ColumnScaler> features;
  std::vector<ColumnScaler> targets;
  bool targets_scaled = false;
  std::string fingerprint;

  std::size_t feature_width() const;
  std::size_t target_width() const { return targets.size(); }
  /// Encoded feature names; one-hot blocks expand to "column=value".
  std::vector<std::string> encoded_feature_names() const;
  std::vector<std::string> target_names() const;

  Json to_json() const;
  static ScalerSet from_json(const Json& j);

  friend bool operator==(const ScalerSet&, const ScalerSet&) = default;
};

/// Continuous -> MinMax, ordinal-class -> Ordinal(A..G), categorical -> OneHot
/// over sorted distinct values, boolean -> Passthrough. Regressor targets are
/// MinMax-scaled; classifier targets pass through. Throws EmptyTable.
ScalerSet fit_scalers(const CleanTable& table);

std::vector<double> transform_features(const ScalerSet& scalers, std::span<const Cell> features);
Row inverse_transform_features(const ScalerSet& scalers, std::span<const double> encoded);
std::vector<double> transform_targets(const ScalerSet& scalers, std::span<const Cell> targets);
std::vector<double> inverse_transform_targets(const ScalerSet& scalers, std::span<const double> encoded);

/// Whole-row encoding: features then targets. Throws UnseenCategory.
std::vector<double> transform(const ScalerSet& scalers, const Row& row);
Row inverse_transform(const ScalerSet& scalers, std::span<const double> encoded);

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded Fisher-Yates permutation; the first round(ratio * n) indices form the
/// training partition (kept within [1, n-1]). Throws BadRatio, TooFewRows.
SplitIndices split(std::size_t n_rows, double ratio, std::uint64_t seed);

struct SplitDataset {
  Matrix train_x, train_y, test_x, test_y;
  std::vector<std::size_t> train_rows, test_rows;  // source row ids
  std::vector<std::string> feature_names, target_names;
  double split_ratio = 0.8;
  std::uint64_t seed = 42;
};

SplitDataset encode_split(const CleanTable& table, const SplitIndices& indices, const ScalerSet& scalers,
                          double ratio, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Ingestion step
// ---------------------------------------------------------------------------

inline constexpr std::string_view kTrainFile = "train.csv";
inline constexpr std::string_view kTestFile = "test.csv";
inline constexpr std::string_view kScalersFile = "scalers.json";
inline constexpr std::string_view kMetaFile = "ingest_meta.json";

struct IngestOptions {
  std::string input;
  std::optional<ConnectorConfig> connector;
  DatasetSchema schema;
  double split_ratio = 0.8;
  std::uint64_t seed = 42;
};

struct IngestArtifacts {
  fs::path train_data, test_data, scalers, metadata;
  std::size_t rows_in = 0;
  std::size_t rows_retained = 0;
};

/// validate_source -> fetch -> clean -> split -> fit_scalers(train) -> transform,
/// then writes train.csv, test.csv, scalers.json and ingest_meta.json into
/// `out_dir`. Errors are re-thrown tagged with the failing step.
IngestArtifacts run_ingestion(const IngestOptions& options, const fs::path& out_dir);

/// True when `dir` holds the three ingestion artifacts.
bool has_ingest_artifacts(const fs::path& dir);
SplitDataset load_split(const fs::path& dir);
ScalerSet load_scalers(const fs::path& path);

}  // namespace ai4ef::ingest
