#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace ai4ef {
/// Insertion-ordered so serialized records keep their published field order.
using Json = nlohmann::ordered_json;
}  // namespace ai4ef

namespace ai4ef::domain {

inline constexpr int kEnergyClassCount = 7;

/// Building energy-efficiency rating, A (best, ordinal 1) through G (worst, ordinal 7).
class EnergyClass {
 public:
  /// Throws UnknownClass outside 1..7.
  static EnergyClass from_ordinal(int ordinal);

  int ordinal() const noexcept { return ordinal_; }
  char label() const noexcept { return static_cast<char>('A' + ordinal_ - 1); }
  std::string label_string() const { return std::string(1, label()); }

  friend bool operator==(EnergyClass, EnergyClass) = default;
  friend auto operator<=>(EnergyClass, EnergyClass) = default;

 private:
  explicit EnergyClass(int ordinal) : ordinal_(ordinal) {}
  int ordinal_;
};

/// Case-insensitive, ignores surrounding whitespace. Throws UnknownClass.
EnergyClass parse_energy_class(std::string_view text);

struct RetrofitFeatures {
  double building_total_area;
  int above_ground_floors;
  double energy_consumption_before;
  EnergyClass initial_energy_class;
  EnergyClass energy_class_after;
};

struct RetrofitTargets {
  bool carrying_out_construction_works;
  bool reconstruction_of_engineering_systems;
  bool heat_installation;
  bool water_heating_system;

  std::array<bool, 4> values() const {
    return {carrying_out_construction_works, reconstruction_of_engineering_systems,
            heat_installation, water_heating_system};
  }
  static RetrofitTargets from_values(const std::array<bool, 4>& v) { return {v[0], v[1], v[2], v[3]}; }
};

struct PvFeatures {
  double average_electricity_price;
  double average_monthly_consumption_before;
  double installation_cost;
  double current_inverter_set_power;
  double planned_inverter_set_power;
  std::optional<double> average_energy_generated;
  std::string region;

  /// Set when average_energy_generated was left blank and must be imputed.
  bool generation_imputed() const noexcept { return !average_energy_generated.has_value(); }
};

struct PvTargets {
  double electricity_produced;
  double primary_energy_consumption_after;
  double reduction_of_primary_energy;
  double co2_emissions_reduction;
  double expected_annual_self_consumption;
  double annual_financial_savings;
  double payback_period;

  std::array<double, 7> values() const {
    return {electricity_produced,           primary_energy_consumption_after,
            reduction_of_primary_energy,    co2_emissions_reduction,
            expected_annual_self_consumption, annual_financial_savings,
            payback_period};
  }
  static PvTargets from_values(const std::array<double, 7>& v) {
    return {v[0], v[1], v[2], v[3], v[4], v[5], v[6]};
  }
};

// Canonical column names, in the fixed input/output order of the two services.
inline constexpr std::array<std::string_view, 5> kRetrofitFeatureNames = {
    "building_total_area", "above_ground_floors", "energy_consumption_before",
    "initial_energy_class", "energy_class_after"};
inline constexpr std::array<std::string_view, 4> kRetrofitTargetNames = {
    "carrying_out_construction_works", "reconstruction_of_engineering_systems",
    "heat_installation", "water_heating_system"};
inline constexpr std::array<std::string_view, 7> kPvFeatureNames = {
    "average_electricity_price",  "average_monthly_consumption_before",
    "installation_cost",          "current_inverter_set_power",
    "planned_inverter_set_power", "average_energy_generated",
    "region"};
inline constexpr std::array<std::string_view, 7> kPvTargetNames = {
    "electricity_produced",
    "primary_energy_consumption_after",
    "reduction_of_primary_energy",
    "co2_emissions_reduction",
    "expected_annual_self_consumption",
    "annual_financial_savings",
    "payback_period"};

enum class ColumnKind { Continuous, OrdinalClass, Categorical, Boolean };
enum class Task { Classifier, Regressor };

std::string_view to_string(ColumnKind kind);
std::string_view to_string(Task task);
ColumnKind parse_column_kind(std::string_view text);
/// Accepts "Classifier"/"Regressor" (case-insensitive, optional "MLP" prefix).
Task parse_task(std::string_view text);

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::Continuous;
  bool optional = false;

  friend bool operator==(const ColumnSpec&, const ColumnSpec&) = default;
};

struct DatasetSchema {
  std::vector<ColumnSpec> features;
  std::vector<ColumnSpec> targets;
  Task task = Task::Classifier;

  /// Throws InvalidConfig on duplicate names or empty column lists, and
  /// Inconsistent when target kinds disagree with the task.
  void validate() const;
  std::vector<std::string> column_names() const;

  friend bool operator==(const DatasetSchema&, const DatasetSchema&) = default;
};

/// "Building total area" -> "building_total_area". Already-canonical names pass through.
std::string canonical_column_name(std::string_view label);

/// Column descriptor for any input or output of the two services, by
/// canonical name or printed label.
std::optional<ColumnSpec> known_column(std::string_view name);

/// Builds and validates a schema from column names; unknown names raise UnknownField.
DatasetSchema make_schema(const std::vector<std::string>& feature_cols,
                          const std::vector<std::string>& target_cols, Task task);

DatasetSchema retrofit_schema();
DatasetSchema pv_schema();

RetrofitFeatures validate_retrofit_features(const Json& candidate);
PvFeatures validate_pv_features(const Json& candidate);

Json to_json(const RetrofitFeatures& features);
Json to_json(const PvFeatures& features);
Json to_json(const RetrofitTargets& targets);
Json to_json(const PvTargets& targets);

}  // namespace ai4ef::domain
