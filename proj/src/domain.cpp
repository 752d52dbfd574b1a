#include "ai4ef/domain.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>

#include "ai4ef/error.hpp"

namespace ai4ef::domain {

namespace {

std::string_view trim(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  return text;
}

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

struct KnownColumn {
  std::string_view name;
  ColumnKind kind;
  bool optional;
};

constexpr KnownColumn kKnownColumns[] = {
    {"building_total_area", ColumnKind::Continuous, false},
    {"above_ground_floors", ColumnKind::Continuous, false},
    {"energy_consumption_before", ColumnKind::Continuous, false},
    {"initial_energy_class", ColumnKind::OrdinalClass, false},
    {"energy_class_after", ColumnKind::OrdinalClass, false},
    {"carrying_out_construction_works", ColumnKind::Boolean, false},
    {"reconstruction_of_engineering_systems", ColumnKind::Boolean, false},
    {"heat_installation", ColumnKind::Boolean, false},
    {"water_heating_system", ColumnKind::Boolean, false},
    {"average_electricity_price", ColumnKind::Continuous, false},
    {"average_monthly_consumption_before", ColumnKind::Continuous, false},
    {"installation_cost", ColumnKind::Continuous, false},
    {"current_inverter_set_power", ColumnKind::Continuous, false},
    {"planned_inverter_set_power", ColumnKind::Continuous, false},
    {"average_energy_generated", ColumnKind::Continuous, true},
    {"region", ColumnKind::Categorical, false},
    {"electricity_produced", ColumnKind::Continuous, false},
    {"primary_energy_consumption_after", ColumnKind::Continuous, false},
    {"reduction_of_primary_energy", ColumnKind::Continuous, false},
    {"co2_emissions_reduction", ColumnKind::Continuous, false},
    {"expected_annual_self_consumption", ColumnKind::Continuous, false},
    {"annual_financial_savings", ColumnKind::Continuous, false},
    {"payback_period", ColumnKind::Continuous, false},
};

// Printed labels that do not reduce to the canonical name mechanically.
constexpr std::pair<std::string_view, std::string_view> kLabelAliases[] = {
    {"average_electricity_price_for_1_kw", "average_electricity_price"},
    {"installation_costs_of_renewable_production_equipment", "installation_cost"},
    {"installation_costs_of_renewable_equipment", "installation_cost"},
    {"installation_costs", "installation_cost"},
    {"inverter_power_in_project", "planned_inverter_set_power"},
    {"average_amount_of_energy_generated_by_the_equipment", "average_energy_generated"},
    {"average_amount_of_energy_generated_by_renewable_equipment", "average_energy_generated"},
    {"energy_class_after_renovation", "energy_class_after"},
    {"electricity_produced_by_solar_panels", "electricity_produced"},
    {"reduction_of_primary_energy_consumption", "reduction_of_primary_energy"},
};

double number_field(const Json& record, std::string_view key) {
  const auto it = record.find(std::string(key));
  if (it == record.end() || it->is_null()) {
    throw Error(ErrorCode::MissingField, "missing field '" + std::string(key) + "'", std::string(key));
  }
  double value = 0.0;
  if (it->is_number()) {
    value = it->get<double>();
  } else if (it->is_string()) {
    const auto text = trim(it->get_ref<const std::string&>());
    if (text.empty()) {
      throw Error(ErrorCode::MissingField, "missing field '" + std::string(key) + "'", std::string(key));
    }
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
      throw Error(ErrorCode::InvalidValue, "field '" + std::string(key) + "' is not a number",
                  std::string(key));
    }
  } else {
    throw Error(ErrorCode::InvalidValue, "field '" + std::string(key) + "' is not a number",
                std::string(key));
  }
  if (!std::isfinite(value)) {
    throw Error(ErrorCode::OutOfRange, "field '" + std::string(key) + "' is not finite", std::string(key));
  }
  return value;
}

bool is_blank(const Json& record, std::string_view key) {
  const auto it = record.find(std::string(key));
  if (it == record.end() || it->is_null()) return true;
  return it->is_string() && trim(it->get_ref<const std::string&>()).empty();
}

std::string string_field(const Json& record, std::string_view key) {
  if (is_blank(record, key)) {
    throw Error(ErrorCode::MissingField, "missing field '" + std::string(key) + "'", std::string(key));
  }
  const auto& value = record.at(std::string(key));
  if (!value.is_string()) {
    throw Error(ErrorCode::InvalidValue, "field '" + std::string(key) + "' must be a string",
                std::string(key));
  }
  return std::string(trim(value.get_ref<const std::string&>()));
}

EnergyClass class_field(const Json& record, std::string_view key) {
  const auto text = string_field(record, key);
  try {
    return parse_energy_class(text);
  } catch (const Error& e) {
    throw Error(ErrorCode::UnknownClass, e.what(), std::string(key));
  }
}

void require(bool ok, std::string_view key, std::string_view rule) {
  if (!ok) {
    throw Error(ErrorCode::OutOfRange, "field '" + std::string(key) + "' must be " + std::string(rule),
                std::string(key));
  }
}

template <std::size_t N>
void reject_unknown_keys(const Json& record, const std::array<std::string_view, N>& allowed) {
  if (!record.is_object()) {
    throw Error(ErrorCode::InvalidValue, "record must be a JSON object");
  }
  for (const auto& [key, value] : record.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw Error(ErrorCode::UnknownField, "unknown field '" + key + "'", key);
    }
  }
}

}  // namespace

EnergyClass EnergyClass::from_ordinal(int ordinal) {
  if (ordinal < 1 || ordinal > kEnergyClassCount) {
    throw Error(ErrorCode::UnknownClass, "energy class ordinal " + std::to_string(ordinal) + " outside 1..7");
  }
  return EnergyClass(ordinal);
}

EnergyClass parse_energy_class(std::string_view text) {
  const auto t = trim(text);
  if (t.size() == 1) {
    const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(t.front())));
    if (c >= 'A' && c <= 'G') return EnergyClass::from_ordinal(c - 'A' + 1);
  }
  throw Error(ErrorCode::UnknownClass, "unknown energy class '" + std::string(t) + "'");
}

std::string_view to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::Continuous: return "continuous";
    case ColumnKind::OrdinalClass: return "ordinal-class";
    case ColumnKind::Categorical: return "categorical";
    case ColumnKind::Boolean: return "boolean";
  }
  return "continuous";
}

std::string_view to_string(Task task) {
  return task == Task::Classifier ? "Classifier" : "Regressor";
}

ColumnKind parse_column_kind(std::string_view text) {
  for (auto kind : {ColumnKind::Continuous, ColumnKind::OrdinalClass, ColumnKind::Categorical,
                    ColumnKind::Boolean}) {
    if (to_string(kind) == text) return kind;
  }
  throw Error(ErrorCode::InvalidValue, "unknown column kind '" + std::string(text) + "'");
}

Task parse_task(std::string_view text) {
  auto t = lower(trim(text));
  if (t.rfind("mlp", 0) == 0) t = t.substr(3);
  if (t == "classifier") return Task::Classifier;
  if (t == "regressor") return Task::Regressor;
  throw Error(ErrorCode::InvalidValue, "mlClass must be Classifier or Regressor, got '" + std::string(text) + "'",
              "mlClass");
}

std::string canonical_column_name(std::string_view label) {
  std::string out;
  bool pending_sep = false;
  for (const char raw : trim(label)) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isalnum(c)) {
      if (pending_sep && !out.empty()) out.push_back('_');
      pending_sep = false;
      out.push_back(static_cast<char>(std::tolower(c)));
    } else {
      pending_sep = true;
    }
  }
  for (const auto& [alias, name] : kLabelAliases) {
    if (out == alias) return std::string(name);
  }
  return out;
}

std::optional<ColumnSpec> known_column(std::string_view name) {
  const auto canonical = canonical_column_name(name);
  for (const auto& column : kKnownColumns) {
    if (column.name == canonical) return ColumnSpec{std::string(column.name), column.kind, column.optional};
  }
  return std::nullopt;
}

void DatasetSchema::validate() const {
  if (features.empty()) throw Error(ErrorCode::InvalidConfig, "schema has no feature columns", "feature_cols");
  if (targets.empty()) throw Error(ErrorCode::InvalidConfig, "schema has no target columns", "target_cols");
  std::set<std::string> seen;
  for (const auto* list : {&features, &targets}) {
    for (const auto& column : *list) {
      if (column.name.empty()) throw Error(ErrorCode::InvalidConfig, "empty column name");
      if (!seen.insert(column.name).second) {
        throw Error(ErrorCode::InvalidConfig, "duplicate column '" + column.name + "'", column.name);
      }
    }
  }
  const auto wanted = task == Task::Classifier ? ColumnKind::Boolean : ColumnKind::Continuous;
  for (const auto& column : targets) {
    if (column.kind != wanted || column.optional) {
      throw Error(ErrorCode::Inconsistent,
                  std::string(to_string(task)) + " cannot predict " + std::string(to_string(column.kind)) +
                      " target '" + column.name + "'",
                  "mlClass");
    }
  }
}

std::vector<std::string> DatasetSchema::column_names() const {
  std::vector<std::string> names;
  for (const auto& c : features) names.push_back(c.name);
  for (const auto& c : targets) names.push_back(c.name);
  return names;
}

DatasetSchema make_schema(const std::vector<std::string>& feature_cols,
                          const std::vector<std::string>& target_cols, Task task) {
  DatasetSchema schema;
  schema.task = task;
  auto resolve = [](const std::string& name, std::string_view list) {
    auto spec = known_column(name);
    if (!spec) {
      throw Error(ErrorCode::UnknownField, "unknown column '" + name + "'", std::string(list));
    }
    return *spec;
  };
  for (const auto& name : feature_cols) schema.features.push_back(resolve(name, "feature_cols"));
  for (const auto& name : target_cols) schema.targets.push_back(resolve(name, "target_cols"));
  schema.validate();
  return schema;
}

namespace {
template <std::size_t NF, std::size_t NT>
DatasetSchema schema_from(const std::array<std::string_view, NF>& features,
                          const std::array<std::string_view, NT>& targets, Task task) {
  std::vector<std::string> f(features.begin(), features.end());
  std::vector<std::string> t(targets.begin(), targets.end());
  return make_schema(f, t, task);
}
}  // namespace

DatasetSchema retrofit_schema() {
  return schema_from(kRetrofitFeatureNames, kRetrofitTargetNames, Task::Classifier);
}

DatasetSchema pv_schema() { return schema_from(kPvFeatureNames, kPvTargetNames, Task::Regressor); }

RetrofitFeatures validate_retrofit_features(const Json& candidate) {
  reject_unknown_keys(candidate, kRetrofitFeatureNames);

  const double area = number_field(candidate, "building_total_area");
  require(area > 0.0, "building_total_area", "> 0");

  const double floors = number_field(candidate, "above_ground_floors");
  require(floors >= 1.0 && floors == std::floor(floors) && floors <= 1e6, "above_ground_floors",
          "a positive integer");

  const double consumption = number_field(candidate, "energy_consumption_before");
  require(consumption > 0.0, "energy_consumption_before", "> 0");

  return RetrofitFeatures{area, static_cast<int>(floors), consumption,
                          class_field(candidate, "initial_energy_class"),
                          class_field(candidate, "energy_class_after")};
}

PvFeatures validate_pv_features(const Json& candidate) {
  reject_unknown_keys(candidate, kPvFeatureNames);

  PvFeatures f{};
  f.average_electricity_price = number_field(candidate, "average_electricity_price");
  require(f.average_electricity_price > 0.0, "average_electricity_price", "> 0");
  f.average_monthly_consumption_before = number_field(candidate, "average_monthly_consumption_before");
  require(f.average_monthly_consumption_before > 0.0, "average_monthly_consumption_before", "> 0");
  f.installation_cost = number_field(candidate, "installation_cost");
  require(f.installation_cost >= 0.0, "installation_cost", ">= 0");
  f.current_inverter_set_power = number_field(candidate, "current_inverter_set_power");
  require(f.current_inverter_set_power >= 0.0, "current_inverter_set_power", ">= 0");
  f.planned_inverter_set_power = number_field(candidate, "planned_inverter_set_power");
  require(f.planned_inverter_set_power > 0.0, "planned_inverter_set_power", "> 0");
  if (!is_blank(candidate, "average_energy_generated")) {
    const double generated = number_field(candidate, "average_energy_generated");
    require(generated > 0.0, "average_energy_generated", "> 0 or blank");
    f.average_energy_generated = generated;
  }
  f.region = string_field(candidate, "region");
  return f;
}

Json to_json(const RetrofitFeatures& f) {
  Json j;
  j["building_total_area"] = f.building_total_area;
  j["above_ground_floors"] = f.above_ground_floors;
  j["energy_consumption_before"] = f.energy_consumption_before;
  j["initial_energy_class"] = f.initial_energy_class.label_string();
  j["energy_class_after"] = f.energy_class_after.label_string();
  return j;
}

Json to_json(const PvFeatures& f) {
  Json j;
  j["average_electricity_price"] = f.average_electricity_price;
  j["average_monthly_consumption_before"] = f.average_monthly_consumption_before;
  j["installation_cost"] = f.installation_cost;
  j["current_inverter_set_power"] = f.current_inverter_set_power;
  j["planned_inverter_set_power"] = f.planned_inverter_set_power;
  j["average_energy_generated"] =
      f.average_energy_generated ? Json(*f.average_energy_generated) : Json(nullptr);
  j["region"] = f.region;
  return j;
}

Json to_json(const RetrofitTargets& t) {
  Json j;
  const auto values = t.values();
  for (std::size_t i = 0; i < values.size(); ++i) j[std::string(kRetrofitTargetNames[i])] = values[i];
  return j;
}

Json to_json(const PvTargets& t) {
  Json j;
  const auto values = t.values();
  for (std::size_t i = 0; i < values.size(); ++i) j[std::string(kPvTargetNames[i])] = values[i];
  return j;
}

}  // namespace ai4ef::domain
