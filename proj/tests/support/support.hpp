#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

#include "ai4ef/domain.hpp"

namespace testing {

namespace fs = std::filesystem;

inline fs::path data_dir() { return AI4EF_TEST_DATA_DIR; }

/// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("ai4ef-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::permissions(path_, fs::perms::owner_all, fs::perm_options::add, ec);
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream(path, std::ios::binary) << text;
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

inline ai4ef::Json retrofit_example() {
  return {{"building_total_area", 500},
          {"above_ground_floors", 2},
          {"energy_consumption_before", 30},
          {"initial_energy_class", "E"},
          {"energy_class_after", "B"}};
}

inline ai4ef::Json pv_example() {
  return {{"average_electricity_price", 0.3},
          {"average_monthly_consumption_before", 1500},
          {"installation_cost", 5000},
          {"current_inverter_set_power", 0},
          {"planned_inverter_set_power", 2},
          {"region", "Riga"}};
}

/// Small, fast classifier run config over the bundled retrofit fixture.
inline ai4ef::Json quick_retrofit_config() {
  return {{"input_filepath", (data_dir() / "retrofit_fixture.csv").string()},
          {"feature_cols", {"building_total_area", "above_ground_floors", "energy_consumption_before",
                            "initial_energy_class", "energy_class_after"}},
          {"target_cols", {"carrying_out_construction_works", "reconstruction_of_engineering_systems",
                           "heat_installation", "water_heating_system"}},
          {"mlClass", "Classifier"},
          {"batch_size", {32}},
          {"n_layers", {2, 2}},
          {"layer_sizes", {16, 32}},
          {"max_epochs", 3},
          {"n_trials", 2}};
}

inline ai4ef::Json quick_pv_config() {
  return {{"input_filepath", (data_dir() / "pv_fixture.csv").string()},
          {"feature_cols", {"average_electricity_price", "average_monthly_consumption_before",
                            "installation_cost", "current_inverter_set_power", "planned_inverter_set_power",
                            "average_energy_generated", "region"}},
          {"target_cols", {"electricity_produced", "primary_energy_consumption_after",
                           "reduction_of_primary_energy", "co2_emissions_reduction",
                           "expected_annual_self_consumption", "annual_financial_savings", "payback_period"}},
          {"mlClass", "Regressor"},
          {"batch_size", {32}},
          {"n_layers", {2, 2}},
          {"layer_sizes", {16, 32}},
          {"max_epochs", 3},
          {"n_trials", 2}};
}

}  // namespace testing
