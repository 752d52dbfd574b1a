#pragma once

#include <stdexcept>

#include "ai4ef/orchestrate.hpp"
#include "support.hpp"

namespace testing {

/// Trains the small fixture configs and deploys one model per service.
inline void deploy_fixture_models(ai4ef::orchestrate::Orchestrator& orch) {
  using namespace ai4ef::orchestrate;
  const auto train = [&](const ai4ef::Json& config) {
    const auto r = orch.wait(orch.launch(validate_run_config(config), {Step::Ingestion, Step::Training}));
    if (r.status != RunStatus::Succeeded) throw std::runtime_error("fixture training failed: " + r.error->message);
    return fs::path(r.train_dir) / "checkpoint";
  };
  orch.registry().deploy(Service::Retrofit, train(quick_retrofit_config()));
  orch.registry().deploy(Service::Pv, train(quick_pv_config()));
}

}  // namespace testing
