#ifndef TREEAMP_EXPERIMENTS_INTERNAL_HPP
#define TREEAMP_EXPERIMENTS_INTERNAL_HPP

#include "treeamp/experiments.hpp"

#include <string>
#include <vector>

namespace treeamp {

// One (grid point, instance) unit of work of a config run.
struct TaskOutput {
    SweepRow row;
    json detail = json::object();
    std::vector<SweepDiagnostics> diag;
    std::vector<std::vector<double>> traj;
    int status = kExitOk;
    std::string error;
};

TaskOutput run_task(const ExperimentConfig &cfg, int gi, int inst);

// Replaces each linear channel's SE spectrum by Marchenko-Pastur of the same shape.
FactorGraph with_mp_spectra(const FactorGraph &g);

bool is_config_error(const std::exception &e);

} // namespace treeamp

#endif
