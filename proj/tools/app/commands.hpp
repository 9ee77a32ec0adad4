#pragma once

#include <iosfwd>

#include "run_config.hpp"

namespace curvemps::app {

// Each command writes its artifacts and the effective config into config.out_dir
// and a short summary to `log`. Errors propagate as ConfigError / NumericalError.
void cmd_map(const RunConfig& config, std::ostream& log);
void cmd_ground(const RunConfig& config, std::ostream& log);
void cmd_ed(const RunConfig& config, std::ostream& log);
void cmd_bench(const RunConfig& config, std::ostream& log);

}  // namespace curvemps::app
