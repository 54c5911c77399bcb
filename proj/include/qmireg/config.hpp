#pragma once

// Training configuration files: one `key = value` per line, `#` starts a
// comment. Unknown keys are rejected. Keys and defaults:
//
//   variant          rf32        rf32 | rf64
//   loss             hinge       hinge | ce
//   eta              0.001       weight of J_MI in [0,1]
//   regularizer      on          on | off (off removes the J_MI gradient path)
//   mi_scope         minibatch   minibatch | dataset
//   batch_size       256
//   epochs           100
//   lr_initial       0.001
//   lr_final         0.0001
//   lr_drop_fraction 0.8         share of epochs before the single lr drop
//   momentum         0.9
//   seed             0

#include <string>

#include "qmireg/trainer.hpp"

namespace qmireg::config {

/// Applies the assignments in `text` on top of `base`. Throws InvalidConfig
/// naming the offending line.
train::TrainConfig parse_config(const std::string& text, train::TrainConfig base = {});

/// Normalized form: every key, in the order listed above.
std::string config_text(const train::TrainConfig& config);

/// Applies a single assignment.
void set_option(train::TrainConfig& config, const std::string& key, const std::string& value);

} // namespace qmireg::config
