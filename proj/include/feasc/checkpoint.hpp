#pragma once

// Checkpoint container: "FEASCKPT" magic, a u64 header length, a JSON header
// (schema tag, model specs, training position, tensor index), then raw
// little-endian float64 tensor data in index order.

#include <cstdint>
#include <stdexcept>
#include <string>

#include "feasc/frameworks.hpp"
#include "feasc/optim.hpp"

namespace feasc {

inline constexpr const char* kCheckpointSchema = "feasc-checkpoint/1";

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CheckpointMeta {
  Framework framework = Framework::simsiam;
  EncoderSpec encoder;
  HeadSpec head;
  int epoch = 0;
  long step = 0;
  std::string config_json;  // resolved training config, verbatim
};

struct CheckpointWriteOptions {
  /// Fails the write once this many bytes have gone out (0 = unlimited).
  /// Stands in for a full disk in tests.
  std::size_t byte_budget = 0;
};

/// Writes to a sibling temporary file and renames it into place. On any
/// failure the temporary file is removed and CheckpointError is thrown.
void save_checkpoint(const std::string& path, const SiameseModel& model, const CheckpointMeta& meta,
                     const Sgd* optimizer = nullptr, const CheckpointWriteOptions& options = {});

CheckpointMeta read_checkpoint_meta(const std::string& path);

/// Restores the full model.
SiameseModel load_checkpoint(const std::string& path, CheckpointMeta* meta = nullptr);

/// Restores momentum buffers saved alongside the model.
void load_optimizer_state(const std::string& path, Sgd& optimizer);

/// Encoder weights only.
Sequential load_backbone(const std::string& path, EncoderSpec* spec = nullptr);

}  // namespace feasc
