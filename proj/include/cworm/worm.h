// Copyright 2026 The Cactus Worm Testbed Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// The migrating application: a deterministic 3-D heat-equation solver with
// portable checkpoints, periodic backups and a migration client.

#ifndef CWORM_WORM_H_
#define CWORM_WORM_H_

#include <array>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cworm/resources.h"

namespace cworm {

struct SolverState {
  std::array<int, 3> dims{1, 1, 1};
  // Row-major, z fastest.
  std::vector<double> field;
  std::uint64_t iteration = 0;
  double alpha = 0.0;
  std::string run_id;

  friend bool operator==(const SolverState&, const SolverState&) = default;
};

// Throws std::invalid_argument.
void validate(const SolverState& state);

// Field filled from a 64-bit Mersenne Twister seeded with `seed`; values are
// the top 53 bits scaled into [0, 1), so the field is the same everywhere.
SolverState make_initial_state(std::array<int, 3> dims, double alpha, std::string run_id, std::uint64_t seed);

// One Jacobi sweep: interior points move by alpha times the sum of their six
// neighbour differences, boundary points stay fixed.
void step(SolverState& state);
void advance(SolverState& state, std::uint64_t steps);

// floor(quantum * iter_rate_factor / (1 + load)).
std::int64_t iterations_for_quantum(const MachineSpec& machine, double quantum_seconds);
// floor(quantum * clique_iteration_rate(clique)); equals the machine form for
// a single-member clique.
std::int64_t iterations_for_quantum(const Clique& clique, double quantum_seconds);

// Steps the solver for one quantum, stopping early at `iteration_limit`.
// Returns the iterations completed.
std::int64_t run_quantum(SolverState& state, const MachineSpec& machine, double quantum_seconds,
                         std::uint64_t iteration_limit = UINT64_MAX);
std::int64_t run_quantum(SolverState& state, const Clique& clique, double quantum_seconds,
                         std::uint64_t iteration_limit = UINT64_MAX);

// -- Checkpoints -------------------------------------------------------------------
//
// Byte layout (all integers little-endian, doubles IEEE-754 binary64 LE):
//
//   offset  size  field
//        0     8  magic "CWORMCK\0"
//        8     4  format version (1)
//       12     4  reserved, zero
//       16     8  iteration
//       24     4  dims[0]
//       28     4  dims[1]
//       32     4  dims[2]
//       36     4  run id length L
//       40     8  alpha
//       48     8  payload length N = 8 * dims[0] * dims[1] * dims[2]
//       56     L  run id, UTF-8
//   56 + L     N  field values, row-major
//   56+L+N     4  CRC-32 (IEEE 802.3) of the payload bytes
//
// Total size 60 + L + N.

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::size_t kCheckpointFixedHeader = 56;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> encode_checkpoint(const SolverState& state);
SolverState decode_checkpoint(std::span<const std::uint8_t> bytes);

struct CheckpointMeta {
  std::string location;
  std::uint64_t size_bytes = 0;
  SimTime written_at = 0;
  std::uint64_t iteration = 0;
  std::string run_id;

  friend bool operator==(const CheckpointMeta&, const CheckpointMeta&) = default;
};

// "ckpt-<iteration>.cwck"
std::string checkpoint_filename(std::uint64_t iteration);

// Writes atomically (temporary file + rename); no partial file survives a
// failure. Throws CheckpointError.
CheckpointMeta write_checkpoint(const SolverState& state, const std::filesystem::path& destination, SimTime now);
SolverState read_checkpoint(const std::filesystem::path& source);

// Writes a backup into `<dir>/ckpt-<iteration>.cwck` whenever the clock
// crosses a multiple of the interval, keeping the newest `retention` files.
class BackupScheduler {
 public:
  BackupScheduler(std::filesystem::path directory, double interval_seconds, int retention, SimTime start);

  std::optional<CheckpointMeta> tick(const SolverState& state, SimTime now);
  const std::deque<CheckpointMeta>& retained() const { return retained_; }
  std::optional<CheckpointMeta> latest() const {
    return retained_.empty() ? std::nullopt : std::optional(retained_.back());
  }
  const std::filesystem::path& directory() const { return directory_; }

 private:
  std::filesystem::path directory_;
  double interval_;
  int retention_;
  std::int64_t last_boundary_;
  std::deque<CheckpointMeta> retained_;
};

struct ResourceProfile {
  std::uint64_t memory_bytes_required = 0;
  double flops_per_iteration = 0;
  std::uint64_t checkpoint_size_bytes = 0;
  std::string io_pattern;

  friend bool operator==(const ResourceProfile&, const ResourceProfile&) = default;
};

ResourceProfile profile_of(const SolverState& state);

// -- Announcing ----------------------------------------------------------------------

class EndpointUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Returns false when the service rejects the run; throws EndpointUnavailable
// when it cannot be reached.
using AnnounceEndpoint = std::function<bool(const std::string& run_id, const std::string& location, SimTime at)>;

struct RetryPolicy {
  int max_attempts = 5;
  double initial_backoff_seconds = 1.0;
  double multiplier = 2.0;
};

struct AnnounceResult {
  bool accepted = false;
  bool reached = false;
  int attempts = 0;
  SimTime completed_at = 0;
  std::vector<std::string> log;
};

// Announces the restarted run, backing off exponentially on the simulated
// clock while the endpoint is unreachable.
AnnounceResult announce(const std::string& run_id, const std::string& location, const AnnounceEndpoint& endpoint,
                        SimTime now, const RetryPolicy& policy = {});

}  // namespace cworm

#endif  // CWORM_WORM_H_
