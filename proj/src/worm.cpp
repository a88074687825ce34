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

#include "cworm/worm.h"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <system_error>

namespace cworm {

namespace fs = std::filesystem;

namespace {

std::size_t point_count(const std::array<int, 3>& dims) {
  return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(dims[2]);
}

}  // namespace

void validate(const SolverState& s) {
  for (int d : s.dims)
    if (d < 1) throw std::invalid_argument("solver dims must be positive");
  if (s.field.size() != point_count(s.dims)) throw std::invalid_argument("field length does not match dims");
  if (!std::isfinite(s.alpha)) throw std::invalid_argument("alpha must be finite");
  for (double v : s.field)
    if (!std::isfinite(v)) throw std::invalid_argument("field contains a non-finite value");
}

SolverState make_initial_state(std::array<int, 3> dims, double alpha, std::string run_id, std::uint64_t seed) {
  SolverState s;
  s.dims = dims;
  s.alpha = alpha;
  s.run_id = std::move(run_id);
  for (int d : dims)
    if (d < 1) throw std::invalid_argument("solver dims must be positive");
  s.field.resize(point_count(dims));
  std::mt19937_64 rng(seed);
  for (double& v : s.field) v = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return s;
}

void step(SolverState& s) {
  const std::size_t nx = s.dims[0], ny = s.dims[1], nz = s.dims[2];
  const std::size_t sx = ny * nz, sy = nz;
  std::vector<double> next = s.field;
  const double* u = s.field.data();
  for (std::size_t x = 1; x + 1 < nx; ++x) {
    for (std::size_t y = 1; y + 1 < ny; ++y) {
      std::size_t row = x * sx + y * sy;
      for (std::size_t i = row + 1; i + 1 < row + nz; ++i) {
        double c = u[i];
        double lap = (u[i - sx] - c) + (u[i + sx] - c) + (u[i - sy] - c) + (u[i + sy] - c) + (u[i - 1] - c) +
                     (u[i + 1] - c);
        next[i] = c + s.alpha * lap;
      }
    }
  }
  s.field.swap(next);
  ++s.iteration;
}

void advance(SolverState& state, std::uint64_t steps) {
  for (std::uint64_t i = 0; i < steps; ++i) step(state);
}

std::int64_t iterations_for_quantum(const MachineSpec& machine, double quantum_seconds) {
  return static_cast<std::int64_t>(std::floor(quantum_seconds * machine.iter_rate_factor / (1.0 + machine.load)));
}

std::int64_t iterations_for_quantum(const Clique& clique, double quantum_seconds) {
  if (clique.members.size() == 1) return iterations_for_quantum(clique.members.front(), quantum_seconds);
  return static_cast<std::int64_t>(std::floor(quantum_seconds * clique_iteration_rate(clique)));
}

namespace {

std::int64_t run_for(SolverState& state, std::int64_t iterations, std::uint64_t limit) {
  if (state.iteration >= limit) return 0;
  auto n = std::min<std::uint64_t>(static_cast<std::uint64_t>(std::max<std::int64_t>(iterations, 0)),
                                   limit - state.iteration);
  advance(state, n);
  return static_cast<std::int64_t>(n);
}

}  // namespace

std::int64_t run_quantum(SolverState& state, const MachineSpec& machine, double quantum_seconds,
                         std::uint64_t iteration_limit) {
  if (!(quantum_seconds > 0)) throw std::invalid_argument("quantum must be positive");
  return run_for(state, iterations_for_quantum(machine, quantum_seconds), iteration_limit);
}

std::int64_t run_quantum(SolverState& state, const Clique& clique, double quantum_seconds,
                         std::uint64_t iteration_limit) {
  if (!(quantum_seconds > 0)) throw std::invalid_argument("quantum must be positive");
  return run_for(state, iterations_for_quantum(clique, quantum_seconds), iteration_limit);
}

// -- Checkpoints -------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'C', 'W', 'O', 'R', 'M', 'C', 'K', '\0'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_f64(std::vector<std::uint8_t>& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
  return v;
}
std::uint64_t get_u64(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[at + i]) << (8 * i);
  return v;
}
double get_f64(std::span<const std::uint8_t> b, std::size_t at) { return std::bit_cast<double>(get_u64(b, at)); }

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large payloads in chunks.
  std::size_t off = 0;
  while (off < bytes.size()) {
    auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
    crc = crc32(crc, bytes.data() + off, chunk);
    off += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const SolverState& state) {
  validate(state);
  const std::uint64_t payload = 8 * state.field.size();
  std::vector<std::uint8_t> out;
  out.reserve(kCheckpointFixedHeader + state.run_id.size() + payload + 4);
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u32(out, kCheckpointVersion);
  put_u32(out, 0);
  put_u64(out, state.iteration);
  for (int d : state.dims) put_u32(out, static_cast<std::uint32_t>(d));
  put_u32(out, static_cast<std::uint32_t>(state.run_id.size()));
  put_f64(out, state.alpha);
  put_u64(out, payload);
  out.insert(out.end(), state.run_id.begin(), state.run_id.end());
  std::size_t payload_start = out.size();
  for (double v : state.field) put_f64(out, v);
  put_u32(out, crc32_of(std::span(out).subspan(payload_start, payload)));
  return out;
}

SolverState decode_checkpoint(std::span<const std::uint8_t> b) {
  if (b.size() < kCheckpointFixedHeader + 4) throw CheckpointError("checkpoint truncated");
  if (std::memcmp(b.data(), kMagic, sizeof kMagic) != 0) throw CheckpointError("not a checkpoint (bad magic)");
  if (get_u32(b, 8) != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(get_u32(b, 8)));
  SolverState s;
  s.iteration = get_u64(b, 16);
  for (int i = 0; i < 3; ++i) {
    std::uint32_t d = get_u32(b, 24 + 4 * i);
    if (d == 0 || d > (1u << 20)) throw CheckpointError("checkpoint dims out of range");
    s.dims[i] = static_cast<int>(d);
  }
  std::uint32_t id_len = get_u32(b, 36);
  s.alpha = get_f64(b, 40);
  std::uint64_t payload = get_u64(b, 48);
  if (payload != 8 * point_count(s.dims)) throw CheckpointError("payload length does not match dims");
  if (b.size() != kCheckpointFixedHeader + id_len + payload + 4)
    throw CheckpointError("checkpoint size does not match header");
  s.run_id.assign(reinterpret_cast<const char*>(b.data() + kCheckpointFixedHeader), id_len);
  std::size_t start = kCheckpointFixedHeader + id_len;
  if (crc32_of(b.subspan(start, payload)) != get_u32(b, start + payload))
    throw CheckpointError("checkpoint checksum mismatch");
  s.field.resize(point_count(s.dims));
  for (std::size_t i = 0; i < s.field.size(); ++i) s.field[i] = get_f64(b, start + 8 * i);
  return s;
}

std::string checkpoint_filename(std::uint64_t iteration) { return "ckpt-" + std::to_string(iteration) + ".cwck"; }

CheckpointMeta write_checkpoint(const SolverState& state, const fs::path& destination, SimTime now) {
  std::vector<std::uint8_t> bytes = encode_checkpoint(state);
  std::error_code ec;
  if (destination.has_parent_path()) fs::create_directories(destination.parent_path(), ec);
  fs::path tmp = destination;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (out) out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      out.close();
      fs::remove(tmp, ec);
      throw CheckpointError("cannot write checkpoint " + destination.string());
    }
  }
  fs::rename(tmp, destination, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw CheckpointError("cannot move checkpoint into place at " + destination.string());
  }
  return CheckpointMeta{destination.string(), bytes.size(), now, state.iteration, state.run_id};
}

SolverState read_checkpoint(const fs::path& source) {
  std::ifstream in(source, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + source.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

BackupScheduler::BackupScheduler(fs::path directory, double interval_seconds, int retention, SimTime start)
    : directory_(std::move(directory)), interval_(interval_seconds), retention_(retention) {
  if (!(interval_seconds > 0)) throw std::invalid_argument("backup interval must be positive");
  if (retention < 1) throw std::invalid_argument("backup retention must be >= 1");
  last_boundary_ = static_cast<std::int64_t>(std::floor(start / interval_));
}

std::optional<CheckpointMeta> BackupScheduler::tick(const SolverState& state, SimTime now) {
  auto boundary = static_cast<std::int64_t>(std::floor(now / interval_));
  if (boundary <= last_boundary_) return std::nullopt;
  last_boundary_ = boundary;
  CheckpointMeta meta = write_checkpoint(state, directory_ / checkpoint_filename(state.iteration), now);
  if (!retained_.empty() && retained_.back().location == meta.location) retained_.pop_back();
  retained_.push_back(meta);
  while (retained_.size() > static_cast<std::size_t>(retention_)) {
    std::error_code ec;
    fs::remove(retained_.front().location, ec);
    retained_.pop_front();
  }
  return meta;
}

ResourceProfile profile_of(const SolverState& state) {
  ResourceProfile p;
  std::size_t n = state.field.size();
  // Two field buffers live at once during a sweep.
  p.memory_bytes_required = 2 * 8 * n;
  std::size_t interior = 1;
  for (int d : state.dims) interior *= static_cast<std::size_t>(std::max(d - 2, 0));
  // 6 subtractions, 5 additions, 1 multiply, 1 add per interior point.
  p.flops_per_iteration = 13.0 * static_cast<double>(interior);
  p.checkpoint_size_bytes = kCheckpointFixedHeader + state.run_id.size() + 8 * n + 4;
  p.io_pattern = "periodic-checkpoint";
  return p;
}

AnnounceResult announce(const std::string& run_id, const std::string& location, const AnnounceEndpoint& endpoint,
                        SimTime now, const RetryPolicy& policy) {
  AnnounceResult result;
  double backoff = policy.initial_backoff_seconds;
  SimTime at = now;
  for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
    result.attempts = attempt;
    try {
      result.accepted = endpoint(run_id, location, at);
      result.reached = true;
      result.completed_at = at;
      if (!result.accepted) result.log.push_back("announce of " + run_id + " rejected");
      return result;
    } catch (const EndpointUnavailable& e) {
      result.log.push_back("announce attempt " + std::to_string(attempt) + " failed: " + e.what());
      if (attempt < policy.max_attempts) {
        at += backoff;
        backoff *= policy.multiplier;
      }
    }
  }
  result.completed_at = at;
  return result;
}

}  // namespace cworm
