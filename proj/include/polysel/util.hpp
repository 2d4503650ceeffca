// Copyright 2026 The polysel Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Small shared helpers: content digests, deterministic randomness and a
// bounded parallel loop.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <semaphore>
#include <string>
#include <string_view>

namespace polysel {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// 64-bit digest of `data` (first eight bytes of its SHA-256).
std::uint64_t digest64(std::string_view data);

/// SplitMix64 finalizer; used to derive independent seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix64(std::uint64_t a, std::uint64_t b) noexcept {
  return mix64(a ^ mix64(b));
}

/// Deterministic generator whose output sequence depends only on its seed,
/// independent of the standard library implementation.
class DeterministicRng {
 public:
  explicit DeterministicRng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  /// Uniform in [0, 1).
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  /// Uniform integer in [0, bound). Precondition: bound > 0.
  std::size_t below(std::size_t bound) noexcept { return static_cast<std::size_t>(uniform() * static_cast<double>(bound)); }
  /// Standard normal via Box-Muller.
  double normal() noexcept;

 private:
  std::uint64_t state_;
};

/// Counting gate bounding the number of in-flight backend calls. A gate may
/// chain to a parent so one call holds both a per-backend and a global slot.
class CallGate {
 public:
  explicit CallGate(std::ptrdiff_t capacity, std::shared_ptr<CallGate> parent = nullptr);

  template <typename F>
  auto run(F&& fn) -> decltype(fn()) {
    Slot slot(*this);
    return fn();
  }

 private:
  struct Slot {
    explicit Slot(CallGate& gate);
    ~Slot();
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;
    CallGate& gate;
  };

  std::counting_semaphore<> semaphore_;
  std::shared_ptr<CallGate> parent_;
};

/// Current UTC time as "YYYY-MM-DDTHH:MM:SSZ".
std::string utc_timestamp();

/// Runs fn(i) for i in [0, count) on at most `max_parallel` threads. The
/// first exception (lowest index) is rethrown after all workers finish.
void parallel_for(std::size_t count, std::size_t max_parallel, const std::function<void(std::size_t)>& fn);

}  // namespace polysel
