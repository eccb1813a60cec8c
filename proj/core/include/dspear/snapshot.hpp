#pragma once

#include <filesystem>
#include <iosfwd>

#include "dspear/neuralnet.hpp"
#include "dspear/replay.hpp"

namespace dspear {

/// Binary containers for test fixtures and trained policies. Layout is in
/// docs/formats.md. All integers are little-endian uint32/uint64, all reals
/// little-endian IEEE-754 float64.
inline constexpr char kBufferMagic[4] = {'D', 'S', 'R', 'B'};
inline constexpr char kNetMagic[4] = {'D', 'S', 'N', 'N'};
inline constexpr std::uint32_t kSnapshotVersion = 1;

void write_buffer(std::ostream& out, const ReplayBuffer& buffer);
/// The restored buffer gets a fresh RNG stream seeded with `seed`.
ReplayBuffer read_buffer(std::istream& in, std::uint64_t seed = 0);

void save_buffer(const std::filesystem::path& path, const ReplayBuffer& buffer);
ReplayBuffer load_buffer(const std::filesystem::path& path, std::uint64_t seed = 0);

void write_net(std::ostream& out, const DenseNet& net);
DenseNet read_net(std::istream& in);

void save_net(const std::filesystem::path& path, const DenseNet& net);
DenseNet load_net(const std::filesystem::path& path);

}  // namespace dspear
