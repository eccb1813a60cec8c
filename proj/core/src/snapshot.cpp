#include "dspear/snapshot.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "dspear/errors.hpp"

namespace dspear {
namespace {

template <typename U>
void put_le(std::ostream& out, U value) {
  unsigned char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<unsigned char>(value >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <typename U>
U get_le(std::istream& in) {
  unsigned char bytes[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(U))) throw IoError("snapshot truncated");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

void put_array(std::ostream& out, std::span<const double> values) {
  put_le<std::uint64_t>(out, values.size());
  for (double v : values) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
}

std::vector<double> get_array(std::istream& in, std::uint64_t expected) {
  const auto n = get_le<std::uint64_t>(in);
  if (n != expected) {
    throw IoError("snapshot array has " + std::to_string(n) + " values, header implies " +
                  std::to_string(expected));
  }
  std::vector<double> values(n);
  for (auto& v : values) v = std::bit_cast<double>(get_le<std::uint64_t>(in));
  return values;
}

void check_header(std::istream& in, const char (&magic)[4], const char* what) {
  char got[4];
  if (!in.read(got, 4) || std::memcmp(got, magic, 4) != 0) {
    throw IoError(std::string("not a ") + what + " file (bad magic)");
  }
  const auto version = get_le<std::uint32_t>(in);
  if (version != kSnapshotVersion) {
    throw IoError(std::string("unsupported ") + what + " version " + std::to_string(version));
  }
}

}  // namespace

void write_buffer(std::ostream& out, const ReplayBuffer& buffer) {
  out.write(kBufferMagic, 4);
  put_le<std::uint32_t>(out, kSnapshotVersion);
  put_le<std::uint64_t>(out, buffer.capacity());
  put_le<std::uint64_t>(out, buffer.state_dim());
  put_le<std::uint64_t>(out, buffer.action_dim());
  put_le<std::uint64_t>(out, buffer.size());
  put_le<std::uint64_t>(out, buffer.cursor());
  put_array(out, buffer.raw_states());
  put_array(out, buffer.raw_actions());
  put_array(out, buffer.raw_rewards());
  put_array(out, buffer.raw_next_states());
  put_array(out, buffer.raw_dones());
  put_array(out, buffer.priorities());
  if (!out) throw IoError("failed writing buffer snapshot");
}

ReplayBuffer read_buffer(std::istream& in, std::uint64_t seed) {
  check_header(in, kBufferMagic, "replay buffer snapshot");
  const auto capacity = get_le<std::uint64_t>(in);
  const auto sdim = get_le<std::uint64_t>(in);
  const auto adim = get_le<std::uint64_t>(in);
  const auto size = get_le<std::uint64_t>(in);
  const auto cursor = get_le<std::uint64_t>(in);
  if (capacity == 0 || sdim == 0 || adim == 0 || size > capacity) {
    throw IoError("replay buffer snapshot header is inconsistent");
  }
  auto states = get_array(in, size * sdim);
  auto actions = get_array(in, size * adim);
  auto rewards = get_array(in, size);
  auto next_states = get_array(in, size * sdim);
  auto dones = get_array(in, size);
  auto priorities = get_array(in, size);
  try {
    return ReplayBuffer::from_raw(capacity, sdim, adim, cursor, std::move(states), std::move(actions),
                                  std::move(rewards), std::move(next_states), std::move(dones),
                                  std::move(priorities), seed);
  } catch (const Error& e) {
    throw IoError(std::string("corrupt replay buffer snapshot: ") + e.what());
  }
}

void save_buffer(const std::filesystem::path& path, const ReplayBuffer& buffer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_buffer(out, buffer);
}

ReplayBuffer load_buffer(const std::filesystem::path& path, std::uint64_t seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_buffer(in, seed);
}

void write_net(std::ostream& out, const DenseNet& net) {
  out.write(kNetMagic, 4);
  put_le<std::uint32_t>(out, kSnapshotVersion);
  const auto widths = net.widths();
  put_le<std::uint64_t>(out, widths.size());
  for (auto w : widths) put_le<std::uint64_t>(out, w);
  put_array(out, net.params());
  if (!out) throw IoError("failed writing network file");
}

DenseNet read_net(std::istream& in) {
  check_header(in, kNetMagic, "network");
  const auto count = get_le<std::uint64_t>(in);
  if (count < 2 || count > 64) throw IoError("network file declares an implausible layer count");
  std::vector<std::size_t> widths(count);
  for (auto& w : widths) w = get_le<std::uint64_t>(in);
  DenseNet net;
  try {
    net = DenseNet(widths);
  } catch (const Error& e) {
    throw IoError(std::string("corrupt network file: ") + e.what());
  }
  auto params = get_array(in, net.num_params());
  std::copy(params.begin(), params.end(), net.params().begin());
  return net;
}

void save_net(const std::filesystem::path& path, const DenseNet& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_net(out, net);
}

DenseNet load_net(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_net(in);
}

}  // namespace dspear
