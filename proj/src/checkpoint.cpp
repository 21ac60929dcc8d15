#include "vnav/binary_io.hpp"
#include "vnav/tinynn.hpp"

#include <fstream>

namespace vnav::nn {

void write_checkpoint(std::ostream& out, const Network<double>& net) {
  out.write("VNNN", 4);
  binary::write_le<std::uint8_t>(out, kCheckpointVersion);
  binary::write_string(out, net.descriptor());
  const auto params = net.parameters();
  binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    binary::write_string(out, p.name);
    binary::write_le<std::uint32_t>(out, 2);
    binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.value->rows()));
    binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.value->cols()));
    for (Index r = 0; r < p.value->rows(); ++r)
      for (Index c = 0; c < p.value->cols(); ++c) binary::write_le<double>(out, (*p.value)(r, c));
  }
}

void save_checkpoint(const std::filesystem::path& path, const Network<double>& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  write_checkpoint(out, net);
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

Network<double> read_checkpoint(std::istream& in) {
  try {
    char magic[4];
    if (!in.read(magic, 4) || std::string(magic, 4) != "VNNN")
      throw CheckpointError("corrupt checkpoint: bad magic");
    const auto version = binary::read_le<std::uint8_t>(in);
    if (version != kCheckpointVersion)
      throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    const std::string descriptor = binary::read_string(in);
    Network<double> net;
    try {
      net = Network<double>(descriptor, 0);
    } catch (const ArchitectureError& e) {
      throw CheckpointError(std::string("corrupt checkpoint: ") + e.what());
    }
    auto params = net.parameters();
    const auto count = binary::read_le<std::uint32_t>(in);
    if (count != params.size()) throw CheckpointError("corrupt checkpoint: parameter count mismatch");
    for (auto& p : params) {
      const std::string name = binary::read_string(in, 1024);
      if (name != p.name) throw CheckpointError("corrupt checkpoint: unexpected parameter " + name);
      const auto rank = binary::read_le<std::uint32_t>(in);
      if (rank != 2) throw CheckpointError("corrupt checkpoint: unexpected rank for " + name);
      const auto rows = binary::read_le<std::uint32_t>(in);
      const auto cols = binary::read_le<std::uint32_t>(in);
      if (rows != p.value->rows() || cols != p.value->cols())
        throw CheckpointError("corrupt checkpoint: shape mismatch for " + name);
      for (Index r = 0; r < p.value->rows(); ++r)
        for (Index c = 0; c < p.value->cols(); ++c) (*p.value)(r, c) = binary::read_le<double>(in);
    }
    return net;
  } catch (const CheckpointError&) {
    throw;
  } catch (const binary::TruncatedInput&) {
    throw CheckpointError("corrupt checkpoint: truncated");
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint: ") + e.what());
  }
}

Network<double> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

Network<double> load_checkpoint(const std::filesystem::path& path, std::string_view expected_descriptor) {
  Network<double> net = load_checkpoint(path);
  const Network<double> expected(expected_descriptor, 0);
  if (net.descriptor() != expected.descriptor())
    throw CheckpointError("checkpoint architecture '" + net.descriptor() + "' does not match expected '" +
                          expected.descriptor() + "'");
  return net;
}

std::uint64_t parameter_hash(const Network<double>& net) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  mix(net.descriptor().data(), net.descriptor().size());
  for (const auto& p : net.parameters()) mix(p.value->data(), sizeof(double) * static_cast<std::size_t>(p.value->size()));
  return h;
}

}  // namespace vnav::nn
