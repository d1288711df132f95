#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hgan_tsa/core/io.hpp"
#include "hgan_tsa/nn/tensor.hpp"

namespace hgan_tsa::nn {

// Parameter file, version 1, little-endian:
//   "HGTP"  u32 version  u32 tensor_count
//   tensor_count x { u16 name_len, name bytes, u32 rows, u32 cols }
//   payload: every tensor in header order, row-major f64
inline constexpr std::uint32_t kParameterFormatVersion = 1;

template <ParameterSet P>
std::vector<std::uint8_t> serialize_parameters(const P& params) {
  std::vector<std::pair<std::string, const Matrix*>> tensors;
  params.visit([&](std::string_view name, const Matrix& m) { tensors.emplace_back(std::string(name), &m); });
  ByteWriter w;
  w.tag("HGTP");
  w.u32(kParameterFormatVersion);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, m] : tensors) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(m->rows()));
    w.u32(static_cast<std::uint32_t>(m->cols()));
  }
  for (const auto& [name, m] : tensors)
    for (Eigen::Index r = 0; r < m->rows(); ++r)
      for (Eigen::Index c = 0; c < m->cols(); ++c) w.f64((*m)(r, c));
  return w.bytes();
}

/// Loads values into an already-shaped parameter set. Names and shapes in
/// the file must match `params` exactly.
template <ParameterSet P>
void deserialize_parameters(P& params, std::span<const std::uint8_t> bytes, const std::string& source = "parameters") {
  ByteReader r(bytes, source);
  r.expect_tag("HGTP");
  if (const auto v = r.u32(); v != kParameterFormatVersion)
    throw IoError(source + ": unsupported parameter format version " + std::to_string(v));
  const auto count = r.u32();
  struct Entry {
    std::string name;
    std::uint32_t rows, cols;
  };
  std::vector<Entry> header;
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    e.name = r.str();
    e.rows = r.u32();
    e.cols = r.u32();
    header.push_back(std::move(e));
  }
  std::size_t i = 0;
  params.visit([&](std::string_view name, Matrix& m) {
    if (i >= header.size()) throw IoError(source + ": missing tensor '" + std::string(name) + "'");
    const auto& e = header[i++];
    if (e.name != name || e.rows != m.rows() || e.cols != m.cols())
      throw IoError(source + ": tensor '" + e.name + "' " + std::to_string(e.rows) + "x" + std::to_string(e.cols) +
                    " does not match expected '" + std::string(name) + "' " + std::to_string(m.rows()) + "x" +
                    std::to_string(m.cols()));
  });
  if (i != header.size()) throw IoError(source + ": unexpected extra tensors");
  params.visit([&](std::string_view, Matrix& m) {
    for (Eigen::Index rr = 0; rr < m.rows(); ++rr)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(rr, c) = r.f64();
  });
  if (!r.at_end()) throw IoError(source + ": trailing bytes");
}

}  // namespace hgan_tsa::nn
