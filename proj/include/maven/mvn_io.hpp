#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "maven/gradcheck.hpp"
#include "maven/tensor.hpp"

// MVN1 tensor files:
//   bytes 0..3  "MVN1"
//   u8          dtype tag (0 = f64)
//   u8          ndim
//   ndim x u32  extents, little-endian
//   payload     row-major f64, little-endian
//
// Checkpoint archives ("MVNA") bundle named MVN1 blobs:
//   bytes 0..3  "MVNA"
//   u32         manifest length in bytes, little-endian
//   manifest    JSON {"format":"MVNA","version":1,
//                     "tensors":[{"name":..,"offset":..,"size":..},..]}
//   payload     concatenated MVN1 blobs; offsets are relative to the first
//               payload byte
namespace maven::io {

void write_tensor(std::ostream& out, const Tensor& t);
// source names the stream in error messages. Malformed headers raise
// ShapeMismatch naming the source.
Tensor read_tensor(std::istream& in, const std::string& source);

std::string encode_tensor(const Tensor& t);
Tensor decode_tensor(const std::string& bytes, const std::string& source);

void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

void save_archive(const std::string& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_archive(const std::string& path);

}  // namespace maven::io
